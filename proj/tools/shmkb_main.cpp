#include <iostream>

#include "shmkb/api.hpp"

int main(int argc, char** argv) { return shmkb::run_cli(argc, argv, std::cout, std::cerr, std::cin); }
