#pragma once

#include <string>
#include <string_view>

namespace shmkb::utf8 {

/// Decodes UTF-8, throwing DomainError on malformed input or surrogates.
std::u32string decode(std::string_view text);

std::string encode(std::u32string_view text);
void append(std::string& out, char32_t cp);

bool is_scalar(char32_t cp);

}  // namespace shmkb::utf8
