#include "shmkb/region.hpp"

#include <sys/mman.h>

#include <algorithm>
#include <utility>

#include "shmkb/error.hpp"

namespace shmkb {
namespace {

std::byte* map_anonymous(std::size_t bytes) {
  void* p = ::mmap(nullptr, bytes, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
  if (p == MAP_FAILED) throw CapacityError("mmap of " + std::to_string(bytes) + " bytes failed");
  return static_cast<std::byte*>(p);
}

std::size_t round_up(std::size_t n, std::size_t a) { return (n + a - 1) / a * a; }

}  // namespace

Region::Region(std::size_t initial_bytes, std::size_t cap_bytes) : cap_(cap_bytes) {
  mapped_ = round_up(std::max<std::size_t>(initial_bytes, 4096), 4096);
  if (mapped_ > cap_) mapped_ = round_up(cap_, 4096);
  base_ = map_anonymous(mapped_);
}

Region::~Region() { release(); }

Region::Region(Region&& other) noexcept
    : base_(std::exchange(other.base_, nullptr)),
      mapped_(std::exchange(other.mapped_, 0)),
      used_(std::exchange(other.used_, 0)),
      cap_(other.cap_) {}

Region& Region::operator=(Region&& other) noexcept {
  if (this != &other) {
    release();
    base_ = std::exchange(other.base_, nullptr);
    mapped_ = std::exchange(other.mapped_, 0);
    used_ = std::exchange(other.used_, 0);
    cap_ = other.cap_;
  }
  return *this;
}

void Region::release() {
  if (base_ != nullptr) ::munmap(base_, mapped_);
  base_ = nullptr;
}

void Region::grow_to(std::size_t min_bytes) {
  if (min_bytes > cap_) {
    throw CapacityError("arena cap of " + std::to_string(cap_) + " bytes exceeded");
  }
  std::size_t next = mapped_;
  while (next < min_bytes) next *= 2;
  next = std::min(round_up(next, 4096), round_up(cap_, 4096));
  std::byte* fresh = map_anonymous(next);
  std::memcpy(fresh, base_, used_);
  release();
  base_ = fresh;
  mapped_ = next;
}

std::uint64_t Region::allocate(std::size_t bytes) {
  const std::size_t size = round_up(bytes, kAlignment);
  if (used_ + size > mapped_) grow_to(used_ + size);
  const std::uint64_t offset = used_;
  std::memset(base_ + offset, 0, size);
  used_ += size;
  return offset;
}

void Region::assign(std::span<const std::byte> bytes) {
  if (bytes.size() > mapped_) grow_to(bytes.size());
  std::memcpy(base_, bytes.data(), bytes.size());
  used_ = bytes.size();
}

}  // namespace shmkb
