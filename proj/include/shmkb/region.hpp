#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>

namespace shmkb {

/// Growable memory-mapped byte region. Offsets handed out by allocate()
/// stay valid across growth; raw pointers do not.
class Region {
 public:
  static constexpr std::size_t kAlignment = 8;

  Region(std::size_t initial_bytes, std::size_t cap_bytes);
  ~Region();

  Region(Region&& other) noexcept;
  Region& operator=(Region&& other) noexcept;
  Region(const Region&) = delete;
  Region& operator=(const Region&) = delete;

  /// Reserves `bytes` (rounded up to 8) and returns the offset. Doubles the
  /// mapping when full; throws CapacityError past the cap.
  std::uint64_t allocate(std::size_t bytes);

  /// Replaces contents with `bytes` (used by load); `used` becomes bytes.size().
  void assign(std::span<const std::byte> bytes);

  std::byte* data() { return base_; }
  const std::byte* data() const { return base_; }
  std::size_t used() const { return used_; }
  std::size_t mapped() const { return mapped_; }
  std::size_t cap() const { return cap_; }

  template <typename T>
  T* at(std::uint64_t offset) {
    return reinterpret_cast<T*>(base_ + offset);
  }
  template <typename T>
  const T* at(std::uint64_t offset) const {
    return reinterpret_cast<const T*>(base_ + offset);
  }

 private:
  void grow_to(std::size_t min_bytes);
  void release();

  std::byte* base_ = nullptr;
  std::size_t mapped_ = 0;
  std::size_t used_ = 0;
  std::size_t cap_ = 0;
};

}  // namespace shmkb
