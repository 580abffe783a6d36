#pragma once

#include <array>
#include <cstdint>

namespace rwmlab {

// Counter-based random stream (Philox4x32-10). The 64-bit seed is the key and
// the 64-bit stream id occupies the upper half of the counter, so streams with
// distinct ids never overlap and any (seed, stream_id) pair reproduces the same
// draws regardless of which thread consumes it.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint64_t next_u64() noexcept;
  // Uniform on the open interval (0, 1).
  double uniform() noexcept;
  double normal() noexcept;
  double exponential(double rate) noexcept;

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

// Stream ids are namespaced so that different consumers of one seed (RWM
// replicas, diffusion replicas, identity checks, ...) never share a stream.
constexpr std::uint64_t stream_id(std::uint32_t purpose, std::uint32_t index) noexcept {
  return (static_cast<std::uint64_t>(purpose) << 32) | index;
}

namespace streams {
inline constexpr std::uint32_t kRwm = 1;
inline constexpr std::uint32_t kDiffusion = 2;
inline constexpr std::uint32_t kIdentity = 3;
inline constexpr std::uint32_t kEstimation = 4;
inline constexpr std::uint32_t kAuxiliary = 5;
}  // namespace streams

}  // namespace rwmlab
