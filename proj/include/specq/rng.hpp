#pragma once

#include <cstdint>

namespace specq {

// Counter-based random stream. A stream is keyed by (seed, id, tag); the same
// key always yields the same variate sequence, independent of any other stream.
// This lets schemes share common random numbers per job: give every scheme the
// same seed and draw each quantity (interarrival gap, X, first size, ...) from
// the stream keyed by the job id and that quantity's tag.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t id, std::uint64_t tag) noexcept
      : state_(mix(mix(mix(seed + GOLDEN) ^ id) ^ tag)) {}

  std::uint64_t next_u64() noexcept {
    state_ += GOLDEN;
    return mix(state_);
  }

  // Uniform on the open interval (0, 1); never returns 0 or 1, so log/division
  // transforms are safe.
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  static constexpr std::uint64_t GOLDEN = 0x9E3779B97F4A7C15ull;

  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

// Stable tags for the quantities a simulated job draws. Replica k of a
// replication scheme uses kReplicaSize + k.
namespace rng_tag {
inline constexpr std::uint64_t kInterarrival = 1;
inline constexpr std::uint64_t kDispatch = 2;
inline constexpr std::uint64_t kReroute = 3;
inline constexpr std::uint64_t kSharedX = 4;
inline constexpr std::uint64_t kFirstSize = 5;
inline constexpr std::uint64_t kRetrySize = 6;
inline constexpr std::uint64_t kTieBreak = 7;
inline constexpr std::uint64_t kQueuePick = 8;
inline constexpr std::uint64_t kReplicaSize = 16;
}  // namespace rng_tag

}  // namespace specq
