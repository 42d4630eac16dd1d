#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace compdiff::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Disjoint stream families. Values are part of the seeding rule below; do not renumber.
enum class Purpose : std::uint64_t {
  kGradNoise = 1,  // stochastic-gradient noise / minibatch draws
  kInit = 2,       // iterate initialization
  kTopology = 3,   // graph and cross-link sampling
  kShifts = 4,     // per-agent cost shifts / data jitter
  kEval = 5,       // evaluation batches for recorded metrics
};

// Seeding rule: fold (run, agent, iter, purpose) into the master seed by
// alternating an odd-constant offset with the splitmix64 finalizer. One level
// per field, so streams for distinct tuples are unrelated.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t run, std::uint64_t agent,
                                 std::uint64_t iter, Purpose purpose) {
  std::uint64_t s = master;
  s = mix64(s + kGolden * (run + 1));
  s = mix64(s + kGolden * (agent + 1));
  s = mix64(s + kGolden * (iter + 1));
  s = mix64(s + kGolden * static_cast<std::uint64_t>(purpose));
  return s;
}

// Small counter-based generator (splitmix64). Cheap to construct, so every
// (run, agent, iteration) tuple gets its own stream and any draw can be
// regenerated later from indices alone.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  // Uniform in [0, 1), 53 bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log argument.
  double next_double_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Box-Muller with a cached spare; two uniforms per pair of normals.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_double_open();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace compdiff::rng
