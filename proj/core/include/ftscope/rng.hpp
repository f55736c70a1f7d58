#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ftscope {

/// Platform-independent random source. The engine is std::mt19937_64 (fully
/// specified by the standard); the distributions are implemented here because
/// the std:: distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p) { return uniform() < p; }

  /// Independent stream derived from this seed and a label.
  static Rng derive(std::uint64_t seed, std::string_view label);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t mix64(std::uint64_t x);

/// Deterministic value in [0, 1) from (id, seed); used for split membership.
double unit_hash(std::string_view id, std::uint64_t seed);

}  // namespace ftscope
