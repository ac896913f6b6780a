#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace patrec {

/// Deterministic random source. The same seed always produces the same
/// stream within one build; instances are single-owner and must not be
/// shared across threads.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// One standard normal draw.
  double gaussian() { return normal_(engine_); }

  /// n i.i.d. standard normal draws.
  std::vector<double> gaussians(std::size_t n) {
    std::vector<double> out(n);
    for (double& v : out) v = normal_(engine_);
    return out;
  }

  /// Uniform in [0, 1).
  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t uniform_index(std::uint64_t bound) {
    return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(engine_);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace patrec
