#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tvisvar {

/// Owned random stream for one chain. Wraps a 64-bit Mersenne twister and
/// keeps the distribution objects alive so that cached normal variates are
/// not thrown away between calls.
class Rng {
 public:
  using Engine = std::mt19937_64;

  explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}

  /// Independent stream for chain `stream` of a run seeded with `seed`.
  static Rng for_stream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream & 0xffffffffu),
                      static_cast<std::uint32_t>(stream >> 32), 0x7456u};
    Rng rng;
    rng.engine_.seed(seq);
    return rng;
  }

  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    double u;
    do {
      u = std::generate_canonical<double, 53>(engine_);
    } while (u <= 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Gamma with the given shape and scale (mean shape * scale).
  double gamma(double shape, double scale) {
    std::gamma_distribution<double> dist(shape, scale);
    return dist(engine_);
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  std::uint64_t next_u64() { return engine_(); }

  Engine& engine() { return engine_; }

 private:
  Engine engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace tvisvar
