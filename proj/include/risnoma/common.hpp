#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace rn {

using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using cd = std::complex<double>;

/// Runtime / numerical failure (CLI exit code 2).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Usage / configuration failure (CLI exit code 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic RNG. Distributions are hand-rolled on top of the raw
// 64-bit stream so the byte-level output does not depend on the standard
// library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : s_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (s_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + int(next_u64() % std::uint64_t(hi - lo + 1));
  }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Circularly symmetric complex normal with E|z|^2 = 1.
  cd cnormal() { return cd(normal(), normal()) * M_SQRT1_2; }

 private:
  std::uint64_t s_;
};

/// Stream derivation: independent seed for substream `k` of `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t k) {
  Rng r(master ^ (0xd1342543de82ef95ull * (k + 1)));
  return r.next_u64();
}

}  // namespace rn
