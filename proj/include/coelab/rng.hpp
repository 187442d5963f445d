#pragma once

// Deterministic random generation for fixtures and simulation.  Every draw
// is specified here, so samples are reproducible across platforms:
//   engine      std::mt19937_64 (output sequence fixed by the standard)
//   uniform01   (next() >> 11) * 2^-53, in [0, 1)
//   exponential -log(1 - uniform01())
//   dirichlet   flat Dirichlet via normalized exponentials
//   normal      Box-Muller: sqrt(-2 log(1-u1)) * cos(2*pi*u2)
// std::uniform_real_distribution and friends are NOT used: the standard
// leaves their algorithms unspecified, which would tie fixtures to one
// library implementation.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "coelab/errors.hpp"

namespace coelab {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Inclusive range.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw ModelError("empty integer range");
    int span = hi - lo + 1;
    int v = lo + static_cast<int>(uniform01() * span);
    return v > hi ? hi : v;
  }

  double exponential() { return -std::log1p(-uniform01()); }

  std::vector<double> dirichlet(std::size_t k) {
    std::vector<double> w(k);
    double total = 0.0;
    for (double& v : w) {
      v = exponential();
      total += v;
    }
    if (total <= 0.0) {  // only if every draw was exactly zero
      for (double& v : w) v = 1.0 / static_cast<double>(k);
      return w;
    }
    for (double& v : w) v /= total;
    return w;
  }

  int categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw ModelError("negative categorical weight");
      total += w;
    }
    if (total <= 0.0) throw ModelError("categorical weights sum to zero");
    double u = uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log1p(-u1)) *
           std::cos(2.0 * 3.141592653589793 * u2);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace coelab
