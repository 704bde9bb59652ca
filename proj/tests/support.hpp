#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "kamtori/dynamics.hpp"

namespace kt {

inline constexpr double kPi = std::numbers::pi;

// Seeded generator for property tests; every test picks its own seed so
// failures reproduce in isolation.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  long long integer(long long a, long long b) {
    return std::uniform_int_distribution<long long>(a, b)(rng_);
  }

  std::vector<double> vec(std::size_t n, double a, double b) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(a, b);
    return v;
  }

  kamtori::PhaseState state(std::size_t n, double a, double b) {
    auto p = vec(n, a, b);
    auto q = vec(n, a, b);
    return {std::move(p), std::move(q)};
  }

 private:
  std::mt19937_64 rng_;
};

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace kt
