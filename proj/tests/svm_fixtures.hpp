#pragma once

#include <cmath>
#include <random>

#include "leakdet/svm.hpp"
#include "oracles.hpp"

namespace fixtures {

// Two overlapping Gaussian clouds in the plane, labels -1/+1.
inline oracle::Problem2D random_problem(std::uint64_t seed, std::size_t n = 40, double C = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  oracle::Problem2D p;
  p.C = C;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = i % 2 == 0 ? 1 : -1;
    p.x.push_back({g(rng) + 1.2 * y, g(rng) + 0.8 * y});
    p.y.push_back(y);
  }
  return p;
}

inline leakdet::Matrix to_matrix(const oracle::Problem2D& p) {
  leakdet::Matrix m(p.x.size(), 2);
  for (std::size_t i = 0; i < p.x.size(); ++i) {
    m(i, 0) = p.x[i][0];
    m(i, 1) = p.x[i][1];
  }
  return m;
}

struct DualCheck {
  double sum_alpha_y = 0.0;
  bool box_ok = true;
  double kkt_fraction = 0.0;
};

// Feasibility and per-point KKT cases of a solution on a Gram matrix.
inline DualCheck check_dual(const leakdet::Matrix& gram, const std::vector<int>& y, double C,
                            const leakdet::DualSolution& sol, double tol) {
  DualCheck c;
  const std::size_t n = y.size();
  std::size_t ok = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = sol.alpha[i];
    c.sum_alpha_y += a * y[i];
    if (a < 0.0 || a > C) c.box_ok = false;
    double f = sol.bias;
    for (std::size_t j = 0; j < n; ++j) f += sol.alpha[j] * y[j] * gram(j, i);
    const double m = y[i] * f;
    bool sat;
    if (a <= 0.0) {
      sat = m >= 1.0 - tol;
    } else if (a >= C) {
      sat = m <= 1.0 + tol;
    } else {
      sat = std::fabs(m - 1.0) <= tol;
    }
    ok += sat ? 1 : 0;
  }
  c.kkt_fraction = static_cast<double>(ok) / static_cast<double>(n);
  return c;
}

}  // namespace fixtures
