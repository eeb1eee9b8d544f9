#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

// Reference implementations used as independent oracles by the test suites.
// They deliberately share no code with the library paths they check.

namespace testutil {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Exact steady-state rates of the flat lateral network by enumerating the
/// 2^n active sets of the equilibrium condition: on the active set S,
/// thresholds .* a = b + W a restricted to S, silent neurons must satisfy
/// b_i + (W a)_i <= 0. Only feasible for small n.
inline std::optional<VectorXd> enumerate_equilibrium(const MatrixXd& w, const VectorXd& theta,
                                                     const VectorXd& b) {
  const int n = static_cast<int>(b.size());
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    std::vector<int> active;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) active.push_back(i);

    VectorXd a = VectorXd::Zero(n);
    if (!active.empty()) {
      const int k = static_cast<int>(active.size());
      MatrixXd m(k, k);
      VectorXd rhs(k);
      for (int r = 0; r < k; ++r) {
        rhs[r] = b[active[r]];
        for (int c = 0; c < k; ++c)
          m(r, c) = (active[r] == active[c] ? theta[active[r]] : 0.0) - w(active[r], active[c]);
      }
      const VectorXd sol = m.fullPivLu().solve(rhs);
      if ((sol.array() <= 1e-12).any()) continue;
      for (int r = 0; r < k; ++r) a[active[r]] = sol[r];
    }
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      if (mask & (1u << i)) continue;
      if (b[i] + w.row(i).dot(a) > 1e-10) ok = false;
    }
    if (ok) return a;
  }
  return std::nullopt;
}

/// Brute-force grid minimum of the weighted nonnegative sparse coding
/// objective over per-coordinate boxes [0, hi_j] at the given pitch.
inline double grid_min_objective(const MatrixXd& d, const VectorXd& x, double lambda,
                                 double pitch) {
  const int n = static_cast<int>(d.cols());
  const MatrixXd g = d.transpose() * d;
  const VectorXd c = d.transpose() * x;
  const double x2 = 0.5 * x.squaredNorm();

  std::vector<long> steps(n);
  for (int j = 0; j < n; ++j) {
    const double hi = std::max(0.0, c[j]) / g(j, j) + pitch;
    steps[j] = static_cast<long>(std::floor(hi / pitch)) + 1;
  }

  VectorXd a = VectorXd::Zero(n);
  std::vector<long> idx(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    // objective = x2 - c.a + 0.5 a'Ga + lambda Sum g_jj a_j
    const double obj =
        x2 - c.dot(a) + 0.5 * a.dot(g * a) + lambda * g.diagonal().dot(a);
    if (obj < best) best = obj;

    int j = 0;
    while (j < n) {
      ++idx[j];
      if (idx[j] < steps[j]) {
        a[j] = static_cast<double>(idx[j]) * pitch;
        break;
      }
      idx[j] = 0;
      a[j] = 0.0;
      ++j;
    }
    if (j == n) break;
  }
  return best;
}

inline MatrixXd random_nonneg_unit_dictionary(int m, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MatrixXd d(m, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < m; ++i) d(i, j) = unit(rng);
    d.col(j) /= d.col(j).norm();
  }
  return d;
}

inline VectorXd random_uniform_vector(int n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

}  // namespace testutil
