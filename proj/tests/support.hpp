#pragma once

// Shared helpers for the test suites. The oracles here deliberately avoid the
// library's closed forms: Monte Carlo draws, naive loops and explicit folds.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "mkme/estimators.hpp"
#include "mkme/kernels.hpp"
#include "mkme/rng.hpp"
#include "mkme/types.hpp"

namespace mkme::testing {

inline DataMatrix normal_matrix(Eigen::Index n, Eigen::Index d, Rng& rng, double mean = 0.0, double sd = 1.0) {
  std::normal_distribution<double> normal(mean, sd);
  DataMatrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = normal(rng);
  return m;
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform01(); }

inline double naive_rbf(const double* x, const double* y, std::size_t d, double theta2) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += (x[j] - y[j]) * (x[j] - y[j]);
  return std::exp(-s / (2.0 * theta2));
}

/// E k(x + e, y + f) with e ~ N(0, diag(vx)), f ~ N(0, diag(vy)) by plain
/// sampling.
inline double mc_marginal(PointView x, const std::vector<double>& vx, PointView y, const std::vector<double>& vy,
                          double theta2, std::size_t draws, Rng& rng) {
  const std::size_t d = x.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> a(d);
  std::vector<double> b(d);
  double acc = 0.0;
  for (std::size_t s = 0; s < draws; ++s) {
    for (std::size_t j = 0; j < d; ++j) {
      a[j] = x[j] + std::sqrt(vx[j]) * normal(rng);
      b[j] = y[j] + std::sqrt(vy[j]) * normal(rng);
    }
    acc += naive_rbf(a.data(), b.data(), d, theta2);
  }
  return acc / static_cast<double>(draws);
}

/// Explicit n-fold leave-one-out: (1/n) sum_i |k(x_i, .) - mu~^{(-i)}|^2 with
/// each fold mean built as its own MeanEstimate and the norm expanded through
/// inner_product.
inline double brute_force_loocv(const DataMatrix& xs, Bandwidth bw, const CorruptionModel& cov) {
  const Eigen::Index n = xs.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<Eigen::Index> rest;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) rest.push_back(j);
    const MeanEstimate fold(select_rows(xs, rest), Eigen::VectorXd::Constant(n - 1, 1.0 / static_cast<double>(n - 1)),
                            cov, bw);
    const MeanEstimate point(xs.row(i), Eigen::VectorXd::Ones(1), CorruptionModel::dirac(), bw);
    total += rkhs_distance2(point, fold);
  }
  return total / static_cast<double>(n);
}

}  // namespace mkme::testing
