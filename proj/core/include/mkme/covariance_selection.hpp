#pragma once

#include <span>
#include <utility>
#include <vector>

#include "mkme/kernels.hpp"
#include "mkme/types.hpp"

namespace mkme {

/// Result of a covariance search: the selected model and its LOOCV score.
struct LoocvScore {
  double value = 0.0;
  CorruptionModel cov;
  int evaluations = 0;
};

/// Leave-one-out score
///   (1/n) sum_i | k(x_i, .) - mu~^{(-i)} |^2_H
/// where mu~^{(-i)} is the uniformly weighted corrupted mean of the other n-1
/// points. Evaluated in O(n^2 d) from the single-corruption (L) and
/// double-corruption (Q) Grams. Requires n >= 3.
double loocv_objective(const DataMatrix& xs, Bandwidth bw, const CorruptionModel& cov);

/// Caches pairwise squared coordinate differences so that repeated LOOCV
/// evaluations during a search cost O(n^2 d) arithmetic without recomputing
/// the differences.
class LoocvObjective {
 public:
  LoocvObjective(const DataMatrix& xs, Bandwidth bw);

  double operator()(const CorruptionModel& cov) const;
  double operator()(std::span<const double> variances) const;

  Eigen::Index size() const { return n_; }
  Eigen::Index dim() const { return d_; }
  Bandwidth bandwidth() const { return bw_; }

 private:
  Eigen::Index n_;
  Eigen::Index d_;
  Bandwidth bw_;
  Eigen::MatrixXd pair_sq_;  // one row per pair i < j, one column per coordinate
};

/// Default isotropic search interval [0, 10 theta^2].
std::pair<double, double> default_isotropic_bounds(Bandwidth bw);

/// Bounded scalar search for sigma^2 in [lo, hi]; tolerance 1e-6 (hi - lo),
/// at most 200 objective evaluations, ties resolved to the smaller sigma^2.
LoocvScore select_isotropic(const DataMatrix& xs, Bandwidth bw, double lo, double hi);
LoocvScore select_isotropic(const DataMatrix& xs, Bandwidth bw);

/// Nelder-Mead over log-variances starting at `init` (all entries > 0). The
/// initial simplex perturbs each log-variance by +0.25; the search stops when
/// the simplex value spread drops below 1e-8 or after 500 d evaluations.
/// Variances are clamped below at 1e-12.
LoocvScore select_diagonal(const DataMatrix& xs, Bandwidth bw, std::span<const double> init);

enum class CorruptionFamily { Isotropic, Diagonal };

/// Full selection used by the marginalized estimators. Isotropic runs
/// select_isotropic on the default bounds. Diagonal additionally starts
/// Nelder-Mead from the isotropic optimum (or 1e-3 theta^2 when that optimum
/// is zero) and keeps the best of {Nelder-Mead, isotropic, Dirac}, so the
/// diagonal family never scores worse than the models it nests.
LoocvScore select_covariance(const DataMatrix& xs, Bandwidth bw, CorruptionFamily family);

}  // namespace mkme
