#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "mkme/estimators.hpp"
#include "mkme/types.hpp"

namespace mkme {

/// Mixture of Gaussians with diagonal covariances.
struct GaussianMixture {
  Eigen::VectorXd weights;  // length C, on the probability simplex
  DataMatrix means;         // C x d
  DataMatrix variances;     // C x d, each entry >= the variance ridge

  Eigen::Index components() const { return means.rows(); }
  Eigen::Index dim() const { return means.cols(); }

  CorruptionModel covariance(Eigen::Index c) const;

  /// Throws InputError if shapes disagree, weights leave the simplex
  /// (tolerance 1e-10) or a variance falls below the ridge.
  void validate() const;
};

/// Floor added to every empirical prototype variance.
inline constexpr double kVarianceRidge = 1e-6;

/// k-means++ seeding followed by Lloyd iterations. Empty clusters are
/// reseeded with the point farthest from its center. Returns cluster means,
/// per-coordinate population variances plus kVarianceRidge, and cluster
/// fractions as weights.
GaussianMixture kmeans(const DataMatrix& xs, std::size_t clusters, std::size_t iters, std::uint64_t seed);

/// Quadratic program alpha^T G alpha - 2 alpha^T h whose minimizer over the
/// simplex matches the mixture's kernel mean to an estimate:
///   G_cc' = k~(m_c, S_c; m_c', S_c'),  h_c = sum_i beta_i k~(x_i, est.cov; m_c, S_c).
struct MixtureQp {
  Eigen::MatrixXd g;
  Eigen::VectorXd h;

  double objective(const Eigen::VectorXd& alpha) const { return alpha.dot(g * alpha) - 2.0 * alpha.dot(h); }
};

MixtureQp mixture_qp(const MeanEstimate& est, const GaussianMixture& protos);

struct MatchResult {
  GaussianMixture mixture;
  double objective = 0.0;
  int iterations = 0;
  std::vector<double> history;  // objective after each accepted step
};

/// Projected gradient on the simplex with step 1 / (2 max_c sum_c' |G_cc'|),
/// starting from the prototype weights; at most 5000 iterations, stopping
/// once an iteration improves the objective by less than 1e-10. A final
/// equality-constrained solve on the active support is accepted only when it
/// stays feasible and lowers the objective.
MatchResult match_mixture_detailed(const MeanEstimate& est, const GaussianMixture& protos);

GaussianMixture match_mixture(const MeanEstimate& est, const GaussianMixture& protos);

/// Average negative log-likelihood of the rows of `test`.
double nll(const GaussianMixture& model, const DataMatrix& test);

struct DensityOptions {
  std::size_t prototypes = 10;
  std::size_t kmeans_iters = 100;
  std::vector<double> bw_grid{0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  double validation_fraction = 0.2;
};

struct DensityFit {
  GaussianMixture model;
  double multiplier = 1.0;
  Bandwidth bandwidth{1.0};
  std::vector<double> validation_nll;  // one entry per multiplier tried
};

/// Bandwidth search around the median heuristic. A validation fifth of
/// `train` scores each multiplier (in grid order) by the NLL of the matched
/// mixture; the scan stops after two consecutive increases. The selected
/// multiplier is then refitted on all of `train`.
DensityFit fit_density(const DataMatrix& train, const EstimatorKind& estimator, const DensityOptions& opts,
                       std::uint64_t seed);

struct KdeResult {
  DensityFit fit;
  double test_nll = 0.0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

/// Seeded train/test split (test_fraction of rows held out), fit_density on
/// the training part, NLL on the test part.
KdeResult kde_pipeline(const DataMatrix& xs, const EstimatorKind& estimator, double test_fraction,
                       const DensityOptions& opts, std::uint64_t seed);

}  // namespace mkme
