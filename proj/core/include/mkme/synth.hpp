#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mkme/density.hpp"
#include "mkme/estimators.hpp"
#include "mkme/types.hpp"

namespace mkme {

/// Mixture weights of the four-component synthetic generator.
inline constexpr std::array<double, 4> kMogWeights{0.05, 0.3, 0.4, 0.25};

/// Variance of the additive isotropic noise.
inline constexpr double kMogNoiseVar = 0.2;

/// Four-component Gaussian mixture plus additive N(0, noise_var I) noise.
/// Covariances are the raw Wishart draws; the noise is folded in by
/// effective_covariance.
struct MoGSpec {
  std::array<double, 4> pis = kMogWeights;
  DataMatrix means;                          // 4 x d
  std::vector<Eigen::MatrixXd> covariances;  // 4 dense SPD d x d
  double noise_var = kMogNoiseVar;

  Eigen::Index dim() const { return means.cols(); }
  Eigen::MatrixXd effective_covariance(std::size_t c) const;
};

/// Wishart degrees of freedom max(7, d + 1).
std::size_t wishart_df(std::size_t d);

/// Means uniform on (-10, 10)^d; covariances Wishart(2 I_d, wishart_df(d)).
MoGSpec sample_mog_spec(std::size_t d, std::uint64_t seed);

struct LabeledSample {
  DataMatrix points;
  std::vector<std::size_t> components;
};

/// Component ~ Categorical(pi), point ~ N(theta_c, Sigma_c + noise_var I).
LabeledSample sample_mog_labeled(const MoGSpec& spec, std::size_t n, std::uint64_t seed);
DataMatrix sample_mog(const MoGSpec& spec, std::size_t n, std::uint64_t seed);

/// Multivariate t with location `mean`, scale `cov`, and `df` degrees of freedom.
struct TDistSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double df = 3.0;
};

/// Zero location, scale A^T A / d + I with A a d x d standard normal matrix.
TDistSpec make_t_spec(std::size_t d, double df, std::uint64_t seed);

/// x = mean + L z sqrt(df / w), L L^T = cov, z standard normal, w ~ chi^2(df).
DataMatrix sample_t(const TDistSpec& spec, std::size_t n, std::uint64_t seed);

/// make_t_spec and sample_t from substreams of one seed.
DataMatrix sample_t(std::size_t d, double df, std::size_t n, std::uint64_t seed);

/// Closed-form |sum_i beta_i k~(x_i, .) - E_P k(x, .)|^2_H against the
/// mixture P described by `spec`.
double loss_against_mog(const MeanEstimate& est, const MoGSpec& spec);

struct RiskReport {
  std::vector<double> per_copy_losses;
  double mean = 0.0;
  double std_error = 0.0;
};

RiskReport make_risk_report(std::vector<double> losses);

struct RiskRow {
  std::size_t d = 0;
  std::size_t n = 0;
  std::string estimator;
  RiskReport report;
};

/// Average loss over `copies` independent (spec, sample) draws for every
/// (d, n, estimator). Specs depend on (seed, d, copy) only, so rows sharing
/// d are evaluated on the same distributions; bandwidth is the sample's
/// median heuristic.
std::vector<RiskRow> risk_experiment(const std::vector<std::size_t>& dims, const std::vector<std::size_t>& ns,
                                     const std::vector<EstimatorKind>& estimators, std::size_t copies,
                                     std::uint64_t seed);

struct SweepRow {
  double sigma2 = 0.0;
  RiskReport report;
};

/// Loss of the exact marginalized estimator at fixed isotropic corruption
/// sigma^2 for each grid value (sigma^2 = 0 is the empirical estimator).
std::vector<SweepRow> covariance_sweep(std::size_t d, std::size_t n, const std::vector<double>& sigma2_grid,
                                       std::size_t copies, std::uint64_t seed);

struct NllRow {
  std::size_t d = 0;
  std::size_t n = 0;
  std::string estimator;
  RiskReport report;  // per-copy test NLL
};

/// Density-estimation study on t-distributed data: per copy a fresh t spec,
/// n training points and `test_size` test points from the same law.
std::vector<NllRow> t_nll_experiment(const std::vector<std::size_t>& dims, const std::vector<std::size_t>& ns,
                                     const std::vector<EstimatorKind>& estimators, double df, std::size_t copies,
                                     std::size_t test_size, const DensityOptions& opts, std::uint64_t seed);

}  // namespace mkme
