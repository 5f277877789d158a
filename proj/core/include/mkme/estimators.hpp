#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mkme/covariance_selection.hpp"
#include "mkme/kernels.hpp"
#include "mkme/types.hpp"

namespace mkme {

/// A kernel mean estimate sum_i beta_i k~(x_i, .), where k~ is the feature
/// map marginalized over `corruption` (plain k(x_i, .) for Dirac).
struct MeanEstimate {
  DataMatrix base_points;
  Eigen::VectorXd beta;
  CorruptionModel corruption;
  Bandwidth bandwidth;

  MeanEstimate(DataMatrix points, Eigen::VectorXd weights, CorruptionModel cov, Bandwidth bw);

  Eigen::Index size() const { return base_points.rows(); }
  Eigen::Index dim() const { return base_points.cols(); }
};

/// The estimators compared throughout the library.
struct EstimatorKind {
  enum class Kind { KME, SKMSE, FKMSE, MKME, MMKME, MKMELinear, MMKMELinear };

  Kind kind = Kind::KME;
  std::vector<double> lambda_grid;  // shrinkage estimators only

  static EstimatorKind kme() { return {Kind::KME, {}}; }
  static EstimatorKind skmse(std::vector<double> grid = {});
  static EstimatorKind fkmse(std::vector<double> grid = {});
  static EstimatorKind mkme() { return {Kind::MKME, {}}; }
  static EstimatorKind mmkme() { return {Kind::MMKME, {}}; }
  static EstimatorKind mkme_linear() { return {Kind::MKMELinear, {}}; }
  static EstimatorKind mmkme_linear() { return {Kind::MMKMELinear, {}}; }

  /// Parses "kme", "skmse", "fkmse", "mkme", "mmkme", "mkme-linear",
  /// "mmkme-linear" (case-insensitive; "s-kmse"/"f-kmse" also accepted).
  static EstimatorKind parse(std::string_view name);

  std::string name() const;
  bool is_shrinkage() const { return kind == Kind::SKMSE || kind == Kind::FKMSE; }
  bool is_marginalized() const { return kind == Kind::MKME || kind == Kind::MMKME; }
  bool is_linear() const { return kind == Kind::MKMELinear || kind == Kind::MMKMELinear; }

  /// Throws InputError if the lambda grid is empty or not strictly positive.
  void validate() const;
};

/// 20 values log-spaced over [1e-6, 1e2].
std::vector<double> default_lambda_grid();

/// Parses a comma-separated estimator list.
std::vector<EstimatorKind> parse_estimator_list(std::string_view list);

/// Uniform weights 1/n, Dirac corruption.
MeanEstimate fit_kme(const DataMatrix& xs, Bandwidth bw);

/// Uniform weights on features marginalized over a fixed corruption model.
MeanEstimate fit_with_corruption(const DataMatrix& xs, Bandwidth bw, const CorruptionModel& cov);

/// Exact MKME (Isotropic) or MMKME (Diagonal): uniform weights with the
/// LOOCV-selected corruption model.
MeanEstimate fit_marginalized(const DataMatrix& xs, Bandwidth bw, CorruptionFamily family);

/// Which leading coefficient to use in the linear approximation. The default
/// (2 theta^2 + s) / (2 theta^2) is the one that reduces to uniform weights
/// at zero corruption; the alternative (theta^2 + s) / (2 theta^2) is kept for
/// comparison with the published statement of the result.
enum class LinearCoefficient { ReducesToKme, AsStated };

/// Linear-form approximation of MKME on uncorrupted features:
///   beta = ((2 theta^2 + d sigma^2) / (2 theta^2)) 1_n
///          - (d sigma^2 / (2 theta^4)) K^{-1} K' 1_n,   1_n = (1/n, ..., 1/n).
/// K^{-1} is applied by a symmetric solve with ridge 1e-10 n.
MeanEstimate fit_linear_mkme(const DataMatrix& xs, Bandwidth bw, double sigma2,
                             LinearCoefficient coef = LinearCoefficient::ReducesToKme);

/// As fit_linear_mkme with d sigma^2 replaced by the total variance sum_j e_j.
MeanEstimate fit_linear_mmkme(const DataMatrix& xs, Bandwidth bw, std::span<const double> variances,
                              LinearCoefficient coef = LinearCoefficient::ReducesToKme);

// Gram-level shrinkage machinery. These work on any PSD Gram (plain RBF,
// product kernels for HSIC), which is why they take the Gram directly.

/// S-KMSE weights (1 / (1 + lambda)) (1/n, ..., 1/n).
Eigen::VectorXd skmse_weights(Eigen::Index n, double lambda);

/// F-KMSE weights solving (G + n lambda I) beta = G (1/n, ..., 1/n).
Eigen::VectorXd fkmse_weights(const Eigen::MatrixXd& gram, double lambda);

/// Leave-one-out score (1/n) sum_i |phi_i - mu_lambda^{(-i)}|^2 for each
/// lambda in the grid, where mu_lambda^{(-i)} is the shrinkage estimate
/// refitted on the other n-1 points.
std::vector<double> shrinkage_loocv_scores(const Eigen::MatrixXd& gram, EstimatorKind::Kind kind,
                                           const std::vector<double>& grid);

/// First grid value attaining the minimal leave-one-out score.
double select_shrinkage_lambda(const Eigen::MatrixXd& gram, EstimatorKind::Kind kind,
                               const std::vector<double>& grid);

/// S-KMSE or F-KMSE with lambda chosen by leave-one-out over the kind's grid.
MeanEstimate fit_shrinkage(const DataMatrix& xs, Bandwidth bw, const EstimatorKind& kind);

/// Hyperparameters an estimator selects from data. Holding them fixed lets
/// permutation tests refit weights on permuted samples cheaply.
struct EstimatorParams {
  EstimatorKind kind;
  double lambda = 0.0;   // shrinkage estimators
  CorruptionModel cov;   // marginalized and linear estimators
};

EstimatorParams select_params(const DataMatrix& xs, Bandwidth bw, const EstimatorKind& kind);

/// Fits weights with the given hyperparameters (no selection).
MeanEstimate fit_with_params(const DataMatrix& xs, Bandwidth bw, const EstimatorParams& params);

/// select_params followed by fit_with_params.
MeanEstimate fit(const DataMatrix& xs, Bandwidth bw, const EstimatorKind& kind);

/// g(y) = sum_i beta_i E k(x~_i, y) by the reproducing property.
double evaluate_at(const MeanEstimate& est, PointView y);

/// <a, b>_H = sum_ij a.beta_i b.beta_j k~(a.x_i, b.x_j) with each side's
/// corruption. Bandwidths must match.
double inner_product(const MeanEstimate& a, const MeanEstimate& b);

/// |a - b|^2_H.
double rkhs_distance2(const MeanEstimate& a, const MeanEstimate& b);

}  // namespace mkme
