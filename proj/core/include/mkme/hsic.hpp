#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mkme/estimators.hpp"
#include "mkme/kernels.hpp"
#include "mkme/mmd.hpp"
#include "mkme/types.hpp"

namespace mkme {

/// Paired observations (x_i, y_i); both matrices have the same row count.
struct PairedSample {
  DataMatrix xs;
  DataMatrix ys;

  PairedSample(DataMatrix x, DataMatrix y);

  Eigen::Index size() const { return xs.rows(); }
  PairedSample subsample(const std::vector<std::size_t>& rows) const;
};

/// Doubly centered Gram H G H with H = I - (1/n) 1 1^T.
Eigen::MatrixXd center_gram(const Eigen::MatrixXd& g);

/// (1/n^2) tr(H K H H Z H) for two n x n Grams.
double hsic_from_grams(const Eigen::MatrixXd& k, const Eigen::MatrixXd& z);

/// Squared RKHS distance between a weighted joint embedding and the tensor
/// product of weighted marginal embeddings:
///   a^T (K o Z) a - 2 sum_i a_i (K b)_i (Z c)_i + (b^T K b)(c^T Z c).
/// Uniform weights 1/n recover hsic_from_grams.
double hsic_weighted(const Eigen::MatrixXd& k, const Eigen::MatrixXd& z, const Eigen::VectorXd& a,
                     const Eigen::VectorXd& b, const Eigen::VectorXd& c);

/// Trace-form HSIC with marginalized Grams (plain Grams for Dirac models).
double hsic_statistic(const PairedSample& p, Bandwidth bwx, Bandwidth bwy, const CorruptionModel& covx,
                      const CorruptionModel& covy);

/// Median heuristic over pairs at positive distance; 1.0 when every point
/// coincides (the centered Gram is then zero whatever the bandwidth).
Bandwidth positive_median_bandwidth(const DataMatrix& xs);

struct IndependenceOptions {
  std::size_t permutations = 2000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::optional<Bandwidth> bwx;  // default: positive_median_bandwidth(xs)
  std::optional<Bandwidth> bwy;
  PermutationHook permutation;   // test hook; permutes the rows of ys
};

/// Permutation independence test: the null shuffles the rows of ys only.
/// Bandwidths and hyperparameters are chosen once on the original pairs.
/// Supports kme, skmse, fkmse, mkme and mmkme.
TestResult independence_test(const PairedSample& p, const EstimatorKind& estimator, const IndependenceOptions& opts);

struct HsicPowerRow {
  double alpha = 0.0;
  double eta = 0.0;
  std::string estimator;
  double power = 0.0;
  std::size_t repetitions = 0;
};

struct HsicPowerOptions {
  std::vector<double> etas{1.0};
  std::vector<double> alphas{0.05};
  std::size_t repetitions = 200;
  std::size_t permutations = 2000;
  std::uint64_t seed = 0;
};

/// For each (alpha, eta, estimator): rejection fraction over repetitions, each
/// repetition testing ceil(eta n) rows drawn without replacement. One p-value
/// per (eta, repetition, estimator) is compared against every alpha.
std::vector<HsicPowerRow> power_study(const PairedSample& p, const std::vector<EstimatorKind>& estimators,
                                      const HsicPowerOptions& opts);

}  // namespace mkme
