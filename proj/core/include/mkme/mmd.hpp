#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mkme/estimators.hpp"
#include "mkme/kernels.hpp"
#include "mkme/rng.hpp"
#include "mkme/types.hpp"

namespace mkme {

/// Outcome of a permutation test. p_value uses the add-one convention
/// (1 + #{null >= statistic}) / (B + 1); rejected iff p_value < alpha.
struct TestResult {
  double statistic = 0.0;
  std::vector<double> null_stats;
  double p_value = 1.0;
  bool rejected = false;
  double alpha = 0.05;
};

TestResult make_test_result(double statistic, std::vector<double> null_stats, double alpha);

/// Supplies the permutation of the pooled index set used for null draw
/// `index`. Leave empty for seeded Fisher-Yates shuffles.
using PermutationHook = std::function<std::vector<std::size_t>(std::size_t index, std::size_t size)>;

/// Unbiased MMD^2 U-statistic: off-diagonal averages for the within-sample
/// terms, full average for the cross term. Requires m, n >= 2.
double mmd2_unbiased(const DataMatrix& s1, const DataMatrix& s2, Bandwidth bw);

/// mmd2_unbiased with every kernel evaluation replaced by the marginalized
/// kernel under the samples' corruption models.
double mmd2_marginalized(const DataMatrix& s1, const CorruptionModel& cov1, const DataMatrix& s2,
                         const CorruptionModel& cov2, Bandwidth bw);

/// U-statistic form for weighted estimates:
///   m/(m-1) sum_{i!=j} a_i a_j k~_ij + n/(n-1) sum_{i!=j} b_i b_j k~_ij - 2 sum_ij a_i b_j k~_ij.
/// With uniform weights this is mmd2_marginalized.
double mmd2_estimates(const MeanEstimate& a, const MeanEstimate& b);

/// Median heuristic on the pooled sample.
Bandwidth pooled_bandwidth(const DataMatrix& s1, const DataMatrix& s2);

struct TwoSampleOptions {
  std::size_t permutations = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  PermutationHook permutation;  // test hook; empty = seeded shuffles
};

/// Permutation two-sample test. Hyperparameters (shrinkage lambda or
/// corruption model) are selected once on each original sample; both halves
/// of every split, including the observed one, then use the pooled choice
/// (averaged corruption, geometric-mean lambda) so the statistic is the same
/// function of the data under every relabeling. Weights are refitted on each
/// permuted half.
TestResult two_sample_test(const DataMatrix& s1, const DataMatrix& s2, Bandwidth bw, const EstimatorKind& estimator,
                           const TwoSampleOptions& opts);

/// Draws an n x d sample.
using SampleGenerator = std::function<DataMatrix(std::size_t d, std::size_t n, Rng& rng)>;

struct PowerRow {
  std::size_t dim = 0;
  std::string estimator;
  double power = 0.0;
  std::size_t trials = 0;
};

struct PowerOptions {
  std::size_t n = 50;
  std::size_t trials = 500;
  std::size_t permutations = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

/// Rejection rate per (dimension, estimator). Each trial draws fresh samples
/// shared by all estimators; bandwidth is the pooled median heuristic.
std::vector<PowerRow> power_curve(const SampleGenerator& gen1, const SampleGenerator& gen2,
                                  const std::vector<std::size_t>& dims, const std::vector<EstimatorKind>& estimators,
                                  const PowerOptions& opts);

}  // namespace mkme
