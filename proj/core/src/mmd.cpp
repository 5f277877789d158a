#include "mkme/mmd.hpp"

#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>

#include "mkme/errors.hpp"

namespace mkme {
namespace {

void check_samples(const DataMatrix& s1, const DataMatrix& s2) {
  if (s1.rows() < 2 || s2.rows() < 2) throw InputError("MMD needs at least two points per sample");
  if (s1.cols() != s2.cols()) throw InputError("MMD: samples differ in dimension");
}

// Off-diagonal sum of a symmetric block.
double off_diagonal_sum(const Eigen::MatrixXd& g) { return g.sum() - g.trace(); }

double u_statistic(const Eigen::MatrixXd& g11, const Eigen::MatrixXd& g22, const Eigen::MatrixXd& g12,
                   const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double m = static_cast<double>(a.size());
  const double n = static_cast<double>(b.size());
  const double w11 = a.dot(g11 * a) - (a.array().square() * g11.diagonal().array()).sum();
  const double w22 = b.dot(g22 * b) - (b.array().square() * g22.diagonal().array()).sum();
  return m / (m - 1.0) * w11 + n / (n - 1.0) * w22 - 2.0 * a.dot(g12 * b);
}

Eigen::MatrixXd block(const Eigen::MatrixXd& g, const std::vector<Eigen::Index>& r, const std::vector<Eigen::Index>& c) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g(r[i], c[j]);
  return out;
}

// Pooled hyperparameters shared by both halves of every split.
EstimatorParams pool_params(const EstimatorParams& a, const EstimatorParams& b, std::size_t d) {
  EstimatorParams p = a;
  p.cov = average(a.cov, b.cov, d);
  if (a.kind.is_shrinkage()) p.lambda = std::sqrt(a.lambda * b.lambda);
  return p;
}

class SplitStatistic {
 public:
  SplitStatistic(const DataMatrix& pooled, Bandwidth bw, EstimatorParams params)
      : params_(std::move(params)), bw_(bw) {
    if (params_.kind.is_linear()) {
      // Linear forms weight uncorrupted features; the corruption only sets
      // the total variance in the weight formula.
      rbf_ = gram(pooled, pooled, bw, GramKind::Rbf).entries;
      kprime_ = gram(pooled, pooled, bw, GramKind::KPrime).entries;
      total_variance_ = params_.cov.trace(static_cast<std::size_t>(pooled.cols()));
      gram_ = rbf_;
    } else {
      gram_ = marginal_gram(pooled, params_.cov, pooled, params_.cov, bw).entries;
    }
  }

  double operator()(const std::vector<Eigen::Index>& i1, const std::vector<Eigen::Index>& i2) const {
    const auto g11 = block(gram_, i1, i1);
    const auto g22 = block(gram_, i2, i2);
    const auto g12 = block(gram_, i1, i2);
    return u_statistic(g11, g22, g12, weights(i1, g11), weights(i2, g22));
  }

 private:
  Eigen::VectorXd weights(const std::vector<Eigen::Index>& idx, const Eigen::MatrixXd& g) const {
    const auto n = static_cast<Eigen::Index>(idx.size());
    using K = EstimatorKind::Kind;
    switch (params_.kind.kind) {
      case K::SKMSE:
        return skmse_weights(n, params_.lambda);
      case K::FKMSE:
        return fkmse_weights(g, params_.lambda);
      case K::MKMELinear:
      case K::MMKMELinear: {
        const Eigen::VectorXd ones = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
        const double t2 = bw_.theta2();
        Eigen::VectorXd beta = ((2.0 * t2 + total_variance_) / (2.0 * t2)) * ones;
        if (total_variance_ > 0.0) {
          Eigen::MatrixXd k = block(rbf_, idx, idx);
          k.diagonal().array() += 1e-10 * static_cast<double>(n);
          const Eigen::VectorXd z = k.ldlt().solve(block(kprime_, idx, idx) * ones);
          beta -= (total_variance_ / (2.0 * t2 * t2)) * z;
        }
        return beta;
      }
      default:
        return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    }
  }

  EstimatorParams params_;
  Bandwidth bw_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd rbf_;
  Eigen::MatrixXd kprime_;
  double total_variance_ = 0.0;
};

}  // namespace

TestResult make_test_result(double statistic, std::vector<double> null_stats, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  std::size_t exceed = 0;
  for (double s : null_stats) exceed += s >= statistic ? 1 : 0;
  TestResult r;
  r.statistic = statistic;
  r.p_value = static_cast<double>(1 + exceed) / static_cast<double>(null_stats.size() + 1);
  r.rejected = r.p_value < alpha;
  r.alpha = alpha;
  r.null_stats = std::move(null_stats);
  return r;
}

double mmd2_unbiased(const DataMatrix& s1, const DataMatrix& s2, Bandwidth bw) {
  check_samples(s1, s2);
  const double m = static_cast<double>(s1.rows());
  const double n = static_cast<double>(s2.rows());
  const auto g11 = gram(s1, s1, bw).entries;
  const auto g22 = gram(s2, s2, bw).entries;
  const auto g12 = gram(s1, s2, bw).entries;
  return off_diagonal_sum(g11) / (m * (m - 1.0)) + off_diagonal_sum(g22) / (n * (n - 1.0)) -
         2.0 * g12.sum() / (m * n);
}

double mmd2_marginalized(const DataMatrix& s1, const CorruptionModel& cov1, const DataMatrix& s2,
                         const CorruptionModel& cov2, Bandwidth bw) {
  check_samples(s1, s2);
  const double m = static_cast<double>(s1.rows());
  const double n = static_cast<double>(s2.rows());
  const auto g11 = marginal_gram(s1, cov1, s1, cov1, bw).entries;
  const auto g22 = marginal_gram(s2, cov2, s2, cov2, bw).entries;
  const auto g12 = marginal_gram(s1, cov1, s2, cov2, bw).entries;
  return off_diagonal_sum(g11) / (m * (m - 1.0)) + off_diagonal_sum(g22) / (n * (n - 1.0)) -
         2.0 * g12.sum() / (m * n);
}

double mmd2_estimates(const MeanEstimate& a, const MeanEstimate& b) {
  check_samples(a.base_points, b.base_points);
  if (!(a.bandwidth == b.bandwidth)) throw InputError("mmd2_estimates: bandwidth mismatch");
  const auto bw = a.bandwidth;
  const auto g11 = marginal_gram(a.base_points, a.corruption, a.base_points, a.corruption, bw).entries;
  const auto g22 = marginal_gram(b.base_points, b.corruption, b.base_points, b.corruption, bw).entries;
  const auto g12 = marginal_gram(a.base_points, a.corruption, b.base_points, b.corruption, bw).entries;
  return u_statistic(g11, g22, g12, a.beta, b.beta);
}

Bandwidth pooled_bandwidth(const DataMatrix& s1, const DataMatrix& s2) {
  if (s1.cols() != s2.cols()) throw InputError("pooled_bandwidth: samples differ in dimension");
  DataMatrix pooled(s1.rows() + s2.rows(), s1.cols());
  pooled << s1, s2;
  return median_heuristic(pooled);
}

TestResult two_sample_test(const DataMatrix& s1, const DataMatrix& s2, Bandwidth bw, const EstimatorKind& estimator,
                           const TwoSampleOptions& opts) {
  check_samples(s1, s2);
  if (opts.permutations < 1) throw InputError("two_sample_test: need at least one permutation");
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw InputError("two_sample_test: alpha must lie in (0, 1)");
  const auto d = static_cast<std::size_t>(s1.cols());
  const auto m = static_cast<std::size_t>(s1.rows());
  const auto n = static_cast<std::size_t>(s2.rows());

  const auto params = pool_params(select_params(s1, bw, estimator), select_params(s2, bw, estimator), d);
  DataMatrix pooled(s1.rows() + s2.rows(), s1.cols());
  pooled << s1, s2;
  const SplitStatistic stat(pooled, bw, params);

  std::vector<Eigen::Index> i1(m), i2(n);
  std::iota(i1.begin(), i1.end(), Eigen::Index{0});
  std::iota(i2.begin(), i2.end(), static_cast<Eigen::Index>(m));
  const double observed = stat(i1, i2);

  std::vector<double> nulls(opts.permutations);
  for (std::size_t b = 0; b < opts.permutations; ++b) {
    std::vector<std::size_t> perm;
    if (opts.permutation) {
      perm = opts.permutation(b, m + n);
      if (perm.size() != m + n) throw InputError("permutation hook returned the wrong size");
    } else {
      auto rng = Rng::stream(opts.seed, "two-sample-permutation", b);
      perm = random_permutation(m + n, rng);
    }
    for (std::size_t i = 0; i < m; ++i) i1[i] = static_cast<Eigen::Index>(perm[i]);
    for (std::size_t i = 0; i < n; ++i) i2[i] = static_cast<Eigen::Index>(perm[m + i]);
    nulls[b] = stat(i1, i2);
  }
  return make_test_result(observed, std::move(nulls), opts.alpha);
}

std::vector<PowerRow> power_curve(const SampleGenerator& gen1, const SampleGenerator& gen2,
                                  const std::vector<std::size_t>& dims, const std::vector<EstimatorKind>& estimators,
                                  const PowerOptions& opts) {
  if (opts.trials < 1) throw InputError("power_curve: trials must be at least 1");
  if (dims.empty() || estimators.empty()) throw InputError("power_curve: empty dimension or estimator list");
  std::vector<PowerRow> rows;
  for (std::size_t di = 0; di < dims.size(); ++di) {
    const auto d = dims[di];
    std::vector<std::size_t> rejections(estimators.size(), 0);
    for (std::size_t t = 0; t < opts.trials; ++t) {
      const std::uint64_t trial_id = di * 1'000'000ULL + t;
      auto ra = Rng::stream(opts.seed, "power-sample-a", trial_id);
      auto rb = Rng::stream(opts.seed, "power-sample-b", trial_id);
      const auto s1 = gen1(d, opts.n, ra);
      const auto s2 = gen2(d, opts.n, rb);
      const auto bw = pooled_bandwidth(s1, s2);
      for (std::size_t e = 0; e < estimators.size(); ++e) {
        TwoSampleOptions to;
        to.permutations = opts.permutations;
        to.alpha = opts.alpha;
        to.seed = derive_seed(opts.seed, "power-test", trial_id);
        rejections[e] += two_sample_test(s1, s2, bw, estimators[e], to).rejected ? 1 : 0;
      }
    }
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      rows.push_back({d, estimators[e].name(),
                      static_cast<double>(rejections[e]) / static_cast<double>(opts.trials), opts.trials});
    }
  }
  return rows;
}

}  // namespace mkme
