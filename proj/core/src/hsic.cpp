#include "mkme/hsic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mkme/errors.hpp"

namespace mkme {
namespace {

Eigen::MatrixXd permute_symmetric(const Eigen::MatrixXd& g, const std::vector<std::size_t>& perm) {
  const auto n = g.rows();
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      out(i, j) = g(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]),
                    static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)]));
  return out;
}

Eigen::VectorXd shrinkage_weights(const Eigen::MatrixXd& g, EstimatorKind::Kind kind, double lambda) {
  return kind == EstimatorKind::Kind::SKMSE ? skmse_weights(g.rows(), lambda) : fkmse_weights(g, lambda);
}

std::vector<std::size_t> draw_permutation(const IndependenceOptions& opts, std::size_t b, std::size_t n) {
  if (opts.permutation) {
    auto perm = opts.permutation(b, n);
    if (perm.size() != n) throw InputError("permutation hook returned the wrong size");
    return perm;
  }
  auto rng = Rng::stream(opts.seed, "hsic-permutation", b);
  return random_permutation(n, rng);
}

}  // namespace

PairedSample::PairedSample(DataMatrix x, DataMatrix y) : xs(std::move(x)), ys(std::move(y)) {
  if (xs.rows() != ys.rows()) {
    throw InputError("paired sample: x has " + std::to_string(xs.rows()) + " rows, y has " +
                     std::to_string(ys.rows()));
  }
  if (xs.rows() < 2) throw InputError("paired sample: need at least two pairs");
}

PairedSample PairedSample::subsample(const std::vector<std::size_t>& rows) const {
  return {select_rows(xs, rows), select_rows(ys, rows)};
}

Eigen::MatrixXd center_gram(const Eigen::MatrixXd& g) {
  const auto n = static_cast<double>(g.rows());
  const Eigen::VectorXd r = g.rowwise().sum() / n;
  const Eigen::RowVectorXd c = g.colwise().sum() / n;
  const double grand = g.sum() / (n * n);
  Eigen::MatrixXd out = g;
  out.colwise() -= r;
  out.rowwise() -= c;
  out.array() += grand;
  return out;
}

double hsic_from_grams(const Eigen::MatrixXd& k, const Eigen::MatrixXd& z) {
  if (k.rows() != z.rows() || k.rows() != k.cols() || z.rows() != z.cols()) {
    throw InputError("hsic: Grams must be square and of equal size");
  }
  const auto n = static_cast<double>(k.rows());
  return (center_gram(k).array() * center_gram(z).array()).sum() / (n * n);
}

double hsic_weighted(const Eigen::MatrixXd& k, const Eigen::MatrixXd& z, const Eigen::VectorXd& a,
                     const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
  const Eigen::MatrixXd joint = k.cwiseProduct(z);
  const Eigen::VectorXd kb = k * b;
  const Eigen::VectorXd zc = z * c;
  return a.dot(joint * a) - 2.0 * (a.array() * kb.array() * zc.array()).sum() + b.dot(kb) * c.dot(zc);
}

double hsic_statistic(const PairedSample& p, Bandwidth bwx, Bandwidth bwy, const CorruptionModel& covx,
                      const CorruptionModel& covy) {
  const auto k = marginal_gram(p.xs, covx, p.xs, covx, bwx).entries;
  const auto z = marginal_gram(p.ys, covy, p.ys, covy, bwy).entries;
  return hsic_from_grams(k, z);
}

Bandwidth positive_median_bandwidth(const DataMatrix& xs) {
  std::vector<double> d2;
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    for (Eigen::Index j = i + 1; j < xs.rows(); ++j) {
      const double v = (xs.row(i) - xs.row(j)).squaredNorm();
      if (v > 0.0) d2.push_back(v);
    }
  if (d2.empty()) return Bandwidth(1.0);
  const auto mid = d2.begin() + static_cast<std::ptrdiff_t>((d2.size() - 1) / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  return Bandwidth(*mid);
}

TestResult independence_test(const PairedSample& p, const EstimatorKind& estimator, const IndependenceOptions& opts) {
  if (opts.permutations < 1) throw InputError("independence_test: need at least one permutation");
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw InputError("independence_test: alpha must lie in (0, 1)");
  if (estimator.is_linear()) throw InputError("independence_test: linear-form estimators are not supported");
  estimator.validate();

  const auto n = static_cast<std::size_t>(p.size());
  const Bandwidth bwx = opts.bwx.value_or(positive_median_bandwidth(p.xs));
  const Bandwidth bwy = opts.bwy.value_or(positive_median_bandwidth(p.ys));
  std::vector<double> nulls(opts.permutations);

  if (estimator.is_shrinkage()) {
    const auto kind = estimator.kind;
    const auto k = gram(p.xs, p.xs, bwx).entries;
    const auto z = gram(p.ys, p.ys, bwy).entries;
    const double lx = select_shrinkage_lambda(k, kind, estimator.lambda_grid);
    const double ly = select_shrinkage_lambda(z, kind, estimator.lambda_grid);
    const double lxy = select_shrinkage_lambda(k.cwiseProduct(z), kind, estimator.lambda_grid);
    const Eigen::VectorXd b = shrinkage_weights(k, kind, lx);
    const Eigen::VectorXd c = shrinkage_weights(z, kind, ly);
    auto stat = [&](const Eigen::MatrixXd& zp, const Eigen::VectorXd& cp) {
      const Eigen::VectorXd a = shrinkage_weights(k.cwiseProduct(zp), kind, lxy);
      return hsic_weighted(k, zp, a, b, cp);
    };
    const double observed = stat(z, c);
    for (std::size_t t = 0; t < opts.permutations; ++t) {
      const auto perm = draw_permutation(opts, t, n);
      Eigen::VectorXd cp(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) cp[static_cast<Eigen::Index>(i)] = c[static_cast<Eigen::Index>(perm[i])];
      nulls[t] = stat(permute_symmetric(z, perm), cp);
    }
    return make_test_result(observed, std::move(nulls), opts.alpha);
  }

  CorruptionModel covx = CorruptionModel::dirac();
  CorruptionModel covy = CorruptionModel::dirac();
  if (estimator.is_marginalized()) {
    const auto family = estimator.kind == EstimatorKind::Kind::MKME ? CorruptionFamily::Isotropic
                                                                    : CorruptionFamily::Diagonal;
    covx = select_covariance(p.xs, bwx, family).cov;
    covy = select_covariance(p.ys, bwy, family).cov;
  }
  const Eigen::MatrixXd kc = center_gram(marginal_gram(p.xs, covx, p.xs, covx, bwx).entries);
  const Eigen::MatrixXd zc = center_gram(marginal_gram(p.ys, covy, p.ys, covy, bwy).entries);
  const double scale = 1.0 / static_cast<double>(n * n);
  // Centering commutes with relabeling, so a permuted statistic only
  // re-indexes the centered label Gram.
  auto stat = [&](const std::vector<std::size_t>& perm) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto pi = static_cast<Eigen::Index>(perm[i]);
      for (std::size_t j = 0; j < n; ++j) {
        s += kc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * zc(pi, static_cast<Eigen::Index>(perm[j]));
      }
    }
    return s * scale;
  };
  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  const double observed = stat(identity);
  for (std::size_t t = 0; t < opts.permutations; ++t) nulls[t] = stat(draw_permutation(opts, t, n));
  return make_test_result(observed, std::move(nulls), opts.alpha);
}

std::vector<HsicPowerRow> power_study(const PairedSample& p, const std::vector<EstimatorKind>& estimators,
                                      const HsicPowerOptions& opts) {
  if (opts.repetitions < 1) throw InputError("power_study: repetitions must be at least 1");
  if (opts.etas.empty() || opts.alphas.empty() || estimators.empty()) {
    throw InputError("power_study: eta, alpha and estimator lists must be nonempty");
  }
  for (double a : opts.alphas)
    if (!(a > 0.0 && a < 1.0)) throw InputError("power_study: alpha must lie in (0, 1)");
  const auto n = static_cast<std::size_t>(p.size());
  std::vector<HsicPowerRow> rows;
  // rejections[eta][estimator][alpha]
  std::vector<std::vector<std::vector<std::size_t>>> counts(
      opts.etas.size(), std::vector<std::vector<std::size_t>>(estimators.size(), std::vector<std::size_t>(opts.alphas.size(), 0)));

  for (std::size_t ei = 0; ei < opts.etas.size(); ++ei) {
    const double eta = opts.etas[ei];
    if (!(eta > 0.0 && eta <= 1.0)) throw InputError("power_study: eta must lie in (0, 1]");
    const auto m = static_cast<std::size_t>(std::ceil(eta * static_cast<double>(n) - 1e-9));
    if (m < 2) throw InputError("power_study: eta * n must be at least 2");
    for (std::size_t r = 0; r < opts.repetitions; ++r) {
      const std::uint64_t rep_id = ei * 1'000'000ULL + r;
      auto rng = Rng::stream(opts.seed, "hsic-subsample", rep_id);
      auto perm = random_permutation(n, rng);
      perm.resize(m);
      const auto sub = p.subsample(perm);
      for (std::size_t k = 0; k < estimators.size(); ++k) {
        IndependenceOptions io;
        io.permutations = opts.permutations;
        io.seed = derive_seed(opts.seed, "hsic-test", rep_id);
        const auto res = independence_test(sub, estimators[k], io);
        for (std::size_t a = 0; a < opts.alphas.size(); ++a) counts[ei][k][a] += res.p_value < opts.alphas[a] ? 1 : 0;
      }
    }
  }
  for (std::size_t a = 0; a < opts.alphas.size(); ++a)
    for (std::size_t ei = 0; ei < opts.etas.size(); ++ei)
      for (std::size_t k = 0; k < estimators.size(); ++k)
        rows.push_back({opts.alphas[a], opts.etas[ei], estimators[k].name(),
                        static_cast<double>(counts[ei][k][a]) / static_cast<double>(opts.repetitions),
                        opts.repetitions});
  return rows;
}

}  // namespace mkme
