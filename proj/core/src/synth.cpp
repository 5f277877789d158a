#include "mkme/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Cholesky>

#include "mkme/errors.hpp"
#include "mkme/kernels.hpp"
#include "mkme/rng.hpp"

namespace mkme {
namespace {

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& s, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw NumericError(std::string(what) + ": covariance is not SPD");
  return llt.matrixL();
}

std::size_t draw_component(const std::array<double, 4>& pis, double u) {
  double acc = 0.0;
  for (std::size_t c = 0; c < pis.size(); ++c) {
    acc += pis[c];
    if (u < acc) return c;
  }
  // u close to 1 with rounding in the cumulative sum: last positive weight.
  for (std::size_t c = pis.size(); c-- > 0;)
    if (pis[c] > 0.0) return c;
  return pis.size() - 1;
}

// Seeds for copy `copy` of an experiment with dimension d and sample size n.
std::uint64_t spec_seed(std::uint64_t seed, std::string_view purpose, std::size_t d, std::size_t copy) {
  return derive_seed(derive_seed(seed, purpose, d), "copy", copy);
}

std::uint64_t sample_seed(std::uint64_t seed, std::string_view purpose, std::size_t d, std::size_t n,
                          std::size_t copy) {
  return derive_seed(derive_seed(derive_seed(seed, purpose, d), "n", n), "copy", copy);
}

}  // namespace

Eigen::MatrixXd MoGSpec::effective_covariance(std::size_t c) const {
  Eigen::MatrixXd s = covariances.at(c);
  s.diagonal().array() += noise_var;
  return s;
}

std::size_t wishart_df(std::size_t d) { return std::max<std::size_t>(7, d + 1); }

MoGSpec sample_mog_spec(std::size_t d, std::uint64_t seed) {
  if (d == 0) throw InputError("sample_mog_spec: dimension must be at least 1");
  const auto dd = static_cast<Eigen::Index>(d);
  MoGSpec spec;
  spec.means.resize(4, dd);
  Rng mean_rng = Rng::stream(seed, "mog-means");
  std::uniform_real_distribution<double> unif(-10.0, 10.0);
  for (Eigen::Index c = 0; c < 4; ++c)
    for (Eigen::Index j = 0; j < dd; ++j) spec.means(c, j) = unif(mean_rng);

  // W = sum_k g_k g_k^T with g_k ~ N(0, 2 I).
  const std::size_t df = wishart_df(d);
  const double scale = std::sqrt(2.0);
  for (std::size_t c = 0; c < 4; ++c) {
    Rng rng = Rng::stream(seed, "mog-wishart", c);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd g(dd, static_cast<Eigen::Index>(df));
    for (Eigen::Index k = 0; k < g.cols(); ++k)
      for (Eigen::Index j = 0; j < dd; ++j) g(j, k) = scale * normal(rng);
    spec.covariances.push_back(g * g.transpose());
    cholesky_factor(spec.covariances.back(), "sample_mog_spec");
  }
  return spec;
}

LabeledSample sample_mog_labeled(const MoGSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InputError("sample_mog: n must be at least 1");
  const Eigen::Index d = spec.dim();
  std::vector<Eigen::MatrixXd> factors;
  for (std::size_t c = 0; c < 4; ++c) factors.push_back(cholesky_factor(spec.effective_covariance(c), "sample_mog"));

  Rng comp_rng = Rng::stream(seed, "mog-component");
  Rng point_rng = Rng::stream(seed, "mog-point");
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledSample out;
  out.points.resize(static_cast<Eigen::Index>(n), d);
  out.components.resize(n);
  Eigen::VectorXd z(d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = draw_component(spec.pis, comp_rng.uniform01());
    out.components[i] = c;
    for (Eigen::Index j = 0; j < d; ++j) z[j] = normal(point_rng);
    out.points.row(static_cast<Eigen::Index>(i)) =
        (spec.means.row(static_cast<Eigen::Index>(c)).transpose() + factors[c] * z).transpose();
  }
  return out;
}

DataMatrix sample_mog(const MoGSpec& spec, std::size_t n, std::uint64_t seed) {
  return sample_mog_labeled(spec, n, seed).points;
}

TDistSpec make_t_spec(std::size_t d, double df, std::uint64_t seed) {
  if (d == 0) throw InputError("make_t_spec: dimension must be at least 1");
  if (!(df > 0.0)) throw InputError("t distribution: df must be positive, got " + std::to_string(df));
  const auto dd = static_cast<Eigen::Index>(d);
  Rng rng = Rng::stream(seed, "t-scale");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(dd, dd);
  for (Eigen::Index i = 0; i < dd; ++i)
    for (Eigen::Index j = 0; j < dd; ++j) a(i, j) = normal(rng);
  TDistSpec spec;
  spec.mean = Eigen::VectorXd::Zero(dd);
  spec.cov = a.transpose() * a / static_cast<double>(d);
  spec.cov.diagonal().array() += 1.0;
  spec.df = df;
  return spec;
}

DataMatrix sample_t(const TDistSpec& spec, std::size_t n, std::uint64_t seed) {
  if (!(spec.df > 0.0)) throw InputError("t distribution: df must be positive, got " + std::to_string(spec.df));
  if (n == 0) throw InputError("sample_t: n must be at least 1");
  const Eigen::Index d = spec.mean.size();
  const Eigen::MatrixXd l = cholesky_factor(spec.cov, "sample_t");
  Rng z_rng = Rng::stream(seed, "t-normal");
  Rng w_rng = Rng::stream(seed, "t-chi2");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::chi_squared_distribution<double> chi2(spec.df);
  DataMatrix out(static_cast<Eigen::Index>(n), d);
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) z[j] = normal(z_rng);
    const double w = chi2(w_rng);
    out.row(i) = (spec.mean + l * z * std::sqrt(spec.df / w)).transpose();
  }
  return out;
}

DataMatrix sample_t(std::size_t d, double df, std::size_t n, std::uint64_t seed) {
  return sample_t(make_t_spec(d, df, derive_seed(seed, "t-spec")), n, derive_seed(seed, "t-sample"));
}

double loss_against_mog(const MeanEstimate& est, const MoGSpec& spec) {
  const Eigen::Index d = spec.dim();
  if (est.dim() != d) {
    throw InputError("loss_against_mog: estimate has dimension " + std::to_string(est.dim()) +
                     " but the mixture has " + std::to_string(d));
  }
  const double t2 = est.bandwidth.theta2();
  const Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(
      est.corruption.variances(static_cast<std::size_t>(d)).data(), d);
  std::vector<Eigen::MatrixXd> eff;
  for (std::size_t c = 0; c < 4; ++c) eff.push_back(spec.effective_covariance(c));

  double cross = 0.0;
  for (std::size_t c = 0; c < 4; ++c) {
    if (spec.pis[c] == 0.0) continue;
    // One factorization per component; the pair terms differ only in the offset.
    Eigen::MatrixXd s = eff[c];
    s.diagonal() += e;
    s.diagonal().array() += t2;
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) throw NumericError("loss_against_mog: covariance is not SPD");
    double log_det = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) log_det += 2.0 * std::log(llt.matrixLLT()(j, j));
    const double log_pref = 0.5 * static_cast<double>(d) * std::log(t2) - 0.5 * log_det;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < est.size(); ++i) {
      const Eigen::VectorXd diff =
          est.base_points.row(i).transpose() - spec.means.row(static_cast<Eigen::Index>(c)).transpose();
      const Eigen::VectorXd w = llt.matrixL().solve(diff);
      acc += est.beta[i] * std::exp(log_pref - 0.5 * w.squaredNorm());
    }
    cross += spec.pis[c] * acc;
  }

  double self = 0.0;
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t c2 = 0; c2 < 4; ++c2) {
      if (spec.pis[c] == 0.0 || spec.pis[c2] == 0.0) continue;
      self += spec.pis[c] * spec.pis[c2] *
              marginal_double_dense(row(spec.means, static_cast<Eigen::Index>(c)), eff[c],
                                    row(spec.means, static_cast<Eigen::Index>(c2)), eff[c2], est.bandwidth);
    }
  }
  return inner_product(est, est) - 2.0 * cross + self;
}

RiskReport make_risk_report(std::vector<double> losses) {
  if (losses.empty()) throw InputError("risk report: need at least one copy");
  RiskReport r;
  r.per_copy_losses = std::move(losses);
  const auto m = static_cast<double>(r.per_copy_losses.size());
  double sum = 0.0;
  for (double v : r.per_copy_losses) sum += v;
  r.mean = sum / m;
  if (r.per_copy_losses.size() > 1) {
    double ss = 0.0;
    for (double v : r.per_copy_losses) ss += (v - r.mean) * (v - r.mean);
    r.std_error = std::sqrt(ss / (m - 1.0) / m);
  }
  return r;
}

std::vector<RiskRow> risk_experiment(const std::vector<std::size_t>& dims, const std::vector<std::size_t>& ns,
                                     const std::vector<EstimatorKind>& estimators, std::size_t copies,
                                     std::uint64_t seed) {
  if (copies == 0) throw InputError("risk_experiment: copies must be at least 1");
  if (dims.empty() || ns.empty() || estimators.empty()) throw InputError("risk_experiment: empty sweep");
  for (const auto& k : estimators) k.validate();
  std::vector<RiskRow> rows;
  for (std::size_t d : dims) {
    for (std::size_t n : ns) {
      if (n < 3) throw InputError("risk_experiment: n must be at least 3");
      std::vector<std::vector<double>> losses(estimators.size());
      for (std::size_t copy = 0; copy < copies; ++copy) {
        const MoGSpec spec = sample_mog_spec(d, spec_seed(seed, "risk-spec", d, copy));
        const DataMatrix xs = sample_mog(spec, n, sample_seed(seed, "risk-sample", d, n, copy));
        const Bandwidth bw = median_heuristic(xs);
        for (std::size_t k = 0; k < estimators.size(); ++k)
          losses[k].push_back(loss_against_mog(fit(xs, bw, estimators[k]), spec));
      }
      for (std::size_t k = 0; k < estimators.size(); ++k)
        rows.push_back({d, n, estimators[k].name(), make_risk_report(std::move(losses[k]))});
    }
  }
  return rows;
}

std::vector<SweepRow> covariance_sweep(std::size_t d, std::size_t n, const std::vector<double>& sigma2_grid,
                                       std::size_t copies, std::uint64_t seed) {
  if (copies == 0) throw InputError("covariance_sweep: copies must be at least 1");
  if (sigma2_grid.empty()) throw InputError("covariance_sweep: empty grid");
  std::vector<std::vector<double>> losses(sigma2_grid.size());
  for (std::size_t copy = 0; copy < copies; ++copy) {
    const MoGSpec spec = sample_mog_spec(d, spec_seed(seed, "sweep-spec", d, copy));
    const DataMatrix xs = sample_mog(spec, n, sample_seed(seed, "sweep-sample", d, n, copy));
    const Bandwidth bw = median_heuristic(xs);
    for (std::size_t g = 0; g < sigma2_grid.size(); ++g) {
      const auto est = fit_with_corruption(xs, bw, CorruptionModel::isotropic(sigma2_grid[g]));
      losses[g].push_back(loss_against_mog(est, spec));
    }
  }
  std::vector<SweepRow> rows;
  for (std::size_t g = 0; g < sigma2_grid.size(); ++g)
    rows.push_back({sigma2_grid[g], make_risk_report(std::move(losses[g]))});
  return rows;
}

std::vector<NllRow> t_nll_experiment(const std::vector<std::size_t>& dims, const std::vector<std::size_t>& ns,
                                     const std::vector<EstimatorKind>& estimators, double df, std::size_t copies,
                                     std::size_t test_size, const DensityOptions& opts, std::uint64_t seed) {
  if (copies == 0) throw InputError("t_nll_experiment: copies must be at least 1");
  if (test_size == 0) throw InputError("t_nll_experiment: test_size must be at least 1");
  if (dims.empty() || ns.empty() || estimators.empty()) throw InputError("t_nll_experiment: empty sweep");
  for (const auto& k : estimators) k.validate();
  std::vector<NllRow> rows;
  for (std::size_t d : dims) {
    for (std::size_t n : ns) {
      std::vector<std::vector<double>> nlls(estimators.size());
      for (std::size_t copy = 0; copy < copies; ++copy) {
        const TDistSpec spec = make_t_spec(d, df, spec_seed(seed, "t-spec", d, copy));
        const DataMatrix train = sample_t(spec, n, sample_seed(seed, "t-train", d, n, copy));
        const DataMatrix test = sample_t(spec, test_size, spec_seed(seed, "t-test", d, copy));
        const std::uint64_t fit_seed = sample_seed(seed, "t-fit", d, n, copy);
        for (std::size_t k = 0; k < estimators.size(); ++k) {
          const DensityFit f = fit_density(train, estimators[k], opts, fit_seed);
          nlls[k].push_back(nll(f.model, test));
        }
      }
      for (std::size_t k = 0; k < estimators.size(); ++k)
        rows.push_back({d, n, estimators[k].name(), make_risk_report(std::move(nlls[k]))});
    }
  }
  return rows;
}

}  // namespace mkme
