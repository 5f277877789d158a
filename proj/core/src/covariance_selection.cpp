#include "mkme/covariance_selection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mkme/errors.hpp"
#include "mkme/optim.hpp"

namespace mkme {
namespace {

constexpr double kVarianceFloor = 1e-12;

void check_sample(const DataMatrix& xs) {
  if (xs.rows() < 3) {
    throw InputError("LOOCV needs at least 3 examples, got " + std::to_string(xs.rows()));
  }
  if (xs.cols() < 1) throw InputError("LOOCV: data has no columns");
}

}  // namespace

LoocvObjective::LoocvObjective(const DataMatrix& xs, Bandwidth bw)
    : n_(xs.rows()), d_(xs.cols()), bw_(bw) {
  check_sample(xs);
  pair_sq_.resize(n_ * (n_ - 1) / 2, d_);
  Eigen::Index p = 0;
  for (Eigen::Index i = 0; i < n_; ++i)
    for (Eigen::Index j = i + 1; j < n_; ++j, ++p)
      pair_sq_.row(p) = (xs.row(i) - xs.row(j)).array().square();
}

double LoocvObjective::operator()(const CorruptionModel& cov) const {
  const auto e = cov.variances(static_cast<std::size_t>(d_));
  return (*this)(std::span<const double>(e));
}

double LoocvObjective::operator()(std::span<const double> e) const {
  if (static_cast<Eigen::Index>(e.size()) != d_) throw InputError("LOOCV: variance count does not match dimension");
  const double t2 = bw_.theta2();
  Eigen::VectorXd inv_l(d_), inv_q(d_);
  double log_det_l = 0.0, log_det_q = 0.0;
  for (Eigen::Index k = 0; k < d_; ++k) {
    const double ek = e[static_cast<std::size_t>(k)];
    if (!(ek >= 0.0) || !std::isfinite(ek)) throw InputError("LOOCV: variances must be finite and nonnegative");
    const double cl = ek + t2;
    const double cq = 2.0 * ek + t2;
    inv_l[k] = 0.5 / cl;
    inv_q[k] = 0.5 / cq;
    log_det_l += std::log(cl);
    log_det_q += std::log(cq);
  }
  const double half_d_log_t2 = 0.5 * static_cast<double>(d_) * std::log(t2);
  const double log_pl = half_d_log_t2 - 0.5 * log_det_l;
  const double log_pq = half_d_log_t2 - 0.5 * log_det_q;
  const double l_diag = std::exp(log_pl);
  const double q_diag = std::exp(log_pq);

  const Eigen::VectorXd ql = pair_sq_ * inv_l;
  const Eigen::VectorXd qq = pair_sq_ * inv_q;

  // Column sums of L and row sums of Q, both symmetric.
  Eigen::VectorXd col_l = Eigen::VectorXd::Constant(n_, l_diag);
  Eigen::VectorXd row_q = Eigen::VectorXd::Constant(n_, q_diag);
  Eigen::Index p = 0;
  for (Eigen::Index i = 0; i < n_; ++i) {
    for (Eigen::Index j = i + 1; j < n_; ++j, ++p) {
      const double lij = std::exp(log_pl - ql[p]);
      const double qij = std::exp(log_pq - qq[p]);
      col_l[i] += lij;
      col_l[j] += lij;
      row_q[i] += qij;
      row_q[j] += qij;
    }
  }
  const double total_q = row_q.sum();
  const double m = static_cast<double>(n_ - 1);
  double score = 0.0;
  for (Eigen::Index i = 0; i < n_; ++i) {
    score += 1.0 - (2.0 / m) * (col_l[i] - l_diag) + (total_q - 2.0 * row_q[i] + q_diag) / (m * m);
  }
  return score / static_cast<double>(n_);
}

double loocv_objective(const DataMatrix& xs, Bandwidth bw, const CorruptionModel& cov) {
  cov.check_dimension(static_cast<std::size_t>(xs.cols()));
  return LoocvObjective(xs, bw)(cov);
}

std::pair<double, double> default_isotropic_bounds(Bandwidth bw) { return {0.0, 10.0 * bw.theta2()}; }

LoocvScore select_isotropic(const DataMatrix& xs, Bandwidth bw, double lo, double hi) {
  if (!(lo >= 0.0) || !(lo < hi)) {
    throw InputError("select_isotropic: bounds must satisfy 0 <= lo < hi");
  }
  const LoocvObjective objective(xs, bw);
  const auto d = static_cast<std::size_t>(xs.cols());
  std::vector<double> e(d);
  auto f = [&](double s2) {
    std::fill(e.begin(), e.end(), s2);
    return objective(std::span<const double>(e));
  };
  const auto best = optim::minimize_scalar(f, {lo, hi, 1e-6 * (hi - lo), 200});
  return {best.fx, CorruptionModel::isotropic(best.x), best.evaluations};
}

LoocvScore select_isotropic(const DataMatrix& xs, Bandwidth bw) {
  const auto [lo, hi] = default_isotropic_bounds(bw);
  return select_isotropic(xs, bw, lo, hi);
}

LoocvScore select_diagonal(const DataMatrix& xs, Bandwidth bw, std::span<const double> init) {
  const LoocvObjective objective(xs, bw);
  const auto d = objective.dim();
  if (static_cast<Eigen::Index>(init.size()) != d) {
    throw InputError("select_diagonal: init has " + std::to_string(init.size()) + " entries, data dimension is " +
                     std::to_string(d));
  }
  Eigen::VectorXd u(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double v = init[static_cast<std::size_t>(k)];
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError("select_diagonal: initial variances must be positive");
    u[k] = std::log(v);
  }
  std::vector<double> e(static_cast<std::size_t>(d));
  auto to_variances = [&](const Eigen::VectorXd& logs) {
    for (Eigen::Index k = 0; k < d; ++k) e[static_cast<std::size_t>(k)] = std::max(std::exp(logs[k]), kVarianceFloor);
  };
  auto f = [&](const Eigen::VectorXd& logs) {
    to_variances(logs);
    return objective(std::span<const double>(e));
  };
  optim::NelderMeadOptions opts;
  opts.initial_step = 0.25;
  opts.f_tol = 1e-8;
  opts.max_evals = 500 * static_cast<int>(d);
  const auto res = optim::nelder_mead(f, u, opts);
  to_variances(res.x);
  return {res.fx, CorruptionModel::diagonal(e), res.evaluations};
}

LoocvScore select_covariance(const DataMatrix& xs, Bandwidth bw, CorruptionFamily family) {
  auto iso = select_isotropic(xs, bw);
  if (family == CorruptionFamily::Isotropic) return iso;

  const auto d = static_cast<std::size_t>(xs.cols());
  const double s2 = iso.cov.variance(0);
  const std::vector<double> init(d, s2 > 0.0 ? s2 : 1e-3 * bw.theta2());
  auto diag = select_diagonal(xs, bw, init);
  diag.evaluations += iso.evaluations;

  const double dirac = loocv_objective(xs, bw, CorruptionModel::diagonal(std::vector<double>(d, 0.0)));
  LoocvScore best = diag;
  if (iso.value < best.value) best = {iso.value, CorruptionModel::diagonal(std::vector<double>(d, s2)), 0};
  if (dirac <= best.value) best = {dirac, CorruptionModel::diagonal(std::vector<double>(d, 0.0)), 0};
  best.evaluations = diag.evaluations + 1;
  return best;
}

}  // namespace mkme
