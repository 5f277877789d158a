#include "mkme/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>

#include "mkme/errors.hpp"

namespace mkme {
namespace {

void check_same_dim(PointView x, PointView y) {
  if (x.size() != y.size()) {
    throw InputError("dimension mismatch: " + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()));
  }
}

double squared_distance(PointView x, PointView y) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double t = x[j] - y[j];
    s += t * t;
  }
  return s;
}

void check_variance(double v) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw InputError("corruption variance must be finite and nonnegative, got " + std::to_string(v));
  }
}

// Per-coordinate combined scale c_j = a_j + b_j + theta^2 and the log prefactor
// (d/2) log theta^2 - 1/2 sum_j log c_j, shared by every pair in a Gram.
struct CombinedScale {
  std::vector<double> inv_c;
  double log_prefactor = 0.0;

  CombinedScale(const CorruptionModel& a, const CorruptionModel& b, std::size_t d, Bandwidth bw) {
    inv_c.resize(d);
    const double log_t2 = std::log(bw.theta2());
    double log_det = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = a.variance(j) + b.variance(j) + bw.theta2();
      inv_c[j] = 1.0 / c;
      log_det += std::log(c);
    }
    log_prefactor = 0.5 * static_cast<double>(d) * log_t2 - 0.5 * log_det;
  }

  double operator()(PointView x, PointView y) const {
    double q = 0.0;
    for (std::size_t j = 0; j < inv_c.size(); ++j) {
      const double t = x[j] - y[j];
      q += t * t * inv_c[j];
    }
    return std::exp(log_prefactor - 0.5 * q);
  }
};

void check_nonempty_same_dim(const DataMatrix& xs, const DataMatrix& ys) {
  if (xs.rows() == 0 || ys.rows() == 0) throw InputError("gram: empty input");
  if (xs.cols() != ys.cols()) {
    throw InputError("gram: dimension mismatch " + std::to_string(xs.cols()) + " vs " +
                     std::to_string(ys.cols()));
  }
}

template <typename Fn>
Eigen::MatrixXd fill_gram(const DataMatrix& xs, const DataMatrix& ys, Fn&& kernel) {
  const bool same = &xs == &ys || (xs.rows() == ys.rows() && xs == ys);
  Eigen::MatrixXd g(xs.rows(), ys.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const auto xi = row(xs, i);
    if (same) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double v = kernel(xi, row(ys, j));
        g(i, j) = v;
        g(j, i) = v;
      }
    } else {
      for (Eigen::Index j = 0; j < ys.rows(); ++j) g(i, j) = kernel(xi, row(ys, j));
    }
  }
  return g;
}

}  // namespace

Bandwidth::Bandwidth(double theta2) : theta2_(theta2) {
  if (!(theta2 > 0.0) || !std::isfinite(theta2)) {
    throw InputError("bandwidth theta^2 must be positive and finite, got " + std::to_string(theta2));
  }
}

CorruptionModel CorruptionModel::isotropic(double sigma2) {
  check_variance(sigma2);
  CorruptionModel m;
  m.v_ = Isotropic{sigma2};
  return m;
}

CorruptionModel CorruptionModel::diagonal(std::vector<double> variances) {
  for (double v : variances) check_variance(v);
  CorruptionModel m;
  m.v_ = Diagonal{std::move(variances)};
  return m;
}

bool CorruptionModel::is_dirac() const {
  if (std::holds_alternative<Dirac>(v_)) return true;
  if (const auto* iso = std::get_if<Isotropic>(&v_)) return iso->sigma2 == 0.0;
  const auto& e = std::get<Diagonal>(v_).variances;
  return std::all_of(e.begin(), e.end(), [](double v) { return v == 0.0; });
}

double CorruptionModel::variance(std::size_t j) const {
  if (std::holds_alternative<Dirac>(v_)) return 0.0;
  if (const auto* iso = std::get_if<Isotropic>(&v_)) return iso->sigma2;
  return std::get<Diagonal>(v_).variances.at(j);
}

std::vector<double> CorruptionModel::variances(std::size_t d) const {
  check_dimension(d);
  std::vector<double> out(d);
  for (std::size_t j = 0; j < d; ++j) out[j] = variance(j);
  return out;
}

double CorruptionModel::trace(std::size_t d) const {
  double s = 0.0;
  for (double v : variances(d)) s += v;
  return s;
}

void CorruptionModel::check_dimension(std::size_t d) const {
  if (const auto* diag = std::get_if<Diagonal>(&v_); diag && diag->variances.size() != d) {
    throw InputError("diagonal corruption has " + std::to_string(diag->variances.size()) +
                     " entries but data has dimension " + std::to_string(d));
  }
}

std::string CorruptionModel::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (std::holds_alternative<Dirac>(v_)) {
    os << "dirac";
  } else if (const auto* iso = std::get_if<Isotropic>(&v_)) {
    os << "isotropic(" << iso->sigma2 << ")";
  } else {
    os << "diagonal(";
    const auto& e = std::get<Diagonal>(v_).variances;
    for (std::size_t j = 0; j < e.size(); ++j) os << (j ? ";" : "") << e[j];
    os << ")";
  }
  return os.str();
}

bool operator==(const CorruptionModel::Dirac&, const CorruptionModel::Dirac&) { return true; }
bool operator==(const CorruptionModel::Isotropic& a, const CorruptionModel::Isotropic& b) {
  return a.sigma2 == b.sigma2;
}
bool operator==(const CorruptionModel::Diagonal& a, const CorruptionModel::Diagonal& b) {
  return a.variances == b.variances;
}
bool operator==(const CorruptionModel& a, const CorruptionModel& b) { return a.v_ == b.v_; }

CorruptionModel average(const CorruptionModel& a, const CorruptionModel& b, std::size_t d) {
  a.check_dimension(d);
  b.check_dimension(d);
  if (std::holds_alternative<CorruptionModel::Dirac>(a.variant()) &&
      std::holds_alternative<CorruptionModel::Dirac>(b.variant())) {
    return CorruptionModel::dirac();
  }
  if (a.is_isotropic() && b.is_isotropic()) {
    return CorruptionModel::isotropic(0.5 * (a.variance(0) + b.variance(0)));
  }
  std::vector<double> e(d);
  for (std::size_t j = 0; j < d; ++j) e[j] = 0.5 * (a.variance(j) + b.variance(j));
  return CorruptionModel::diagonal(std::move(e));
}

double rbf(PointView x, PointView y, Bandwidth bw) {
  check_same_dim(x, y);
  return std::exp(-squared_distance(x, y) / (2.0 * bw.theta2()));
}

double k_prime(PointView x, PointView y, Bandwidth bw) {
  check_same_dim(x, y);
  const double r2 = squared_distance(x, y);
  return std::exp(-r2 / (2.0 * bw.theta2())) * r2;
}

double marginal_single(PointView x_center, const CorruptionModel& cov, PointView y, Bandwidth bw) {
  return marginal_double(x_center, cov, y, CorruptionModel::dirac(), bw);
}

double marginal_double(PointView x, const CorruptionModel& cov_x, PointView y,
                       const CorruptionModel& cov_y, Bandwidth bw) {
  check_same_dim(x, y);
  cov_x.check_dimension(x.size());
  cov_y.check_dimension(x.size());
  if (cov_x.is_dirac() && cov_y.is_dirac()) return rbf(x, y, bw);
  return CombinedScale(cov_x, cov_y, x.size(), bw)(x, y);
}

double marginal_double_dense(PointView x, const Eigen::MatrixXd& cov_x, PointView y,
                             const Eigen::MatrixXd& cov_y, Bandwidth bw) {
  check_same_dim(x, y);
  const auto d = static_cast<Eigen::Index>(x.size());
  if (cov_x.rows() != d || cov_x.cols() != d || cov_y.rows() != d || cov_y.cols() != d) {
    throw InputError("marginal_double_dense: covariance shape does not match dimension");
  }
  Eigen::MatrixXd s = cov_x + cov_y;
  s.diagonal().array() += bw.theta2();
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw NumericError("marginal_double_dense: covariance is not SPD");
  Eigen::VectorXd diff(d);
  for (Eigen::Index j = 0; j < d; ++j) diff[j] = x[j] - y[j];
  const Eigen::VectorXd w = llt.matrixL().solve(diff);
  const auto& l = llt.matrixLLT();
  double log_det = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) log_det += 2.0 * std::log(l(j, j));
  const double log_val = 0.5 * static_cast<double>(d) * std::log(bw.theta2()) - 0.5 * log_det -
                         0.5 * w.squaredNorm();
  return std::exp(log_val);
}

GramMatrix gram(const DataMatrix& xs, const DataMatrix& ys, Bandwidth bw, GramKind kind) {
  check_nonempty_same_dim(xs, ys);
  switch (kind) {
    case GramKind::Rbf:
      return {fill_gram(xs, ys, [bw](PointView a, PointView b) { return rbf(a, b, bw); }), kind};
    case GramKind::KPrime:
      return {fill_gram(xs, ys, [bw](PointView a, PointView b) { return k_prime(a, b, bw); }), kind};
    case GramKind::Marginalized:
      break;
  }
  throw InputError("gram: use marginal_gram for marginalized kernels");
}

GramMatrix marginal_gram(const DataMatrix& xs, const CorruptionModel& cov, const DataMatrix& ys,
                         const CorruptionModel& cov2, Bandwidth bw) {
  check_nonempty_same_dim(xs, ys);
  const auto d = static_cast<std::size_t>(xs.cols());
  cov.check_dimension(d);
  cov2.check_dimension(d);
  if (cov.is_dirac() && cov2.is_dirac()) {
    return {gram(xs, ys, bw, GramKind::Rbf).entries, GramKind::Marginalized};
  }
  // The combined scale depends only on cov + cov2, so xs == ys gives a
  // symmetric Gram even when the two models differ.
  const CombinedScale scale(cov, cov2, d, bw);
  return {fill_gram(xs, ys, scale), GramKind::Marginalized};
}

Bandwidth median_heuristic(const DataMatrix& xs) {
  const auto n = xs.rows();
  if (n < 2) throw InputError("median_heuristic: need at least two points");
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d2.push_back(squared_distance(row(xs, i), row(xs, j)));
  const auto mid = d2.begin() + static_cast<std::ptrdiff_t>((d2.size() - 1) / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  if (!(*mid > 0.0)) throw InputError("median_heuristic: median pairwise distance is zero");
  return Bandwidth(*mid);
}

}  // namespace mkme
