#include "mkme/estimators.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "mkme/errors.hpp"

namespace mkme {
namespace {

Eigen::VectorXd uniform_weights(Eigen::Index n) {
  return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
}

void check_nonempty(const DataMatrix& xs) {
  if (xs.rows() == 0) throw InputError("empty sample");
  if (xs.cols() == 0) throw InputError("sample has no columns");
}

// Solves (K + 1e-10 n I) z = rhs, rejecting solutions whose residual shows
// the system is singular beyond the ridge.
Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& k, const Eigen::VectorXd& rhs) {
  const auto n = k.rows();
  Eigen::MatrixXd a = k;
  a.diagonal().array() += 1e-10 * static_cast<double>(n);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw NumericError("Gram matrix factorization failed");
  Eigen::VectorXd z = ldlt.solve(rhs);
  const double resid = (a * z - rhs).norm();
  if (!z.allFinite() || resid > 1e-6 * std::max(1.0, rhs.norm())) {
    throw NumericError("Gram matrix is numerically singular beyond the ridge tolerance");
  }
  return z;
}

MeanEstimate linear_form(const DataMatrix& xs, Bandwidth bw, double total_variance, LinearCoefficient coef) {
  check_nonempty(xs);
  if (!(total_variance >= 0.0) || !std::isfinite(total_variance)) {
    throw InputError("linear approximation: corruption variance must be finite and nonnegative");
  }
  const auto n = xs.rows();
  const double t2 = bw.theta2();
  const Eigen::VectorXd ones = uniform_weights(n);
  const double lead = coef == LinearCoefficient::ReducesToKme ? (2.0 * t2 + total_variance) / (2.0 * t2)
                                                              : (t2 + total_variance) / (2.0 * t2);
  Eigen::VectorXd beta = lead * ones;
  if (total_variance > 0.0) {
    const auto k = gram(xs, xs, bw, GramKind::Rbf).entries;
    const auto kp = gram(xs, xs, bw, GramKind::KPrime).entries;
    const Eigen::VectorXd z = ridge_solve(k, kp * ones);
    beta -= (total_variance / (2.0 * t2 * t2)) * z;
  }
  return {xs, std::move(beta), CorruptionModel::dirac(), bw};
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

MeanEstimate::MeanEstimate(DataMatrix points, Eigen::VectorXd weights, CorruptionModel cov, Bandwidth bw)
    : base_points(std::move(points)), beta(std::move(weights)), corruption(std::move(cov)), bandwidth(bw) {
  if (beta.size() != base_points.rows()) {
    throw InputError("MeanEstimate: weight count " + std::to_string(beta.size()) + " does not match " +
                     std::to_string(base_points.rows()) + " base points");
  }
  if (!beta.allFinite() || !base_points.allFinite()) throw InputError("MeanEstimate: non-finite entries");
  corruption.check_dimension(static_cast<std::size_t>(base_points.cols()));
}

EstimatorKind EstimatorKind::skmse(std::vector<double> grid) {
  return {Kind::SKMSE, grid.empty() ? default_lambda_grid() : std::move(grid)};
}

EstimatorKind EstimatorKind::fkmse(std::vector<double> grid) {
  return {Kind::FKMSE, grid.empty() ? default_lambda_grid() : std::move(grid)};
}

EstimatorKind EstimatorKind::parse(std::string_view name) {
  const auto s = lower(name);
  if (s == "kme") return kme();
  if (s == "skmse" || s == "s-kmse") return skmse();
  if (s == "fkmse" || s == "f-kmse") return fkmse();
  if (s == "mkme") return mkme();
  if (s == "mmkme") return mmkme();
  if (s == "mkme-linear" || s == "mkme_linear") return mkme_linear();
  if (s == "mmkme-linear" || s == "mmkme_linear") return mmkme_linear();
  throw InputError("unknown estimator '" + std::string(name) + "'");
}

std::string EstimatorKind::name() const {
  switch (kind) {
    case Kind::KME: return "kme";
    case Kind::SKMSE: return "skmse";
    case Kind::FKMSE: return "fkmse";
    case Kind::MKME: return "mkme";
    case Kind::MMKME: return "mmkme";
    case Kind::MKMELinear: return "mkme-linear";
    case Kind::MMKMELinear: return "mmkme-linear";
  }
  return "unknown";
}

void EstimatorKind::validate() const {
  if (!is_shrinkage()) return;
  if (lambda_grid.empty()) throw InputError(name() + ": lambda grid is empty");
  for (double l : lambda_grid) {
    if (!(l > 0.0) || !std::isfinite(l)) throw InputError(name() + ": lambda grid values must be positive and finite");
  }
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid(20);
  for (int i = 0; i < 20; ++i) grid[static_cast<std::size_t>(i)] = std::pow(10.0, -6.0 + 8.0 * i / 19.0);
  return grid;
}

std::vector<EstimatorKind> parse_estimator_list(std::string_view list) {
  std::vector<EstimatorKind> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const auto token = list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (!token.empty()) out.push_back(EstimatorKind::parse(token));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw InputError("estimator list is empty");
  return out;
}

MeanEstimate fit_kme(const DataMatrix& xs, Bandwidth bw) {
  check_nonempty(xs);
  return {xs, uniform_weights(xs.rows()), CorruptionModel::dirac(), bw};
}

MeanEstimate fit_with_corruption(const DataMatrix& xs, Bandwidth bw, const CorruptionModel& cov) {
  check_nonempty(xs);
  return {xs, uniform_weights(xs.rows()), cov, bw};
}

MeanEstimate fit_marginalized(const DataMatrix& xs, Bandwidth bw, CorruptionFamily family) {
  check_nonempty(xs);
  return fit_with_corruption(xs, bw, select_covariance(xs, bw, family).cov);
}

MeanEstimate fit_linear_mkme(const DataMatrix& xs, Bandwidth bw, double sigma2, LinearCoefficient coef) {
  return linear_form(xs, bw, static_cast<double>(xs.cols()) * sigma2, coef);
}

MeanEstimate fit_linear_mmkme(const DataMatrix& xs, Bandwidth bw, std::span<const double> variances,
                              LinearCoefficient coef) {
  if (static_cast<Eigen::Index>(variances.size()) != xs.cols()) {
    throw InputError("fit_linear_mmkme: variance count does not match data dimension");
  }
  double total = 0.0;
  for (double v : variances) {
    if (!(v >= 0.0)) throw InputError("fit_linear_mmkme: variances must be nonnegative");
    total += v;
  }
  return linear_form(xs, bw, total, coef);
}

Eigen::VectorXd skmse_weights(Eigen::Index n, double lambda) {
  if (n < 1) throw InputError("skmse_weights: empty sample");
  return uniform_weights(n) / (1.0 + lambda);
}

Eigen::VectorXd fkmse_weights(const Eigen::MatrixXd& gram, double lambda) {
  const auto n = gram.rows();
  if (n < 1 || gram.cols() != n) throw InputError("fkmse_weights: Gram must be square and nonempty");
  Eigen::MatrixXd a = gram;
  a.diagonal().array() += static_cast<double>(n) * lambda;
  const Eigen::VectorXd rhs = gram * uniform_weights(n);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw NumericError("fkmse_weights: factorization failed");
  Eigen::VectorXd beta = ldlt.solve(rhs);
  if (!beta.allFinite() || (a * beta - rhs).norm() > 1e-6 * std::max(1.0, rhs.norm())) {
    throw NumericError("fkmse_weights: system is singular beyond tolerance");
  }
  return beta;
}

std::vector<double> shrinkage_loocv_scores(const Eigen::MatrixXd& g, EstimatorKind::Kind kind,
                                           const std::vector<double>& grid) {
  const auto n = g.rows();
  if (n < 3 || g.cols() != n) throw InputError("shrinkage LOOCV needs a square Gram with n >= 3");
  if (kind != EstimatorKind::Kind::SKMSE && kind != EstimatorKind::Kind::FKMSE) {
    throw InputError("shrinkage LOOCV: not a shrinkage estimator");
  }
  const double m = static_cast<double>(n - 1);
  std::vector<double> scores(grid.size(), 0.0);

  if (kind == EstimatorKind::Kind::SKMSE) {
    // |phi_i - s m_i|^2 = G_ii - 2 s <phi_i, m_i> + s^2 |m_i|^2, m_i the
    // leave-one-out empirical mean, s = 1 / (1 + lambda).
    const Eigen::VectorXd rows = g.rowwise().sum();
    const double total = rows.sum();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double cross = (rows[i] - g(i, i)) / m;
      const double norm2 = (total - 2.0 * rows[i] + g(i, i)) / (m * m);
      for (std::size_t l = 0; l < grid.size(); ++l) {
        const double s = 1.0 / (1.0 + grid[l]);
        scores[l] += g(i, i) - 2.0 * s * cross + s * s * norm2;
      }
    }
  } else {
    // One eigendecomposition per fold; each lambda then costs O(n).
    std::vector<Eigen::Index> keep(static_cast<std::size_t>(n - 1));
    for (Eigen::Index i = 0; i < n; ++i) {
      std::size_t c = 0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) keep[c++] = j;
      Eigen::MatrixXd sub(n - 1, n - 1);
      Eigen::VectorXd col(n - 1);
      for (Eigen::Index a = 0; a < n - 1; ++a) {
        col[a] = g(keep[static_cast<std::size_t>(a)], i);
        for (Eigen::Index b = 0; b < n - 1; ++b) sub(a, b) = g(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]);
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sub);
      if (eig.info() != Eigen::Success) throw NumericError("shrinkage LOOCV: eigendecomposition failed");
      const Eigen::VectorXd s = eig.eigenvalues().cwiseMax(0.0);
      const Eigen::VectorXd u = eig.eigenvectors().transpose() * Eigen::VectorXd::Constant(n - 1, 1.0 / m);
      const Eigen::VectorXd w = eig.eigenvectors().transpose() * col;
      for (std::size_t l = 0; l < grid.size(); ++l) {
        double cross = 0.0, norm2 = 0.0;
        for (Eigen::Index k = 0; k < n - 1; ++k) {
          const double denom = s[k] + m * grid[l];
          const double f = denom > 0.0 ? s[k] / denom : 0.0;
          cross += f * u[k] * w[k];
          norm2 += s[k] * f * f * u[k] * u[k];
        }
        scores[l] += g(i, i) - 2.0 * cross + norm2;
      }
    }
  }
  for (double& s : scores) s /= static_cast<double>(n);
  return scores;
}

double select_shrinkage_lambda(const Eigen::MatrixXd& gram, EstimatorKind::Kind kind, const std::vector<double>& grid) {
  if (grid.empty()) throw InputError("lambda grid is empty");
  const auto scores = shrinkage_loocv_scores(gram, kind, grid);
  const auto best = std::min_element(scores.begin(), scores.end());
  return grid[static_cast<std::size_t>(best - scores.begin())];
}

MeanEstimate fit_shrinkage(const DataMatrix& xs, Bandwidth bw, const EstimatorKind& kind) {
  if (!kind.is_shrinkage()) throw InputError("fit_shrinkage: " + kind.name() + " is not a shrinkage estimator");
  return fit(xs, bw, kind);
}

EstimatorParams select_params(const DataMatrix& xs, Bandwidth bw, const EstimatorKind& kind) {
  check_nonempty(xs);
  kind.validate();
  EstimatorParams p{kind, 0.0, CorruptionModel::dirac()};
  using K = EstimatorKind::Kind;
  switch (kind.kind) {
    case K::KME:
      break;
    case K::SKMSE:
    case K::FKMSE:
      p.lambda = select_shrinkage_lambda(gram(xs, xs, bw).entries, kind.kind, kind.lambda_grid);
      break;
    case K::MKME:
    case K::MKMELinear:
      p.cov = select_covariance(xs, bw, CorruptionFamily::Isotropic).cov;
      break;
    case K::MMKME:
    case K::MMKMELinear:
      p.cov = select_covariance(xs, bw, CorruptionFamily::Diagonal).cov;
      break;
  }
  return p;
}

MeanEstimate fit_with_params(const DataMatrix& xs, Bandwidth bw, const EstimatorParams& p) {
  check_nonempty(xs);
  using K = EstimatorKind::Kind;
  const auto d = static_cast<std::size_t>(xs.cols());
  switch (p.kind.kind) {
    case K::KME:
      return fit_kme(xs, bw);
    case K::SKMSE:
      return {xs, skmse_weights(xs.rows(), p.lambda), CorruptionModel::dirac(), bw};
    case K::FKMSE:
      return {xs, fkmse_weights(gram(xs, xs, bw).entries, p.lambda), CorruptionModel::dirac(), bw};
    case K::MKME:
    case K::MMKME:
      return fit_with_corruption(xs, bw, p.cov);
    case K::MKMELinear:
    case K::MMKMELinear: {
      const auto e = p.cov.variances(d);
      return fit_linear_mmkme(xs, bw, e);
    }
  }
  throw InputError("fit_with_params: unknown estimator");
}

MeanEstimate fit(const DataMatrix& xs, Bandwidth bw, const EstimatorKind& kind) {
  return fit_with_params(xs, bw, select_params(xs, bw, kind));
}

double evaluate_at(const MeanEstimate& est, PointView y) {
  if (static_cast<Eigen::Index>(y.size()) != est.dim()) throw InputError("evaluate_at: dimension mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < est.size(); ++i) {
    s += est.beta[i] * marginal_single(row(est.base_points, i), est.corruption, y, est.bandwidth);
  }
  return s;
}

double inner_product(const MeanEstimate& a, const MeanEstimate& b) {
  if (!(a.bandwidth == b.bandwidth)) throw InputError("inner_product: bandwidth mismatch");
  const auto g = marginal_gram(a.base_points, a.corruption, b.base_points, b.corruption, a.bandwidth).entries;
  return a.beta.dot(g * b.beta);
}

double rkhs_distance2(const MeanEstimate& a, const MeanEstimate& b) {
  return inner_product(a, a) - 2.0 * inner_product(a, b) + inner_product(b, b);
}

}  // namespace mkme
