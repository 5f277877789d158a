#include "mkme/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "mkme/errors.hpp"
#include "mkme/optim.hpp"
#include "mkme/rng.hpp"

namespace mkme {
namespace {

double sq_dist(const DataMatrix& a, Eigen::Index i, const DataMatrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

// Nearest center, ties to the lower index.
std::pair<Eigen::Index, double> nearest(const DataMatrix& xs, Eigen::Index i, const DataMatrix& centers) {
  Eigen::Index best = 0;
  double best_d = sq_dist(xs, i, centers, 0);
  for (Eigen::Index c = 1; c < centers.rows(); ++c) {
    const double d = sq_dist(xs, i, centers, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return {best, best_d};
}

DataMatrix kmeanspp_seed(const DataMatrix& xs, std::size_t clusters, Rng& rng) {
  const auto n = xs.rows();
  const auto k = static_cast<Eigen::Index>(clusters);
  DataMatrix centers(k, xs.cols());
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  auto first = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  centers.row(0) = xs.row(first);
  used[static_cast<std::size_t>(first)] = true;
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = sq_dist(xs, i, centers, 0);

  for (Eigen::Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = -1;
    if (total > 0.0) {
      const double target = rng.uniform01() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        for (Eigen::Index i = n - 1; i >= 0; --i)
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
      }
    } else {
      // Every point coincides with a center: take the next unused row.
      for (Eigen::Index i = 0; i < n; ++i)
        if (!used[static_cast<std::size_t>(i)]) {
          pick = i;
          break;
        }
    }
    used[static_cast<std::size_t>(pick)] = true;
    centers.row(c) = xs.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(xs, i, centers, c));
  }
  return centers;
}

double log_gaussian_diag(const DataMatrix& x, Eigen::Index i, const GaussianMixture& g, Eigen::Index c) {
  constexpr double log_2pi = 1.8378770664093454835606594728112;
  double s = 0.0;
  for (Eigen::Index j = 0; j < g.dim(); ++j) {
    const double v = g.variances(c, j);
    const double t = x(i, j) - g.means(c, j);
    s += log_2pi + std::log(v) + t * t / v;
  }
  return -0.5 * s;
}

// Equality-constrained minimizer on the support of alpha; returns nothing
// useful (empty) when the KKT system is singular.
Eigen::VectorXd support_solve(const MixtureQp& qp, const Eigen::VectorXd& alpha) {
  std::vector<Eigen::Index> s;
  for (Eigen::Index c = 0; c < alpha.size(); ++c)
    if (alpha[c] > 0.0) s.push_back(c);
  const auto k = static_cast<Eigen::Index>(s.size());
  if (k == 0) return {};
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
  Eigen::VectorXd rhs(k + 1);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) kkt(a, b) = qp.g(s[static_cast<std::size_t>(a)], s[static_cast<std::size_t>(b)]);
    kkt(a, k) = 1.0;
    kkt(k, a) = 1.0;
    rhs[a] = qp.h[s[static_cast<std::size_t>(a)]];
  }
  rhs[k] = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) return {};
  const Eigen::VectorXd sol = lu.solve(rhs);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(alpha.size());
  for (Eigen::Index a = 0; a < k; ++a) out[s[static_cast<std::size_t>(a)]] = sol[a];
  return out;
}

std::vector<std::size_t> iota_permutation(std::size_t n, std::uint64_t seed, std::string_view purpose) {
  auto rng = Rng::stream(seed, purpose);
  return random_permutation(n, rng);
}

}  // namespace

CorruptionModel GaussianMixture::covariance(Eigen::Index c) const {
  std::vector<double> v(static_cast<std::size_t>(dim()));
  for (Eigen::Index j = 0; j < dim(); ++j) v[static_cast<std::size_t>(j)] = variances(c, j);
  return CorruptionModel::diagonal(std::move(v));
}

void GaussianMixture::validate() const {
  const auto c = components();
  if (c < 1) throw InputError("mixture has no components");
  if (weights.size() != c || variances.rows() != c || variances.cols() != dim()) {
    throw InputError("mixture: inconsistent shapes");
  }
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-10) {
    throw InputError("mixture: weights are not on the probability simplex");
  }
  if ((variances.array() < kVarianceRidge * (1.0 - 1e-12)).any() || !variances.allFinite()) {
    throw InputError("mixture: variance below the ridge floor");
  }
}

GaussianMixture kmeans(const DataMatrix& xs, std::size_t clusters, std::size_t iters, std::uint64_t seed) {
  const auto n = xs.rows();
  if (clusters < 1) throw InputError("kmeans: need at least one cluster");
  if (static_cast<Eigen::Index>(clusters) > n) {
    throw InputError("kmeans: " + std::to_string(clusters) + " clusters for " + std::to_string(n) + " points");
  }
  const auto k = static_cast<Eigen::Index>(clusters);
  auto rng = Rng::stream(seed, "kmeans-init");
  DataMatrix centers = kmeanspp_seed(xs, clusters, rng);
  std::vector<Eigen::Index> assign(static_cast<std::size_t>(n), -1);

  for (std::size_t it = 0; it < std::max<std::size_t>(iters, 1); ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = nearest(xs, i, centers).first;
      if (assign[static_cast<std::size_t>(i)] != c) {
        assign[static_cast<std::size_t>(i)] = c;
        changed = true;
      }
    }
    // Reseed empty clusters from the point farthest from its center.
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (auto a : assign) ++counts[static_cast<std::size_t>(a)];
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])] <= 1) continue;
        const double d = sq_dist(xs, i, centers, assign[static_cast<std::size_t>(i)]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) continue;
      --counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(far)])];
      assign[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      centers.row(c) = xs.row(far);
      changed = true;
    }
    DataMatrix sums = DataMatrix::Zero(k, xs.cols());
    for (Eigen::Index i = 0; i < n; ++i) sums.row(assign[static_cast<std::size_t>(i)]) += xs.row(i);
    for (Eigen::Index c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0) centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    if (!changed) break;
  }

  GaussianMixture g;
  g.means = centers;
  g.variances = DataMatrix::Zero(k, xs.cols());
  g.weights = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = assign[static_cast<std::size_t>(i)];
    g.weights[c] += 1.0;
    g.variances.row(c) += (xs.row(i) - centers.row(c)).array().square().matrix();
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    if (g.weights[c] > 0.0) g.variances.row(c) /= g.weights[c];
  }
  g.variances.array() += kVarianceRidge;
  g.weights /= static_cast<double>(n);
  return g;
}

MixtureQp mixture_qp(const MeanEstimate& est, const GaussianMixture& protos) {
  protos.validate();
  if (est.dim() != protos.dim()) throw InputError("mixture_qp: dimension mismatch");
  const auto c = protos.components();
  std::vector<CorruptionModel> covs;
  covs.reserve(static_cast<std::size_t>(c));
  for (Eigen::Index k = 0; k < c; ++k) covs.push_back(protos.covariance(k));

  MixtureQp qp{Eigen::MatrixXd(c, c), Eigen::VectorXd::Zero(c)};
  for (Eigen::Index a = 0; a < c; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      const double v = marginal_double(row(protos.means, a), covs[static_cast<std::size_t>(a)], row(protos.means, b),
                                       covs[static_cast<std::size_t>(b)], est.bandwidth);
      qp.g(a, b) = v;
      qp.g(b, a) = v;
    }
    for (Eigen::Index i = 0; i < est.size(); ++i) {
      qp.h[a] += est.beta[i] * marginal_double(row(est.base_points, i), est.corruption, row(protos.means, a),
                                               covs[static_cast<std::size_t>(a)], est.bandwidth);
    }
  }
  if (!qp.g.allFinite() || !qp.h.allFinite()) throw NumericError("mixture_qp: non-finite entries");
  return qp;
}

MatchResult match_mixture_detailed(const MeanEstimate& est, const GaussianMixture& protos) {
  const auto qp = mixture_qp(est, protos);
  const double lipschitz = 2.0 * qp.g.cwiseAbs().rowwise().sum().maxCoeff();
  Eigen::VectorXd alpha = optim::project_simplex(protos.weights);
  double f = qp.objective(alpha);

  MatchResult res;
  res.history.push_back(f);
  if (lipschitz > 0.0) {
    for (int it = 0; it < 5000; ++it) {
      const Eigen::VectorXd grad = 2.0 * (qp.g * alpha - qp.h);
      const Eigen::VectorXd next = optim::project_simplex(alpha - grad / lipschitz);
      const double f_next = qp.objective(next);
      ++res.iterations;
      if (f_next > f) break;
      const double gain = f - f_next;
      alpha = next;
      f = f_next;
      res.history.push_back(f);
      if (gain < 1e-10) break;
    }
  }
  const Eigen::VectorXd polished = support_solve(qp, alpha);
  if (polished.size() == alpha.size() && (polished.array() >= 0.0).all()) {
    const double f_pol = qp.objective(polished);
    if (f_pol < f) {
      alpha = polished;
      f = f_pol;
      res.history.push_back(f);
    }
  }
  alpha = alpha.cwiseMax(0.0);
  alpha /= alpha.sum();

  res.mixture = protos;
  res.mixture.weights = alpha;
  res.objective = qp.objective(alpha);
  return res;
}

GaussianMixture match_mixture(const MeanEstimate& est, const GaussianMixture& protos) {
  return match_mixture_detailed(est, protos).mixture;
}

double nll(const GaussianMixture& model, const DataMatrix& test) {
  model.validate();
  if (test.rows() == 0) throw InputError("nll: empty test set");
  if (test.cols() != model.dim()) throw InputError("nll: dimension mismatch");
  std::vector<double> terms(static_cast<std::size_t>(model.components()));
  double total = 0.0;
  for (Eigen::Index i = 0; i < test.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < model.components(); ++c) {
      const double w = model.weights[c];
      terms[static_cast<std::size_t>(c)] =
          w > 0.0 ? std::log(w) + log_gaussian_diag(test, i, model, c) : -std::numeric_limits<double>::infinity();
      mx = std::max(mx, terms[static_cast<std::size_t>(c)]);
    }
    double s = 0.0;
    for (double t : terms) s += std::exp(t - mx);
    total += mx + std::log(s);
  }
  return -total / static_cast<double>(test.rows());
}

DensityFit fit_density(const DataMatrix& train, const EstimatorKind& estimator, const DensityOptions& opts,
                       std::uint64_t seed) {
  if (opts.bw_grid.empty()) throw InputError("fit_density: bandwidth grid is empty");
  for (double m : opts.bw_grid)
    if (!(m > 0.0) || !std::isfinite(m)) throw InputError("fit_density: bandwidth multipliers must be positive");
  if (!(opts.validation_fraction > 0.0 && opts.validation_fraction < 1.0)) {
    throw InputError("fit_density: validation fraction must lie in (0, 1)");
  }
  const auto n = static_cast<std::size_t>(train.rows());
  const auto n_val = static_cast<std::size_t>(std::llround(opts.validation_fraction * static_cast<double>(n)));
  if (n < 4 || n_val < 1 || n - n_val < 3) throw InputError("fit_density: training set too small to split");

  const auto perm = iota_permutation(n, seed, "density-validation");
  const std::vector<std::size_t> val_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  const std::vector<std::size_t> fit_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  const DataMatrix fit_part = select_rows(train, fit_idx);
  const DataMatrix val_part = select_rows(train, val_idx);

  auto fit_at = [&](const DataMatrix& data, double multiplier, std::uint64_t kseed) {
    const auto clusters = std::min<std::size_t>(opts.prototypes, static_cast<std::size_t>(data.rows()));
    const auto protos = kmeans(data, clusters, opts.kmeans_iters, kseed);
    const Bandwidth bw(multiplier * median_heuristic(data).theta2());
    const auto est = fit(data, bw, estimator);
    return std::pair{match_mixture(est, protos), bw};
  };

  const std::uint64_t kseed = derive_seed(seed, "density-kmeans");
  DensityFit out;
  double best = std::numeric_limits<double>::infinity();
  int rises = 0;
  for (std::size_t g = 0; g < opts.bw_grid.size(); ++g) {
    const double m = opts.bw_grid[g];
    const double score = nll(fit_at(fit_part, m, kseed).first, val_part);
    if (g > 0) rises = score > out.validation_nll.back() ? rises + 1 : 0;
    out.validation_nll.push_back(score);
    if (score < best) {
      best = score;
      out.multiplier = m;
    }
    if (rises >= 2) break;
  }
  auto [model, bw] = fit_at(train, out.multiplier, kseed);
  out.model = std::move(model);
  out.bandwidth = bw;
  return out;
}

KdeResult kde_pipeline(const DataMatrix& xs, const EstimatorKind& estimator, double test_fraction,
                       const DensityOptions& opts, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InputError("kde_pipeline: test fraction must lie in (0, 1)");
  const auto n = static_cast<std::size_t>(xs.rows());
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (n_test < 1 || n - n_test < 4) throw InputError("kde_pipeline: degenerate train/test split");
  const auto perm = iota_permutation(n, seed, "kde-split");
  const std::vector<std::size_t> test_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  const std::vector<std::size_t> train_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  const DataMatrix train = select_rows(xs, train_idx);
  const DataMatrix test = select_rows(xs, test_idx);

  KdeResult r;
  r.fit = fit_density(train, estimator, opts, derive_seed(seed, "kde-fit"));
  r.test_nll = nll(r.fit.model, test);
  r.train_size = train_idx.size();
  r.test_size = test_idx.size();
  return r;
}

}  // namespace mkme
