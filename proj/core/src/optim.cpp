#include "mkme/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mkme/errors.hpp"

namespace mkme::optim {
namespace {

double checked(const std::function<double(double)>& f, double x) {
  const double fx = f(x);
  if (!std::isfinite(fx)) {
    std::ostringstream os;
    os.precision(17);
    os << "minimize_scalar: objective is not finite at x = " << x;
    throw NumericError(os.str());
  }
  return fx;
}

}  // namespace

ScalarMinimum minimize_scalar(const std::function<double(double)>& f, const ScalarBracket& br) {
  if (!(br.lo < br.hi) || !std::isfinite(br.lo) || !std::isfinite(br.hi)) {
    throw InputError("minimize_scalar: bracket requires lo < hi");
  }
  if (!(br.tol > 0.0)) throw InputError("minimize_scalar: tolerance must be positive");
  if (br.max_evals < 2) throw InputError("minimize_scalar: need at least two evaluations");

  const double golden = 0.5 * (3.0 - std::sqrt(5.0));
  const double sqrt_eps = std::sqrt(std::numeric_limits<double>::epsilon());

  double a = br.lo;
  double b = br.hi;
  double x = a + golden * (b - a);
  double w = x;
  double v = x;
  double fx = checked(f, x);
  double fw = fx;
  double fv = fx;
  double d = 0.0;
  double e = 0.0;
  int evals = 1;

  // Reserve one evaluation for the lower endpoint.
  while (evals < br.max_evals - 1) {
    const double xm = 0.5 * (a + b);
    const double tol1 = sqrt_eps * std::abs(x) + br.tol / 3.0;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;

    bool take_golden = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = xm >= x ? tol1 : -tol1;
        take_golden = false;
      }
    }
    if (take_golden) {
      e = x >= xm ? a - x : b - x;
      d = golden * e;
    }
    const double step = std::abs(d) >= tol1 ? d : (d > 0.0 ? tol1 : -tol1);
    const double u = std::clamp(x + step, br.lo, br.hi);
    const double fu = checked(f, u);
    ++evals;

    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }

  const double f_lo = checked(f, br.lo);
  ++evals;
  if (f_lo <= fx) return {br.lo, f_lo, evals};
  return {x, fx, evals};
}

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& init, const NelderMeadOptions& opts) {
  const auto p = init.size();
  if (p == 0) throw InputError("nelder_mead: empty parameter vector");

  NelderMeadResult res;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> verts(static_cast<std::size_t>(p + 1), init);
  std::vector<double> vals(verts.size());
  for (Eigen::Index j = 0; j < p; ++j) verts[static_cast<std::size_t>(j + 1)][j] += opts.initial_step;
  for (std::size_t i = 0; i < verts.size(); ++i) {
    vals[i] = eval(verts[i]);
    if (!std::isfinite(vals[i])) throw NumericError("nelder_mead: objective is not finite on the initial simplex");
  }

  std::vector<std::size_t> order(verts.size());
  auto sort_vertices = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    std::vector<Eigen::VectorXd> v2;
    std::vector<double> f2;
    v2.reserve(verts.size());
    f2.reserve(verts.size());
    for (auto i : order) {
      v2.push_back(std::move(verts[i]));
      f2.push_back(vals[i]);
    }
    verts = std::move(v2);
    vals = std::move(f2);
  };
  sort_vertices();

  const auto n = verts.size();
  // One iteration costs at most p + 2 evaluations (reflect, contract, shrink).
  const int worst_case = static_cast<int>(p) + 2;
  while (res.evaluations + worst_case <= opts.max_evals && vals.back() - vals.front() >= opts.f_tol) {
    ++res.iterations;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(p);
    for (std::size_t i = 0; i + 1 < n; ++i) centroid += verts[i];
    centroid /= static_cast<double>(n - 1);
    const Eigen::VectorXd& worst = verts.back();

    const Eigen::VectorXd xr = centroid + opts.reflect * (centroid - worst);
    const double fr = eval(xr);
    bool do_shrink = false;

    if (fr < vals.front()) {
      const Eigen::VectorXd xe = centroid + opts.expand * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        verts.back() = xe;
        vals.back() = fe;
      } else {
        verts.back() = xr;
        vals.back() = fr;
      }
    } else if (fr < vals[n - 2]) {
      verts.back() = xr;
      vals.back() = fr;
    } else if (fr < vals.back()) {
      const Eigen::VectorXd xc = centroid + opts.contract * (xr - centroid);
      const double fc = eval(xc);
      if (fc <= fr) {
        verts.back() = xc;
        vals.back() = fc;
      } else {
        do_shrink = true;
      }
    } else {
      const Eigen::VectorXd xcc = centroid + opts.contract * (worst - centroid);
      const double fcc = eval(xcc);
      if (fcc < vals.back()) {
        verts.back() = xcc;
        vals.back() = fcc;
      } else {
        do_shrink = true;
      }
    }

    if (do_shrink) {
      for (std::size_t i = 1; i < n; ++i) {
        verts[i] = verts[0] + opts.shrink * (verts[i] - verts[0]);
        vals[i] = eval(verts[i]);
      }
    }
    sort_vertices();
    res.best_history.push_back(vals.front());
  }

  res.x = verts.front();
  res.fx = vals.front();
  return res;
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  const auto c = v.size();
  if (c == 0) throw InputError("project_simplex: empty vector");
  if (!v.allFinite()) throw InputError("project_simplex: non-finite input");
  std::vector<double> u(v.data(), v.data() + c);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (Eigen::Index k = 0; k < c; ++k) {
    cumsum += u[static_cast<std::size_t>(k)];
    const double t = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (u[static_cast<std::size_t>(k)] - t > 0.0) tau = t;
  }
  return (v.array() - tau).max(0.0).matrix();
}

}  // namespace mkme::optim
