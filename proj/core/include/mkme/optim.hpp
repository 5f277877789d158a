#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace mkme::optim {

/// Search interval and stopping rule for minimize_scalar.
struct ScalarBracket {
  double lo = 0.0;
  double hi = 1.0;
  double tol = 1e-6;  // absolute tolerance on the minimizer
  int max_evals = 200;
};

struct ScalarMinimum {
  double x = 0.0;
  double fx = 0.0;
  int evaluations = 0;
};

/// Bounded scalar minimization: golden-section search with parabolic
/// interpolation steps (Brent's fminbnd scheme). f is only evaluated inside
/// [lo, hi]. After the search the lower endpoint is also evaluated and wins
/// ties, so flat or increasing objectives return lo.
///
/// Throws InputError for an empty bracket and NumericError if f returns a
/// non-finite value (the message names the offending x).
ScalarMinimum minimize_scalar(const std::function<double(double)>& f, const ScalarBracket& bracket);

struct NelderMeadOptions {
  double initial_step = 0.25;  // simplex vertex i = init + initial_step * e_i
  double f_tol = 1e-8;         // stop when max f - min f over the simplex is below this
  int max_evals = 1000;  // hard cap: no iteration starts that could exceed it
  double reflect = 1.0;
  double expand = 2.0;
  double contract = 0.5;
  double shrink = 0.5;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double fx = 0.0;
  int evaluations = 0;
  int iterations = 0;
  std::vector<double> best_history;  // best vertex value after each iteration
};

/// Derivative-free Nelder-Mead simplex search. Vertices with equal values
/// keep their relative order, so runs are fully deterministic. Non-finite
/// values after initialization are treated as +infinity.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& init, const NelderMeadOptions& opts = {});

/// Euclidean projection onto the probability simplex {a >= 0, sum a = 1}.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v);

}  // namespace mkme::optim
