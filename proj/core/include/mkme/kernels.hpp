#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "mkme/types.hpp"

namespace mkme {

/// Squared bandwidth theta^2 of the Gaussian RBF kernel
/// k(x, y) = exp(-|x - y|^2 / (2 theta^2)).
class Bandwidth {
 public:
  explicit Bandwidth(double theta2);

  double theta2() const { return theta2_; }

  friend bool operator==(const Bandwidth&, const Bandwidth&) = default;

 private:
  double theta2_;
};

/// Gaussian corruption applied identically to every example: none (Dirac),
/// isotropic sigma^2 I, or diagonal diag(e_1, ..., e_d). Variances, not
/// standard deviations.
class CorruptionModel {
 public:
  struct Dirac {};
  struct Isotropic {
    double sigma2;
  };
  struct Diagonal {
    std::vector<double> variances;
  };

  CorruptionModel() = default;

  static CorruptionModel dirac() { return CorruptionModel{}; }
  static CorruptionModel isotropic(double sigma2);
  static CorruptionModel diagonal(std::vector<double> variances);

  const std::variant<Dirac, Isotropic, Diagonal>& variant() const { return v_; }

  bool is_isotropic() const { return std::holds_alternative<Isotropic>(v_); }
  bool is_diagonal() const { return std::holds_alternative<Diagonal>(v_); }

  /// True when the model adds no noise: Dirac, or every variance zero.
  bool is_dirac() const;

  /// Variance along coordinate j.
  double variance(std::size_t j) const;

  /// Per-coordinate variances for a d-dimensional space.
  std::vector<double> variances(std::size_t d) const;

  /// Sum of per-coordinate variances (trace of the covariance).
  double trace(std::size_t d) const;

  /// Throws InputError if the model cannot describe d-dimensional data.
  void check_dimension(std::size_t d) const;

  /// Human-readable summary, e.g. "isotropic(0.5)".
  std::string describe() const;

  friend bool operator==(const CorruptionModel& a, const CorruptionModel& b);

 private:
  std::variant<Dirac, Isotropic, Diagonal> v_;
};

bool operator==(const CorruptionModel::Dirac&, const CorruptionModel::Dirac&);
bool operator==(const CorruptionModel::Isotropic&, const CorruptionModel::Isotropic&);
bool operator==(const CorruptionModel::Diagonal&, const CorruptionModel::Diagonal&);

/// Coordinate-wise average of two models over d dimensions. Two Dirac models
/// stay Dirac, two isotropic models stay isotropic, anything else is diagonal.
CorruptionModel average(const CorruptionModel& a, const CorruptionModel& b, std::size_t d);

enum class GramKind { Rbf, Marginalized, KPrime };

struct GramMatrix {
  Eigen::MatrixXd entries;
  GramKind kind = GramKind::Rbf;
};

double rbf(PointView x, PointView y, Bandwidth bw);

/// k'(x, y) = exp(-|x - y|^2 / (2 theta^2)) |x - y|^2.
double k_prime(PointView x, PointView y, Bandwidth bw);

/// E_{x~ ~ N(x_center, cov)} k(x~, y).
double marginal_single(PointView x_center, const CorruptionModel& cov, PointView y, Bandwidth bw);

/// E k(x~, y~) for independent x~ ~ N(x, cov_x), y~ ~ N(y, cov_y):
///   theta^d / |S + theta^2 I|^{1/2} exp(-1/2 (x-y)^T (S + theta^2 I)^{-1} (x-y)),
/// with S = cov_x + cov_y. Evaluated in log space. Reduces to rbf exactly when
/// both models are Dirac.
double marginal_double(PointView x, const CorruptionModel& cov_x, PointView y,
                       const CorruptionModel& cov_y, Bandwidth bw);

/// Dense-covariance generalization of marginal_double for SPD (or zero)
/// covariance matrices. Used by the synthetic loss oracle, where mixture
/// components carry full covariances.
double marginal_double_dense(PointView x, const Eigen::MatrixXd& cov_x, PointView y,
                             const Eigen::MatrixXd& cov_y, Bandwidth bw);

/// Gram of the plain RBF kernel (kind Rbf) or of k' (kind KPrime).
GramMatrix gram(const DataMatrix& xs, const DataMatrix& ys, Bandwidth bw, GramKind kind = GramKind::Rbf);

/// Gram of marginal_double with cov on the xs side and cov2 on the ys side.
/// With xs == ys and cov == cov2 this is Q; with cov2 Dirac it is L.
GramMatrix marginal_gram(const DataMatrix& xs, const CorruptionModel& cov, const DataMatrix& ys,
                         const CorruptionModel& cov2, Bandwidth bw);

/// theta^2 = median of |x_i - x_j|^2 over pairs i < j (lower middle element
/// for an even count).
Bandwidth median_heuristic(const DataMatrix& xs);

}  // namespace mkme
