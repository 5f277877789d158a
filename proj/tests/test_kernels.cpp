#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "mkme/errors.hpp"
#include "mkme/kernels.hpp"
#include "support.hpp"

using namespace mkme;
using mkme::testing::mc_marginal;
using mkme::testing::normal_matrix;

namespace {

std::vector<double> pt(std::initializer_list<double> v) { return v; }

}  // namespace

TEST_CASE("rbf hand values") {
  const auto a = pt({0.3, -1.2});
  CHECK(rbf(a, a, Bandwidth(0.7)) == 1.0);
  const double theta2 = 2.5;
  const auto x = pt({0.0});
  const auto y = pt({std::sqrt(theta2) * std::numbers::sqrt2});
  CHECK(rbf(x, y, Bandwidth(theta2)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(rbf(pt({0, 0}), pt({1, 1}), Bandwidth(1.0)) == doctest::Approx(0.36787944117144233));
  CHECK_THROWS_AS(rbf(pt({0}), pt({0, 1}), Bandwidth(1.0)), InputError);
}

TEST_CASE("k_prime hand values") {
  CHECK(k_prime(pt({1.5}), pt({1.5}), Bandwidth(1.0)) == 0.0);
  CHECK(k_prime(pt({0}), pt({1}), Bandwidth(1.0)) == doctest::Approx(0.6065306597126334));
  CHECK(k_prime(pt({0}), pt({2}), Bandwidth(2.0)) == doctest::Approx(1.4715177646857693));
  CHECK_THROWS_AS(k_prime(pt({0}), pt({0, 1}), Bandwidth(1.0)), InputError);
}

TEST_CASE("bandwidth and corruption validation") {
  CHECK_THROWS_AS(Bandwidth(0.0), InputError);
  CHECK_THROWS_AS(Bandwidth(-1.0), InputError);
  CHECK_THROWS_AS(Bandwidth(std::numeric_limits<double>::infinity()), InputError);
  CHECK_THROWS_AS(CorruptionModel::isotropic(-0.1), InputError);
  CHECK_THROWS_AS(CorruptionModel::diagonal({0.1, -1.0}), InputError);
  CHECK_THROWS_AS(marginal_single(pt({0, 0}), CorruptionModel::diagonal({1.0}), pt({0, 0}), Bandwidth(1.0)),
                  InputError);
  CHECK(CorruptionModel::isotropic(0.0).is_dirac());
  CHECK(CorruptionModel::diagonal({0.0, 0.0}).is_dirac());
  CHECK_FALSE(CorruptionModel::diagonal({0.0, 1e-300}).is_dirac());
}

TEST_CASE("marginal_single closed form examples") {
  const Bandwidth one(1.0);
  const auto iso1 = CorruptionModel::isotropic(1.0);
  CHECK(marginal_single(pt({0.4}), iso1, pt({0.4}), one) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(marginal_single(pt({0}), iso1, pt({2}), one) == doctest::Approx(std::exp(-1.0) / std::sqrt(2.0)));
  Rng rng(11);
  for (int t = 0; t < 10; ++t) {
    const auto x = normal_matrix(1, 3, rng);
    const auto y = normal_matrix(1, 3, rng);
    CHECK(marginal_single(row(x, 0), CorruptionModel::dirac(), row(y, 0), Bandwidth(0.8)) ==
          rbf(row(x, 0), row(y, 0), Bandwidth(0.8)));
  }
}

TEST_CASE("marginal_double closed form examples") {
  const Bandwidth one(1.0);
  CHECK(marginal_double(pt({0.1}), CorruptionModel::isotropic(0.5), pt({0.1}), CorruptionModel::isotropic(0.5), one) ==
        doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(marginal_double(pt({1, 2}), CorruptionModel::diagonal({1, 0}), pt({1, 2}), CorruptionModel::diagonal({0, 1}),
                        one) == doctest::Approx(0.5).epsilon(1e-14));
  const auto x = pt({0.2, -0.4});
  const auto y = pt({1.0, 0.5});
  CHECK(marginal_double(x, CorruptionModel::dirac(), y, CorruptionModel::dirac(), Bandwidth(0.6)) ==
        rbf(x, y, Bandwidth(0.6)));
}

TEST_CASE("marginalized kernels agree with Monte Carlo") {
  Rng rng(2024);
  Rng mc = Rng::stream(5, "mc");
  for (int t = 0; t < 6; ++t) {
    const std::size_t d = 1 + static_cast<std::size_t>(rng.below(3));
    const auto x = normal_matrix(1, static_cast<Eigen::Index>(d), rng);
    const auto y = normal_matrix(1, static_cast<Eigen::Index>(d), rng);
    const double theta2 = mkme::testing::uniform(rng, 0.3, 3.0);
    std::vector<double> e(d);
    for (auto& v : e) v = mkme::testing::uniform(rng, 0.0, 1.5);
    const auto cov = CorruptionModel::diagonal(e);
    const auto iso = CorruptionModel::isotropic(e[0]);
    const std::vector<double> zero(d, 0.0);
    const std::vector<double> iso_v(d, e[0]);
    CHECK(std::abs(marginal_single(row(x, 0), cov, row(y, 0), Bandwidth(theta2)) -
                   mc_marginal(row(x, 0), e, row(y, 0), zero, theta2, 200000, mc)) < 1e-2);
    CHECK(std::abs(marginal_double(row(x, 0), cov, row(y, 0), iso, Bandwidth(theta2)) -
                   mc_marginal(row(x, 0), e, row(y, 0), iso_v, theta2, 200000, mc)) < 1e-2);
  }
}

TEST_CASE("marginal_double is symmetric and monotone in sigma^2") {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto x = normal_matrix(1, 4, rng);
    const auto y = normal_matrix(1, 4, rng);
    const auto a = CorruptionModel::diagonal({rng.uniform01(), rng.uniform01(), 0.0, 2.0 * rng.uniform01()});
    const auto b = CorruptionModel::isotropic(rng.uniform01());
    const Bandwidth bw(0.2 + rng.uniform01());
    CHECK(marginal_double(row(x, 0), a, row(y, 0), b, bw) == marginal_double(row(y, 0), b, row(x, 0), a, bw));
  }
  const auto x = pt({0.5, 0.5, 0.5});
  const Bandwidth bw(0.9);
  double prev = 2.0;
  for (double s2 = 0.0; s2 <= 5.0; s2 += 0.25) {
    const auto c = CorruptionModel::isotropic(s2);
    const double v = marginal_double(x, c, x, c, bw);
    CHECK(v <= prev);
    CHECK(v == doctest::Approx(std::pow(0.9 / (2.0 * s2 + 0.9), 1.5)).epsilon(1e-13));
    prev = v;
  }
}

TEST_CASE("log-space evaluation stays finite in high dimension") {
  const std::size_t d = 2000;
  std::vector<double> x(d, 0.0);
  const double v = marginal_double(x, CorruptionModel::isotropic(1.0), x, CorruptionModel::isotropic(1.0), Bandwidth(1.0));
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(std::pow(3.0, -1000.0)).epsilon(1e-10));
}

TEST_CASE("gram matrices") {
  Rng rng(7);
  const auto xs = normal_matrix(3, 2, rng);
  const auto g = gram(xs, xs, Bandwidth(1.3)).entries;
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(g(i, j) == rbf(row(xs, i), row(xs, j), Bandwidth(1.3)));
  CHECK(g == g.transpose());

  const DataMatrix one = DataMatrix::Constant(1, 2, 0.5);
  CHECK(gram(one, one, Bandwidth(1.0)).entries(0, 0) == 1.0);

  const auto kp = gram(xs, xs, Bandwidth(1.3), GramKind::KPrime).entries;
  CHECK(kp.diagonal().isZero(0.0));
  CHECK(kp(0, 1) == k_prime(row(xs, 0), row(xs, 1), Bandwidth(1.3)));

  CHECK_THROWS_AS(gram(DataMatrix(0, 2), xs, Bandwidth(1.0)), InputError);
  CHECK_THROWS_AS(gram(xs, normal_matrix(2, 3, rng), Bandwidth(1.0)), InputError);
}

TEST_CASE("marginal gram matches per-entry oracle and reduces to rbf") {
  Rng rng(8);
  const auto xs = normal_matrix(4, 3, rng);
  const auto ys = normal_matrix(5, 3, rng);
  const Bandwidth bw(0.7);
  const auto iso = CorruptionModel::isotropic(0.3);
  const auto q = marginal_gram(xs, iso, xs, iso, bw).entries;
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(q(i, i) == doctest::Approx(std::pow(0.7 / (0.6 + 0.7), 1.5)).epsilon(1e-14));
    for (Eigen::Index j = 0; j < 4; ++j) CHECK(q(i, j) == marginal_double(row(xs, i), iso, row(xs, j), iso, bw));
  }
  const auto diag = CorruptionModel::diagonal({0.1, 0.0, 0.4});
  const auto l = marginal_gram(xs, diag, ys, CorruptionModel::dirac(), bw).entries;
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) CHECK(l(i, j) == marginal_single(row(xs, i), diag, row(ys, j), bw));
  CHECK(marginal_gram(xs, CorruptionModel::dirac(), ys, CorruptionModel::dirac(), bw).entries ==
        gram(xs, ys, bw).entries);
}

TEST_CASE("square Grams are positive semi-definite") {
  Rng rng(9);
  for (Eigen::Index n : {10, 60, 200}) {
    const auto xs = normal_matrix(n, 3, rng);
    const Bandwidth bw = median_heuristic(xs);
    const double floor = -1e-8 * static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> rbf_eig(gram(xs, xs, bw).entries);
    CHECK(rbf_eig.eigenvalues().minCoeff() >= floor);
    const auto c = CorruptionModel::diagonal({0.2, 0.5, 0.1});
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> q_eig(marginal_gram(xs, c, xs, c, bw).entries);
    CHECK(q_eig.eigenvalues().minCoeff() >= floor);
  }
}

TEST_CASE("median heuristic") {
  DataMatrix two(2, 2);
  two << 0, 0, 3, 4;
  CHECK(median_heuristic(two).theta2() == 25.0);
  DataMatrix three(3, 1);
  three << 0, 1, 3;
  CHECK(median_heuristic(three).theta2() == 4.0);
  DataMatrix four(4, 1);
  four << 0, 1, 2, 4;  // squared distances 1,1,4,4,9,16: lower middle is 4
  CHECK(median_heuristic(four).theta2() == 4.0);
  CHECK_THROWS_AS(median_heuristic(DataMatrix::Zero(1, 2)), InputError);
  CHECK_THROWS_AS(median_heuristic(DataMatrix::Ones(5, 2)), InputError);

  Rng rng(10);
  const auto xs = normal_matrix(25, 3, rng);
  const double base = median_heuristic(xs).theta2();
  std::vector<Eigen::Index> perm(25);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  CHECK(median_heuristic(select_rows(xs, perm)).theta2() == base);
  DataMatrix shifted = xs;
  shifted.array() += 1000.0;
  CHECK(median_heuristic(shifted).theta2() == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("average of corruption models") {
  CHECK(average(CorruptionModel::dirac(), CorruptionModel::dirac(), 3) == CorruptionModel::dirac());
  CHECK(average(CorruptionModel::isotropic(1.0), CorruptionModel::isotropic(3.0), 3) ==
        CorruptionModel::isotropic(2.0));
  CHECK(average(CorruptionModel::isotropic(1.0), CorruptionModel::diagonal({3.0, 0.0}), 2) ==
        CorruptionModel::diagonal({2.0, 0.5}));
}
