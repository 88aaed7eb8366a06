#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <vector>

#include "pitchfork/mathcore.hpp"
#include "pitchfork/rng.hpp"

using namespace pitchfork;
using doctest::Approx;

namespace {

MatrixXd random_symmetric(Rng& rng, Eigen::Index d) {
  const MatrixXd a = rng.normal_matrix(d, d);
  return 0.5 * (a + a.transpose());
}

// Table of escape levels used throughout: gamma, mean, std.
const std::vector<double> kGamma = {0.1, 0.2, 0.3, 0.5, 0.7, 1.0};
const std::vector<double> kMean = {147167, 88033, 38150, 22433, 16633, 8900};
const std::vector<double> kStd = {23618, 27091, 4250, 6064, 5008, 864};

}  // namespace

TEST_CASE("covariance uses the population divisor") {
  MatrixXd two(2, 2);
  two << 0, 0, 2, 0;
  const MatrixXd c = covariance(two);
  CHECK(c(0, 0) == Approx(1.0));
  CHECK(c(0, 1) == Approx(0.0));
  CHECK(c(1, 1) == Approx(0.0));

  const MatrixXd same = MatrixXd::Constant(5, 3, 1.7);
  CHECK(covariance(same).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(covariance(MatrixXd::Ones(1, 2)), Error);
}

TEST_CASE("mixture covariance matches the closed form I + 4 e1 e1^T") {
  Rng rng(7);
  MatrixXd z = rng.normal_matrix(10000, 2);
  for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, 0) += (i % 2 == 0) ? 2.0 : -2.0;
  const MatrixXd c = covariance(z);
  CHECK(std::abs(c(0, 0) - 5.0) < 0.15);
  CHECK(std::abs(c(1, 1) - 1.0) < 0.1);
}

TEST_CASE("covariance is positive semi-definite") {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const MatrixXd z = rng.normal_matrix(5 + t, 8);  // rank deficient for small N
    const auto s = sym_eigen(covariance(z));
    CHECK(s.eigenvalues.minCoeff() >= -1e-10 * s.eigenvalues.maxCoeff());
  }
}

TEST_CASE("sym_eigen small examples") {
  auto s = sym_eigen(MatrixXd::Identity(3, 3));
  CHECK((s.eigenvalues - VectorXd::Ones(3)).cwiseAbs().maxCoeff() < 1e-14);

  MatrixXd d(2, 2);
  d << 1, 0, 0, 4;
  s = sym_eigen(d);
  CHECK(s.eigenvalues(0) == Approx(4.0));
  CHECK(s.eigenvalues(1) == Approx(1.0));
  CHECK(std::abs(s.eigenvectors(1, 0)) == Approx(1.0));
  CHECK(std::abs(s.eigenvectors(0, 1)) == Approx(1.0));

  MatrixXd a(2, 2);
  a << 2, 1, 1, 2;
  s = sym_eigen(a);
  CHECK(s.eigenvalues(0) == Approx(3.0));
  CHECK(s.eigenvalues(1) == Approx(1.0));
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(s.eigenvectors(0, 0)) == Approx(r));
  CHECK(s.eigenvectors(0, 0) * s.eigenvectors(1, 0) > 0);
  CHECK(s.eigenvectors(0, 1) * s.eigenvectors(1, 1) < 0);
}

TEST_CASE("sym_eigen rejects asymmetric input") {
  MatrixXd a(2, 2);
  a << 1, 2, 0, 1;
  CHECK_THROWS_AS(sym_eigen(a), Error);
}

TEST_CASE("sym_eigen agrees with Eigen's self-adjoint solver and reconstructs the input") {
  Rng rng(3);
  for (Eigen::Index d : {1, 2, 5, 16, 33, 64}) {
    const MatrixXd a = random_symmetric(rng, d);
    const auto s = sym_eigen(a);
    const double norm = a.norm();
    Eigen::SelfAdjointEigenSolver<MatrixXd> oracle(a);
    const VectorXd expected = oracle.eigenvalues().reverse();
    CHECK((s.eigenvalues - expected).cwiseAbs().maxCoeff() <= 1e-9 * norm);
    for (Eigen::Index i = 1; i < d; ++i) CHECK(s.eigenvalues(i) <= s.eigenvalues(i - 1));
    for (Eigen::Index i = 0; i < d; ++i) {
      CHECK(std::abs(s.eigenvectors.col(i).norm() - 1.0) <= 1e-10);
      CHECK((a * s.eigenvectors.col(i) - s.eigenvalues(i) * s.eigenvectors.col(i)).norm() <= 1e-8 * norm);
    }
    const MatrixXd back = s.eigenvectors * s.eigenvalues.asDiagonal() * s.eigenvectors.transpose();
    CHECK((back - a).norm() <= 1e-7 * norm);
    CHECK(std::abs(s.eigenvalues.sum() - a.trace()) <= 1e-9 * norm);
  }
}

TEST_CASE("spearman examples") {
  const std::vector<double> a = {1, 2, 3}, b = {10, 20, 30}, c = {3, 2, 1};
  CHECK(spearman(a, b) == Approx(1.0));
  CHECK(spearman(a, c) == Approx(-1.0));
  const std::vector<double> x = {1, 2, 3, 4}, y = {1, 3, 2, 4};
  CHECK(spearman(x, y) == Approx(0.8));
  const std::vector<double> flat = {2, 2, 2};
  CHECK_THROWS_AS(spearman(a, flat), Error);
}

TEST_CASE("spearman matches the rank-difference formula without ties") {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const int n = 10 + t;
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) x[i] = rng.normal(), y[i] = x[i] + rng.normal();
    auto rank = [](const std::vector<double>& v) {
      std::vector<double> r(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        r[i] = 1 + static_cast<double>(std::count_if(v.begin(), v.end(), [&](double w) { return w < v[i]; }));
      }
      return r;
    };
    const auto rx = rank(x), ry = rank(y);
    double d2 = 0;
    for (int i = 0; i < n; ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    const double oracle = 1.0 - 6.0 * d2 / (n * (static_cast<double>(n) * n - 1.0));
    CHECK(spearman(x, y) == Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("spearman is invariant under strictly monotone transforms") {
  Rng rng(9);
  std::vector<double> x(50), y(50), fx(50), gy(50);
  for (int i = 0; i < 50; ++i) {
    x[i] = rng.normal();
    y[i] = 0.5 * x[i] + rng.normal();
    fx[i] = std::exp(3 * x[i]);
    gy[i] = -std::atan(y[i]);
  }
  CHECK(spearman(fx, y) == Approx(spearman(x, y)).epsilon(1e-14));
  CHECK(spearman(x, gy) == Approx(-spearman(x, y)).epsilon(1e-14));
}

TEST_CASE("average ranks handle ties") {
  VectorXd v(5);
  v << 3, 1, 3, 2, 3;
  const VectorXd r = average_ranks(v);
  CHECK(r(1) == Approx(1.0));
  CHECK(r(3) == Approx(2.0));
  CHECK(r(0) == Approx(4.0));
  CHECK(r(2) == Approx(4.0));
  CHECK(r(4) == Approx(4.0));
}

TEST_CASE("weighted_linfit recovers an exact line") {
  VectorXd x(4), y(4);
  x << 0, 1, 2, 3;
  y = 2 * x.array() + 1;
  const auto fit = weighted_linfit(x, y, VectorXd::Ones(4));
  CHECK(fit.intercept == Approx(1.0));
  CHECK(fit.slope == Approx(2.0));
  CHECK(fit.chi_squared == Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(weighted_linfit(VectorXd::Ones(4), y, VectorXd::Ones(4)), Error);
  CHECK_THROWS_AS(weighted_linfit(x, y, -VectorXd::Ones(4)), Error);
}

TEST_CASE("weighted_linfit agrees with the normal equations") {
  Rng rng(21);
  const int n = 12;
  VectorXd x(n), y(n), w(n);
  for (int i = 0; i < n; ++i) {
    x(i) = rng.normal();
    y(i) = 0.3 - 1.7 * x(i) + 0.1 * rng.normal();
    w(i) = 0.5 + rng.uniform();
  }
  MatrixXd design(n, 2);
  design.col(0).setOnes();
  design.col(1) = x;
  const VectorXd beta =
      (design.transpose() * w.asDiagonal() * design).ldlt().solve(design.transpose() * w.asDiagonal() * y);
  const auto fit = weighted_linfit(x, y, w);
  CHECK(fit.intercept == Approx(beta(0)).epsilon(1e-12));
  CHECK(fit.slope == Approx(beta(1)).epsilon(1e-12));
}

TEST_CASE("escape table fits reproduce the published coefficients") {
  std::vector<double> w;
  for (std::size_t i = 0; i < kMean.size(); ++i) w.push_back(std::pow(kMean[i] / kStd[i], 2));
  const FitReport power = fit_log_model(ModelKind::PowerLaw, kGamma, kMean, w);
  CHECK(std::abs(power.intercept - 9.11) <= 0.01);
  CHECK(std::abs(power.slope + 1.225) <= 0.005);
  CHECK(std::abs(power.chi_squared - 1.52) <= 0.02);
  CHECK(power.aic == Approx(power.chi_squared + 4));
  CHECK(std::abs(power.aic - 5.52) <= 0.02);

  const FitReport kramers = fit_log_model(ModelKind::Kramers, kGamma, kMean, w);
  CHECK(std::abs(kramers.intercept - 11.65) <= 0.02);
  CHECK(std::abs(kramers.slope + 2.631) <= 0.01);
  CHECK(std::abs(kramers.chi_squared - 20.78) <= 0.1);
  CHECK(std::abs(kramers.aic - 24.78) <= 0.1);

  CHECK(power.predict_log(0.5) == Approx(power.intercept + power.slope * std::log(0.5)));
  CHECK(kramers.predict_log(0.5) == Approx(kramers.intercept + kramers.slope * 0.5));
  REQUIRE(power.point_residuals.size() == kGamma.size());
  CHECK(power.point_residuals[0].log_observed == Approx(std::log(kMean[0])));
}

TEST_CASE("unit weights give the ordinary least-squares slope") {
  const std::vector<double> ones(kGamma.size(), 1.0);
  const FitReport power = fit_log_model(ModelKind::PowerLaw, kGamma, kMean, ones);
  CHECK(std::abs(power.slope + 1.228) <= 0.005);

  // Independent oracle: textbook OLS on the log-log points.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(kGamma.size());
  for (std::size_t i = 0; i < kGamma.size(); ++i) {
    const double x = std::log(kGamma[i]), y = std::log(kMean[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  CHECK(power.slope == Approx((n * sxy - sx * sy) / (n * sxx - sx * sx)).epsilon(1e-12));
}

TEST_CASE("fit recovers a synthetic power law") {
  std::vector<double> g, tau, w;
  for (double x : {0.05, 0.1, 0.2, 0.4, 0.8}) {
    g.push_back(x);
    tau.push_back(std::exp(7.0) * std::pow(x, -1.5));
    w.push_back(1.0);
  }
  const FitReport power = fit_log_model(ModelKind::PowerLaw, g, tau, w);
  CHECK(power.intercept == Approx(7.0));
  CHECK(power.slope == Approx(-1.5));
  CHECK(power.chi_squared < 1e-20);
  CHECK_THROWS_AS(fit_log_model(ModelKind::PowerLaw, std::vector<double>{0.0, 0.1, 0.2},
                                std::vector<double>{1, 2, 3}, std::vector<double>{1, 1, 1}),
                  Error);
}

TEST_CASE("descriptive statistics") {
  const std::vector<double> v = {1, 2, 3, 4};
  CHECK(mean(v) == Approx(2.5));
  CHECK(sample_std(v) == Approx(std::sqrt(5.0 / 3.0)));
  CHECK(median({3, 1, 2}) == Approx(2.0));
  CHECK(median({4, 1, 2, 3}) == Approx(2.5));
  CHECK(sign_test_pvalue(10, 10) == Approx(std::pow(0.5, 10)));
  CHECK(sign_test_pvalue(0, 10) == Approx(1.0));
}

TEST_CASE("sym_eigen works with float scalars") {
  Eigen::MatrixXf a(2, 2);
  a << 2, 1, 1, 2;
  const auto s = sym_eigen(a);
  CHECK(s.eigenvalues(0) == Approx(3.0).epsilon(1e-5));
}
