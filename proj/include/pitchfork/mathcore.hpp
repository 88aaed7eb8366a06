#pragma once

// Dense symmetric linear algebra, rank statistics and weighted regression.
//
// Everything here is a pure function of its arguments. Dense types are plain
// Eigen matrices templated on the scalar; the free functions accept any Eigen
// expression so callers can pass blocks, maps or products without copies.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pitchfork/errors.hpp"

namespace pitchfork {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using RowVectorXd = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// View a contiguous range of doubles as an Eigen column vector.
inline Eigen::Map<const VectorXd> as_vector(std::span<const double> values) {
  return {values.data(), static_cast<Eigen::Index>(values.size())};
}

/// Mean-centered covariance of the rows of `samples` (N x d), divisor N.
template <typename Derived>
Matrix<typename Derived::Scalar> covariance(const Eigen::MatrixBase<Derived>& samples) {
  using Scalar = typename Derived::Scalar;
  const auto n = samples.rows();
  if (n < 2) {
    fail(ErrorKind::Dimension, "covariance needs at least 2 samples, got " + std::to_string(n));
  }
  const Vector<Scalar> mean = samples.colwise().mean().transpose();
  const Matrix<Scalar> centered = samples.rowwise() - mean.transpose();
  Matrix<Scalar> cov = (centered.transpose() * centered) / static_cast<Scalar>(n);
  // Exact symmetry; the product above is symmetric only up to rounding.
  return (cov + cov.transpose()) / Scalar(2);
}

/// max |A_ij - A_ji| <= tol * max |A_ij|
template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar rel_tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const auto scale = a.cwiseAbs().maxCoeff();
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

/// Full eigendecomposition of a real symmetric matrix.
/// Eigenvalues sorted non-increasing; column i of `eigenvectors` pairs with eigenvalue i.
template <typename Scalar>
struct SpectrumResult {
  Vector<Scalar> eigenvalues;
  Matrix<Scalar> eigenvectors;
};

/// Cyclic Jacobi eigensolver for small dense symmetric matrices.
///
/// Sweeps every off-diagonal pair with a plane rotation until
/// off(A) <= 1e-12 * ||A||_F. Cost is O(d^3) per sweep and typically fewer than
/// ten sweeps are needed; intended for d up to a few thousand.
template <typename Derived>
SpectrumResult<typename Derived::Scalar> sym_eigen(const Eigen::MatrixBase<Derived>& matrix) {
  using Scalar = typename Derived::Scalar;
  if (matrix.rows() != matrix.cols()) {
    fail(ErrorKind::Dimension, "sym_eigen needs a square matrix");
  }
  if (!is_symmetric(matrix)) {
    fail(ErrorKind::Validation, "sym_eigen: input is not symmetric");
  }
  const Eigen::Index n = matrix.rows();
  Matrix<Scalar> a = (matrix + matrix.transpose()) / Scalar(2);
  Matrix<Scalar> v = Matrix<Scalar>::Identity(n, n);

  const Scalar norm = a.norm();
  const Scalar threshold = Scalar(1e-12) * norm;
  auto off_norm = [&a, n] {
    Scalar s = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  constexpr int kMaxSweeps = 100;
  int sweep = 0;
  while (norm > 0 && off_norm() > threshold) {
    if (++sweep > kMaxSweeps) {
      fail(ErrorKind::Numerical, "sym_eigen: Jacobi sweeps did not converge");
    }
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == Scalar(0)) continue;
        Eigen::JacobiRotation<Scalar> rot;
        rot.makeJacobi(a, p, q);
        a.applyOnTheLeft(p, q, rot.adjoint());
        a.applyOnTheRight(p, q, rot);
        a(p, q) = a(q, p) = Scalar(0);
        v.applyOnTheRight(p, q, rot);
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&a](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  SpectrumResult<Scalar> out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.eigenvalues(k) = a(order[k], order[k]);
    out.eigenvectors.col(k) = v.col(order[k]).normalized();
  }
  return out;
}

/// Largest eigenvalue of a symmetric matrix.
template <typename Derived>
typename Derived::Scalar lambda_max(const Eigen::MatrixBase<Derived>& matrix) {
  return sym_eigen(matrix).eigenvalues(0);
}

/// 1-based ranks with ties replaced by their average rank.
template <typename Derived>
Vector<typename Derived::Scalar> average_ranks(const Eigen::DenseBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&values](Eigen::Index i, Eigen::Index j) { return values(i) < values(j); });
  Vector<Scalar> ranks(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && values(order[j + 1]) == values(order[i])) ++j;
    const Scalar avg = Scalar(i + j) / Scalar(2) + Scalar(1);
    for (Eigen::Index k = i; k <= j; ++k) ranks(order[k]) = avg;
    i = j + 1;
  }
  return ranks;
}

/// Pearson product-moment correlation.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar pearson(const Eigen::DenseBase<DerivedX>& xs,
                                  const Eigen::DenseBase<DerivedY>& ys) {
  using Scalar = typename DerivedX::Scalar;
  if (xs.size() != ys.size() || xs.size() < 2) {
    fail(ErrorKind::Dimension, "pearson: sequences must have equal length >= 2");
  }
  const Vector<Scalar> x = xs.derived().template cast<Scalar>();
  const Vector<Scalar> y = ys.derived().template cast<Scalar>();
  const Vector<Scalar> dx = x.array() - x.mean();
  const Vector<Scalar> dy = y.array() - y.mean();
  const Scalar sxx = dx.squaredNorm();
  const Scalar syy = dy.squaredNorm();
  if (sxx == Scalar(0) || syy == Scalar(0)) {
    fail(ErrorKind::Numerical, "correlation undefined for a constant sequence");
  }
  return std::clamp(dx.dot(dy) / std::sqrt(sxx * syy), Scalar(-1), Scalar(1));
}

/// Spearman rank correlation (average ranks for ties).
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar spearman(const Eigen::DenseBase<DerivedX>& xs,
                                   const Eigen::DenseBase<DerivedY>& ys) {
  if (xs.size() != ys.size() || xs.size() < 3) {
    fail(ErrorKind::Dimension, "spearman: sequences must have equal length >= 3");
  }
  return pearson(average_ranks(xs), average_ranks(ys));
}

inline double spearman(std::span<const double> xs, std::span<const double> ys) {
  return spearman(as_vector(xs), as_vector(ys));
}

template <typename Scalar>
struct LinearFit {
  Scalar intercept{};
  Scalar slope{};
  Scalar chi_squared{};
  // Standard errors assuming the weights are inverse variances.
  Scalar intercept_stderr{};
  Scalar slope_stderr{};
};

/// Minimizes sum_i w_i (y_i - a - b x_i)^2.
template <typename DX, typename DY, typename DW>
LinearFit<typename DX::Scalar> weighted_linfit(const Eigen::DenseBase<DX>& xs,
                                               const Eigen::DenseBase<DY>& ys,
                                               const Eigen::DenseBase<DW>& ws) {
  using Scalar = typename DX::Scalar;
  const Eigen::Index n = xs.size();
  if (ys.size() != n || ws.size() != n) {
    fail(ErrorKind::Dimension, "weighted_linfit: xs, ys and weights must have equal length");
  }
  if (n < 3) fail(ErrorKind::Dimension, "weighted_linfit needs at least 3 points");
  const Vector<Scalar> x = xs.derived().template cast<Scalar>();
  const Vector<Scalar> y = ys.derived().template cast<Scalar>();
  const Vector<Scalar> w = ws.derived().template cast<Scalar>();
  if ((w.array() <= Scalar(0)).any() || !w.allFinite()) {
    fail(ErrorKind::Validation, "weighted_linfit: weights must be positive and finite");
  }
  const Scalar sw = w.sum();
  const Scalar xbar = w.dot(x) / sw;
  const Scalar ybar = w.dot(y) / sw;
  const Vector<Scalar> dx = x.array() - xbar;
  const Scalar sxx = (w.array() * dx.array().square()).sum();
  const Scalar spread = dx.cwiseAbs().maxCoeff();
  if (sxx <= Scalar(0) || spread <= std::numeric_limits<Scalar>::epsilon() * (std::abs(xbar) + 1)) {
    fail(ErrorKind::Numerical, "weighted_linfit: singular design (all x identical)");
  }
  LinearFit<Scalar> fit;
  fit.slope = (w.array() * dx.array() * (y.array() - ybar)).sum() / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  const Vector<Scalar> resid = y.array() - fit.intercept - fit.slope * x.array();
  fit.chi_squared = (w.array() * resid.array().square()).sum();
  fit.slope_stderr = std::sqrt(Scalar(1) / sxx);
  fit.intercept_stderr = std::sqrt(Scalar(1) / sw + xbar * xbar / sxx);
  return fit;
}

// --- small descriptive statistics ---------------------------------------

double mean(std::span<const double> values);
/// Sample standard deviation (divisor n-1); 0 for fewer than two values.
double sample_std(std::span<const double> values);
double median(std::vector<double> values);

/// One-sided sign test: P(X >= positives) for X ~ Binomial(n, 1/2).
double sign_test_pvalue(int positives, int n);

// --- escape-time model fits ---------------------------------------------

enum class ModelKind { PowerLaw, Kramers };

std::string to_string(ModelKind kind);

struct ResidualPoint {
  double gamma = 0;
  double log_observed = 0;
  double log_fitted = 0;
};

/// Linear model in log-escape-time space.
///   power law: log tau = a + b log gamma
///   Kramers:   log tau = a + b gamma        (a = ln tau0 + dS/D, b = -kappa/D)
struct FitReport {
  ModelKind model_kind = ModelKind::PowerLaw;
  double intercept = 0;
  double slope = 0;
  double intercept_stderr = 0;
  double slope_stderr = 0;
  double chi_squared = 0;
  double aic = 0;
  std::vector<ResidualPoint> point_residuals;

  static constexpr int kCoefficients = 2;

  [[nodiscard]] double predict_log(double gamma) const;
  [[nodiscard]] double predict(double gamma) const { return std::exp(predict_log(gamma)); }
};

/// Fits one model to (gamma, tau) pairs with the given weights in log space.
FitReport fit_log_model(ModelKind kind, std::span<const double> gammas,
                        std::span<const double> taus, std::span<const double> weights);

}  // namespace pitchfork
