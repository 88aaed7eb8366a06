#pragma once

// Hessian of the probe loss over the prototype means at the symmetric
// collapsed state (all means at the data mean, uniform responsibilities).
//
// Mean coordinates are flattened component-major: index (k, a) -> k * d + a.

#include <optional>
#include <utility>
#include <vector>

#include "pitchfork/gmm_probe.hpp"

namespace pitchfork {

/// Largest K * d for which dense assembly is offered.
inline constexpr Eigen::Index kMaxDenseHessian = 4096;

struct AntisymmetricEigenvalue {
  double value = 0;         // (beta/K)(1 - beta sigma^2)
  double spatial = 0;       // sigma^2
  Eigen::Index degeneracy = 0;  // K - 1
};

struct ChannelSpectrum {
  double beta = 0;
  Eigen::Index K = 0;
  double symmetric_eigenvalue = 0;  // beta / K
  Eigen::Index symmetric_degeneracy = 0;  // d
  std::vector<AntisymmetricEigenvalue> antisymmetric;  // ordered as the spatial eigenvalues
  /// Set when the lowest antisymmetric eigenvalue is negative and the spatial
  /// eigenvectors are known: principal spatial axis times a zero-sum component vector.
  std::optional<VectorXd> unstable_mode;

  [[nodiscard]] double lowest() const;
  /// All K*d eigenvalues with multiplicity, sorted non-increasing.
  [[nodiscard]] VectorXd expanded() const;
};

/// H[(k,a),(l,b)] = (beta/K) d_kl d_ab - (beta^2/K)(d_kl - 1/K) cov_ab
MatrixXd analytic_hessian(double beta, Eigen::Index K, const MatrixXd& cov);

/// Closed-form spectrum from spatial eigenvalues sorted non-increasing.
ChannelSpectrum channel_spectrum(double beta, Eigen::Index K, const VectorXd& spatial_eigs);

/// Closed-form spectrum from a covariance; also fills the unstable mode.
ChannelSpectrum channel_spectrum(double beta, Eigen::Index K, const MatrixXd& cov);

/// Central second differences of nll over the mean coordinates, symmetrized.
/// Step per coordinate is 1e-4 times the sample standard deviation of that coordinate.
MatrixXd numerical_hessian(const GmmProbeState& state_at_collapse, const MatrixXd& samples);

/// Probe state with every prototype at the sample mean.
GmmProbeState collapsed_state(const MatrixXd& samples, Eigen::Index K, double beta);

struct CrossingReport {
  double beta_critical_numeric = 0;
  double beta_critical_analytic = 0;
  std::vector<std::pair<double, double>> scan_points;  // (beta, lowest eigenvalue)
};

/// Bisection (tolerance 1e-6 in beta) on the lowest analytic eigenvalue over
/// [beta_lo, beta_hi], plus a log-spaced scan of `scan_size` points for plotting.
CrossingReport find_crossing(Eigen::Index K, const MatrixXd& cov, double beta_lo, double beta_hi,
                             int scan_size = 41);

/// Same bisection, but on the lowest eigenvalue of the finite-difference Hessian
/// evaluated on `samples`. Returns the crossing beta.
double find_crossing_numerical(Eigen::Index K, const MatrixXd& samples, double beta_lo, double beta_hi,
                               double tol = 1e-6);

/// Temperature convention T = 2 / beta: T_c = 2 lambda_max.
inline double critical_temperature(const MatrixXd& cov) { return 2.0 * lambda_max(cov); }
inline double beta_from_temperature(double temperature) { return 2.0 / temperature; }

}  // namespace pitchfork
