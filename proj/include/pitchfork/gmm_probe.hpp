#pragma once

// K-prototype isotropic Gaussian mixture probe with a shared learned precision.
//
// The probe is passive: it reads latents, never writes them. All functions take
// the state by const reference and return new values, so a probe can be
// evaluated on any number of latent snapshots without aliasing.

#include <cstdint>
#include <limits>
#include <optional>
#include <utility>

#include "pitchfork/mathcore.hpp"
#include "pitchfork/rng.hpp"

namespace pitchfork {

struct ProbeConfig {
  int K_probe = 10;
  double lr_means = 5e-3;
  double lr_logbeta = 1e-2;
  double log_beta_init = -2.5;
  /// Prototype jitter at initialization. Negative selects 1e-3 * sqrt(lambda_max).
  double init_spread = -1.0;

  void validate() const;
};

struct GmmProbeState {
  MatrixXd means;  // K x d, one prototype per row
  double log_precision = 0;

  [[nodiscard]] double beta() const { return std::exp(log_precision); }
  [[nodiscard]] Eigen::Index K() const { return means.rows(); }
  [[nodiscard]] Eigen::Index d() const { return means.cols(); }
};

/// One sample of the label-free phase coordinate.
struct CriticalityReading {
  std::int64_t step = 0;
  double log_beta = 0;
  double log_beta_c = 0;  // +inf when the latent covariance is degenerate
  double log_ratio = 0;
  std::optional<double> nc1;
  double order_parameter = 0;
  bool degenerate_covariance = false;
};

/// 1 / lambda_max(cov).
double beta_c(const MatrixXd& cov);

/// Prototypes at the sample mean plus isotropic jitter.
GmmProbeState init_probe(const MatrixXd& latents, const ProbeConfig& config, Rng& rng);

/// Squared distances ||z_n - mu_k||^2 as an N x K matrix.
MatrixXd squared_distances(const GmmProbeState& state, const MatrixXd& samples);

/// Mean negative log-likelihood per sample, including the beta normalization.
double nll(const GmmProbeState& state, const MatrixXd& samples);

/// Posterior p(k | z_n) as an N x K row-stochastic matrix.
MatrixXd responsibilities(const GmmProbeState& state, const MatrixXd& samples);

struct ProbeGradient {
  MatrixXd means;      // dNLL / dmu, K x d
  double log_beta = 0; // dNLL / dlog(beta)
};

ProbeGradient nll_gradient(const GmmProbeState& state, const MatrixXd& samples);

/// One plain gradient-descent step on `batch`.
GmmProbeState grad_step(const GmmProbeState& state, const MatrixXd& batch, const ProbeConfig& config);

/// Same as grad_step but with the precision frozen; `lr` applies to the means.
GmmProbeState means_step(const GmmProbeState& state, const MatrixXd& batch, double lr);

/// Root-mean-square deviation of the prototypes about their mean.
double order_parameter(const GmmProbeState& state);

/// Principal eigenvector of the prototype scatter (unit norm, sign arbitrary).
VectorXd split_direction(const GmmProbeState& state);

/// Reading for `state` against latents with covariance `latent_cov`.
CriticalityReading make_reading(std::int64_t step, const GmmProbeState& state,
                                const MatrixXd& latent_cov);

/// Full-batch gradient step against detached latents followed by a reading.
std::pair<GmmProbeState, CriticalityReading> probe_step(const GmmProbeState& state,
                                                        const MatrixXd& latents,
                                                        const ProbeConfig& config,
                                                        std::int64_t step);

}  // namespace pitchfork
