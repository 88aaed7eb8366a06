#include "pitchfork/gmm_probe.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace pitchfork {

namespace {

void check_dims(const GmmProbeState& state, const MatrixXd& samples) {
  if (samples.rows() == 0) fail(ErrorKind::Dimension, "empty sample set");
  if (samples.cols() != state.d()) {
    fail(ErrorKind::Dimension, "sample dimension " + std::to_string(samples.cols()) +
                                   " does not match probe dimension " + std::to_string(state.d()));
  }
  if (state.K() < 1 || state.d() < 1) fail(ErrorKind::Validation, "probe needs K >= 1 and d >= 1");
  if (!std::isfinite(state.log_precision)) fail(ErrorKind::Validation, "log precision is not finite");
}

// Logits -beta/2 * dist2, shifted per row so the maximum is 0. Returns the shift.
VectorXd shifted_logits(const GmmProbeState& state, const MatrixXd& samples, MatrixXd& logits) {
  logits = -0.5 * state.beta() * squared_distances(state, samples);
  VectorXd row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  return row_max;
}

std::string beta_report(double log_beta) {
  std::ostringstream os;
  os << "non-finite gradient at beta = " << std::exp(log_beta) << " (log beta = " << log_beta << ")";
  return os.str();
}

}  // namespace

void ProbeConfig::validate() const {
  if (K_probe < 1) fail(ErrorKind::Validation, "K_probe must be >= 1");
  if (!(lr_means > 0) || !(lr_logbeta > 0)) fail(ErrorKind::Validation, "learning rates must be positive");
  if (!std::isfinite(log_beta_init)) fail(ErrorKind::Validation, "log_beta_init must be finite");
}

double beta_c(const MatrixXd& cov) {
  const double top = lambda_max(cov);
  if (!(top > 0)) fail(ErrorKind::Numerical, "degenerate covariance: lambda_max <= 0");
  return 1.0 / top;
}

GmmProbeState init_probe(const MatrixXd& latents, const ProbeConfig& config, Rng& rng) {
  config.validate();
  if (latents.rows() < 1) fail(ErrorKind::Dimension, "init_probe needs latents");
  double spread = config.init_spread;
  if (spread < 0) {
    const double top = latents.rows() >= 2 ? lambda_max(covariance(latents)) : 0.0;
    spread = 1e-3 * std::sqrt(std::max(top, 0.0));
  }
  const RowVectorXd centre = latents.colwise().mean();
  GmmProbeState state;
  state.means = rng.normal_matrix(config.K_probe, latents.cols(), spread);
  state.means.rowwise() += centre;
  state.log_precision = config.log_beta_init;
  return state;
}

MatrixXd squared_distances(const GmmProbeState& state, const MatrixXd& samples) {
  MatrixXd d2(samples.rows(), state.K());
  for (Eigen::Index k = 0; k < state.K(); ++k) {
    d2.col(k) = (samples.rowwise() - state.means.row(k)).rowwise().squaredNorm();
  }
  return d2;
}

double nll(const GmmProbeState& state, const MatrixXd& samples) {
  check_dims(state, samples);
  MatrixXd logits;
  const VectorXd shift = shifted_logits(state, samples, logits);
  const VectorXd lse = shift.array() + logits.array().exp().rowwise().sum().log();
  const double d = static_cast<double>(state.d());
  const double constant = std::log(static_cast<double>(state.K())) +
                          0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * d * state.log_precision;
  return -lse.mean() + constant;
}

MatrixXd responsibilities(const GmmProbeState& state, const MatrixXd& samples) {
  check_dims(state, samples);
  MatrixXd logits;
  shifted_logits(state, samples, logits);
  MatrixXd p = logits.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

ProbeGradient nll_gradient(const GmmProbeState& state, const MatrixXd& samples) {
  check_dims(state, samples);
  const double beta = state.beta();
  const double n = static_cast<double>(samples.rows());
  const MatrixXd d2 = squared_distances(state, samples);
  MatrixXd p = -0.5 * beta * d2;
  p.colwise() -= p.rowwise().maxCoeff();
  p = p.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();

  ProbeGradient g;
  // -beta * mean_z p_k (z - mu_k) = -beta/N (P^T Z - diag(sum_n p_nk) M)
  const VectorXd mass = p.colwise().sum().transpose();
  g.means = -(beta / n) * (p.transpose() * samples - mass.asDiagonal() * state.means);
  const double dnll_dbeta = 0.5 * (p.array() * d2.array()).sum() / n - 0.5 * static_cast<double>(state.d()) / beta;
  g.log_beta = beta * dnll_dbeta;
  if (!g.means.allFinite() || !std::isfinite(g.log_beta)) {
    fail(ErrorKind::Numerical, beta_report(state.log_precision));
  }
  return g;
}

GmmProbeState grad_step(const GmmProbeState& state, const MatrixXd& batch, const ProbeConfig& config) {
  const ProbeGradient g = nll_gradient(state, batch);
  GmmProbeState next;
  next.means = state.means - config.lr_means * g.means;
  next.log_precision = state.log_precision - config.lr_logbeta * g.log_beta;
  if (!next.means.allFinite() || !std::isfinite(next.log_precision)) {
    fail(ErrorKind::Numerical, beta_report(state.log_precision));
  }
  return next;
}

GmmProbeState means_step(const GmmProbeState& state, const MatrixXd& batch, double lr) {
  const ProbeGradient g = nll_gradient(state, batch);
  GmmProbeState next{state.means - lr * g.means, state.log_precision};
  if (!next.means.allFinite()) fail(ErrorKind::Numerical, beta_report(state.log_precision));
  return next;
}

double order_parameter(const GmmProbeState& state) {
  const RowVectorXd centre = state.means.colwise().mean();
  return std::sqrt((state.means.rowwise() - centre).rowwise().squaredNorm().mean());
}

VectorXd split_direction(const GmmProbeState& state) {
  const RowVectorXd centre = state.means.colwise().mean();
  const MatrixXd centred = state.means.rowwise() - centre;
  const MatrixXd scatter = centred.transpose() * centred;
  return sym_eigen(scatter).eigenvectors.col(0);
}

CriticalityReading make_reading(std::int64_t step, const GmmProbeState& state, const MatrixXd& latent_cov) {
  CriticalityReading r;
  r.step = step;
  r.log_beta = state.log_precision;
  const double top = lambda_max(latent_cov);
  if (top > 0) {
    r.log_beta_c = -std::log(top);
  } else {
    r.log_beta_c = std::numeric_limits<double>::infinity();
    r.degenerate_covariance = true;
  }
  r.log_ratio = r.log_beta - r.log_beta_c;
  r.order_parameter = order_parameter(state);
  return r;
}

std::pair<GmmProbeState, CriticalityReading> probe_step(const GmmProbeState& state, const MatrixXd& latents,
                                                        const ProbeConfig& config, std::int64_t step) {
  GmmProbeState next = grad_step(state, latents, config);
  CriticalityReading reading = make_reading(step, next, covariance(latents));
  return {std::move(next), reading};
}

}  // namespace pitchfork
