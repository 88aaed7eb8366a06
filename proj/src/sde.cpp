#include "pitchfork/sde.hpp"

#include <algorithm>
#include <cmath>

namespace pitchfork {

namespace {

constexpr double kStabilityGuard = 0.2;

MatrixXd unit_rows(const MatrixXd& m) {
  MatrixXd out = MatrixXd::Zero(m.rows(), m.cols());
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    const double n = m.row(k).norm();
    if (n > 0) out.row(k) = m.row(k) / n;
  }
  return out;
}

void finish(SdeRunResult& run) {
  run.initial_directions = unit_rows(run.initial_state);
  run.final_directions = unit_rows(run.final_state);
}

void check_finite(double value, std::int64_t step) {
  if (!std::isfinite(value)) {
    fail(ErrorKind::Numerical, "state became non-finite at step " + std::to_string(step));
  }
}

}  // namespace

double SdeConfig::eps_star() const {
  return growth_rate > 0 ? std::sqrt(growth_rate / alpha) : std::numeric_limits<double>::quiet_NaN();
}

void SdeConfig::validate() const {
  if (!(alpha > 0)) fail(ErrorKind::Validation, "alpha must be > 0");
  if (!(coupling >= 0)) fail(ErrorKind::Validation, "coupling must be >= 0");
  if (!(noise_intensity >= 0)) fail(ErrorKind::Validation, "noise_intensity must be >= 0");
  if (!(dt > 0)) fail(ErrorKind::Validation, "dt must be > 0");
  if (steps < 1) fail(ErrorKind::Validation, "steps must be >= 1");
  if (modes < 1 || dim < 1) fail(ErrorKind::Validation, "modes and dim must be >= 1");
  if (!std::isfinite(growth_rate) || !std::isfinite(init_scale)) {
    fail(ErrorKind::Validation, "growth_rate and init_scale must be finite");
  }
  double rate = std::abs(growth_rate);
  if (growth_rate > 0) rate = std::max(rate, alpha * eps_star() * eps_star());
  rate = std::max(rate, coupling * static_cast<double>(modes));
  if (dt * rate > kStabilityGuard) {
    fail(ErrorKind::Validation, "stability guard: dt * max(|mu|, alpha eps*^2, gamma K) = " +
                                    std::to_string(dt * rate) + " exceeds 0.2");
  }
}

TiltPotential TiltPotential::quadratic(double c) {
  return {"quadratic", [c](double e) { return -0.5 * c * e * e; }, [c](double e) { return -c * e; }};
}

TiltPotential TiltPotential::none() {
  return {"none", [](double) { return 0.0; }, [](double) { return 0.0; }};
}

double effective_potential(const SdeConfig& config, const TiltPotential& tilt, double eps) {
  return -0.5 * config.growth_rate * eps * eps + 0.25 * config.alpha * eps * eps * eps * eps +
         config.coupling * tilt.U(eps);
}

double scalar_drift(const SdeConfig& config, const TiltPotential& tilt, double eps) {
  const double tilt_force = config.coupling != 0 ? config.coupling * tilt.dU(eps) : 0.0;
  return config.growth_rate * eps - config.alpha * eps * eps * eps - tilt_force;
}

std::int64_t record_stride(std::int64_t steps) { return std::max<std::int64_t>(1, steps / 2000); }

SdeRunResult simulate_pitchfork_1d(const SdeConfig& config) {
  if (config.modes != 1 || config.dim != 1) {
    fail(ErrorKind::Validation, "simulate_pitchfork_1d needs modes = 1 and dim = 1");
  }
  return simulate_tilted_langevin(config, TiltPotential::none());
}

SdeRunResult simulate_tilted_langevin(const SdeConfig& config, const TiltPotential& tilt,
                                      std::optional<double> stop_threshold) {
  config.validate();
  if (config.modes != 1 || config.dim != 1) {
    fail(ErrorKind::Validation, "tilted Langevin needs modes = 1 and dim = 1");
  }
  Rng rng(config.seed);
  const double kick = std::sqrt(2.0 * config.noise_intensity * config.dt);
  const std::int64_t stride = record_stride(config.steps);

  SdeRunResult run;
  run.seed = config.seed;
  double eps = config.init_scale;
  run.initial_state = MatrixXd::Constant(1, 1, eps);
  run.times.push_back(0.0);
  run.path_samples.push_back(run.initial_state);

  for (std::int64_t step = 1; step <= config.steps; ++step) {
    eps += scalar_drift(config, tilt, eps) * config.dt;
    if (config.noise_intensity > 0) eps += kick * rng.normal();
    check_finite(eps, step);
    const bool stop = stop_threshold && std::abs(eps) >= *stop_threshold;
    if (step % stride == 0 || step == config.steps || stop) {
      run.times.push_back(static_cast<double>(step) * config.dt);
      run.path_samples.push_back(MatrixXd::Constant(1, 1, eps));
    }
    if (stop) {
      run.stop_step = step;
      break;
    }
  }
  run.final_state = MatrixXd::Constant(1, 1, eps);
  finish(run);
  return run;
}

SdeRunResult simulate_coupled_modes(const SdeConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const double kick = std::sqrt(2.0 * config.noise_intensity * config.dt);
  const std::int64_t stride = record_stride(config.steps);

  SdeRunResult run;
  run.seed = config.seed;
  MatrixXd eps = rng.normal_matrix(config.modes, config.dim, config.init_scale);
  run.initial_state = eps;
  run.times.push_back(0.0);
  run.path_samples.push_back(eps);

  MatrixXd drift(config.modes, config.dim);
  for (std::int64_t step = 1; step <= config.steps; ++step) {
    const VectorXd sq = eps.rowwise().squaredNorm();
    drift = eps.array().colwise() * (config.growth_rate - config.alpha * sq.array());
    if (config.coupling != 0 && config.modes > 1) {
      MatrixXd gram = eps * eps.transpose();
      gram.diagonal().setZero();
      drift.noalias() -= config.coupling * gram * eps;
    }
    eps += config.dt * drift;
    if (config.noise_intensity > 0) eps += rng.normal_matrix(config.modes, config.dim, kick);
    if (!eps.allFinite()) check_finite(std::numeric_limits<double>::quiet_NaN(), step);
    if (step % stride == 0 || step == config.steps) {
      run.times.push_back(static_cast<double>(step) * config.dt);
      run.path_samples.push_back(eps);
    }
  }
  run.final_state = eps;
  finish(run);
  return run;
}

PersistenceStats persistence_stats(const SdeRunResult& run, const VectorXd& reference) {
  if (reference.size() != run.final_state.cols()) {
    fail(ErrorKind::Dimension, "reference direction dimension does not match the run");
  }
  PersistenceStats s;
  const VectorXd r = reference.normalized();
  double theta_sum = 0;
  int positives = 0;
  for (Eigen::Index k = 0; k < run.final_state.rows(); ++k) {
    if (run.final_state.row(k).norm() == 0 || run.initial_state.row(k).norm() == 0) {
      s.excluded_modes.push_back(k);
      continue;
    }
    const double c = std::clamp(run.initial_directions.row(k).dot(run.final_directions.row(k)), -1.0, 1.0);
    s.cosines.push_back(c);
    if (c > 0) ++positives;
    const double angle = std::acos(c);
    theta_sum += angle * angle;
    s.initial_projection.push_back(run.initial_state.row(k).dot(r));
    s.final_projection.push_back(run.final_state.row(k).dot(r));
  }
  if (s.cosines.empty()) fail(ErrorKind::Numerical, "every mode has zero magnitude");
  s.mean_cosine = mean(s.cosines);
  s.theta_squared = theta_sum / static_cast<double>(s.cosines.size());
  s.sign_test_pvalue = sign_test_pvalue(positives, static_cast<int>(s.cosines.size()));
  if (s.cosines.size() >= 3) s.spearman = spearman(s.initial_projection, s.final_projection);
  return s;
}

double shuffled_spearman(const PersistenceStats& stats, Rng& rng) {
  std::vector<double> shuffled = stats.final_projection;
  // Fisher-Yates with the project generator so the baseline is reproducible.
  for (std::size_t i = shuffled.size(); i > 1; --i) {
    std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
  }
  return spearman(stats.initial_projection, shuffled);
}

double mean_abs_overlap(const MatrixXd& directions) {
  const Eigen::Index k = directions.rows();
  if (k < 2) return 0.0;
  const MatrixXd gram = directions * directions.transpose();
  const double total = gram.cwiseAbs().sum() - gram.diagonal().cwiseAbs().sum();
  return total / static_cast<double>(k * (k - 1));
}

PersistencePrediction predict_persistence(const SdeConfig& config) {
  if (!(config.growth_rate > 0)) fail(ErrorKind::Validation, "predict_persistence needs growth_rate > 0");
  if (!(config.alpha > 0)) fail(ErrorKind::Validation, "alpha must be > 0");
  const double mu = config.growth_rate;
  const double D = config.noise_intensity;
  const double sigma0 = std::abs(config.init_scale);
  const double dm1 = static_cast<double>(config.dim - 1);
  const double horizon = static_cast<double>(config.steps) * config.dt;

  PersistencePrediction p;
  p.r_star = std::sqrt(mu / config.alpha);
  if (D > 0) {
    p.sigma_star = sigma0 / std::sqrt(D / mu);
    p.tau_r = std::log(p.sigma_star * std::sqrt(mu / (config.alpha * D))) / mu;
    p.t_rand = dm1 > 0 ? p.r_star * p.r_star / (2.0 * dm1 * D) : std::numeric_limits<double>::infinity();
    p.growth_term = dm1 / (p.sigma_star * p.sigma_star);
    p.saturation_term = std::isfinite(p.t_rand) ? std::max(horizon - p.tau_r, 0.0) / p.t_rand : 0.0;
  } else {
    // Deterministic growth: no angular noise, saturation after ln(r*/sigma0)/mu.
    p.sigma_star = std::numeric_limits<double>::infinity();
    p.tau_r = sigma0 > 0 ? std::log(p.r_star / sigma0) / mu : std::numeric_limits<double>::infinity();
  }
  p.theta_sq = p.growth_term + p.saturation_term;
  p.expected_cosine = 1.0 - 0.5 * p.theta_sq;
  p.randomizing_regime = p.saturation_term > 1.0;
  return p;
}

}  // namespace pitchfork
