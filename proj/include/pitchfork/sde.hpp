#pragma once

// Euler-Maruyama simulators for the pitchfork normal form, its tilted variant
// and the K-mode coupled system, plus the angular-persistence budget.
//
// Noise convention: <eta(t) eta(t')> = 2 D delta(t - t'), so every coordinate
// receives sqrt(2 D dt) * N(0, 1) per step. No normals are drawn when D = 0.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pitchfork/mathcore.hpp"
#include "pitchfork/rng.hpp"

namespace pitchfork {

struct SdeConfig {
  double growth_rate = 0.1;  // mu = beta - beta_c
  double alpha = 0.1;
  double coupling = 0.0;     // gamma
  double noise_intensity = 0.0;  // D
  double dt = 0.01;
  std::int64_t steps = 1000;
  Eigen::Index modes = 1;
  Eigen::Index dim = 1;
  /// Initial value for the scalar systems; Gaussian scale per coordinate for the coupled one.
  double init_scale = 0.01;
  std::uint64_t seed = 0;

  /// Fixed point sqrt(mu / alpha); NaN when mu <= 0.
  [[nodiscard]] double eps_star() const;
  /// Throws Validation when parameters are out of range or dt breaks the stability guard.
  void validate() const;
};

/// Tilt U(eps) entering the drift as -gamma U'(eps).
struct TiltPotential {
  std::string name;
  std::function<double(double)> U;
  std::function<double(double)> dU;

  /// U = -(c/2) eps^2. With c > 0 the drift gains +gamma c eps.
  static TiltPotential quadratic(double c = 1.0);
  static TiltPotential none();
};

/// -(1/2) mu eps^2 + (1/4) alpha eps^4 + gamma U(eps)
double effective_potential(const SdeConfig& config, const TiltPotential& tilt, double eps);

/// mu eps - alpha eps^3 - gamma U'(eps)
double scalar_drift(const SdeConfig& config, const TiltPotential& tilt, double eps);

struct SdeRunResult {
  std::vector<double> times;          // strictly increasing
  std::vector<MatrixXd> path_samples; // modes x dim each
  MatrixXd initial_state;
  MatrixXd final_state;
  MatrixXd initial_directions;  // unit rows; zero rows for zero-norm modes
  MatrixXd final_directions;
  std::uint64_t seed = 0;
  /// First step at which |eps| reached the stop threshold, if one was requested and hit.
  std::optional<std::int64_t> stop_step;
};

/// Stride between recorded states: max(1, steps / 2000).
std::int64_t record_stride(std::int64_t steps);

SdeRunResult simulate_pitchfork_1d(const SdeConfig& config);

/// Integrates the tilted scalar system. When `stop_threshold` is given the run
/// ends at the first step with |eps| >= threshold.
SdeRunResult simulate_tilted_langevin(const SdeConfig& config, const TiltPotential& tilt,
                                      std::optional<double> stop_threshold = std::nullopt);

/// eps_k' = mu eps_k - alpha |eps_k|^2 eps_k - gamma sum_{j != k} (eps_j . eps_k) eps_j + eta_k
SdeRunResult simulate_coupled_modes(const SdeConfig& config);

struct PersistenceStats {
  std::vector<double> cosines;           // d_k(0) . d_k(T) over included modes
  std::vector<double> initial_projection;  // <eps_k(0), r>
  std::vector<double> final_projection;    // <eps_k(T), r>
  std::vector<Eigen::Index> excluded_modes;  // zero final magnitude
  double spearman = 0;
  double mean_cosine = 0;
  double sign_test_pvalue = 1;
  /// Mean squared angle between initial and final directions.
  double theta_squared = 0;
};

PersistenceStats persistence_stats(const SdeRunResult& run, const VectorXd& reference);

/// Spearman of the projection pairs after randomly permuting the final modes.
double shuffled_spearman(const PersistenceStats& stats, Rng& rng);

/// Mean |d_j . d_k| over distinct pairs of the given unit rows.
double mean_abs_overlap(const MatrixXd& directions);

struct PersistencePrediction {
  double sigma_star = 0;  // init_scale / sqrt(D / mu)
  double tau_r = 0;       // radial saturation time
  double r_star = 0;      // sqrt(mu / alpha)
  double t_rand = std::numeric_limits<double>::infinity();
  double growth_term = 0;       // (d - 1) / sigma*^2
  double saturation_term = 0;   // max(T - tau_r, 0) / T_rand
  double theta_sq = 0;
  double expected_cosine = 1;
  bool randomizing_regime = false;  // saturation term > 1
};

/// Angular budget at horizon T = steps * dt.
PersistencePrediction predict_persistence(const SdeConfig& config);

}  // namespace pitchfork
