#pragma once

// Escape-time measurement on the tilted normal form and the power-law versus
// Kramers comparison of escape times across a dissipation sweep.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "pitchfork/mathcore.hpp"
#include "pitchfork/sde.hpp"

namespace pitchfork {

struct EscapeObservation {
  double gamma = 0;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> tau;  // steps; empty when censored
  std::int64_t horizon = 0;

  [[nodiscard]] bool censored() const { return !tau.has_value(); }
};

/// Aggregate escape statistics at one gamma.
struct EscapeLevel {
  double gamma = 0;
  double tau_mean = 0;  // over escaped seeds
  double tau_std = 0;   // divisor n - 1
  int n_seeds = 0;
  int n_escaped = 0;
  /// Any seed censored. Such levels are reported but never fitted.
  bool censored = false;

  [[nodiscard]] double escape_fraction() const {
    return n_seeds > 0 ? static_cast<double>(n_escaped) / n_seeds : 0.0;
  }
};

enum class FitWeighting { RelativeError, Unit };

struct SweepSummary {
  std::vector<EscapeLevel> levels;
  std::vector<EscapeObservation> observations;
  std::optional<FitReport> power_law;
  std::optional<FitReport> kramers;
  double delta_aic = 0;  // kramers.aic - power_law.aic
  FitWeighting weighting = FitWeighting::RelativeError;
  std::vector<double> fitted_gammas;
};

/// Raised when a sweep has too few uncensored levels to fit. Carries the summary.
class NoFitError : public Error {
 public:
  NoFitError(const std::string& what, SweepSummary summary)
      : Error(ErrorKind::NoFit, what), summary_(std::move(summary)) {}
  [[nodiscard]] const SweepSummary& summary() const noexcept { return summary_; }

 private:
  SweepSummary summary_;
};

/// First step with |eps| >= threshold within `horizon` steps, else censored.
/// config.coupling is the tilt strength gamma; config.steps is ignored.
EscapeObservation measure_escape(const SdeConfig& config, const TiltPotential& tilt, double threshold,
                                 std::int64_t horizon);

/// Default threshold eps* / 2.
double default_threshold(const SdeConfig& config);

/// Runs every (gamma, seed) cell, aggregates per gamma and fits both models.
/// Seeds are derived from config.seed and the cell index. Throws NoFitError when
/// fewer than three levels are fully uncensored.
SweepSummary run_sweep(const std::vector<double>& gammas, int seeds_per_gamma, const SdeConfig& config,
                       const TiltPotential& tilt, double threshold, std::int64_t horizon);

/// Fits both models to the uncensored levels.
SweepSummary fit_escape_models(const std::vector<EscapeLevel>& levels,
                               FitWeighting weighting = FitWeighting::RelativeError);

/// Reads `gamma,tau_mean,tau_std,n_seeds,censored`. Censored rows may leave the
/// tau fields empty.
std::vector<EscapeLevel> parse_escape_table(std::istream& in);

}  // namespace pitchfork
