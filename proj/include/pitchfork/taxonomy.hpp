#pragma once

// Shape classification of (log(beta/beta_c), log NC1) trajectories, and seeded
// generators of synthetic trajectories for each shape.

#include <cstdint>
#include <optional>
#include <string>

#include "pitchfork/experiments.hpp"

namespace pitchfork {

enum class ShapeClass { FullV, FoldBack, DelayedEscape, NoArc, Indeterminate };

std::string to_string(ShapeClass c);
std::optional<ShapeClass> shape_from_string(const std::string& name);

struct ShapeEvidence {
  double descent_corr = 0;     // corr(log_ratio, log10 NC1) on the descent leg
  int descent_sign = 0;        // sign of that slope
  double plateau_fraction = 0; // (descent onset - crossing) / T
  double decoupling_corr = 0;  // corr over the whole trajectory
  double fold_magnitude = 0;   // peak log_ratio minus final log_ratio
};

struct ClassifierThresholds {
  double decoupling = 0.5;      // |corr| below this is NoArc
  double plateau = 0.1;         // plateau fraction at or above this is DelayedEscape
  double descent_decades = 0.5; // NC1 drop that marks the descent onset
  /// A drop counts as sustained when it holds for this fraction of the samples (at least 3).
  double sustain_fraction = 0.05;
};

struct ShapeResult {
  ShapeClass shape = ShapeClass::Indeterminate;
  ShapeEvidence evidence;
  std::optional<std::size_t> crossing_index;
  std::optional<std::size_t> onset_index;
};

/// Decision procedure over the log's log_ratio and NC1 channels. `horizon` is the
/// time span T; when absent it is the span of the recorded steps.
ShapeResult classify(const TrajectoryLog& log, std::optional<double> horizon = std::nullopt,
                     const ClassifierThresholds& thresholds = {});

enum class InitialCriticality { Sub, Super };
enum class RateOrdering { BetaLeads, BetaCLeads };
enum class DissipationRegime { Normal, Low };

struct AxisReading {
  InitialCriticality initial_criticality = InitialCriticality::Sub;
  RateOrdering rate_ordering = RateOrdering::BetaLeads;
  DissipationRegime dissipation_regime = DissipationRegime::Normal;
};

/// Needs at least 20 readings.
AxisReading read_axes(const TrajectoryLog& log, const ClassifierThresholds& thresholds = {});

/// Seeded synthetic trajectory with the defining kinematics of `shape`
/// (FullV, FoldBack, DelayedEscape or NoArc). `samples` readings over steps 0..samples-1.
TrajectoryLog synthesize_trajectory(ShapeClass shape, std::uint64_t seed, int samples = 400);

}  // namespace pitchfork
