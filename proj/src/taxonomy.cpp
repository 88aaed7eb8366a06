#include "pitchfork/taxonomy.hpp"

#include <algorithm>
#include <cmath>

#include "pitchfork/escape_lab.hpp"

namespace pitchfork {

namespace {

double safe_corr(const VectorXd& x, const VectorXd& y) {
  try {
    return pearson(x, y);
  } catch (const Error&) {
    return 0.0;
  }
}

std::size_t argmax(const VectorXd& v) {
  Eigen::Index i = 0;
  v.maxCoeff(&i);
  return static_cast<std::size_t>(i);
}

struct Channels {
  VectorXd x;  // log_ratio
  VectorXd y;  // log10 NC1
  VectorXd steps;
};

Channels channels(const TrajectoryLog& log) {
  const auto n = static_cast<Eigen::Index>(log.readings.size());
  if (n < 3) fail(ErrorKind::Dimension, "classification needs at least 3 readings");
  Channels c{VectorXd(n), VectorXd(n), VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = log.readings[static_cast<std::size_t>(i)];
    if (!r.nc1) fail(ErrorKind::Validation, "reading at step " + std::to_string(r.step) + " has no NC1 value");
    if (!(*r.nc1 > 0) || !std::isfinite(r.log_ratio)) {
      fail(ErrorKind::Validation, "reading at step " + std::to_string(r.step) + " has non-positive NC1 or bad ratio");
    }
    c.x(i) = r.log_ratio;
    c.y(i) = std::log10(*r.nc1);
    c.steps(i) = static_cast<double>(r.step);
  }
  return c;
}

std::size_t min_sustain(std::size_t n, const ClassifierThresholds& t) {
  return std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil(t.sustain_fraction * static_cast<double>(n))));
}

std::optional<std::size_t> descent_onset(const VectorXd& y, const ClassifierThresholds& t) {
  const auto n = static_cast<std::size_t>(y.size());
  const auto sustain = min_sustain(n, t);
  double peak = y(0);
  for (std::size_t i = 0; i < n; ++i) {
    peak = std::max(peak, y(static_cast<Eigen::Index>(i)));
    const double level = peak - t.descent_decades;
    if (y(static_cast<Eigen::Index>(i)) > level) continue;
    const std::size_t end = std::min(n, i + sustain);
    bool held = true;
    for (std::size_t j = i; j < end && held; ++j) held = y(static_cast<Eigen::Index>(j)) <= level;
    if (held && end - i == sustain) return i;
  }
  return std::nullopt;
}

}  // namespace

std::string to_string(ShapeClass c) {
  switch (c) {
    case ShapeClass::FullV: return "FullV";
    case ShapeClass::FoldBack: return "FoldBack";
    case ShapeClass::DelayedEscape: return "DelayedEscape";
    case ShapeClass::NoArc: return "NoArc";
    case ShapeClass::Indeterminate: return "Indeterminate";
  }
  return "Indeterminate";
}

std::optional<ShapeClass> shape_from_string(const std::string& name) {
  for (auto c : {ShapeClass::FullV, ShapeClass::FoldBack, ShapeClass::DelayedEscape, ShapeClass::NoArc,
                 ShapeClass::Indeterminate}) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

ShapeResult classify(const TrajectoryLog& log, std::optional<double> horizon, const ClassifierThresholds& t) {
  const Channels c = channels(log);
  const auto n = static_cast<std::size_t>(c.x.size());
  ShapeResult result;
  ShapeEvidence& ev = result.evidence;
  ev.decoupling_corr = safe_corr(c.x, c.y);
  ev.fold_magnitude = c.x.maxCoeff() - c.x(c.x.size() - 1);

  if (std::abs(ev.decoupling_corr) < t.decoupling) {
    result.shape = ShapeClass::NoArc;
    return result;
  }

  std::size_t crossing = 0;
  while (crossing < n && c.x(static_cast<Eigen::Index>(crossing)) < 0) ++crossing;
  if (crossing == n) {
    result.shape = ShapeClass::Indeterminate;
    return result;
  }
  result.crossing_index = crossing;
  result.onset_index = descent_onset(c.y, t);

  // Without an explicit horizon, time is measured in samples, which makes the
  // fraction invariant to any monotone relabelling of the steps.
  const std::size_t onset = result.onset_index.value_or(n - 1);
  if (horizon) {
    if (!(*horizon > 0)) fail(ErrorKind::Validation, "horizon must be > 0");
    ev.plateau_fraction = (c.steps(static_cast<Eigen::Index>(onset)) - c.steps(static_cast<Eigen::Index>(crossing))) / *horizon;
  } else {
    ev.plateau_fraction = (static_cast<double>(onset) - static_cast<double>(crossing)) / static_cast<double>(n - 1);
  }
  if (ev.plateau_fraction >= t.plateau) {
    result.shape = ShapeClass::DelayedEscape;
    ev.descent_sign = ev.decoupling_corr < 0 ? -1 : 1;
    ev.descent_corr = ev.decoupling_corr;
    return result;
  }

  // Descent leg: from the later of the NC1 peak and the ratio peak, unless that
  // leaves fewer samples than a sustained drop needs.
  const std::size_t nc_peak = argmax(c.y);
  const std::size_t ratio_peak = argmax(c.x);
  const std::size_t min_leg = min_sustain(n, t);
  std::size_t start = std::max(nc_peak, ratio_peak);
  if (n - start < min_leg) start = std::min(nc_peak, ratio_peak);
  if (n - start < min_leg) start = 0;
  const auto len = static_cast<Eigen::Index>(n - start);
  const auto s = static_cast<Eigen::Index>(start);
  ev.descent_corr = safe_corr(c.x.segment(s, len), c.y.segment(s, len));
  if (ev.descent_corr == 0) ev.descent_corr = ev.decoupling_corr;
  ev.descent_sign = ev.descent_corr < 0 ? -1 : 1;
  result.shape = ev.descent_sign < 0 ? ShapeClass::FullV : ShapeClass::FoldBack;
  return result;
}

AxisReading read_axes(const TrajectoryLog& log, const ClassifierThresholds& t) {
  if (log.readings.size() < 20) fail(ErrorKind::Dimension, "axis reading needs at least 20 readings");
  const ShapeResult shape = classify(log, std::nullopt, t);
  AxisReading axes;
  axes.initial_criticality = log.readings.front().log_ratio < 0 ? InitialCriticality::Sub : InitialCriticality::Super;
  std::size_t from = shape.onset_index.value_or(shape.crossing_index.value_or(0));
  int up = 0, down = 0;
  for (std::size_t i = from + 1; i < log.readings.size(); ++i) {
    const double dx = log.readings[i].log_ratio - log.readings[i - 1].log_ratio;
    if (dx > 0) ++up;
    if (dx < 0) ++down;
  }
  axes.rate_ordering = up >= down ? RateOrdering::BetaLeads : RateOrdering::BetaCLeads;
  axes.dissipation_regime =
      shape.evidence.plateau_fraction >= t.plateau ? DissipationRegime::Low : DissipationRegime::Normal;
  return axes;
}

// --- synthetic trajectories ------------------------------------------------------

namespace {

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

/// Decay from 0 at t0 to -depth at t = 1 with time constant tau.
double decay(double t, double t0, double tau, double depth) {
  if (t <= t0) return 0.0;
  const double full = 1.0 - std::exp(-(1.0 - t0) / tau);
  return -depth * (1.0 - std::exp(-(t - t0) / tau)) / full;
}

TrajectoryLog assemble(const VectorXd& x, const VectorXd& y, const std::string& name, std::uint64_t seed) {
  TrajectoryLog log;
  log.experiment = "synthetic_" + name;
  log.seed = seed;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    CriticalityReading r;
    r.step = i;
    r.log_beta_c = -1.0;
    r.log_beta = r.log_beta_c + x(i);
    r.log_ratio = r.log_beta - r.log_beta_c;
    r.nc1 = std::pow(10.0, y(i));
    r.order_parameter = std::max(0.0, x(i));
    log.readings.push_back(r);
  }
  return log;
}

}  // namespace

TrajectoryLog synthesize_trajectory(ShapeClass shape, std::uint64_t seed, int samples) {
  if (samples < 20) fail(ErrorKind::Validation, "synthetic trajectories need at least 20 samples");
  Rng rng(seed);
  const Eigen::Index n = samples;
  VectorXd x(n), y(n);
  const double noise = 0.04;
  auto t_of = [n](Eigen::Index i) { return static_cast<double>(i) / static_cast<double>(n - 1); };

  switch (shape) {
    case ShapeClass::FullV: {
      // Ratio rises through zero; NC1 peaks at the crossing and falls.
      const double a = uniform(rng, -2.0, -1.0), b = uniform(rng, 3.0, 4.0);
      const double tc = -a / b;
      const double tp = tc + uniform(rng, 0.0, 0.02);
      const double depth = uniform(rng, 1.5, 2.5), tau = uniform(rng, 0.05, 0.12), rise = uniform(rng, 0.1, 0.3);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double t = t_of(i);
        x(i) = a + b * t + noise * rng.normal();
        y(i) = (t < tp ? rise * t / tp : rise + decay(t, tp, tau, depth)) + noise * rng.normal();
      }
      break;
    }
    case ShapeClass::FoldBack: {
      // Ratio crosses, peaks shortly after, and folds back while NC1 keeps falling.
      const double a = uniform(rng, -1.0, -0.5), tc = uniform(rng, 0.1, 0.2);
      const double tf = tc + uniform(rng, 0.02, 0.06);
      const double slope = -a / tc, peak = a + slope * tf;
      const double fold = uniform(rng, 2.0, 4.0);
      const double depth = uniform(rng, 2.0, 3.0), tau = uniform(rng, 0.2, 0.4);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double t = t_of(i);
        x(i) = (t < tf ? a + slope * t : peak - fold * (t - tf) / (1.0 - tf)) + noise * rng.normal();
        y(i) = decay(t, tc, tau, depth) + noise * rng.normal();
      }
      break;
    }
    case ShapeClass::DelayedEscape: {
      // Ratio crosses almost immediately; the NC1 proxy follows the escape of the
      // tilted normal form, which leaves the saddle only after a long plateau.
      SdeConfig cfg;
      cfg.growth_rate = 0.01;
      cfg.alpha = 0.01;
      cfg.coupling = uniform(rng, 0.002, 0.008);
      cfg.noise_intensity = 1e-12;
      cfg.init_scale = 0.0;
      cfg.dt = 0.5;
      cfg.steps = 3200;
      cfg.seed = derive_seed(seed, 1);
      const SdeRunResult run = simulate_tilted_langevin(cfg, TiltPotential::quadratic(1.0));
      const double final_sq = std::max(1e-12, run.final_state(0, 0) * run.final_state(0, 0));
      const double depth = uniform(rng, 1.5, 2.5);
      const double a = uniform(rng, -0.1, -0.02), b = uniform(rng, 0.5, 1.5);
      const auto recorded = static_cast<Eigen::Index>(run.path_samples.size());
      for (Eigen::Index i = 0; i < n; ++i) {
        const double t = t_of(i);
        const auto k = std::min(recorded - 1, static_cast<Eigen::Index>(std::llround(t * static_cast<double>(recorded - 1))));
        const double e = run.path_samples[static_cast<std::size_t>(k)](0, 0);
        x(i) = a + b * t + 0.01 * rng.normal();
        y(i) = -depth * std::min(1.0, e * e / final_sq) + noise * rng.normal();
      }
      break;
    }
    case ShapeClass::NoArc: {
      // NC1 moves independently of the ratio apart from a weak linear coupling.
      const double a = uniform(rng, -2.0, -1.0), b = uniform(rng, 2.0, 4.0);
      const double r = uniform(rng, -0.35, 0.35);
      VectorXd w(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        x(i) = a + b * t_of(i) + noise * rng.normal();
        w(i) = rng.normal();
      }
      // Orthogonalize the independent part so the sample correlation is exactly r.
      const VectorXd xs = (x.array() - x.mean()).matrix().normalized();
      VectorXd ws = (w.array() - w.mean()).matrix();
      ws -= ws.dot(xs) * xs;
      ws.normalize();
      const double amplitude = uniform(rng, 0.2, 0.6) * std::sqrt(static_cast<double>(n));
      y = (amplitude * (r * xs + std::sqrt(1.0 - r * r) * ws)).array() + uniform(rng, -0.5, 0.5);
      break;
    }
    case ShapeClass::Indeterminate:
      fail(ErrorKind::Validation, "no generator for the Indeterminate class");
  }
  return assemble(x, y, to_string(shape), seed);
}

}  // namespace pitchfork
