#include "pitchfork/escape_lab.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>

namespace pitchfork {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& s, const char* field, int line) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    fail(ErrorKind::Validation, "line " + std::to_string(line) + ": bad " + field + " '" + s + "'");
  }
  return v;
}

}  // namespace

double default_threshold(const SdeConfig& config) { return 0.5 * config.eps_star(); }

EscapeObservation measure_escape(const SdeConfig& config, const TiltPotential& tilt, double threshold,
                                 std::int64_t horizon) {
  if (!(config.growth_rate > 0)) fail(ErrorKind::Validation, "escape needs growth_rate > 0");
  const double eps_star = config.eps_star();
  if (!(threshold > std::abs(config.init_scale)) || !(threshold < eps_star)) {
    fail(ErrorKind::Validation, "escape threshold must lie strictly between |init_scale| and eps*");
  }
  if (horizon < 1) fail(ErrorKind::Validation, "horizon must be >= 1");
  SdeConfig run_config = config;
  run_config.steps = horizon;
  const SdeRunResult run = simulate_tilted_langevin(run_config, tilt, threshold);
  EscapeObservation obs;
  obs.gamma = config.coupling;
  obs.seed = config.seed;
  obs.horizon = horizon;
  obs.tau = run.stop_step;
  return obs;
}

SweepSummary run_sweep(const std::vector<double>& gammas, int seeds_per_gamma, const SdeConfig& config,
                       const TiltPotential& tilt, double threshold, std::int64_t horizon) {
  if (gammas.empty()) fail(ErrorKind::Validation, "run_sweep needs at least one gamma");
  if (seeds_per_gamma < 1) fail(ErrorKind::Validation, "seeds_per_gamma must be >= 1");
  std::vector<double> sorted = gammas;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<EscapeObservation> observations;
  std::vector<EscapeLevel> levels;
  std::uint64_t cell = 0;
  for (double gamma : sorted) {
    if (gamma < 0) fail(ErrorKind::Validation, "gamma must be >= 0");
    EscapeLevel level;
    level.gamma = gamma;
    level.n_seeds = seeds_per_gamma;
    std::vector<double> taus;
    for (int s = 0; s < seeds_per_gamma; ++s, ++cell) {
      SdeConfig c = config;
      c.coupling = gamma;
      c.seed = derive_seed(config.seed, cell);
      EscapeObservation obs = measure_escape(c, tilt, threshold, horizon);
      if (obs.tau) taus.push_back(static_cast<double>(*obs.tau));
      observations.push_back(obs);
    }
    level.n_escaped = static_cast<int>(taus.size());
    level.censored = level.n_escaped < level.n_seeds;
    if (!taus.empty()) {
      level.tau_mean = mean(taus);
      level.tau_std = sample_std(taus);
    }
    levels.push_back(level);
  }

  try {
    SweepSummary summary = fit_escape_models(levels);
    summary.observations = std::move(observations);
    return summary;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoFit) throw;
    SweepSummary summary;
    summary.levels = std::move(levels);
    summary.observations = std::move(observations);
    throw NoFitError(e.what(), std::move(summary));
  }
}

SweepSummary fit_escape_models(const std::vector<EscapeLevel>& levels, FitWeighting weighting) {
  SweepSummary summary;
  summary.levels = levels;
  std::vector<double> g, tau, w;
  bool all_std_positive = true;
  for (const auto& level : levels) {
    if (level.censored || !(level.gamma > 0) || !(level.tau_mean > 0)) continue;
    g.push_back(level.gamma);
    tau.push_back(level.tau_mean);
    if (!(level.tau_std > 0)) all_std_positive = false;
    w.push_back(level.tau_std > 0 ? std::pow(level.tau_mean / level.tau_std, 2) : 1.0);
  }
  if (g.size() < 3) {
    fail(ErrorKind::NoFit, "need at least 3 uncensored gamma levels to fit, have " + std::to_string(g.size()));
  }
  if (weighting == FitWeighting::Unit || !all_std_positive) {
    // Relative-error weights are undefined when a level has zero spread.
    std::fill(w.begin(), w.end(), 1.0);
    weighting = FitWeighting::Unit;
  }
  summary.weighting = weighting;
  summary.fitted_gammas = g;
  summary.power_law = fit_log_model(ModelKind::PowerLaw, g, tau, w);
  summary.kramers = fit_log_model(ModelKind::Kramers, g, tau, w);
  summary.delta_aic = summary.kramers->aic - summary.power_law->aic;
  return summary;
}

std::vector<EscapeLevel> parse_escape_table(std::istream& in) {
  std::string line;
  int line_no = 0;
  std::map<std::string, std::size_t> column;
  std::vector<EscapeLevel> levels;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_csv_line(line);
    if (column.empty()) {
      for (std::size_t i = 0; i < fields.size(); ++i) column[trim(fields[i])] = i;
      for (const char* required : {"gamma", "tau_mean", "tau_std", "n_seeds", "censored"}) {
        if (!column.count(required)) {
          fail(ErrorKind::Validation, std::string("escape table is missing column '") + required + "'");
        }
      }
      continue;
    }
    auto get = [&](const char* name) {
      const std::size_t i = column.at(name);
      return i < fields.size() ? trim(fields[i]) : std::string();
    };
    EscapeLevel level;
    level.gamma = parse_number(get("gamma"), "gamma", line_no);
    const std::string censored = get("censored");
    level.censored = !(censored.empty() || censored == "0" || censored == "false");
    level.n_seeds = static_cast<int>(parse_number(get("n_seeds"), "n_seeds", line_no));
    const std::string mean_field = get("tau_mean");
    const std::string std_field = get("tau_std");
    if (!mean_field.empty()) level.tau_mean = parse_number(mean_field, "tau_mean", line_no);
    if (!std_field.empty()) level.tau_std = parse_number(std_field, "tau_std", line_no);
    if (!level.censored && mean_field.empty()) {
      fail(ErrorKind::Validation, "line " + std::to_string(line_no) + ": uncensored row needs tau_mean");
    }
    level.n_escaped = level.censored ? 0 : level.n_seeds;
    levels.push_back(level);
  }
  if (column.empty()) fail(ErrorKind::Validation, "escape table has no header");
  return levels;
}

}  // namespace pitchfork
