#include "commands.hpp"

#include <cmath>
#include <future>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "pitchfork/escape_lab.hpp"
#include "pitchfork/experiments.hpp"
#include "pitchfork/hessian.hpp"
#include "pitchfork/sde.hpp"
#include "pitchfork/taxonomy.hpp"

#ifndef PITCHFORK_DATA_DIR
#define PITCHFORK_DATA_DIR "data"
#endif

namespace pitchfork::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::map<std::string, std::string> schema() {
  return {
      {"run.seed", "0"},
      {"run.seeds", "1"},
      {"run.out", "out"},
      {"probe.K", "10"},
      {"probe.lr_means", "5e-3"},
      {"probe.lr_logbeta", "1e-2"},
      {"probe.log_beta_init", "-2.5"},
      {"probe.init_spread", "-1"},
      {"data.kind", "bimodal"},
      {"data.n", "2000"},
      {"data.dim", "2"},
      {"data.separation", "2"},
      {"data.scale", "1"},
      {"data.super_spacing", "8"},
      {"data.aspect", "0.75"},
      {"data.sub_spacing", "2"},
      {"data.sub_scale", "0.5"},
      {"activation.factor", "10"},
      {"activation.consecutive", "5"},
      {"calibrate.K", "2"},
      {"calibrate.beta_lo", "0"},
      {"calibrate.beta_hi", "0"},
      {"calibrate.scan", "41"},
      {"forward.steps", "4000"},
      {"forward.batch_size", "256"},
      {"reverse.ratio_high", "3"},
      {"reverse.ratio_low", "0.5"},
      {"reverse.levels", "121"},
      {"reverse.inner_steps", "300"},
      {"reverse.lr", "2"},
      {"reverse.critical_boost", "8"},
      {"reverse.merge_fraction", "0.1"},
      {"hierarchy.K", "8"},
      {"hierarchy.beta_start", "0.02"},
      {"hierarchy.beta_end", "2"},
      {"hierarchy.steps", "20000"},
      {"hierarchy.lr_scale", "4"},
      {"hierarchy.temperature", "7e-5"},
      {"hierarchy.init_spread", "1e-3"},
      {"hierarchy.record_every", "10"},
      {"endogenous.steps", "3000"},
      {"endogenous.encoder_lr", "0.01"},
      {"endogenous.encoder_init", "0.1"},
      {"endogenous.batch_size", "0"},
      {"endogenous.audit_window", "100"},
      {"endogenous.audit_tolerance", "1e-4"},
      {"sde.growth_rate", "0.1"},
      {"sde.alpha", "0.1"},
      {"sde.coupling", "0"},
      {"sde.noise_intensity", "1e-5"},
      {"sde.dt", "0.01"},
      {"sde.steps", "2000"},
      {"sde.modes", "1"},
      {"sde.dim", "1"},
      {"sde.init_scale", "0.01"},
      {"escape.gammas", "0,0.1,0.2,0.3,0.5,0.7,1.0"},
      {"escape.seeds_per_gamma", "3"},
      {"escape.growth_rate", "1e-5"},
      {"escape.alpha", "1e-5"},
      {"escape.noise_intensity", "1e-12"},
      {"escape.init_scale", "0"},
      {"escape.dt", "0.01"},
      {"escape.tilt", "1"},
      {"escape.threshold", "0.5"},
      {"escape.horizon", "1000000"},
      {"escape.weighting", "relative"},
      {"classify.horizon", "0"},
      {"classify.decoupling", "0.5"},
      {"classify.plateau", "0.1"},
      {"classify.descent_decades", "0.5"},
      {"classify.sustain_fraction", "0.05"},
  };
}

// Protocol values for the toy experiments, which differ from the probe defaults.
std::map<std::string, std::string> command_defaults(const std::string& command) {
  if (command == "toy bimodal" || command == "toy unimodal" || command == "toy reverse") {
    return {{"probe.K", "8"}, {"probe.lr_means", "2"}, {"probe.lr_logbeta", "5e-3"}};
  }
  if (command == "toy hierarchy") return {{"data.kind", "hierarchical"}};
  if (command == "toy endogenous") return {{"probe.lr_means", "0.5"}};
  if (command == "sde pitchfork") return {{"sde.steps", "5000"}, {"sde.noise_intensity", "1e-6"}};
  return {};
}

struct Context {
  std::string command;
  Config config;
  fs::path out;
  std::vector<std::uint64_t> seeds;
};

std::string provenance(const Context& ctx, std::uint64_t seed) {
  return "pitchfork " + std::string(kVersion) + " " + ctx.command + " seed=" + std::to_string(seed) +
         " config_hash=" + ctx.config.hash();
}

json header(const Context& ctx) {
  return {{"tool", "pitchfork"}, {"version", kVersion}, {"command", ctx.command},
          {"config_hash", ctx.config.hash()}};
}

json optional_json(const auto& value) { return value ? json(*value) : json(nullptr); }

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

std::string stem(const std::string& command, std::uint64_t seed) {
  std::string s = command;
  for (auto& c : s) {
    if (c == ' ') c = '_';
  }
  return s + "_seed" + std::to_string(seed);
}

/// Runs `body` for every seed on its own thread and returns the results in seed order.
template <class F>
auto for_seeds(const Context& ctx, F body) {
  using R = std::invoke_result_t<F, std::uint64_t>;
  std::vector<std::future<R>> jobs;
  for (auto seed : ctx.seeds) jobs.push_back(std::async(std::launch::async, body, seed));
  std::vector<R> results;
  for (auto& j : jobs) results.push_back(j.get());
  return results;
}

}  // namespace

ProbeConfig probe_config(const Config& c) {
  ProbeConfig p;
  p.K_probe = static_cast<int>(c.get_int("probe.K"));
  p.lr_means = c.get_double("probe.lr_means");
  p.lr_logbeta = c.get_double("probe.lr_logbeta");
  p.log_beta_init = c.get_double("probe.log_beta_init");
  p.init_spread = c.get_double("probe.init_spread");
  p.validate();
  return p;
}

ActivationRule activation_rule(const Config& c) {
  return {c.get_double("activation.factor"), static_cast<int>(c.get_int("activation.consecutive"))};
}

HierarchicalParams hierarchical_params(const Config& c) {
  HierarchicalParams h;
  h.n = c.get_int("data.n");
  h.super_spacing = c.get_double("data.super_spacing");
  h.aspect = c.get_double("data.aspect");
  h.sub_spacing = c.get_double("data.sub_spacing");
  h.sub_scale = c.get_double("data.sub_scale");
  return h;
}

SyntheticDataset make_data(const Config& c, const std::string& kind, std::uint64_t seed) {
  const std::uint64_t data_seed = derive_seed(seed, 0xda7a);
  if (kind == "bimodal") {
    return gen_bimodal({c.get_int("data.n"), c.get_int("data.dim"), c.get_double("data.separation"),
                        c.get_double("data.scale")},
                       data_seed);
  }
  if (kind == "unimodal" || kind == "identity") {
    SyntheticDataset d = gen_unimodal({c.get_int("data.n"), c.get_int("data.dim"), c.get_double("data.scale")}, data_seed);
    if (kind == "identity") {
      // Whiten so the sample covariance is exactly the identity.
      const RowVectorXd mean = d.samples.colwise().mean();
      const SpectrumResult eig = sym_eigen(covariance(d.samples));
      const MatrixXd inv_sqrt =
          eig.eigenvectors * eig.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors.transpose();
      d.samples = (d.samples.rowwise() - mean) * inv_sqrt;
      d.kind = "identity";
    }
    return d;
  }
  if (kind == "hierarchical") return gen_hierarchical(hierarchical_params(c), data_seed);
  fail(ErrorKind::Validation, "data.kind must be bimodal, unimodal, identity or hierarchical, got '" + kind + "'");
}

ForwardOptions forward_options(const Config& c) {
  ForwardOptions o;
  o.steps = c.get_int("forward.steps");
  o.batch_size = c.get_int("forward.batch_size");
  o.activation = activation_rule(c);
  return o;
}

SdeConfig sde_config(const Config& c, std::uint64_t seed) {
  SdeConfig s;
  s.growth_rate = c.get_double("sde.growth_rate");
  s.alpha = c.get_double("sde.alpha");
  s.coupling = c.get_double("sde.coupling");
  s.noise_intensity = c.get_double("sde.noise_intensity");
  s.dt = c.get_double("sde.dt");
  s.steps = c.get_int("sde.steps");
  s.modes = c.get_int("sde.modes");
  s.dim = c.get_int("sde.dim");
  s.init_scale = c.get_double("sde.init_scale");
  s.seed = seed;
  s.validate();
  return s;
}

ReverseOptions reverse_options(const Config& c) {
  ReverseOptions ro;
  ro.ratio_high = c.get_double("reverse.ratio_high");
  ro.ratio_low = c.get_double("reverse.ratio_low");
  ro.levels = static_cast<int>(c.get_int("reverse.levels"));
  ro.inner_steps = c.get_int("reverse.inner_steps");
  ro.lr = c.get_double("reverse.lr");
  ro.critical_boost = c.get_double("reverse.critical_boost");
  ro.merge_fraction = c.get_double("reverse.merge_fraction");
  return ro;
}

HierarchyOptions hierarchy_options(const Config& c) {
  HierarchyOptions o;
  o.K = c.get_int("hierarchy.K");
  o.beta_start = c.get_double("hierarchy.beta_start");
  o.beta_end = c.get_double("hierarchy.beta_end");
  o.steps = c.get_int("hierarchy.steps");
  o.lr_scale = c.get_double("hierarchy.lr_scale");
  o.temperature = c.get_double("hierarchy.temperature");
  o.init_spread = c.get_double("hierarchy.init_spread");
  o.record_every = static_cast<int>(c.get_int("hierarchy.record_every"));
  o.activation = activation_rule(c);
  return o;
}

EndogenousOptions endogenous_options(const Config& c) {
  EndogenousOptions o;
  o.steps = c.get_int("endogenous.steps");
  o.encoder_lr = c.get_double("endogenous.encoder_lr");
  o.encoder_init = c.get_double("endogenous.encoder_init");
  o.batch_size = c.get_int("endogenous.batch_size");
  o.audit_window = static_cast<int>(c.get_int("endogenous.audit_window"));
  o.audit_tolerance = c.get_double("endogenous.audit_tolerance");
  o.activation = activation_rule(c);
  return o;
}

SdeConfig escape_sde_config(const Config& c, std::uint64_t seed) {
  SdeConfig cfg;
  cfg.growth_rate = c.get_double("escape.growth_rate");
  cfg.alpha = c.get_double("escape.alpha");
  cfg.noise_intensity = c.get_double("escape.noise_intensity");
  cfg.init_scale = c.get_double("escape.init_scale");
  cfg.dt = c.get_double("escape.dt");
  cfg.seed = seed;
  return cfg;
}

namespace {

json fit_json(const std::optional<FitReport>& fit) {
  if (!fit) return nullptr;
  json residuals = json::array();
  for (const auto& r : fit->point_residuals) {
    residuals.push_back({{"gamma", r.gamma}, {"log_observed", r.log_observed}, {"log_fitted", r.log_fitted}});
  }
  return {{"model", to_string(fit->model_kind)}, {"intercept", fit->intercept}, {"slope", fit->slope},
          {"intercept_stderr", fit->intercept_stderr}, {"slope_stderr", fit->slope_stderr},
          {"chi_squared", fit->chi_squared}, {"aic", fit->aic}, {"residuals", residuals}};
}

json sweep_json(const SweepSummary& s) {
  json levels = json::array();
  for (const auto& l : s.levels) {
    levels.push_back({{"gamma", l.gamma}, {"tau_mean", l.n_escaped ? json(l.tau_mean) : json(nullptr)},
                      {"tau_std", l.n_escaped > 1 ? json(l.tau_std) : json(nullptr)}, {"n_seeds", l.n_seeds},
                      {"n_escaped", l.n_escaped}, {"censored", l.censored}});
  }
  json j = {{"levels", levels}, {"power_law", fit_json(s.power_law)}, {"kramers", fit_json(s.kramers)},
            {"fitted_gammas", s.fitted_gammas},
            {"weighting", s.weighting == FitWeighting::Unit ? "unit" : "relative"}};
  j["delta_aic"] = s.power_law && s.kramers ? json(s.delta_aic) : json(nullptr);
  j["preferred"] = s.power_law && s.kramers ? json(s.delta_aic > 0 ? "power_law" : "kramers") : json(nullptr);
  return j;
}

std::vector<ChartSeries> trajectory_series(const TrajectoryLog& log) {
  ChartSeries ratio{"log(beta/beta_c)", {}, {}}, op{"order parameter", {}, {}};
  for (const auto& r : log.readings) {
    ratio.x.push_back(static_cast<double>(r.step));
    ratio.y.push_back(r.log_ratio);
    op.x.push_back(static_cast<double>(r.step));
    op.y.push_back(r.order_parameter);
  }
  return {ratio, op};
}

void write_log_files(const Context& ctx, const TrajectoryLog& log, const std::string& name,
                     const std::string& title) {
  std::ostringstream csv;
  write_trajectory_csv(csv, log);
  write_text_file(ctx.out / (name + ".csv"), csv.str());
  ChartSpec spec{title, "step", "value", false, false, std::nullopt, 0.0, provenance(ctx, log.seed)};
  write_text_file(ctx.out / (name + ".svg"), line_chart_svg(spec, trajectory_series(log)));
}

TrajectoryLog stamped(TrajectoryLog log, const Context& ctx) {
  log.config_hash = ctx.config.hash();
  return log;
}

// --- calibrate-hessian ---------------------------------------------------------------

int cmd_calibrate(const Context& ctx) {
  const Config& c = ctx.config;
  const auto K = c.get_int("calibrate.K");
  auto per_seed = for_seeds(ctx, [&](std::uint64_t seed) {
    const SyntheticDataset data = make_data(c, c.get("data.kind"), seed);
    const MatrixXd cov = covariance(data.samples);
    const double analytic = 1.0 / lambda_max(cov);
    double lo = c.get_double("calibrate.beta_lo"), hi = c.get_double("calibrate.beta_hi");
    if (lo <= 0) lo = 0.5 * analytic;
    if (hi <= 0) hi = 2.0 * analytic;
    const CrossingReport report = find_crossing(K, cov, lo, hi, static_cast<int>(c.get_int("calibrate.scan")));
    const double numeric = find_crossing_numerical(K, data.samples, lo, hi);
    double max_dev = 0;
    for (double ratio : {0.5, 1.0, 1.5}) {
      const double beta = ratio * analytic;
      const MatrixXd num = numerical_hessian(collapsed_state(data.samples, K, beta), data.samples);
      max_dev = std::max(max_dev, (num - analytic_hessian(beta, K, cov)).cwiseAbs().maxCoeff());
    }
    json j = header(ctx);
    j.update({{"seed", seed}, {"K", K}, {"dim", cov.rows()}, {"lambda_max", lambda_max(cov)},
              {"beta_c", analytic}, {"critical_temperature", critical_temperature(cov)},
              {"beta_crossing_analytic_spectrum", report.beta_critical_numeric},
              {"beta_crossing_numerical_hessian", numeric},
              {"crossing_abs_error", std::abs(numeric - analytic)},
              {"hessian_max_abs_deviation", max_dev}});
    ChartSeries scan{"lowest eigenvalue", {}, {}};
    for (const auto& [b, e] : report.scan_points) {
      scan.x.push_back(b);
      scan.y.push_back(e);
    }
    ChartSpec spec{"Lowest Hessian eigenvalue at the collapsed state", "beta", "lambda_min", true, false,
                   analytic, 0.0, provenance(ctx, seed)};
    const std::string name = stem(ctx.command, seed);
    write_text_file(ctx.out / (name + ".svg"), line_chart_svg(spec, {scan}));
    write_json(ctx.out / (name + ".json"), j);
    return j;
  });
  json summary = header(ctx);
  summary["runs"] = per_seed;
  write_json(ctx.out / "calibrate-hessian_summary.json", summary);
  for (const auto& j : per_seed) {
    std::cout << "seed " << j["seed"] << ": beta_c " << format_number(j["beta_c"].get<double>()) << ", numerical "
              << format_number(j["beta_crossing_numerical_hessian"].get<double>()) << ", hessian deviation "
              << format_number(j["hessian_max_abs_deviation"].get<double>()) << "\n";
  }
  return 0;
}

// --- toy experiments -------------------------------------------------------------------


json forward_json(const ForwardResult& r) {
  return {{"beta_c", r.beta_c}, {"activation_step", optional_json(r.activation_step)},
          {"overshoot", optional_json(r.overshoot)}, {"split_angle_deg", r.split_angle_deg},
          {"final_order_parameter", r.final_order_parameter}, {"final_log_ratio", r.final_log_ratio}};
}

int cmd_toy_forward(const Context& ctx, bool unimodal) {
  const Config& c = ctx.config;
  const ProbeConfig probe = probe_config(c);
  const ForwardOptions options = forward_options(c);
  auto per_seed = for_seeds(ctx, [&](std::uint64_t seed) {
    const ForwardResult bimodal = run_forward_split(make_data(c, "bimodal", seed), probe, options, seed);
    json j = header(ctx);
    j["seed"] = seed;
    const std::string name = stem(ctx.command, seed);
    if (unimodal) {
      const ForwardResult control = run_forward_split(make_data(c, "unimodal", seed), probe, options, seed);
      j["unimodal"] = forward_json(control);
      j["bimodal"] = forward_json(bimodal);
      j["order_parameter_gap"] = order_parameter_gap(bimodal, control);
      write_log_files(ctx, stamped(control.log, ctx), name, "Unimodal control");
    } else {
      j.update(forward_json(bimodal));
      write_log_files(ctx, stamped(bimodal.log, ctx), name, "Forward split on bimodal data");
    }
    write_json(ctx.out / (name + ".json"), j);
    return j;
  });
  json summary = header(ctx);
  summary["runs"] = per_seed;
  write_json(ctx.out / (stem(ctx.command, ctx.seeds.front()) + "_summary.json"), summary);
  for (const auto& j : per_seed) {
    const json& f = unimodal ? j["bimodal"] : j;
    std::cout << "seed " << j["seed"] << ": overshoot " << f["overshoot"] << ", split angle "
              << f["split_angle_deg"] << " deg";
    if (unimodal) std::cout << ", order parameter gap " << j["order_parameter_gap"];
    std::cout << "\n";
  }
  return 0;
}

int cmd_toy_reverse(const Context& ctx) {
  const Config& c = ctx.config;
  const ProbeConfig probe = probe_config(c);
  const ForwardOptions fwd = forward_options(c);
  const ReverseOptions ro = reverse_options(c);
  auto per_seed = for_seeds(ctx, [&](std::uint64_t seed) {
    const SyntheticDataset data = make_data(c, "bimodal", seed);
    const ForwardResult forward = run_forward_split(data, probe, fwd, seed);
    const ReverseResult rev = run_reverse_traversal(data, forward.final_state, ro, seed);
    json j = header(ctx);
    j.update({{"seed", seed}, {"beta_c", rev.beta_c}, {"forward_overshoot", optional_json(forward.overshoot)},
              {"merge_ratio", optional_json(rev.merge_ratio)},
              {"reverse_tracking_error", rev.merge_ratio ? json(rev.tracking_error) : json(nullptr)},
              {"plateau", rev.plateau}, {"op_at_half", rev.op_at_half}, {"branch_mismatch", rev.branch_mismatch}});
    const std::string name = stem(ctx.command, seed);
    std::ostringstream csv;
    write_trajectory_csv(csv, stamped(rev.log, ctx));
    write_text_file(ctx.out / (name + ".csv"), csv.str());
    ChartSpec spec{"Order parameter along the beta ladder", "beta / beta_c", "order parameter", true, false,
                   1.0, std::nullopt, provenance(ctx, seed)};
    write_text_file(ctx.out / (name + ".svg"),
                    line_chart_svg(spec, {{"reverse", rev.ratios, rev.order_parameters},
                                          {"forward", rev.ratios, rev.forward_order_parameters}}));
    write_json(ctx.out / (name + ".json"), j);
    return j;
  });
  json summary = header(ctx);
  summary["runs"] = per_seed;
  write_json(ctx.out / "toy_reverse_summary.json", summary);
  for (const auto& j : per_seed) {
    std::cout << "seed " << j["seed"] << ": merge at " << j["merge_ratio"] << " beta_c, tracking error "
              << j["reverse_tracking_error"] << ", forward overshoot " << j["forward_overshoot"] << "\n";
  }
  return 0;
}

int cmd_toy_hierarchy(const Context& ctx) {
  const Config& c = ctx.config;
  const HierarchyOptions o = hierarchy_options(c);
  const auto analytic = hierarchical_beta_c(hierarchical_params(c));
  auto per_seed = for_seeds(ctx, [&](std::uint64_t seed) {
    const HierarchyResult r = run_hierarchical(make_data(c, "hierarchical", seed), o, seed);
    json j = header(ctx);
    j.update({{"seed", seed}, {"beta_c1", r.beta_c1}, {"beta_c2", r.beta_c2},
              {"beta_c1_closed_form", analytic.first}, {"beta_c2_closed_form", analytic.second},
              {"beta_event1", optional_json(r.beta_event1)}, {"beta_event2", optional_json(r.beta_event2)},
              {"events", r.events}, {"assignment", r.assignment}, {"balanced", r.balanced}});
    const std::string name = stem(ctx.command, seed);
    write_log_files(ctx, stamped(r.log, ctx), name, "Hierarchical splitting");
    write_json(ctx.out / (name + ".json"), j);
    return j;
  });
  json summary = header(ctx);
  summary["runs"] = per_seed;
  int balanced = 0;
  for (const auto& j : per_seed) balanced += j["balanced"].get<bool>() ? 1 : 0;
  summary["balanced_runs"] = balanced;
  write_json(ctx.out / "toy_hierarchy_summary.json", summary);
  for (const auto& j : per_seed) {
    std::cout << "seed " << j["seed"] << ": " << j["events"] << " events, beta " << j["beta_event1"] << " / "
              << j["beta_event2"] << ", balanced " << j["balanced"] << "\n";
  }
  return 0;
}

int cmd_toy_endogenous(const Context& ctx) {
  const Config& c = ctx.config;
  const ProbeConfig probe = probe_config(c);
  const EndogenousOptions o = endogenous_options(c);
  auto per_seed = for_seeds(ctx, [&](std::uint64_t seed) {
    const EndogenousResult r = run_endogenous(make_data(c, c.get("data.kind"), seed), probe, o, seed);
    json failures = json::array();
    for (const auto& e : r.hypothesis_failures) {
      failures.push_back({{"step", e.step}, {"hypothesis", e.hypothesis}, {"change", e.change}});
    }
    json j = header(ctx);
    j.update({{"seed", seed}, {"delta0", r.delta0}, {"crossing_step", optional_json(r.crossing_step)},
              {"activation_step", optional_json(r.activation_step)},
              {"final_reconstruction_loss", r.reconstruction_loss.empty() ? json(nullptr) : json(r.reconstruction_loss.back())},
              {"hypothesis_failures", failures}});
    const std::string name = stem(ctx.command, seed);
    write_log_files(ctx, stamped(r.log, ctx), name, "Endogenous crossing");
    write_json(ctx.out / (name + ".json"), j);
    return j;
  });
  json summary = header(ctx);
  summary["runs"] = per_seed;
  write_json(ctx.out / "toy_endogenous_summary.json", summary);
  for (const auto& j : per_seed) {
    std::cout << "seed " << j["seed"] << ": delta0 " << j["delta0"] << ", crossing step " << j["crossing_step"]
              << ", activation step " << j["activation_step"] << "\n";
  }
  return 0;
}

// --- sde ---------------------------------------------------------------------------------


int cmd_sde_pitchfork(const Context& ctx) {
  auto per_seed = for_seeds(ctx, [&](std::uint64_t seed) {
    const SdeConfig cfg = sde_config(ctx.config, seed);
    const SdeRunResult run = simulate_pitchfork_1d(cfg);
    std::ostringstream csv;
    csv << "# " << provenance(ctx, seed) << "\ntime,eps\n";
    ChartSeries path{"eps", {}, {}};
    for (std::size_t i = 0; i < run.times.size(); ++i) {
      const double e = run.path_samples[i](0, 0);
      csv << format_number(run.times[i]) << ',' << format_number(e) << '\n';
      path.x.push_back(run.times[i]);
      path.y.push_back(e);
    }
    const std::string name = stem(ctx.command, seed);
    write_text_file(ctx.out / (name + ".csv"), csv.str());
    ChartSpec spec{"Pitchfork normal form", "time", "eps", false, false, std::nullopt, cfg.eps_star(),
                   provenance(ctx, seed)};
    write_text_file(ctx.out / (name + ".svg"), line_chart_svg(spec, {path}));
    json j = header(ctx);
    j.update({{"seed", seed}, {"eps_star", cfg.eps_star()}, {"initial", run.initial_state(0, 0)},
              {"final", run.final_state(0, 0)}});
    write_json(ctx.out / (name + ".json"), j);
    return j;
  });
  for (const auto& j : per_seed) {
    std::cout << "seed " << j["seed"] << ": eps " << j["initial"] << " -> " << j["final"] << " (eps* "
              << j["eps_star"] << ")\n";
  }
  return 0;
}

int cmd_sde_coupled(const Context& ctx) {
  auto per_seed = for_seeds(ctx, [&](std::uint64_t seed) {
    const SdeConfig cfg = sde_config(ctx.config, seed);
    const SdeRunResult run = simulate_coupled_modes(cfg);
    Rng ref_rng(derive_seed(seed, 0x7ef));
    const PersistenceStats st = persistence_stats(run, ref_rng.unit_vector(cfg.dim));
    std::ostringstream csv;
    csv << "# " << provenance(ctx, seed) << "\nmode,initial_projection,final_projection,cosine\n";
    for (std::size_t k = 0; k < st.initial_projection.size(); ++k) {
      csv << k << ',' << format_number(st.initial_projection[k]) << ',' << format_number(st.final_projection[k])
          << ',' << format_number(st.cosines[k]) << '\n';
    }
    const std::string name = stem(ctx.command, seed);
    write_text_file(ctx.out / (name + ".csv"), csv.str());
    json j = header(ctx);
    j.update({{"seed", seed}, {"spearman", st.spearman}, {"mean_cosine", st.mean_cosine},
              {"sign_test_pvalue", st.sign_test_pvalue}, {"theta_squared", st.theta_squared},
              {"excluded_modes", st.excluded_modes},
              {"initial_overlap", mean_abs_overlap(run.initial_directions)},
              {"final_overlap", mean_abs_overlap(run.final_directions)}});
    write_json(ctx.out / (name + ".json"), j);
    return j;
  });
  const PersistencePrediction pred = predict_persistence(sde_config(ctx.config, 0));
  std::vector<double> rho;
  for (const auto& j : per_seed) rho.push_back(j["spearman"].get<double>());
  json summary = header(ctx);
  summary.update({{"runs", per_seed}, {"mean_spearman", mean(rho)},
                  {"std_spearman", rho.size() > 1 ? json(sample_std(rho)) : json(nullptr)},
                  {"min_spearman", *std::min_element(rho.begin(), rho.end())},
                  {"prediction",
                   {{"sigma_star", pred.sigma_star}, {"tau_r", pred.tau_r}, {"r_star", pred.r_star},
                    {"t_rand", pred.t_rand}, {"theta_squared", pred.theta_sq},
                    {"expected_cosine", pred.expected_cosine}, {"randomizing_regime", pred.randomizing_regime}}}});
  write_json(ctx.out / "sde_coupled_summary.json", summary);
  for (const auto& j : per_seed) std::cout << "seed " << j["seed"] << ": spearman " << j["spearman"] << "\n";
  std::cout << "mean spearman " << format_number(mean(rho)) << " over " << rho.size() << " seeds\n";
  return 0;
}

// --- escape --------------------------------------------------------------------------------

FitWeighting weighting(const Config& c) {
  const std::string& w = c.get("escape.weighting");
  if (w == "relative") return FitWeighting::RelativeError;
  if (w == "unit") return FitWeighting::Unit;
  fail(ErrorKind::Validation, "escape.weighting must be relative or unit, got '" + w + "'");
}

int cmd_escape_sweep(const Context& ctx) {
  const Config& c = ctx.config;
  const SdeConfig cfg = escape_sde_config(c, ctx.seeds.front());
  double threshold = c.get_double("escape.threshold");
  if (threshold <= 0) threshold = default_threshold(cfg);
  const auto seeds = static_cast<int>(c.get_int("escape.seeds_per_gamma"));
  SweepSummary summary;
  bool fitted = true;
  try {
    summary = run_sweep(c.get_list("escape.gammas"), seeds, cfg, TiltPotential::quadratic(c.get_double("escape.tilt")),
                        threshold, c.get_int("escape.horizon"));
    if (weighting(c) == FitWeighting::Unit) {
      const SweepSummary refit = fit_escape_models(summary.levels, FitWeighting::Unit);
      summary.power_law = refit.power_law;
      summary.kramers = refit.kramers;
      summary.delta_aic = refit.delta_aic;
      summary.weighting = refit.weighting;
    }
  } catch (const NoFitError& e) {
    summary = e.summary();
    fitted = false;
    std::cerr << "warning: " << e.what() << "; levels are reported without a fit\n";
  }
  json j = header(ctx);
  j.update(sweep_json(summary));
  j["seed"] = cfg.seed;
  j["threshold"] = threshold;
  j["fitted"] = fitted;
  json obs = json::array();
  for (const auto& o : summary.observations) {
    obs.push_back({{"gamma", o.gamma}, {"seed", o.seed}, {"tau", optional_json(o.tau)}, {"horizon", o.horizon}});
  }
  j["observations"] = obs;
  write_json(ctx.out / "escape_sweep.json", j);
  ChartSeries observed{"mean tau", {}, {}}, power{"power law", {}, {}}, kramers{"Kramers", {}, {}};
  for (const auto& l : summary.levels) {
    if (l.n_escaped == 0 || l.gamma <= 0) continue;
    observed.x.push_back(l.gamma);
    observed.y.push_back(l.tau_mean);
    if (summary.power_law) power.x.push_back(l.gamma), power.y.push_back(summary.power_law->predict(l.gamma));
    if (summary.kramers) kramers.x.push_back(l.gamma), kramers.y.push_back(summary.kramers->predict(l.gamma));
  }
  ChartSpec spec{"Escape time against dissipation", "gamma", "tau (steps)", true, true, std::nullopt, std::nullopt,
                 provenance(ctx, cfg.seed)};
  write_text_file(ctx.out / "escape_sweep.svg", line_chart_svg(spec, {observed, power, kramers}));
  for (const auto& l : summary.levels) {
    std::cout << "gamma " << format_number(l.gamma) << ": " << l.n_escaped << "/" << l.n_seeds << " escaped";
    if (l.n_escaped) std::cout << ", mean tau " << format_number(l.tau_mean);
    std::cout << "\n";
  }
  if (fitted) std::cout << "delta_aic " << format_number(summary.delta_aic) << "\n";
  return 0;
}

int cmd_escape_fit(const Context& ctx, const std::optional<fs::path>& input) {
  const fs::path path = input ? *input : data_dir() / "table5.csv";
  std::istringstream in(read_text_file(path));
  const std::vector<EscapeLevel> levels = parse_escape_table(in);
  SweepSummary summary = fit_escape_models(levels, weighting(ctx.config));
  summary.levels = levels;
  json j = header(ctx);
  j.update(sweep_json(summary));
  j["input"] = path.string();
  write_json(ctx.out / "escape_fit.json", j);
  std::cout << "power law: intercept " << format_number(summary.power_law->intercept) << ", slope "
            << format_number(summary.power_law->slope) << ", chi2 " << format_number(summary.power_law->chi_squared)
            << ", AIC " << format_number(summary.power_law->aic) << "\n";
  std::cout << "Kramers:   intercept " << format_number(summary.kramers->intercept) << ", slope "
            << format_number(summary.kramers->slope) << ", chi2 " << format_number(summary.kramers->chi_squared)
            << ", AIC " << format_number(summary.kramers->aic) << "\n";
  std::cout << "delta_aic " << format_number(summary.delta_aic) << "\n";
  return 0;
}

// --- classify --------------------------------------------------------------------------------

int cmd_classify(const Context& ctx, const std::optional<fs::path>& input) {
  if (!input) fail(ErrorKind::Validation, "classify needs --input FILE");
  std::istringstream in(read_text_file(*input));
  const TrajectoryLog log = read_trajectory_csv(in, input->string());
  const Config& c = ctx.config;
  ClassifierThresholds t;
  t.decoupling = c.get_double("classify.decoupling");
  t.plateau = c.get_double("classify.plateau");
  t.descent_decades = c.get_double("classify.descent_decades");
  t.sustain_fraction = c.get_double("classify.sustain_fraction");
  const double horizon = c.get_double("classify.horizon");
  const ShapeResult r = classify(log, horizon > 0 ? std::optional<double>(horizon) : std::nullopt, t);
  json j = header(ctx);
  j.update({{"input", input->string()}, {"shape", to_string(r.shape)},
            {"evidence",
             {{"descent_corr", r.evidence.descent_corr}, {"descent_sign", r.evidence.descent_sign},
              {"plateau_fraction", r.evidence.plateau_fraction}, {"decoupling_corr", r.evidence.decoupling_corr},
              {"fold_magnitude", r.evidence.fold_magnitude}}},
            {"crossing_index", optional_json(r.crossing_index)}, {"onset_index", optional_json(r.onset_index)}});
  if (log.readings.size() >= 20 && r.shape != ShapeClass::Indeterminate) {
    const AxisReading axes = read_axes(log, t);
    j["axes"] = {{"initial_criticality", axes.initial_criticality == InitialCriticality::Sub ? "sub" : "super"},
                 {"rate_ordering", axes.rate_ordering == RateOrdering::BetaLeads ? "beta_leads" : "beta_c_leads"},
                 {"dissipation_regime", axes.dissipation_regime == DissipationRegime::Low ? "low" : "normal"}};
  }
  write_json(ctx.out / (input->stem().string() + "_class.json"), j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

fs::path data_dir() {
  if (const char* env = std::getenv("PITCHFORK_DATA_DIR")) return env;
  return PITCHFORK_DATA_DIR;
}

Config default_config(const std::string& command) {
  Config c(schema());
  for (const auto& [k, v] : command_defaults(command)) c.set(k, v);
  return c;
}

Config resolve_config(const std::string& command, const CommonOptions& options) {
  Config c = default_config(command);
  if (options.preset) {
    fs::path p = *options.preset;
    if (!fs::exists(p)) p = data_dir() / (*options.preset + ".preset");
    if (!fs::exists(p)) fail(ErrorKind::Validation, "unknown preset '" + *options.preset + "'");
    c.load_file(p);
  }
  if (options.config_path) c.load_file(*options.config_path);
  c.apply_env();
  for (const auto& kv : options.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Validation, "--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (options.seed) c.set("run.seed", std::to_string(*options.seed));
  if (options.seeds) c.set("run.seeds", std::to_string(*options.seeds));
  if (options.out) c.set("run.out", options.out->string());
  return c;
}

int run(const std::string& command, const CommonOptions& options) {
  Context ctx;
  ctx.command = command;
  ctx.config = resolve_config(command, options);
  if (options.print_config) {
    std::cout << ctx.config.canonical();
    return 0;
  }
  const auto first = static_cast<std::uint64_t>(ctx.config.get_int("run.seed"));
  const auto count = ctx.config.get_int("run.seeds");
  if (count < 1) fail(ErrorKind::Validation, "run.seeds must be >= 1");
  for (std::int64_t i = 0; i < count; ++i) ctx.seeds.push_back(first + static_cast<std::uint64_t>(i));
  ctx.out = ctx.config.get("run.out");

  if (command == "calibrate-hessian") return cmd_calibrate(ctx);
  if (command == "toy bimodal") return cmd_toy_forward(ctx, false);
  if (command == "toy unimodal") return cmd_toy_forward(ctx, true);
  if (command == "toy reverse") return cmd_toy_reverse(ctx);
  if (command == "toy hierarchy") return cmd_toy_hierarchy(ctx);
  if (command == "toy endogenous") return cmd_toy_endogenous(ctx);
  if (command == "sde pitchfork") return cmd_sde_pitchfork(ctx);
  if (command == "sde coupled") return cmd_sde_coupled(ctx);
  if (command == "escape sweep") return cmd_escape_sweep(ctx);
  if (command == "escape fit") return cmd_escape_fit(ctx, options.input);
  if (command == "classify") return cmd_classify(ctx, options.input);
  fail(ErrorKind::Validation, "unknown command '" + command + "'");
}

}  // namespace pitchfork::cli
