// Acceptance run: one PASS/FAIL line per criterion, exit code 1 when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "pitchfork/hessian.hpp"
#include "pitchfork/taxonomy.hpp"

using namespace pitchfork;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> check;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

bool within(double v, double target, double tol) { return std::abs(v - target) <= tol; }

// 1. Numerical Hessian crossing and entries against the closed form.
Outcome hessian_calibration() {
  const Config c = cli::default_config("calibrate-hessian");
  const auto K = c.get_int("calibrate.K");
  double worst_crossing = 0, worst_entry = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const SyntheticDataset data = cli::make_data(c, "bimodal", seed);
    const MatrixXd cov = covariance(data.samples);
    const double analytic = 1.0 / lambda_max(cov);
    const double numeric = find_crossing_numerical(K, data.samples, 0.5 * analytic, 2.0 * analytic);
    worst_crossing = std::max(worst_crossing, std::abs(numeric - analytic));
    for (double ratio : {0.5, 1.0, 1.5}) {
      const double beta = ratio * analytic;
      const MatrixXd num = numerical_hessian(collapsed_state(data.samples, K, beta), data.samples);
      worst_entry = std::max(worst_entry, (num - analytic_hessian(beta, K, cov)).cwiseAbs().maxCoeff());
    }
  }
  return {worst_crossing <= 1e-4 && worst_entry <= 1e-4,
          "3 seeds, max |beta_c error| " + fmt(worst_crossing, 3) + ", max Hessian deviation " + fmt(worst_entry, 3)};
}

// 2. Dense spectrum against the channel decomposition with degeneracies.
Outcome channel_spectrum_check() {
  Rng rng(20240611);
  double worst = 0;
  bool degeneracies = true;
  for (int instance = 0; instance < 100; ++instance) {
    const auto K = static_cast<Eigen::Index>(2 + rng.below(5));
    const auto d = static_cast<Eigen::Index>(1 + rng.below(10));
    const double beta = 0.05 + 3.0 * rng.uniform();
    const MatrixXd a = rng.normal_matrix(d, d);
    const MatrixXd cov = a * a.transpose() / static_cast<double>(d) + 0.01 * MatrixXd::Identity(d, d);
    const MatrixXd h = analytic_hessian(beta, K, cov);
    VectorXd dense = Eigen::SelfAdjointEigenSolver<MatrixXd>(h, Eigen::EigenvaluesOnly).eigenvalues();
    const ChannelSpectrum ch = channel_spectrum(beta, K, cov);
    VectorXd closed = ch.expanded();
    std::sort(closed.begin(), closed.end());
    if (closed.size() != dense.size() || ch.symmetric_degeneracy != d) {
      degeneracies = false;
      continue;
    }
    for (const auto& e : ch.antisymmetric) degeneracies = degeneracies && e.degeneracy == K - 1;
    worst = std::max(worst, (dense - closed).cwiseAbs().maxCoeff());
  }
  return {degeneracies && worst <= 1e-9, "100 instances, max eigenvalue deviation " + fmt(worst, 3)};
}

// 3. Coupled-mode persistence under the bundled preset.
Outcome coupled_modes() {
  cli::CommonOptions o;
  o.preset = "appendix-d3";
  const Config c = cli::resolve_config("sde coupled", o);
  const auto seeds = static_cast<std::uint64_t>(c.get_int("run.seeds"));
  std::vector<double> rho;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    const SdeConfig cfg = cli::sde_config(c, seed);
    const SdeRunResult run = simulate_coupled_modes(cfg);
    Rng ref(derive_seed(seed, 0x7ef));
    rho.push_back(persistence_stats(run, ref.unit_vector(cfg.dim)).spearman);
  }
  const double m = mean(rho);
  const double lo = *std::min_element(rho.begin(), rho.end());
  return {rho.size() == 5 && m >= 0.93 && m <= 0.97 && lo > 0.90,
          std::to_string(rho.size()) + " seeds, mean Spearman " + fmt(m) + ", min " + fmt(lo)};
}

// 4. Refit of the bundled escape table.
Outcome table_refit() {
  std::ifstream in(cli::data_dir() / "table5.csv");
  if (!in) return {false, "cannot open table5.csv"};
  const SweepSummary s = fit_escape_models(parse_escape_table(in));
  if (!s.power_law || !s.kramers) return {false, "fit missing"};
  const FitReport& p = *s.power_law;
  const FitReport& k = *s.kramers;
  const bool ok = within(p.intercept, 9.11, 0.01) && within(p.slope, -1.225, 0.005) &&
                  within(p.chi_squared, 1.52, 0.02) && within(p.aic, 5.52, 0.02) &&
                  within(k.intercept, 11.65, 0.02) && within(k.slope, -2.631, 0.01) &&
                  within(k.chi_squared, 20.78, 0.1) && within(s.delta_aic, 19.26, 0.1);
  return {ok, "power law " + fmt(p.intercept) + " / " + fmt(p.slope) + " / chi2 " + fmt(p.chi_squared) + " / AIC " +
                  fmt(p.aic) + "; Kramers " + fmt(k.intercept) + " / " + fmt(k.slope) + " / chi2 " +
                  fmt(k.chi_squared) + "; dAIC " + fmt(s.delta_aic)};
}

// 5. Built-in escape sweep.
Outcome escape_monotonicity() {
  const Config c = cli::default_config("escape sweep");
  const SdeConfig cfg = cli::escape_sde_config(c, 0);
  const auto seeds = static_cast<int>(c.get_int("escape.seeds_per_gamma"));
  const double threshold = c.get_double("escape.threshold");
  const auto horizon = c.get_int("escape.horizon");
  const TiltPotential tilt = TiltPotential::quadratic(c.get_double("escape.tilt"));
  std::vector<double> gammas;
  for (double g : c.get_list("escape.gammas")) {
    if (g > 0) gammas.push_back(g);
  }
  const SweepSummary s = run_sweep(gammas, seeds, cfg, tilt, threshold, horizon);
  bool decreasing = true, all_escaped = true;
  for (std::size_t i = 0; i < s.levels.size(); ++i) {
    all_escaped = all_escaped && s.levels[i].n_escaped == seeds;
    if (i > 0) decreasing = decreasing && s.levels[i].tau_mean < s.levels[i - 1].tau_mean;
  }
  SdeConfig still = cfg;
  still.noise_intensity = 0;
  still.coupling = 0;
  int censored = 0;
  for (int k = 0; k < seeds; ++k) {
    still.seed = derive_seed(cfg.seed, 0x5eed + static_cast<std::uint64_t>(k));
    if (measure_escape(still, tilt, threshold, horizon).censored()) ++censored;
  }
  const double slope = s.power_law ? s.power_law->slope : 0.0;
  const bool ok = gammas.size() == 6 && decreasing && all_escaped && censored == seeds && std::abs(slope) >= 0.9;
  return {ok, std::to_string(gammas.size()) + " gammas x " + std::to_string(seeds) + " seeds, decreasing " +
                  (decreasing ? "yes" : "no") + ", gamma=0 censored " + std::to_string(censored) + "/" +
                  std::to_string(seeds) + ", exponent " + fmt(-slope)};
}

// 6. Endogenous crossing of the probe on a training encoder.
Outcome endogenous_crossing() {
  const Config c = cli::default_config("toy endogenous");
  const ProbeConfig probe = cli::probe_config(c);
  const EndogenousOptions o = cli::endogenous_options(c);
  int good = 0;
  std::string steps;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const EndogenousResult r = run_endogenous(cli::make_data(c, c.get("data.kind"), seed), probe, o, seed);
    const bool ok = r.delta0 < 0 && r.crossing_step && r.activation_step && *r.activation_step >= *r.crossing_step;
    if (ok) ++good;
    steps += (steps.empty() ? "" : " ") +
             (r.crossing_step ? std::to_string(*r.crossing_step) : std::string("-")) + "/" +
             (r.activation_step ? std::to_string(*r.activation_step) : std::string("-"));
  }
  return {good == 5, std::to_string(good) + "/5 seeds, crossing/activation " + steps};
}

// 7. Reverse traversal and forward overshoot.
Outcome reverse_traversal() {
  const Config c = cli::default_config("toy reverse");
  const SyntheticDataset data = cli::make_data(c, "bimodal", 0);
  const ForwardResult fwd = run_forward_split(data, cli::probe_config(c), cli::forward_options(c), 0);
  const ReverseResult rev = run_reverse_traversal(data, fwd.final_state, cli::reverse_options(c), 0);
  const bool ok = rev.merge_ratio && rev.tracking_error <= 0.04 && fwd.overshoot && *fwd.overshoot >= 1.0 &&
                  *fwd.overshoot <= 1.6;
  return {ok, "seed 0, merge " + (rev.merge_ratio ? fmt(*rev.merge_ratio) : std::string("none")) +
                  " beta_c, overshoot " + (fwd.overshoot ? fmt(*fwd.overshoot) : std::string("none"))};
}

// 8. Two-level splitting.
Outcome hierarchy() {
  const Config c = cli::default_config("toy hierarchy");
  const HierarchyOptions o = cli::hierarchy_options(c);
  const auto [c1, c2] = hierarchical_beta_c(cli::hierarchical_params(c));
  int events_ok = 0, balanced = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const HierarchyResult r = run_hierarchical(cli::make_data(c, "hierarchical", seed), o, seed);
    const bool ok = r.events == 2 && r.beta_event1 && r.beta_event2 && std::abs(*r.beta_event1 / c1 - 1) <= 0.35 &&
                    std::abs(*r.beta_event2 / c2 - 1) <= 0.35;
    if (ok) ++events_ok;
    if (r.balanced) ++balanced;
    detail += " " + (r.beta_event1 ? fmt(*r.beta_event1 / c1, 3) : std::string("-")) + "," +
              (r.beta_event2 ? fmt(*r.beta_event2 / c2, 3) : std::string("-"));
  }
  return {events_ok == 3 && balanced >= 2, "event ratios to closed form" + detail + "; balanced " +
                                               std::to_string(balanced) + "/3"};
}

// 9. Probe gradient, responsibilities and K-invariance of beta_c.
Outcome probe_properties() {
  Rng rng(99);
  double worst = 0, worst_row = 0;
  for (int instance = 0; instance < 50; ++instance) {
    const auto K = static_cast<Eigen::Index>(2 + rng.below(5));
    const auto d = static_cast<Eigen::Index>(1 + rng.below(5));
    const MatrixXd z = rng.normal_matrix(40, d, 1.5);
    GmmProbeState s{rng.normal_matrix(K, d), std::log(0.2 + 2.0 * rng.uniform())};
    const ProbeGradient g = nll_gradient(s, z);
    const double h = 1e-5;
    auto rel = [](double fd, double an) { return std::abs(fd - an) / std::max(1.0, std::abs(fd)); };
    for (Eigen::Index k = 0; k < K; ++k) {
      for (Eigen::Index a = 0; a < d; ++a) {
        GmmProbeState up = s, down = s;
        up.means(k, a) += h;
        down.means(k, a) -= h;
        worst = std::max(worst, rel((nll(up, z) - nll(down, z)) / (2 * h), g.means(k, a)));
      }
    }
    GmmProbeState up = s, down = s;
    up.log_precision += h;
    down.log_precision -= h;
    worst = std::max(worst, rel((nll(up, z) - nll(down, z)) / (2 * h), g.log_beta));
    const MatrixXd r = responsibilities(s, z);
    worst_row = std::max(worst_row, (r.rowwise().sum().array() - 1.0).abs().maxCoeff());
    if ((r.array() < 0).any()) worst_row = 1;
  }
  const MatrixXd z = rng.normal_matrix(300, 4);
  const MatrixXd cov = covariance(z);
  bool invariant = true;
  double reference = 0;
  for (int K : {1, 2, 5, 10, 32}) {
    ProbeConfig cfg;
    cfg.K_probe = K;
    Rng init(K);
    const double v = make_reading(0, init_probe(z, cfg, init), cov).log_beta_c;
    if (K == 1) reference = v;
    invariant = invariant && v == reference;
  }
  return {worst <= 1e-5 && worst_row <= 1e-12 && invariant,
          "50 instances, max relative gradient error " + fmt(worst, 3) + ", max row-sum error " + fmt(worst_row, 3) +
              ", beta_c K-invariant " + (invariant ? "yes" : "no")};
}

// 10. Shape taxonomy on synthetic trajectories and exemplar fixtures.
Outcome taxonomy() {
  std::string detail;
  bool ok = true;
  for (ShapeClass c : {ShapeClass::FullV, ShapeClass::FoldBack, ShapeClass::DelayedEscape, ShapeClass::NoArc}) {
    int correct = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      if (classify(synthesize_trajectory(c, derive_seed(seed, 0x7a)), std::nullopt).shape == c) ++correct;
    }
    ok = ok && correct >= 190;
    detail += to_string(c) + " " + std::to_string(correct) + "/200, ";
  }
  const std::vector<std::pair<std::string, ShapeClass>> fixtures{
      {"exemplar_full_v.synthetic.csv", ShapeClass::FullV},
      {"exemplar_fold_back.synthetic.csv", ShapeClass::FoldBack},
      {"exemplar_no_arc.synthetic.csv", ShapeClass::NoArc}};
  int matched = 0;
  for (const auto& [file, expected] : fixtures) {
    std::ifstream in(cli::data_dir() / file);
    if (in && classify(read_trajectory_csv(in, file)).shape == expected) ++matched;
  }
  ok = ok && matched == 3;
  return {ok, detail + "exemplars " + std::to_string(matched) + "/3"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "Hessian calibration", 10, hessian_calibration},
      {2, "Channel spectrum", 30, channel_spectrum_check},
      {3, "Coupled-mode persistence", 60, coupled_modes},
      {4, "Escape table refit", 1, table_refit},
      {5, "Escape monotonicity", 300, escape_monotonicity},
      {6, "Endogenous crossing", 60, endogenous_crossing},
      {7, "Reverse traversal", 60, reverse_traversal},
      {8, "Hierarchy", 120, hierarchy},
      {9, "Probe correctness", 30, probe_properties},
      {10, "Taxonomy", 30, taxonomy},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.check();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds < c.budget_s;
    const bool pass = out.pass && in_time;
    if (!pass) ++failures;
    std::cout << (pass ? "PASS" : "FAIL") << " " << std::setw(2) << c.id << " " << c.name << ": " << out.detail
              << " [" << std::fixed << std::setprecision(2) << seconds << " s / " << std::setprecision(0)
              << c.budget_s << " s" << (in_time ? "" : ", over budget") << "]" << std::defaultfloat << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
  return failures == 0 ? 0 : 1;
}
