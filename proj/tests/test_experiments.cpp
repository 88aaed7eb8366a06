#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pitchfork/experiments.hpp"

using namespace pitchfork;
using doctest::Approx;

namespace {

ProbeConfig toy_probe() {
  ProbeConfig p;
  p.K_probe = 8;
  p.lr_means = 2.0;
  p.lr_logbeta = 5e-3;
  return p;
}

MatrixXd class_latents(int classes, int per_class, double spread, Rng& rng, std::vector<int>& labels) {
  MatrixXd z(classes * per_class, 3);
  labels.clear();
  for (int c = 0; c < classes; ++c) {
    const VectorXd center = 5.0 * rng.unit_vector(3);
    for (int i = 0; i < per_class; ++i) {
      const int row = c * per_class + i;
      for (int j = 0; j < 3; ++j) z(row, j) = center(j) + spread * rng.normal();
      labels.push_back(c);
    }
  }
  return z;
}

}  // namespace

TEST_CASE("bimodal generator: lambda_max of the empirical covariance is s^2 + sigma^2") {
  const SyntheticDataset d = gen_bimodal({10000, 2, 2.0, 1.0}, 11);
  CHECK(d.samples.rows() == 10000);
  CHECK(lambda_max(covariance(d.samples)) == Approx(5.0).epsilon(0.03));
  CHECK(beta_c(covariance(d.samples)) == Approx(0.2).epsilon(0.03));
}

TEST_CASE("unimodal generator: beta_c near 1") {
  const SyntheticDataset d = gen_unimodal({10000, 2, 1.0}, 5);
  CHECK(beta_c(covariance(d.samples)) == Approx(1.0).epsilon(0.05));
}

TEST_CASE("hierarchical generator: two separated critical points") {
  const HierarchicalParams p;
  const auto [c1, c2] = hierarchical_beta_c(p);
  CHECK(c2 / c1 > 2.0);
  const SyntheticDataset d = gen_hierarchical({20000, 8.0, 0.75, 2.0, 0.5}, 3);
  std::vector<int> groups;
  for (int label : d.labels) groups.push_back(d.component_group[static_cast<std::size_t>(label)]);
  CHECK(beta_c(covariance(d.samples)) == Approx(c1).epsilon(0.05));
  CHECK(beta_c(within_group_covariance(d.samples, groups)) == Approx(c2).epsilon(0.05));
}

TEST_CASE("label counts are binomial within 3 sigma") {
  const Eigen::Index n = 4000;
  const SyntheticDataset d = gen_hierarchical({n, 8.0, 0.75, 2.0, 0.5}, 77);
  std::vector<int> counts(8, 0);
  for (int l : d.labels) ++counts[static_cast<std::size_t>(l)];
  const double p = 1.0 / 8.0;
  const double sd = std::sqrt(static_cast<double>(n) * p * (1 - p));
  for (int c : counts) CHECK(std::abs(c - static_cast<double>(n) * p) < 3 * sd);
}

TEST_CASE("generators validate their parameters") {
  CHECK_THROWS_AS(gen_bimodal({100, 2, 0.0, 1.0}, 1), Error);
  CHECK_THROWS_AS(gen_bimodal({100, 0, 2.0, 1.0}, 1), Error);
  CHECK_THROWS_AS(gen_bimodal({100, 2, 2.0, 0.0}, 1), Error);
  CHECK_THROWS_AS(gen_hierarchical({100, 0.0, 0.75, 0.0, 0.5}, 1), Error);
}

TEST_CASE("generators are deterministic in the seed") {
  const SyntheticDataset a = gen_bimodal({200, 3, 2.0, 1.0}, 9);
  const SyntheticDataset b = gen_bimodal({200, 3, 2.0, 1.0}, 9);
  const SyntheticDataset c = gen_bimodal({200, 3, 2.0, 1.0}, 10);
  CHECK(a.samples == b.samples);
  CHECK(a.labels == b.labels);
  CHECK_FALSE(a.samples == c.samples);
}

TEST_CASE("nc1: collapsed classes give zero, shuffled labels give a large value") {
  Rng rng(4);
  std::vector<int> labels;
  const MatrixXd collapsed = class_latents(4, 50, 0.0, rng, labels);
  CHECK(nc1(collapsed, labels) == Approx(0.0));

  const MatrixXd noise = rng.normal_matrix(400, 3);
  std::vector<int> shuffled(400);
  for (std::size_t i = 0; i < shuffled.size(); ++i) shuffled[i] = static_cast<int>(rng.below(4));
  CHECK(nc1(noise, shuffled) >= 10.0);
  CHECK(nc1(noise, shuffled, Nc1Variant::Pseudoinverse) >= 10.0);
}

TEST_CASE("nc1: trace-ratio oracle on a two-class example") {
  MatrixXd z(4, 1);
  z << -2, -1, 1, 2;
  const std::vector<int> labels{0, 0, 1, 1};
  // S_W: per-sample deviation 0.5 -> 0.25. Class means -1.5, 1.5 about 0 -> 2.25.
  CHECK(nc1(z, labels) == Approx(0.25 / 2.25));
}

TEST_CASE("nc1 is invariant to rotation and scale of the latents") {
  Rng rng(8);
  std::vector<int> labels;
  const MatrixXd z = class_latents(3, 40, 0.7, rng, labels);
  const Eigen::HouseholderQR<MatrixXd> qr(rng.normal_matrix(3, 3));
  const MatrixXd q = qr.householderQ();
  const double base = nc1(z, labels);
  CHECK(nc1(z * q, labels) == Approx(base).epsilon(1e-10));
  CHECK(nc1(3.5 * z, labels) == Approx(base).epsilon(1e-10));
  const double pinv = nc1(z, labels, Nc1Variant::Pseudoinverse);
  CHECK(nc1(z * q, labels, Nc1Variant::Pseudoinverse) == Approx(pinv).epsilon(1e-8));
  CHECK(nc1(2.0 * z, labels, Nc1Variant::Pseudoinverse) == Approx(pinv).epsilon(1e-8));
}

TEST_CASE("nc1 errors") {
  MatrixXd z(4, 2);
  z.setRandom();
  CHECK_THROWS_AS(nc1(z, {0, 0, 0, 0}), Error);
  CHECK_THROWS_AS(nc1(z, {0, 1, 0}), Error);
  try {
    (void)nc1(z, {0, 0, 0, 0});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numerical);
  }
}

TEST_CASE("detect_activation") {
  std::vector<double> s(50, 1.0);
  for (std::size_t i = 30; i < 50; ++i) s[i] = 20.0;
  CHECK(detect_activation(s, 10) == std::optional<std::size_t>(30));
  s[32] = 1.0;
  CHECK(detect_activation(s, 10) == std::optional<std::size_t>(33));
  CHECK_FALSE(detect_activation(std::vector<double>(50, 1.0), 10).has_value());
  CHECK_FALSE(detect_activation(s, 0).has_value());
}

TEST_CASE("axis angle is sign invariant") {
  VectorXd a(2), b(2);
  a << 1, 0;
  b << -1, 0;
  CHECK(axis_angle_degrees(a, b) == Approx(0.0));
  b << 0, 1;
  CHECK(axis_angle_degrees(a, b) == Approx(90.0));
  b << 1, 1;
  CHECK(axis_angle_degrees(a, b) == Approx(45.0));
}

TEST_CASE("forward split: activation just above beta_c along the principal axis") {
  const SyntheticDataset data = gen_bimodal({2000, 2, 2.0, 1.0}, derive_seed(0, 0xda7a));
  const ForwardResult r = run_forward_split(data, toy_probe(), {}, 0);
  REQUIRE(r.activation_step.has_value());
  REQUIRE(r.overshoot.has_value());
  CHECK(*r.overshoot >= 1.0);
  CHECK(*r.overshoot <= 1.6);
  CHECK(r.split_angle_deg < 5.0);
  CHECK(r.final_log_ratio > 0);
  CHECK(r.log.readings.size() > 10);
}

TEST_CASE("unimodal control: order parameter gap") {
  const ForwardResult bimodal = run_forward_split(gen_bimodal({2000, 2, 2.0, 1.0}, derive_seed(1, 0xda7a)),
                                                  toy_probe(), {}, 1);
  const ForwardResult unimodal = run_forward_split(gen_unimodal({2000, 2, 1.0}, derive_seed(1, 0xda7a)),
                                                   toy_probe(), {}, 1);
  CHECK(order_parameter_gap(bimodal, unimodal) >= 10.0);
}

TEST_CASE("forward split is deterministic in the seed") {
  const SyntheticDataset data = gen_bimodal({500, 2, 2.0, 1.0}, 3);
  ForwardOptions o;
  o.steps = 300;
  const ForwardResult a = run_forward_split(data, toy_probe(), o, 3);
  const ForwardResult b = run_forward_split(data, toy_probe(), o, 3);
  CHECK(a.final_state.means == b.final_state.means);
  CHECK(a.final_state.log_precision == b.final_state.log_precision);
}

TEST_CASE("reverse ladder validation") {
  const SyntheticDataset data = gen_bimodal({200, 2, 2.0, 1.0}, 3);
  Rng rng(1);
  const GmmProbeState s = init_probe(data.samples, toy_probe(), rng);
  ReverseOptions o;
  o.levels = 1;
  CHECK_THROWS_AS(run_reverse_traversal(data, s, o, 1), Error);
  o.levels = 10;
  o.ratio_low = 4.0;
  CHECK_THROWS_AS(run_reverse_traversal(data, s, o, 1), Error);
}

TEST_CASE("short reverse ladder: merge brackets beta_c and the collapsed branch is flat") {
  const SyntheticDataset data = gen_bimodal({1000, 2, 2.0, 1.0}, derive_seed(2, 0xda7a));
  ForwardOptions fo;
  fo.steps = 2000;
  const ForwardResult fwd = run_forward_split(data, toy_probe(), fo, 2);
  ReverseOptions o;
  o.levels = 31;
  o.inner_steps = 200;
  const ReverseResult r = run_reverse_traversal(data, fwd.final_state, o, 2);
  CHECK(r.ratios.size() == 31);
  CHECK(std::is_sorted(r.ratios.rbegin(), r.ratios.rend()));
  REQUIRE(r.merge_ratio.has_value());
  CHECK(*r.merge_ratio > 0.8);
  CHECK(*r.merge_ratio < 1.25);
  CHECK(r.op_at_half < 1e-3 * r.plateau);
}

TEST_CASE("hierarchy with coincident subclusters has a single event") {
  const SyntheticDataset data = gen_hierarchical({2000, 8.0, 0.75, 0.0, 0.5}, derive_seed(0, 0xda7a));
  HierarchyOptions o;
  o.steps = 8000;
  const HierarchyResult r = run_hierarchical(data, o, 0);
  CHECK(r.events == 1);
  CHECK(r.beta_event1.has_value());
  CHECK_FALSE(r.beta_event2.has_value());
}

TEST_CASE("hierarchy validation") {
  const SyntheticDataset flat = gen_bimodal({100, 2, 2.0, 1.0}, 1);
  CHECK_THROWS_AS(run_hierarchical(flat, {}, 1), Error);
  const SyntheticDataset data = gen_hierarchical({200, 8.0, 0.75, 2.0, 0.5}, 1);
  HierarchyOptions o;
  o.beta_end = o.beta_start / 2;
  CHECK_THROWS_AS(run_hierarchical(data, o, 1), Error);
}

TEST_CASE("toy encoder: reconstruction loss decreases") {
  const SyntheticDataset data = gen_bimodal({500, 2, 2.0, 1.0}, 12);
  Rng rng(12);
  ToyEncoderState enc = init_encoder(2, 2, 0.1, 0.01, rng);
  std::vector<double> losses;
  for (int i = 0; i < 600; ++i) {
    losses.push_back(enc.loss(data.samples));
    enc.train_step(data.samples);
  }
  CHECK(enc.step == 600);
  for (std::size_t w = 100; w + 100 <= losses.size(); w += 100) {
    const double prev = std::accumulate(losses.begin() + static_cast<long>(w - 100), losses.begin() + static_cast<long>(w), 0.0);
    const double cur = std::accumulate(losses.begin() + static_cast<long>(w), losses.begin() + static_cast<long>(w + 100), 0.0);
    CHECK(cur <= prev);
  }
  CHECK_THROWS_AS(init_encoder(2, 2, 0.1, 0.0, rng), Error);
}

TEST_CASE("endogenous crossing: starts subcritical, crosses, activates after crossing") {
  ProbeConfig probe;
  probe.lr_means = 0.5;
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    const SyntheticDataset data = gen_bimodal({2000, 2, 2.0, 1.0}, derive_seed(seed, 0xda7a));
    const EndogenousResult r = run_endogenous(data, probe, {}, seed);
    CHECK(r.delta0 < 0);
    REQUIRE(r.crossing_step.has_value());
    REQUIRE(r.activation_step.has_value());
    CHECK(*r.activation_step >= *r.crossing_step);
    CHECK(r.hypothesis_failures.empty());
    CHECK(r.reconstruction_loss.back() < r.reconstruction_loss.front());
  }
}

TEST_CASE("endogenous latents do not depend on the probe configuration") {
  const SyntheticDataset data = gen_bimodal({300, 2, 2.0, 1.0}, 4);
  EndogenousOptions o;
  o.steps = 200;
  ProbeConfig a;
  ProbeConfig b;
  b.lr_means = 0.5;
  b.K_probe = 4;
  const EndogenousResult ra = run_endogenous(data, a, o, 4);
  const EndogenousResult rb = run_endogenous(data, b, o, 4);
  CHECK(ra.reconstruction_loss == rb.reconstruction_loss);
  REQUIRE(ra.log.readings.size() == rb.log.readings.size());
  for (std::size_t i = 0; i < ra.log.readings.size(); ++i) {
    CHECK(ra.log.readings[i].log_beta_c == rb.log.readings[i].log_beta_c);
  }
}

TEST_CASE("audit flags a window where beta falls") {
  TrajectoryLog log;
  for (int i = 0; i < 300; ++i) {
    CriticalityReading r;
    r.step = i;
    r.log_beta = i < 200 ? 0.01 * i : 2.0 - 0.05 * (i - 200);
    r.log_beta_c = -0.001 * i;
    r.log_ratio = r.log_beta - r.log_beta_c;
    log.readings.push_back(r);
  }
  const auto events = audit_hypotheses(log, 50);
  REQUIRE_FALSE(events.empty());
  CHECK(events.front().hypothesis == "beta_nondecreasing");
  CHECK(events.front().step >= 200);
  for (auto& r : log.readings) r.log_beta = 0.01 * static_cast<double>(r.step);
  CHECK(audit_hypotheses(log, 50).empty());
}
