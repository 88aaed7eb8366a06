#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pitchfork/experiments.hpp"
#include "pitchfork/gmm_probe.hpp"

using namespace pitchfork;
using doctest::Approx;

namespace {

GmmProbeState random_state(Rng& rng, Eigen::Index K, Eigen::Index d, double log_beta) {
  return {rng.normal_matrix(K, d), log_beta};
}

// Brute-force NLL from explicit isotropic Gaussian densities.
double density_sum_nll(const GmmProbeState& s, const MatrixXd& z) {
  const double beta = s.beta();
  const double d = static_cast<double>(s.d());
  const double norm = std::pow(beta / (2 * std::numbers::pi), d / 2);
  double total = 0;
  for (Eigen::Index n = 0; n < z.rows(); ++n) {
    double p = 0;
    for (Eigen::Index k = 0; k < s.K(); ++k) {
      p += norm * std::exp(-0.5 * beta * (z.row(n) - s.means.row(k)).squaredNorm()) / static_cast<double>(s.K());
    }
    total -= std::log(p);
  }
  return total / static_cast<double>(z.rows());
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST_CASE("beta_c examples") {
  CHECK(beta_c(MatrixXd::Identity(3, 3)) == Approx(1.0));
  MatrixXd d(2, 2);
  d << 4, 0, 0, 1;
  CHECK(beta_c(d) == Approx(0.25));
  MatrixXd mix(2, 2);
  mix << 5, 0, 0, 1;
  CHECK(beta_c(mix) == Approx(0.2));
  CHECK_THROWS_AS(beta_c(MatrixXd::Zero(2, 2)), Error);
}

TEST_CASE("nll examples") {
  GmmProbeState one{MatrixXd::Constant(1, 1, 0.3), 0.0};
  MatrixXd z = MatrixXd::Constant(1, 1, 0.3);
  CHECK(nll(one, z) == Approx(0.5 * std::log(2 * std::numbers::pi)));

  Rng rng(1);
  const MatrixXd samples = rng.normal_matrix(20, 3);
  GmmProbeState single{rng.normal_matrix(1, 3), 0.4};
  GmmProbeState doubled{single.means.replicate(2, 1), 0.4};
  CHECK(nll(doubled, samples) == Approx(nll(single, samples)).epsilon(1e-12));

  CHECK_THROWS_AS(nll(single, MatrixXd(0, 3)), Error);
  CHECK_THROWS_AS(nll(single, MatrixXd::Zero(4, 2)), Error);
}

TEST_CASE("nll matches an explicit density sum") {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto K = 1 + static_cast<Eigen::Index>(rng.below(5));
    const auto d = 1 + static_cast<Eigen::Index>(rng.below(4));
    const GmmProbeState s = random_state(rng, K, d, rng.normal() * 0.5);
    const MatrixXd z = rng.normal_matrix(15, d, 1.5);
    CHECK(nll(s, z) == Approx(density_sum_nll(s, z)).epsilon(1e-10));
  }
}

TEST_CASE("responsibilities") {
  Rng rng(3);
  GmmProbeState equal{MatrixXd::Constant(4, 2, 0.7), 0.2};
  const MatrixXd z = rng.normal_matrix(10, 2);
  CHECK((responsibilities(equal, z).array() - 0.25).abs().maxCoeff() < 1e-15);

  GmmProbeState pair{MatrixXd(2, 1), std::log(2.0)};
  pair.means << -1, 1;
  const MatrixXd p = responsibilities(pair, MatrixXd::Zero(1, 1));
  CHECK(p(0, 0) == Approx(0.5));
  CHECK(p(0, 1) == Approx(0.5));

  GmmProbeState sharp = pair;
  sharp.log_precision = std::log(1e4);
  const MatrixXd q = responsibilities(sharp, MatrixXd::Constant(1, 1, -0.9));
  CHECK(q(0, 0) > 1 - 1e-12);

  for (int t = 0; t < 30; ++t) {
    const GmmProbeState s = random_state(rng, 5, 3, 3 * rng.normal());
    const MatrixXd r = responsibilities(s, rng.normal_matrix(40, 3, 2.0));
    CHECK((r.rowwise().sum().array() - 1).abs().maxCoeff() <= 1e-12);
    CHECK(r.minCoeff() >= 0);
  }
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(4);
  const double h = 1e-5;
  for (int t = 0; t < 50; ++t) {
    const GmmProbeState s = random_state(rng, 3, 2, 0.5 * rng.normal());
    const MatrixXd z = rng.normal_matrix(25, 2, 1.5);
    const ProbeGradient g = nll_gradient(s, z);
    for (Eigen::Index k = 0; k < 3; ++k) {
      for (Eigen::Index a = 0; a < 2; ++a) {
        GmmProbeState up = s, down = s;
        up.means(k, a) += h;
        down.means(k, a) -= h;
        const double fd = (nll(up, z) - nll(down, z)) / (2 * h);
        CHECK(std::abs(fd - g.means(k, a)) <= 1e-5 * std::max(1.0, std::abs(fd)));
      }
    }
    GmmProbeState up = s, down = s;
    up.log_precision += h;
    down.log_precision -= h;
    const double fd = (nll(up, z) - nll(down, z)) / (2 * h);
    CHECK(rel_err(fd, g.log_beta) <= 1e-5);
  }
}

TEST_CASE("grad_step at the symmetric state leaves the means fixed") {
  Rng rng(5);
  const MatrixXd z = rng.normal_matrix(100, 2);
  const RowVectorXd centre = z.colwise().mean();
  GmmProbeState s{centre.replicate(4, 1), -1.0};
  ProbeConfig cfg;
  const GmmProbeState next = grad_step(s, z, cfg);
  CHECK((next.means - s.means).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("small beta is pushed upward") {
  Rng rng(6);
  const MatrixXd z = rng.normal_matrix(200, 2);
  GmmProbeState s{rng.normal_matrix(3, 2, 0.01), std::log(1e-3)};
  CHECK(nll_gradient(s, z).log_beta < 0);
  ProbeConfig cfg;
  CHECK(grad_step(s, z, cfg).log_precision > s.log_precision);
}

TEST_CASE("non-finite states are reported") {
  Rng rng(7);
  GmmProbeState s{rng.normal_matrix(2, 2), 800.0};
  CHECK_THROWS_AS(nll_gradient(s, rng.normal_matrix(5, 2)), Error);
}

TEST_CASE("order parameter") {
  CHECK(order_parameter({MatrixXd::Constant(3, 2, 1.5), 0}) == 0.0);
  MatrixXd two(2, 1);
  two << -1, 1;
  CHECK(order_parameter({two, 0}) == Approx(1.0));
  MatrixXd square(4, 2);
  square << 0, 0, 1, 0, 0, 1, 1, 1;
  CHECK(order_parameter({square, 0}) == Approx(std::sqrt(0.5)));
}

TEST_CASE("split direction follows the prototype separation") {
  MatrixXd m(2, 2);
  m << -1, 0, 1, 0;
  const VectorXd v = split_direction({m, 0});
  CHECK(std::abs(v(0)) == Approx(1.0));
}

TEST_CASE("static latents: log beta rises monotonically to its stationary point") {
  Rng rng(8);
  const MatrixXd z = rng.normal_matrix(500, 2);
  ProbeConfig cfg;
  cfg.K_probe = 3;
  GmmProbeState s = init_probe(z, cfg, rng);
  // Below the optimum dNLL/dlog(beta) < 0, so every step raises log beta.
  double previous = s.log_precision;
  for (int step = 0; step < 5000; ++step) {
    auto [next, reading] = probe_step(s, z, cfg, step);
    CHECK(reading.log_beta == next.log_precision);
    CHECK(next.log_precision >= previous);
    previous = next.log_precision;
    s = next;
  }
  CHECK(std::abs(nll_gradient(s, z).log_beta) < 1e-3);
}

TEST_CASE("readings") {
  Rng rng(9);
  const MatrixXd z = rng.normal_matrix(300, 2);
  ProbeConfig cfg;
  GmmProbeState s = init_probe(z, cfg, rng);
  const MatrixXd identity = MatrixXd::Identity(2, 2);
  const CriticalityReading r = make_reading(3, s, identity);
  CHECK(r.log_beta_c == 0.0);
  CHECK(std::abs(r.log_ratio - (r.log_beta - r.log_beta_c)) <= 1e-12);

  const double c = 3.0;
  const CriticalityReading a = make_reading(0, s, covariance(z));
  const CriticalityReading b = make_reading(0, s, covariance(MatrixXd(c * z)));
  CHECK(b.log_beta_c - a.log_beta_c == Approx(-2 * std::log(c)).epsilon(1e-12));

  const CriticalityReading degenerate = make_reading(0, s, MatrixXd::Zero(2, 2));
  CHECK(degenerate.degenerate_covariance);
  CHECK(std::isinf(degenerate.log_beta_c));
}

TEST_CASE("probe_step is detached and deterministic") {
  Rng rng(10);
  const MatrixXd z = rng.normal_matrix(200, 3);
  const MatrixXd copy = z;
  ProbeConfig cfg;
  Rng r1(42), r2(42);
  GmmProbeState s1 = init_probe(z, cfg, r1), s2 = init_probe(z, cfg, r2);
  for (int step = 0; step < 20; ++step) {
    auto [n1, a] = probe_step(s1, z, cfg, step);
    auto [n2, b] = probe_step(s2, z, cfg, step);
    CHECK(a.log_beta == b.log_beta);
    CHECK(a.order_parameter == b.order_parameter);
    s1 = n1;
    s2 = n2;
  }
  CHECK(z == copy);
}

TEST_CASE("beta_c readings do not depend on K_probe") {
  Rng rng(11);
  const MatrixXd z = rng.normal_matrix(300, 4);
  std::vector<double> reference;
  for (int K : {2, 5, 10, 20, 50}) {
    ProbeConfig cfg;
    cfg.K_probe = K;
    Rng init(K);
    GmmProbeState s = init_probe(z, cfg, init);
    std::vector<double> seq;
    for (int step = 0; step < 5; ++step) {
      auto [next, reading] = probe_step(s, z, cfg, step);
      seq.push_back(reading.log_beta_c);
      s = next;
    }
    if (reference.empty()) reference = seq;
    CHECK(seq == reference);
  }
}

TEST_CASE("config validation") {
  ProbeConfig cfg;
  cfg.lr_means = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.K_probe = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
