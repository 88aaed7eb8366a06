#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "pitchfork/escape_lab.hpp"

using namespace pitchfork;
using doctest::Approx;

namespace {

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double whole, double tol,
                        int depth) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double left = (m - a) / 6 * (fa + 4 * f(0.5 * (a + m)) + fm);
  const double right = (b - m) / 6 * (fm + 4 * f(0.5 * (m + b)) + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol) return left + right + (left + right - whole) / 15;
  return adaptive_simpson(f, a, m, left, tol / 2, depth - 1) + adaptive_simpson(f, m, b, right, tol / 2, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b) {
  const double whole = (b - a) / 6 * (f(a) + 4 * f(0.5 * (a + b)) + f(b));
  return adaptive_simpson(f, a, b, whole, 1e-10, 50);
}

SdeConfig quiet(double mu, double alpha, double gamma, double eps0, double dt) {
  SdeConfig c;
  c.growth_rate = mu;
  c.alpha = alpha;
  c.coupling = gamma;
  c.noise_intensity = 0;
  c.init_scale = eps0;
  c.dt = dt;
  return c;
}

const char* kTable =
    "gamma,tau_mean,tau_std,n_seeds,censored\n"
    "0.0,,,3,1\n"
    "0.1,147167,23618,3,0\n"
    "0.2,88033,27091,3,0\n"
    "0.3,38150,4250,3,0\n"
    "0.5,22433,6064,3,0\n"
    "0.7,16633,5008,3,0\n"
    "1.0,8900,864,3,0\n";

std::vector<EscapeLevel> table() {
  std::istringstream in(kTable);
  return parse_escape_table(in);
}

}  // namespace

TEST_CASE("deterministic escape matches quadrature of dt = deps / drift") {
  const SdeConfig c = quiet(0.05, 0.05, 0.5, 0.01, 0.01);
  const TiltPotential tilt = TiltPotential::quadratic(1.0);
  const double threshold = 0.5;
  const EscapeObservation obs = measure_escape(c, tilt, threshold, 1000000);
  REQUIRE(obs.tau);
  const double t = integrate([&](double e) { return 1.0 / scalar_drift(c, tilt, e); }, c.init_scale, threshold);
  CHECK(static_cast<double>(*obs.tau) * c.dt == Approx(t).epsilon(0.01));
}

TEST_CASE("untilted escape matches the closed-form logistic time") {
  const double mu = 0.1, alpha = 0.1, s0 = 0.01, th = 0.5;
  const SdeConfig c = quiet(mu, alpha, 0.0, s0, 0.01);
  const EscapeObservation obs = measure_escape(c, TiltPotential::quadratic(1.0), th, 1000000);
  REQUIRE(obs.tau);
  const double t = std::log(th * th * (mu - alpha * s0 * s0) / (s0 * s0 * (mu - alpha * th * th))) / (2 * mu);
  CHECK(static_cast<double>(*obs.tau) * c.dt == Approx(t).epsilon(0.02));
}

TEST_CASE("a state on the saddle never escapes without noise or tilt") {
  const SdeConfig c = quiet(1e-5, 1e-5, 0.0, 0.0, 0.01);
  const EscapeObservation obs = measure_escape(c, TiltPotential::quadratic(1.0), 0.5, 100000);
  CHECK(obs.censored());
  CHECK(obs.horizon == 100000);
}

TEST_CASE("threshold validation") {
  const SdeConfig c = quiet(0.1, 0.1, 0.0, 0.01, 0.01);
  CHECK_THROWS_AS(measure_escape(c, TiltPotential::quadratic(), 2.0, 100), Error);
  CHECK_THROWS_AS(measure_escape(c, TiltPotential::quadratic(), 0.005, 100), Error);
  CHECK(default_threshold(c) == Approx(0.5));
}

TEST_CASE("sweep: escape time falls with gamma and gamma = 0 stays censored") {
  SdeConfig c = quiet(1e-5, 1e-5, 0.0, 0.0, 0.01);
  c.noise_intensity = 1e-12;
  const SweepSummary s =
      run_sweep({0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0}, 3, c, TiltPotential::quadratic(1.0), 0.5, 1000000);
  REQUIRE(s.levels.size() == 7);
  CHECK(s.levels[0].censored);
  CHECK(s.levels[0].escape_fraction() == 0.0);
  for (std::size_t i = 2; i < s.levels.size(); ++i) CHECK(s.levels[i].tau_mean < s.levels[i - 1].tau_mean);
  for (const auto& o : s.observations) {
    if (o.tau) CHECK(*o.tau <= o.horizon);
  }
  REQUIRE(s.power_law);
  REQUIRE(s.kramers);
  CHECK(-s.power_law->slope >= 0.9);
  CHECK(s.delta_aic == Approx(s.kramers->aic - s.power_law->aic));
  CHECK(std::find(s.fitted_gammas.begin(), s.fitted_gammas.end(), 0.0) == s.fitted_gammas.end());
}

TEST_CASE("sweep with only censored levels reports the levels without a fit") {
  SdeConfig c = quiet(1e-5, 1e-5, 0.0, 0.0, 0.01);
  try {
    run_sweep({0.0}, 3, c, TiltPotential::quadratic(1.0), 0.5, 1000);
    FAIL("expected NoFitError");
  } catch (const NoFitError& e) {
    CHECK(e.kind() == ErrorKind::NoFit);
    REQUIRE(e.summary().levels.size() == 1);
    CHECK(e.summary().levels[0].n_escaped == 0);
  }
}

TEST_CASE("table ingestion and refit") {
  const auto levels = table();
  REQUIRE(levels.size() == 7);
  CHECK(levels[0].censored);
  const SweepSummary s = fit_escape_models(levels);
  REQUIRE(s.power_law);
  REQUIRE(s.kramers);
  CHECK(std::abs(s.power_law->intercept - 9.11) <= 0.01);
  CHECK(std::abs(s.power_law->slope + 1.225) <= 0.005);
  CHECK(std::abs(s.power_law->chi_squared - 1.52) <= 0.02);
  CHECK(std::abs(s.power_law->aic - 5.52) <= 0.02);
  CHECK(std::abs(s.kramers->intercept - 11.65) <= 0.02);
  CHECK(std::abs(s.kramers->slope + 2.631) <= 0.01);
  CHECK(std::abs(s.kramers->chi_squared - 20.78) <= 0.1);
  CHECK(std::abs(s.kramers->aic - 24.78) <= 0.1);
  CHECK(std::abs(s.delta_aic - 19.26) <= 0.1);
  CHECK(s.power_law->predict(0.1) == Approx(151987).epsilon(0.01));
  CHECK(s.fitted_gammas.size() == 6);

  const SweepSummary unit = fit_escape_models(levels, FitWeighting::Unit);
  CHECK(std::abs(unit.power_law->slope + 1.228) <= 0.005);
}

TEST_CASE("exact exponential data identifies the Kramers form") {
  std::vector<EscapeLevel> levels;
  for (double g : {0.1, 0.3, 0.5, 0.8, 1.2}) {
    EscapeLevel l;
    l.gamma = g;
    l.tau_mean = std::exp(9 - g);
    l.tau_std = 0.1 * l.tau_mean;
    l.n_seeds = l.n_escaped = 3;
    levels.push_back(l);
  }
  const SweepSummary s = fit_escape_models(levels);
  CHECK(s.kramers->chi_squared < 1e-18);
  CHECK(s.power_law->chi_squared > 0);
  CHECK(s.delta_aic < 0);
}

TEST_CASE("a noisy synthetic power law recovers its exponent") {
  Rng rng(12);
  std::vector<EscapeLevel> levels;
  for (double g : {0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
    EscapeLevel l;
    l.gamma = g;
    l.tau_mean = std::exp(8.0 + 0.05 * rng.normal()) * std::pow(g, -1.3);
    l.tau_std = 0.05 * l.tau_mean;
    l.n_seeds = l.n_escaped = 3;
    levels.push_back(l);
  }
  const SweepSummary s = fit_escape_models(levels);
  CHECK(std::abs(s.power_law->slope + 1.3) <= 2 * s.power_law->slope_stderr);
}

TEST_CASE("zero spread falls back to unit weights") {
  std::vector<EscapeLevel> levels;
  for (double g : {0.1, 0.2, 0.4}) {
    EscapeLevel l;
    l.gamma = g;
    l.tau_mean = 100 / g;
    l.tau_std = 0;
    l.n_seeds = l.n_escaped = 3;
    levels.push_back(l);
  }
  const SweepSummary s = fit_escape_models(levels);
  CHECK(s.weighting == FitWeighting::Unit);
  CHECK(s.power_law->slope == Approx(-1.0));
}

TEST_CASE("table parser errors") {
  std::istringstream missing("gamma,tau_mean,n_seeds,censored\n0.1,5,3,0\n");
  CHECK_THROWS_AS(parse_escape_table(missing), Error);
  std::istringstream bad("gamma,tau_mean,tau_std,n_seeds,censored\n0.1,abc,1,3,0\n");
  CHECK_THROWS_AS(parse_escape_table(bad), Error);
  std::istringstream empty_uncensored("gamma,tau_mean,tau_std,n_seeds,censored\n0.1,,,3,0\n");
  CHECK_THROWS_AS(parse_escape_table(empty_uncensored), Error);
  const auto all = table();
  const std::vector<EscapeLevel> two(all.begin() + 1, all.begin() + 3);
  CHECK_THROWS_AS(fit_escape_models(two), Error);
}
