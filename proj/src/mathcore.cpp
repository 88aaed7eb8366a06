#include "pitchfork/mathcore.hpp"

#include <cmath>

namespace pitchfork {

double mean(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::Dimension, "mean of an empty sequence");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double median(std::vector<double> values) {
  if (values.empty()) fail(ErrorKind::Dimension, "median of an empty sequence");
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double sign_test_pvalue(int positives, int n) {
  if (n <= 0 || positives < 0 || positives > n) {
    fail(ErrorKind::Validation, "sign_test_pvalue: need 0 <= positives <= n, n > 0");
  }
  // Sum of binomial(n, k) / 2^n for k >= positives, in log space.
  const double log_half_n = n * std::log(0.5);
  double total = 0;
  for (int k = positives; k <= n; ++k) {
    const double log_choose = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    total += std::exp(log_choose + log_half_n);
  }
  return std::min(1.0, total);
}

std::string to_string(ModelKind kind) {
  return kind == ModelKind::PowerLaw ? "power_law" : "kramers_exponential";
}

double FitReport::predict_log(double gamma) const {
  const double x = model_kind == ModelKind::PowerLaw ? std::log(gamma) : gamma;
  return intercept + slope * x;
}

FitReport fit_log_model(ModelKind kind, std::span<const double> gammas,
                        std::span<const double> taus, std::span<const double> weights) {
  if (gammas.size() != taus.size() || gammas.size() != weights.size()) {
    fail(ErrorKind::Dimension, "fit_log_model: gammas, taus and weights must have equal length");
  }
  const auto n = static_cast<Eigen::Index>(gammas.size());
  VectorXd x(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double g = gammas[static_cast<std::size_t>(i)];
    const double tau = taus[static_cast<std::size_t>(i)];
    if (!(tau > 0) || !std::isfinite(tau)) {
      fail(ErrorKind::Validation, "fit_log_model: escape times must be positive and finite");
    }
    if (kind == ModelKind::PowerLaw && !(g > 0)) {
      fail(ErrorKind::Validation, "fit_log_model: power-law fit needs gamma > 0");
    }
    x(i) = kind == ModelKind::PowerLaw ? std::log(g) : g;
    y(i) = std::log(tau);
  }
  const auto lin = weighted_linfit(x, y, as_vector(weights));

  FitReport report;
  report.model_kind = kind;
  report.intercept = lin.intercept;
  report.slope = lin.slope;
  report.intercept_stderr = lin.intercept_stderr;
  report.slope_stderr = lin.slope_stderr;
  report.chi_squared = lin.chi_squared;
  report.aic = lin.chi_squared + 2.0 * FitReport::kCoefficients;
  report.point_residuals.reserve(gammas.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    report.point_residuals.push_back(
        {gammas[static_cast<std::size_t>(i)], y(i), lin.intercept + lin.slope * x(i)});
  }
  return report;
}

}  // namespace pitchfork
