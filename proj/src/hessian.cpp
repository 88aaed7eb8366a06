#include "pitchfork/hessian.hpp"

#include <cmath>
#include <functional>

namespace pitchfork {

namespace {

void check_beta_k(double beta, Eigen::Index K) {
  if (!(beta > 0) || !std::isfinite(beta)) fail(ErrorKind::Validation, "beta must be positive and finite");
  if (K < 1) fail(ErrorKind::Validation, "K must be >= 1");
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double tol) {
  if (!(lo > 0) || !(hi > lo)) fail(ErrorKind::Validation, "bracket must satisfy 0 < lo < hi");
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  if ((flo > 0) == (fhi > 0)) {
    fail(ErrorKind::Bracket, "no sign change of the lowest eigenvalue in [" + std::to_string(lo) + ", " +
                                 std::to_string(hi) + "]");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double ChannelSpectrum::lowest() const {
  double low = symmetric_eigenvalue;
  for (const auto& e : antisymmetric) low = std::min(low, e.value);
  return low;
}

VectorXd ChannelSpectrum::expanded() const {
  std::vector<double> all(static_cast<std::size_t>(symmetric_degeneracy), symmetric_eigenvalue);
  for (const auto& e : antisymmetric) all.insert(all.end(), static_cast<std::size_t>(e.degeneracy), e.value);
  std::sort(all.begin(), all.end(), std::greater<>());
  return as_vector(all);
}

MatrixXd analytic_hessian(double beta, Eigen::Index K, const MatrixXd& cov) {
  check_beta_k(beta, K);
  if (!is_symmetric(cov)) fail(ErrorKind::Validation, "analytic_hessian: covariance is not symmetric");
  const Eigen::Index d = cov.rows();
  if (K * d > kMaxDenseHessian) {
    fail(ErrorKind::Dimension, "dense Hessian limited to K*d <= 4096; use channel_spectrum");
  }
  const double kd = static_cast<double>(K);
  MatrixXd h(K * d, K * d);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index l = 0; l < K; ++l) {
      const double component = (k == l ? 1.0 : 0.0) - 1.0 / kd;
      h.block(k * d, l * d, d, d) = -(beta * beta / kd) * component * cov;
      if (k == l) h.block(k * d, l * d, d, d).diagonal().array() += beta / kd;
    }
  }
  return h;
}

ChannelSpectrum channel_spectrum(double beta, Eigen::Index K, const VectorXd& spatial_eigs) {
  check_beta_k(beta, K);
  for (Eigen::Index i = 0; i < spatial_eigs.size(); ++i) {
    if (spatial_eigs(i) < 0) fail(ErrorKind::Validation, "spatial eigenvalues must be non-negative");
    if (i > 0 && spatial_eigs(i) > spatial_eigs(i - 1)) {
      fail(ErrorKind::Validation, "spatial eigenvalues must be sorted non-increasing");
    }
  }
  const double kd = static_cast<double>(K);
  ChannelSpectrum s;
  s.beta = beta;
  s.K = K;
  s.symmetric_eigenvalue = beta / kd;
  s.symmetric_degeneracy = spatial_eigs.size();
  if (K > 1) {
    for (Eigen::Index i = 0; i < spatial_eigs.size(); ++i) {
      const double sigma2 = spatial_eigs(i);
      s.antisymmetric.push_back({(beta / kd) * (1.0 - beta * sigma2), sigma2, K - 1});
    }
  }
  return s;
}

ChannelSpectrum channel_spectrum(double beta, Eigen::Index K, const MatrixXd& cov) {
  const auto spatial = sym_eigen(cov);
  // Round-off can leave tiny negative eigenvalues on a PSD covariance.
  const VectorXd eigs = spatial.eigenvalues.cwiseMax(0.0);
  ChannelSpectrum s = channel_spectrum(beta, K, eigs);
  if (!s.antisymmetric.empty() && s.antisymmetric.front().value < 0) {
    const Eigen::Index d = cov.rows();
    VectorXd component = VectorXd::Zero(K);
    component(0) = 1.0 / std::sqrt(2.0);
    component(1) = -1.0 / std::sqrt(2.0);
    VectorXd mode(K * d);
    for (Eigen::Index k = 0; k < K; ++k) mode.segment(k * d, d) = component(k) * spatial.eigenvectors.col(0);
    s.unstable_mode = std::move(mode);
  }
  return s;
}

GmmProbeState collapsed_state(const MatrixXd& samples, Eigen::Index K, double beta) {
  check_beta_k(beta, K);
  GmmProbeState state;
  state.means = samples.colwise().mean().replicate(K, 1);
  state.log_precision = std::log(beta);
  return state;
}

MatrixXd numerical_hessian(const GmmProbeState& state_at_collapse, const MatrixXd& samples) {
  const Eigen::Index K = state_at_collapse.K();
  const Eigen::Index d = state_at_collapse.d();
  if (samples.cols() != d) fail(ErrorKind::Dimension, "numerical_hessian: dimension mismatch");
  if (K * d > kMaxDenseHessian) fail(ErrorKind::Dimension, "dense Hessian limited to K*d <= 4096");
  if (samples.rows() < 2) fail(ErrorKind::Dimension, "numerical_hessian needs at least 2 samples");

  const RowVectorXd centre = samples.colwise().mean();
  const VectorXd scale = covariance(samples).diagonal().cwiseSqrt();
  const double tol = 1e-9 * (1.0 + centre.cwiseAbs().maxCoeff() + scale.maxCoeff());
  if (((state_at_collapse.means.rowwise() - centre).cwiseAbs().array() > tol).any()) {
    fail(ErrorKind::Validation, "numerical_hessian: state is not at the symmetric collapsed point");
  }

  const Eigen::Index n = K * d;
  VectorXd step(n);
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index a = 0; a < d; ++a) step(k * d + a) = 1e-4 * (scale(a) > 0 ? scale(a) : 1.0);

  GmmProbeState probe = state_at_collapse;
  auto at = [&probe, d](Eigen::Index i) -> double& { return probe.means(i / d, i % d); };
  auto f = [&probe, &samples] { return nll(probe, samples); };

  const double f0 = f();
  MatrixXd h(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = step(i);
    const double xi = at(i);
    at(i) = xi + hi;
    const double fp = f();
    at(i) = xi - hi;
    const double fm = f();
    at(i) = xi;
    h(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double hj = step(j);
      const double xj = at(j);
      double corner[4];
      int c = 0;
      for (double si : {1.0, -1.0}) {
        for (double sj : {1.0, -1.0}) {
          at(i) = xi + si * hi;
          at(j) = xj + sj * hj;
          corner[c++] = f();
        }
      }
      at(i) = xi;
      at(j) = xj;
      h(i, j) = h(j, i) = (corner[0] - corner[1] - corner[2] + corner[3]) / (4.0 * hi * hj);
    }
  }
  return (h + h.transpose()) / 2.0;
}

CrossingReport find_crossing(Eigen::Index K, const MatrixXd& cov, double beta_lo, double beta_hi,
                             int scan_size) {
  if (K < 2) fail(ErrorKind::Bracket, "K = 1 has no antisymmetric channel and no crossing");
  const VectorXd spatial = sym_eigen(cov).eigenvalues.cwiseMax(0.0);
  if (!(spatial(0) > 0)) fail(ErrorKind::Numerical, "degenerate covariance: lambda_max <= 0");
  auto lowest = [K, &spatial](double beta) { return channel_spectrum(beta, K, spatial).lowest(); };

  CrossingReport report;
  report.beta_critical_analytic = 1.0 / spatial(0);
  report.beta_critical_numeric = bisect(lowest, beta_lo, beta_hi, 1e-6);
  const int m = std::max(scan_size, 2);
  for (int i = 0; i < m; ++i) {
    const double t = static_cast<double>(i) / (m - 1);
    const double beta = beta_lo * std::pow(beta_hi / beta_lo, t);
    report.scan_points.emplace_back(beta, lowest(beta));
  }
  return report;
}

double find_crossing_numerical(Eigen::Index K, const MatrixXd& samples, double beta_lo, double beta_hi,
                               double tol) {
  if (K < 2) fail(ErrorKind::Bracket, "K = 1 has no antisymmetric channel and no crossing");
  auto lowest = [K, &samples](double beta) {
    const MatrixXd h = numerical_hessian(collapsed_state(samples, K, beta), samples);
    return sym_eigen(h).eigenvalues(h.rows() - 1);
  };
  return bisect(lowest, beta_lo, beta_hi, tol);
}

}  // namespace pitchfork
