#include "pitchfork/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

namespace pitchfork {

namespace {

MatrixXd sample_batch(const MatrixXd& samples, Eigen::Index batch_size, Rng& rng) {
  const Eigen::Index n = samples.rows();
  if (batch_size <= 0 || batch_size >= n) return samples;
  MatrixXd batch(batch_size, samples.cols());
  for (Eigen::Index i = 0; i < batch_size; ++i) {
    batch.row(i) = samples.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  }
  return batch;
}

SyntheticDataset draw_mixture(const MatrixXd& centers, const std::vector<double>& scales, Eigen::Index n,
                              std::uint64_t seed, std::string kind) {
  if (n < 2) fail(ErrorKind::Validation, "dataset needs at least 2 samples");
  for (double s : scales) {
    if (!(s > 0)) fail(ErrorKind::Validation, "component scales must be > 0");
  }
  Rng rng(seed);
  const Eigen::Index components = centers.rows();
  SyntheticDataset data;
  data.samples.resize(n, centers.cols());
  data.labels.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(components)));
    data.labels[static_cast<std::size_t>(i)] = static_cast<int>(c);
    for (Eigen::Index j = 0; j < centers.cols(); ++j) {
      data.samples(i, j) = centers(c, j) + scales[static_cast<std::size_t>(c)] * rng.normal();
    }
  }
  data.kind = std::move(kind);
  data.centers = centers;
  data.scales = scales;
  data.seed = seed;
  return data;
}

std::size_t prefix_below_zero(const std::vector<CriticalityReading>& readings) {
  std::size_t i = 0;
  while (i < readings.size() && readings[i].log_ratio < 0) ++i;
  return i;
}

std::optional<double> constant_nc1(const SyntheticDataset& data) {
  std::set<int> distinct(data.labels.begin(), data.labels.end());
  if (distinct.size() < 2) return std::nullopt;
  try {
    return nc1(data.samples, data.labels);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

SyntheticDataset gen_bimodal(const BimodalParams& params, std::uint64_t seed) {
  if (params.dim < 1) fail(ErrorKind::Validation, "dim must be >= 1");
  if (params.separation == 0) fail(ErrorKind::Validation, "bimodal centers coincide (separation = 0)");
  MatrixXd centers = MatrixXd::Zero(2, params.dim);
  centers(0, 0) = params.separation;
  centers(1, 0) = -params.separation;
  return draw_mixture(centers, {params.scale, params.scale}, params.n, seed, "bimodal");
}

SyntheticDataset gen_unimodal(const UnimodalParams& params, std::uint64_t seed) {
  if (params.dim < 1) fail(ErrorKind::Validation, "dim must be >= 1");
  return draw_mixture(MatrixXd::Zero(1, params.dim), {params.scale}, params.n, seed, "unimodal");
}

SyntheticDataset gen_hierarchical(const HierarchicalParams& params, std::uint64_t seed) {
  if (params.super_spacing == 0 && params.sub_spacing == 0) {
    fail(ErrorKind::Validation, "hierarchical centers all coincide");
  }
  if (!(params.aspect >= 0)) fail(ErrorKind::Validation, "aspect must be >= 0");
  const double h = 0.5 * params.super_spacing;
  const double v = params.aspect * h;
  const double s = 0.5 * params.sub_spacing;
  MatrixXd groups(4, 2);
  groups << h, v, -h, v, -h, -v, h, -v;
  MatrixXd centers(8, 2);
  std::vector<int> component_group(8);
  for (int g = 0; g < 4; ++g) {
    for (int j = 0; j < 2; ++j) {
      const int c = 2 * g + j;
      centers.row(c) = groups.row(g);
      centers(c, 0) += j == 0 ? s : -s;
      component_group[static_cast<std::size_t>(c)] = g;
    }
  }
  SyntheticDataset data = draw_mixture(centers, std::vector<double>(8, params.sub_scale), params.n, seed,
                                       "hierarchical");
  data.component_group = std::move(component_group);
  data.group_centers = groups;
  return data;
}

std::pair<double, double> hierarchical_beta_c(const HierarchicalParams& p) {
  const double h2 = 0.25 * p.super_spacing * p.super_spacing;
  const double s2 = 0.25 * p.sub_spacing * p.sub_spacing;
  const double v = p.sub_scale * p.sub_scale;
  const double top = std::max(h2 + s2 + v, p.aspect * p.aspect * h2 + v);
  return {1.0 / top, 1.0 / (s2 + v)};
}

MatrixXd within_group_covariance(const MatrixXd& samples, const std::vector<int>& groups) {
  if (static_cast<Eigen::Index>(groups.size()) != samples.rows()) {
    fail(ErrorKind::Dimension, "one group label per sample required");
  }
  std::map<int, std::pair<RowVectorXd, Eigen::Index>> sums;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    auto [it, inserted] = sums.try_emplace(groups[static_cast<std::size_t>(i)],
                                           RowVectorXd::Zero(samples.cols()), 0);
    it->second.first += samples.row(i);
    ++it->second.second;
  }
  MatrixXd centred(samples.rows(), samples.cols());
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const auto& [sum, count] = sums.at(groups[static_cast<std::size_t>(i)]);
    centred.row(i) = samples.row(i) - sum / static_cast<double>(count);
  }
  MatrixXd cov = centred.transpose() * centred / static_cast<double>(samples.rows());
  return (cov + cov.transpose()) / 2.0;
}

double nc1(const MatrixXd& latents, const std::vector<int>& labels, Nc1Variant variant) {
  if (static_cast<Eigen::Index>(labels.size()) != latents.rows()) {
    fail(ErrorKind::Dimension, "nc1: one label per latent row required");
  }
  std::map<int, std::pair<RowVectorXd, Eigen::Index>> sums;
  for (Eigen::Index i = 0; i < latents.rows(); ++i) {
    auto [it, inserted] = sums.try_emplace(labels[static_cast<std::size_t>(i)],
                                           RowVectorXd::Zero(latents.cols()), 0);
    it->second.first += latents.row(i);
    ++it->second.second;
  }
  if (sums.size() < 2) fail(ErrorKind::Numerical, "nc1 undefined for a single class");
  for (const auto& [label, entry] : sums) {
    if (entry.second < 2) fail(ErrorKind::Dimension, "nc1 needs at least 2 samples per class");
  }
  const auto classes = static_cast<Eigen::Index>(sums.size());
  MatrixXd class_means(classes, latents.cols());
  std::map<int, Eigen::Index> row_of;
  Eigen::Index r = 0;
  for (const auto& [label, entry] : sums) {
    class_means.row(r) = entry.first / static_cast<double>(entry.second);
    row_of[label] = r++;
  }
  MatrixXd centred(latents.rows(), latents.cols());
  for (Eigen::Index i = 0; i < latents.rows(); ++i) {
    centred.row(i) = latents.row(i) - class_means.row(row_of.at(labels[static_cast<std::size_t>(i)]));
  }
  const MatrixXd sw = centred.transpose() * centred / static_cast<double>(latents.rows());
  const MatrixXd between = class_means.rowwise() - class_means.colwise().mean();
  const MatrixXd sb = between.transpose() * between / static_cast<double>(classes);
  const double tb = sb.trace();
  if (!(tb > 0)) fail(ErrorKind::Numerical, "nc1 undefined: zero between-class scatter");
  if (variant == Nc1Variant::TraceRatio) return sw.trace() / tb;

  const auto spec = sym_eigen((sb + sb.transpose()) / 2.0);
  const double cutoff = 1e-12 * spec.eigenvalues(0);
  MatrixXd pinv = MatrixXd::Zero(sb.rows(), sb.cols());
  for (Eigen::Index i = 0; i < spec.eigenvalues.size(); ++i) {
    if (spec.eigenvalues(i) > cutoff) {
      pinv += spec.eigenvectors.col(i) * spec.eigenvectors.col(i).transpose() / spec.eigenvalues(i);
    }
  }
  return (sw * pinv).trace() / static_cast<double>(classes);
}

std::optional<std::size_t> detect_activation(const std::vector<double>& series, std::size_t baseline_end,
                                             const ActivationRule& rule) {
  baseline_end = std::min(baseline_end, series.size());
  if (baseline_end == 0) return std::nullopt;
  const std::vector<double> window(series.begin(), series.begin() + static_cast<std::ptrdiff_t>(baseline_end));
  const double threshold = rule.factor * median(window);
  const auto start = static_cast<std::size_t>(std::min_element(window.begin(), window.end()) - window.begin());
  int run = 0;
  for (std::size_t i = start; i < series.size(); ++i) {
    run = series[i] > threshold ? run + 1 : 0;
    if (run >= rule.consecutive) return i + 1 - static_cast<std::size_t>(rule.consecutive);
  }
  return std::nullopt;
}

double axis_angle_degrees(const VectorXd& a, const VectorXd& b) {
  const double c = std::min(1.0, std::abs(a.normalized().dot(b.normalized())));
  return std::acos(c) * 180.0 / std::numbers::pi;
}

// --- forward split ---------------------------------------------------------

ForwardResult run_forward_split(const SyntheticDataset& data, const ProbeConfig& probe,
                                const ForwardOptions& options, std::uint64_t seed) {
  Rng init_rng(derive_seed(seed, 0));
  Rng batch_rng(derive_seed(seed, 1));
  const MatrixXd cov = covariance(data.samples);
  const std::optional<double> nc = constant_nc1(data);

  ForwardResult out;
  out.beta_c = beta_c(cov);
  out.log.experiment = "forward_split";
  out.log.seed = seed;
  GmmProbeState state = init_probe(data.samples, probe, init_rng);
  for (std::int64_t step = 1; step <= options.steps; ++step) {
    state = grad_step(state, sample_batch(data.samples, options.batch_size, batch_rng), probe);
    CriticalityReading reading = make_reading(step, state, cov);
    reading.nc1 = nc;
    out.log.readings.push_back(reading);
  }

  std::vector<double> op;
  for (const auto& r : out.log.readings) op.push_back(r.order_parameter);
  if (const auto idx = detect_activation(op, prefix_below_zero(out.log.readings), options.activation)) {
    const auto& r = out.log.readings[*idx];
    out.activation_step = r.step;
    out.overshoot = std::exp(r.log_ratio);
  }
  out.split_direction = split_direction(state);
  out.split_angle_deg = axis_angle_degrees(out.split_direction, sym_eigen(cov).eigenvectors.col(0));
  out.final_order_parameter = order_parameter(state);
  out.final_log_ratio = out.log.readings.empty() ? 0.0 : out.log.readings.back().log_ratio;
  out.final_state = std::move(state);
  return out;
}

double order_parameter_gap(const ForwardResult& bimodal, const ForwardResult& unimodal) {
  // beta_c = 1 / lambda_max, so sqrt(lambda_max) = 1 / sqrt(beta_c).
  const double b = bimodal.final_order_parameter * std::sqrt(bimodal.beta_c);
  const double u = unimodal.final_order_parameter * std::sqrt(unimodal.beta_c);
  return b / std::max(u, 1e-12);
}

// --- reverse traversal -------------------------------------------------------

ReverseResult run_reverse_traversal(const SyntheticDataset& data, const GmmProbeState& trained,
                                    const ReverseOptions& options, std::uint64_t seed) {
  if (options.levels < 2 || !(options.ratio_high > options.ratio_low) || !(options.ratio_low > 0)) {
    fail(ErrorKind::Validation, "reverse ladder needs levels >= 2 and ratio_high > ratio_low > 0");
  }
  const MatrixXd cov = covariance(data.samples);
  const std::optional<double> nc = constant_nc1(data);
  ReverseResult out;
  out.beta_c = beta_c(cov);
  out.log.experiment = "reverse_traversal";
  out.log.seed = seed;

  for (int i = 0; i < options.levels; ++i) {
    const double t = static_cast<double>(i) / (options.levels - 1);
    out.ratios.push_back(options.ratio_high * std::pow(options.ratio_low / options.ratio_high, t));
  }
  auto relax = [&](GmmProbeState& state, double ratio) {
    state.log_precision = std::log(ratio * out.beta_c);
    const double boost = std::clamp(0.25 / std::abs(ratio - 1.0), 1.0, options.critical_boost);
    const auto n = static_cast<std::int64_t>(std::ceil(static_cast<double>(options.inner_steps) * boost));
    for (std::int64_t s = 0; s < n; ++s) state = means_step(state, data.samples, options.lr);
  };

  GmmProbeState state = trained;
  std::int64_t level = 0;
  for (double ratio : out.ratios) {
    relax(state, ratio);
    CriticalityReading reading = make_reading(level++, state, cov);
    reading.nc1 = nc;
    out.log.readings.push_back(reading);
    out.order_parameters.push_back(reading.order_parameter);
  }

  // Forward branch on the same ladder, starting from the jittered collapsed state.
  Rng rng(derive_seed(seed, 2));
  ProbeConfig jitter;
  jitter.K_probe = static_cast<int>(trained.K());
  GmmProbeState forward = init_probe(data.samples, jitter, rng);
  out.forward_order_parameters.assign(out.ratios.size(), 0.0);
  for (std::size_t i = out.ratios.size(); i-- > 0;) {
    relax(forward, out.ratios[i]);
    out.forward_order_parameters[i] = order_parameter(forward);
  }

  out.plateau = *std::max_element(out.order_parameters.begin(), out.order_parameters.end());
  const double floor = options.merge_fraction * out.plateau;
  for (std::size_t i = 1; i < out.ratios.size(); ++i) {
    if (out.order_parameters[i] < floor) {
      // Interpolate the threshold crossing in log(beta).
      const double o0 = out.order_parameters[i - 1], o1 = out.order_parameters[i];
      const double l0 = std::log(out.ratios[i - 1]), l1 = std::log(out.ratios[i]);
      const double w = o0 > o1 ? (o0 - floor) / (o0 - o1) : 1.0;
      out.merge_ratio = std::exp(l0 + w * (l1 - l0));
      break;
    }
  }
  out.tracking_error = out.merge_ratio ? std::abs(*out.merge_ratio - 1.0) : std::numeric_limits<double>::infinity();

  std::size_t half = 0;
  for (std::size_t i = 0; i < out.ratios.size(); ++i) {
    if (std::abs(std::log(out.ratios[i] / 0.5)) < std::abs(std::log(out.ratios[half] / 0.5))) half = i;
  }
  out.op_at_half = out.order_parameters[half];
  for (std::size_t i = 0; i < out.ratios.size(); ++i) {
    if (out.ratios[i] >= 2.0 && out.order_parameters[i] > 0) {
      const double gap = std::abs(out.forward_order_parameters[i] - out.order_parameters[i]) / out.order_parameters[i];
      out.branch_mismatch = std::max(out.branch_mismatch, gap);
    }
  }
  return out;
}

// --- hierarchical ---------------------------------------------------------------

namespace {

std::vector<int> nearest_rows(const MatrixXd& points, const MatrixXd& centers) {
  std::vector<int> out(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index k = 0; k < points.rows(); ++k) {
    Eigen::Index best = 0;
    (centers.rowwise() - points.row(k)).rowwise().squaredNorm().minCoeff(&best);
    out[static_cast<std::size_t>(k)] = static_cast<int>(best);
  }
  return out;
}

double within_group_spread(const MatrixXd& means, const MatrixXd& group_centers) {
  const std::vector<int> group = nearest_rows(means, group_centers);
  std::map<int, std::pair<RowVectorXd, int>> sums;
  for (Eigen::Index k = 0; k < means.rows(); ++k) {
    auto [it, inserted] = sums.try_emplace(group[static_cast<std::size_t>(k)], RowVectorXd::Zero(means.cols()), 0);
    it->second.first += means.row(k);
    ++it->second.second;
  }
  double total = 0;
  for (Eigen::Index k = 0; k < means.rows(); ++k) {
    const auto& [sum, count] = sums.at(group[static_cast<std::size_t>(k)]);
    total += (means.row(k) - sum / static_cast<double>(count)).squaredNorm();
  }
  return std::sqrt(total / static_cast<double>(means.rows()));
}

}  // namespace

HierarchyResult run_hierarchical(const SyntheticDataset& data, const HierarchyOptions& options, std::uint64_t seed) {
  if (data.group_centers.rows() == 0) fail(ErrorKind::Validation, "run_hierarchical needs hierarchical data");
  if (!(options.beta_start > 0) || !(options.beta_end > options.beta_start) || options.steps < 1) {
    fail(ErrorKind::Validation, "hierarchy schedule needs 0 < beta_start < beta_end and steps >= 1");
  }
  Rng rng(derive_seed(seed, 0));
  const MatrixXd cov = covariance(data.samples);
  std::vector<int> groups;
  for (int label : data.labels) groups.push_back(data.component_group[static_cast<std::size_t>(label)]);
  const MatrixXd within = within_group_covariance(data.samples, groups);
  const std::optional<double> nc = constant_nc1(data);

  HierarchyResult out;
  out.beta_c1 = beta_c(cov);
  out.beta_c2 = beta_c(within);
  out.log.experiment = "hierarchy";
  out.log.seed = seed;

  ProbeConfig init;
  init.K_probe = static_cast<int>(options.K);
  init.init_spread = options.init_spread;
  GmmProbeState state = init_probe(data.samples, init, rng);
  const double log_start = std::log(options.beta_start);
  const double log_span = std::log(options.beta_end) - log_start;
  for (std::int64_t step = 1; step <= options.steps; ++step) {
    state.log_precision = log_start + log_span * static_cast<double>(step) / static_cast<double>(options.steps);
    const double lr = options.lr_scale / state.beta();
    state = means_step(state, data.samples, lr);
    if (options.temperature > 0) {
      state.means += rng.normal_matrix(state.K(), state.d(), std::sqrt(2.0 * lr * options.temperature));
    }
    if (step % options.record_every == 0 || step == options.steps) {
      CriticalityReading reading = make_reading(step, state, cov);
      reading.nc1 = nc;
      out.log.readings.push_back(reading);
      out.within_order_parameter.push_back(within_group_spread(state.means, data.group_centers));
    }
  }

  std::vector<double> op;
  for (const auto& r : out.log.readings) op.push_back(r.order_parameter);
  const auto first = detect_activation(op, prefix_below_zero(out.log.readings), options.activation);
  if (first) {
    out.beta_event1 = std::exp(out.log.readings[*first].log_beta);
    out.events = 1;
    std::size_t below_c2 = *first;
    const double log_c2 = std::log(out.beta_c2);
    while (below_c2 < out.log.readings.size() && out.log.readings[below_c2].log_beta < log_c2) ++below_c2;
    const std::vector<double> tail(out.within_order_parameter.begin() + static_cast<std::ptrdiff_t>(*first),
                                   out.within_order_parameter.end());
    if (const auto second = detect_activation(tail, below_c2 - *first, options.activation)) {
      out.beta_event2 = std::exp(out.log.readings[*first + *second].log_beta);
      out.events = 2;
    }
  }

  out.assignment = nearest_rows(state.means, data.centers);
  std::vector<int> per_component(static_cast<std::size_t>(data.centers.rows()), 0);
  for (int c : out.assignment) ++per_component[static_cast<std::size_t>(c)];
  out.balanced = static_cast<Eigen::Index>(out.assignment.size()) == data.centers.rows() &&
                 std::all_of(per_component.begin(), per_component.end(), [](int c) { return c == 1; });
  return out;
}

// --- endogenous -------------------------------------------------------------------

double ToyEncoderState::loss(const MatrixXd& x) const {
  const MatrixXd recon = encode(x) * decoder.transpose();
  return (x - recon).rowwise().squaredNorm().mean();
}

void ToyEncoderState::train_step(const MatrixXd& x) {
  // L = tr(R C R^T), R = I - W_d W_e, C = X^T X / N
  const MatrixXd c = x.transpose() * x / static_cast<double>(x.rows());
  const MatrixXd r = MatrixXd::Identity(x.cols(), x.cols()) - decoder * encoder;
  const MatrixXd rc = r * c;
  const MatrixXd grad_dec = -2.0 * rc * encoder.transpose();
  const MatrixXd grad_enc = -2.0 * decoder.transpose() * rc;
  decoder -= lr * grad_dec;
  encoder -= lr * grad_enc;
  ++step;
  if (!encoder.allFinite() || !decoder.allFinite()) {
    fail(ErrorKind::Numerical, "encoder diverged at step " + std::to_string(step));
  }
}

ToyEncoderState init_encoder(Eigen::Index d_in, Eigen::Index d_lat, double scale, double lr, Rng& rng) {
  if (!(lr > 0)) fail(ErrorKind::Validation, "encoder lr must be > 0");
  ToyEncoderState enc;
  enc.encoder = rng.normal_matrix(d_lat, d_in, scale);
  enc.decoder = rng.normal_matrix(d_in, d_lat, scale);
  enc.lr = lr;
  return enc;
}

std::vector<HypothesisEvent> audit_hypotheses(const TrajectoryLog& log, int window, double tolerance) {
  std::vector<HypothesisEvent> events;
  if (window < 1) return events;
  const auto w = static_cast<std::size_t>(window);
  double prev_beta = 0, prev_beta_c = 0;
  bool have_prev = false;
  for (std::size_t start = 0; start + w <= log.readings.size(); start += w) {
    double b = 0, bc = 0;
    for (std::size_t i = start; i < start + w; ++i) {
      b += std::exp(log.readings[i].log_beta);
      bc += std::exp(log.readings[i].log_beta_c);
    }
    b /= static_cast<double>(w);
    bc /= static_cast<double>(w);
    if (have_prev) {
      const std::int64_t step = log.readings[start + w - 1].step;
      if (b < prev_beta * (1 - tolerance)) events.push_back({step, "beta_nondecreasing", b - prev_beta});
      if (bc > prev_beta_c * (1 + tolerance)) events.push_back({step, "beta_c_nonincreasing", bc - prev_beta_c});
    }
    prev_beta = b;
    prev_beta_c = bc;
    have_prev = true;
  }
  return events;
}

EndogenousResult run_endogenous(const SyntheticDataset& data, const ProbeConfig& probe,
                                const EndogenousOptions& options, std::uint64_t seed) {
  Rng encoder_rng(derive_seed(seed, 10));
  Rng probe_rng(derive_seed(seed, 11));
  Rng batch_rng(derive_seed(seed, 12));
  const Eigen::Index d = data.samples.cols();
  ToyEncoderState enc = init_encoder(d, d, options.encoder_init, options.encoder_lr, encoder_rng);

  EndogenousResult out;
  out.log.experiment = "endogenous";
  out.log.seed = seed;
  MatrixXd latents = enc.encode(data.samples);
  GmmProbeState state = init_probe(latents, probe, probe_rng);
  const CriticalityReading start = make_reading(0, state, covariance(latents));
  out.delta0 = state.beta() - std::exp(start.log_beta_c);

  for (std::int64_t step = 1; step <= options.steps; ++step) {
    enc.train_step(data.samples);
    latents = enc.encode(data.samples);
    const double loss = enc.loss(data.samples);
    if (!std::isfinite(loss)) fail(ErrorKind::Numerical, "encoder loss is not finite");
    out.reconstruction_loss.push_back(loss);
    state = grad_step(state, sample_batch(latents, options.batch_size, batch_rng), probe);
    CriticalityReading reading = make_reading(step, state, covariance(latents));
    try {
      reading.nc1 = nc1(latents, data.labels);
    } catch (const Error&) {
      reading.nc1.reset();
    }
    out.log.readings.push_back(reading);
  }

  const std::size_t crossing = prefix_below_zero(out.log.readings);
  if (crossing < out.log.readings.size()) out.crossing_step = out.log.readings[crossing].step;
  // The latent scale changes during training, so activation is judged on the
  // order parameter relative to the latent spread sqrt(lambda_max).
  std::vector<double> op;
  for (const auto& r : out.log.readings) op.push_back(r.order_parameter * std::exp(0.5 * r.log_beta_c));
  if (const auto idx = detect_activation(op, crossing, options.activation)) {
    out.activation_step = out.log.readings[*idx].step;
  }
  out.hypothesis_failures = audit_hypotheses(out.log, options.audit_window, options.audit_tolerance);
  return out;
}

}  // namespace pitchfork
