#pragma once

// Synthetic datasets, the NC1 metric, and the toy experiments: forward split,
// unimodal control, hierarchical splitting, reverse traversal and endogenous
// criticality with a co-evolving linear autoencoder.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pitchfork/gmm_probe.hpp"

namespace pitchfork {

struct SyntheticDataset {
  MatrixXd samples;         // N x d
  std::vector<int> labels;  // ground-truth component per sample
  std::string kind;
  MatrixXd centers;         // one row per component
  std::vector<double> scales;
  std::uint64_t seed = 0;
  /// Hierarchical data only: supercluster of each component, and supercluster centers.
  std::vector<int> component_group;
  MatrixXd group_centers;

  [[nodiscard]] int num_components() const { return static_cast<int>(centers.rows()); }
};

struct BimodalParams {
  Eigen::Index n = 2000;
  Eigen::Index dim = 2;
  double separation = 2.0;  // centers at +-separation * e1
  double scale = 1.0;
};

struct UnimodalParams {
  Eigen::Index n = 2000;
  Eigen::Index dim = 2;
  double scale = 1.0;
};

struct HierarchicalParams {
  Eigen::Index n = 2000;
  double super_spacing = 8.0;  // supercluster centers at (+-S/2, +-aspect*S/2)
  double aspect = 0.75;
  double sub_spacing = 2.0;    // subclusters at +-s/2 along the first axis
  double sub_scale = 0.5;
};

SyntheticDataset gen_bimodal(const BimodalParams& params, std::uint64_t seed);
SyntheticDataset gen_unimodal(const UnimodalParams& params, std::uint64_t seed);
SyntheticDataset gen_hierarchical(const HierarchicalParams& params, std::uint64_t seed);

/// Closed-form (beta_c1, beta_c2) of the hierarchical mixture: 1/lambda_max of the
/// total covariance and of the within-supercluster covariance.
std::pair<double, double> hierarchical_beta_c(const HierarchicalParams& params);

/// Pooled covariance of samples about the mean of their group (divisor N).
MatrixXd within_group_covariance(const MatrixXd& samples, const std::vector<int>& groups);

enum class Nc1Variant { TraceRatio, Pseudoinverse };

/// TraceRatio: tr(S_W) / tr(S_B). Pseudoinverse: tr(S_W S_B^+) / C.
/// S_B is the covariance of the class means about their unweighted average.
double nc1(const MatrixXd& latents, const std::vector<int>& labels, Nc1Variant variant = Nc1Variant::TraceRatio);

struct TrajectoryLog {
  std::string experiment;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<CriticalityReading> readings;
};

struct ActivationRule {
  double factor = 10.0;
  int consecutive = 5;
};

/// First index at which `series` exceeds factor * median(series[0, baseline_end))
/// for `consecutive` entries in a row. The search starts at the minimum of the
/// baseline window. Empty when the window is empty or no activation occurs.
std::optional<std::size_t> detect_activation(const std::vector<double>& series, std::size_t baseline_end,
                                             const ActivationRule& rule = {});

/// Absolute cosine between two directions in degrees (sign-invariant).
double axis_angle_degrees(const VectorXd& a, const VectorXd& b);

// --- exp 00 / 01: forward split with learned precision --------------------

struct ForwardOptions {
  std::int64_t steps = 4000;
  Eigen::Index batch_size = 256;  // 0 or >= N means full batch
  ActivationRule activation;
};

struct ForwardResult {
  TrajectoryLog log;
  double beta_c = 0;
  std::optional<std::int64_t> activation_step;
  std::optional<double> overshoot;  // beta* / beta_c at activation
  VectorXd split_direction;
  double split_angle_deg = 0;  // against the data principal axis
  double final_order_parameter = 0;
  double final_log_ratio = 0;
  GmmProbeState final_state;
};

ForwardResult run_forward_split(const SyntheticDataset& data, const ProbeConfig& probe,
                                const ForwardOptions& options, std::uint64_t seed);

/// Final order parameters in units of sqrt(lambda_max), bimodal over unimodal.
double order_parameter_gap(const ForwardResult& bimodal, const ForwardResult& unimodal);

// --- exp 04: reverse traversal ------------------------------------------

struct ReverseOptions {
  double ratio_high = 3.0;  // beta / beta_c at the first level
  double ratio_low = 0.5;
  int levels = 121;         // geometric in beta
  std::int64_t inner_steps = 300;
  double lr = 2.0;
  /// Inner steps are multiplied up to this factor near beta_c to offset critical slowing.
  double critical_boost = 8.0;
  double merge_fraction = 0.1;  // merge when OP falls below this fraction of the plateau
};

struct ReverseResult {
  TrajectoryLog log;  // one reading per level
  double beta_c = 0;
  std::vector<double> ratios;            // beta / beta_c per level, descending
  std::vector<double> order_parameters;  // per level, after relaxation
  std::vector<double> forward_order_parameters;  // ascending sweep at the same levels
  double plateau = 0;
  std::optional<double> merge_ratio;  // beta*_rev / beta_c
  double tracking_error = 0;          // |merge_ratio - 1|
  double op_at_half = 0;              // OP at beta = 0.5 beta_c
  double branch_mismatch = 0;         // max relative forward/reverse gap for ratio >= 2
};

/// Anneals beta down from a split state, retraining the means at every level,
/// then repeats the ladder upward from the collapsed state for the forward branch.
ReverseResult run_reverse_traversal(const SyntheticDataset& data, const GmmProbeState& trained,
                                    const ReverseOptions& options, std::uint64_t seed);

// --- exp 03: hierarchical splitting --------------------------------------

struct HierarchyOptions {
  Eigen::Index K = 8;
  double beta_start = 0.02;
  double beta_end = 2.0;
  std::int64_t steps = 20000;
  double lr_scale = 4.0;  // mean step lr = lr_scale / beta
  /// Langevin temperature: each step adds sqrt(2 lr T) N(0, 1) per coordinate.
  double temperature = 7e-5;
  double init_spread = 1e-3;
  int record_every = 10;
  ActivationRule activation;
};

struct HierarchyResult {
  TrajectoryLog log;
  std::vector<double> within_order_parameter;  // per reading
  double beta_c1 = 0;  // 1 / lambda_max(total covariance)
  double beta_c2 = 0;  // 1 / lambda_max(within-supercluster covariance)
  std::optional<double> beta_event1;
  std::optional<double> beta_event2;
  std::vector<int> assignment;  // nearest subcluster per prototype
  bool balanced = false;        // one prototype per subcluster, two per supercluster
  int events = 0;
};

HierarchyResult run_hierarchical(const SyntheticDataset& data, const HierarchyOptions& options, std::uint64_t seed);

// --- exp 05: endogenous crossing ------------------------------------------

struct ToyEncoderState {
  MatrixXd encoder;  // d_lat x d_in
  MatrixXd decoder;  // d_in x d_lat
  double lr = 0.01;
  std::int64_t step = 0;

  [[nodiscard]] MatrixXd encode(const MatrixXd& x) const { return x * encoder.transpose(); }
  [[nodiscard]] double loss(const MatrixXd& x) const;
  /// One full-batch gradient step on the mean squared reconstruction error.
  void train_step(const MatrixXd& x);
};

ToyEncoderState init_encoder(Eigen::Index d_in, Eigen::Index d_lat, double scale, double lr, Rng& rng);

struct EndogenousOptions {
  std::int64_t steps = 3000;
  double encoder_lr = 0.01;
  double encoder_init = 0.1;
  Eigen::Index batch_size = 0;  // full batch
  int audit_window = 100;
  /// Relative change between consecutive window means tolerated by the audit.
  double audit_tolerance = 1e-4;
  ActivationRule activation;
};

struct HypothesisEvent {
  std::int64_t step = 0;
  std::string hypothesis;  // "beta_nondecreasing" or "beta_c_nonincreasing"
  double change = 0;
};

struct EndogenousResult {
  TrajectoryLog log;
  double delta0 = 0;  // beta(0) - beta_c(0)
  std::optional<std::int64_t> crossing_step;
  std::optional<std::int64_t> activation_step;
  std::vector<double> reconstruction_loss;
  std::vector<HypothesisEvent> hypothesis_failures;
};

/// Alternates one encoder step and one detached probe step. The encoder and the
/// probe draw from separate streams, so the latent trajectory does not depend on
/// the probe configuration.
EndogenousResult run_endogenous(const SyntheticDataset& data, const ProbeConfig& probe,
                                const EndogenousOptions& options, std::uint64_t seed);

/// Windowed-mean audit of the two monotonicity hypotheses.
std::vector<HypothesisEvent> audit_hypotheses(const TrajectoryLog& log, int window, double tolerance = 0.0);

}  // namespace pitchfork
