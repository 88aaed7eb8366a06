#pragma once

// Run configuration, trajectory CSV files and line-chart SVG output.

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "pitchfork/experiments.hpp"

namespace pitchfork {

inline constexpr const char* kVersion = "0.3.0";

/// Flat key=value document. `[section]` lines prefix the keys that follow with
/// "section."; `#` and `;` start comments. Only keys present in the defaults are
/// accepted.
class Config {
 public:
  Config() = default;
  explicit Config(std::map<std::string, std::string> defaults) : values_(std::move(defaults)) {}

  void load_file(const std::filesystem::path& path);
  void load_text(std::string_view text, const std::string& source = "<text>");
  /// Overrides each key from `prefix` + key upper-cased with '.' replaced by '_',
  /// e.g. probe.lr_means <- PITCHFORK_PROBE_LR_MEANS.
  void apply_env(const std::string& prefix = "PITCHFORK_");
  void set(const std::string& key, const std::string& value);

  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }
  [[nodiscard]] const std::string& get(const std::string& key) const;
  [[nodiscard]] double get_double(const std::string& key) const;
  [[nodiscard]] std::int64_t get_int(const std::string& key) const;
  /// Comma-separated reals.
  [[nodiscard]] std::vector<double> get_list(const std::string& key) const;
  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

  /// Sorted "key=value" lines.
  [[nodiscard]] std::string canonical() const;
  /// 16 hex digits of FNV-1a over canonical().
  [[nodiscard]] std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a(std::string_view text);

/// Shortest round-trip decimal form; "inf", "-inf" and "nan" for non-finite values.
std::string format_number(double value);

inline constexpr const char* kTrajectoryHeader = "step,log_beta,log_beta_c,log_ratio,nc1,order_parameter";

/// One comment line with version and config hash, then the header, then one row per reading.
void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log);
/// Skips leading '#' lines. Every header column is required; empty nc1 fields
/// read as absent.
TrajectoryLog read_trajectory_csv(std::istream& in, const std::string& source = "<stream>");

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

struct ChartSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::optional<double> x_marker;  // vertical reference line
  std::optional<double> y_marker;  // horizontal reference line
  std::string provenance;          // embedded as an XML comment
};

/// Static line chart. Non-finite points (and non-positive ones on log axes) are skipped.
std::string line_chart_svg(const ChartSpec& spec, const std::vector<ChartSeries>& series);

}  // namespace pitchfork
