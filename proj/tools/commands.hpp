#pragma once

// Subcommands of the pitchfork command-line tool. Each returns a process exit code.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pitchfork/escape_lab.hpp"
#include "pitchfork/experiments.hpp"
#include "pitchfork/io.hpp"
#include "pitchfork/sde.hpp"

namespace pitchfork::cli {

struct CommonOptions {
  std::optional<std::filesystem::path> config_path;
  std::optional<std::string> preset;  // name under the data directory, or a path
  std::optional<std::uint64_t> seed;
  std::optional<int> seeds;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> input;
  std::vector<std::string> overrides;  // key=value
  bool print_config = false;
};

/// Defaults for `command` (e.g. "toy reverse"): the shared schema with the
/// command's own protocol values filled in.
Config default_config(const std::string& command);

/// Defaults, then preset, then config file, then environment, then --set overrides.
Config resolve_config(const std::string& command, const CommonOptions& options);

std::filesystem::path data_dir();

// Translators from a resolved config to library options.
ProbeConfig probe_config(const Config& c);
ActivationRule activation_rule(const Config& c);
HierarchicalParams hierarchical_params(const Config& c);
/// Dataset of the given kind for run seed `seed` (the data stream is derived from it).
SyntheticDataset make_data(const Config& c, const std::string& kind, std::uint64_t seed);
ForwardOptions forward_options(const Config& c);
ReverseOptions reverse_options(const Config& c);
HierarchyOptions hierarchy_options(const Config& c);
EndogenousOptions endogenous_options(const Config& c);
SdeConfig sde_config(const Config& c, std::uint64_t seed);
SdeConfig escape_sde_config(const Config& c, std::uint64_t seed);

int run(const std::string& command, const CommonOptions& options);

}  // namespace pitchfork::cli
