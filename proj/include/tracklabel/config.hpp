#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tracklabel {

/// Settings of one semi-supervised run. Optional values fall back to the
/// cell-scale radius `beta`: sigma = beta / 3, gate = beta,
/// min_separation = beta / 2, eval_gate = beta, template radius = beta / 2.
struct PipelineConfig {
  std::filesystem::path data_root;
  std::filesystem::path output_root;
  int labeled_frame = 1;
  double alpha = 0.8;
  double beta = 18.0;
  int gamma = 3;
  std::optional<double> sigma;
  std::optional<double> gate;
  double peak_threshold = 0.3;
  std::optional<double> min_separation;
  std::optional<double> eval_gate;

  std::string detector = "builtin";  // builtin | external
  int template_radius = 0;           // 0 = derive from beta
  double threshold_step = 0.01;          // response threshold search resolution

  std::string external_command;
  std::filesystem::path external_model;
  double external_timeout_s = 600.0;
  int external_retries = 0;
  std::string external_train_args;

  std::uint64_t seed = 0;
  int threads = 1;
  bool log = true;

  double resolved_sigma() const { return sigma.value_or(beta / 3.0); }
  double resolved_gate() const { return gate.value_or(beta); }
  double resolved_min_separation() const { return min_separation.value_or(beta / 2.0); }
  double resolved_eval_gate() const { return eval_gate.value_or(beta); }
  int resolved_template_radius() const;
};

/// Parses `key = value` lines; '#' starts a comment, blank lines are skipped.
std::vector<std::pair<std::string, std::string>> read_key_values(const std::filesystem::path& path);

/// Applies one setting; unknown keys and malformed values raise a usage error.
/// Simulator keys (prefix "sim_") are accepted and ignored so one file can
/// describe both a synthetic dataset and its run.
void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value);

PipelineConfig read_config(const std::filesystem::path& path);

/// Range checks (alpha in (0, 1], gamma >= 1, positive radii, ...). The
/// labeled frame upper bound is checked once the sequence length is known.
void validate(const PipelineConfig& config);

/// Every setting with its resolved value, in the config file syntax.
std::string to_config_text(const PipelineConfig& config);

}  // namespace tracklabel
