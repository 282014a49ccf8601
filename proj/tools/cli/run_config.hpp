#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "olinear/data.hpp"
#include "olinear/model.hpp"
#include "olinear/train.hpp"

namespace olinear::cli {

/// Everything one command invocation needs. n_variates in `model` is filled
/// in from the dataset once it is loaded.
struct RunConfig {
  std::filesystem::path data_path;
  std::filesystem::path output_dir = "out";
  SplitRatios ratios;
  double q_source_fraction = 1.0;
  bool scale = true;  // z-score each variate with training-split statistics
  std::uint64_t attention_heads = 8;  // only used for the FLOPs comparison
  OLinearConfig model;
  TrainConfig train;

  /// Throws ConfigError for any out-of-range value.
  void validate() const;
};

/// Every recognized key in canonical order with its current value.
std::vector<std::pair<std::string, std::string>> entries(const RunConfig& rc);

/// Sets one key; throws ConfigError for unknown keys or unparsable values.
void set_key(RunConfig& rc, const std::string& key, const std::string& value);

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
/// `source` names the text in error messages.
void apply_text(RunConfig& rc, const std::string& text, const std::string& source);

/// Applies a `key=value` override.
void apply_override(RunConfig& rc, const std::string& assignment);

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

}  // namespace olinear::cli
