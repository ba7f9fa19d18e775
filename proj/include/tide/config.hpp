#ifndef TIDE_CONFIG_HPP
#define TIDE_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tide/eval.hpp"
#include "tide/model.hpp"

namespace tide {

/// Everything one run needs: architecture, training budget, data location,
/// and reporting choices. Serialized as a flat `key = value` file.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string dataset_path;
  std::string dataset_name;  // benchmark preset label, empty for custom runs
  std::string outdir = "out";
  bool normalized = true;     // standardize per series on training-period stats
  bool time_features = true;  // append the eight calendar covariates

  bool operator==(const RunConfig&) const = default;
};

/// Names of the shipped benchmark presets.
const std::vector<std::string>& preset_names();
bool is_preset(const std::string& name);

/// The tuned per-dataset configuration: look-back 720, batch 512, projected
/// covariate width 4, plus the dataset-specific architecture and learning
/// rate. Throws ConfigError for unknown names.
RunConfig preset_config(const std::string& name);

/// Assigns one `key = value` pair. Unknown keys and unparseable values throw
/// ConfigError naming the offending key.
void apply_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Parses `key = value` lines ('#' starts a comment, blank lines skipped)
/// on top of `base`. Throws ConfigError with the line number on bad syntax.
RunConfig parse_config_text(const std::string& text, RunConfig base = {});

/// parse_config_text over a file's contents; a missing file throws
/// ConfigError naming the path.
RunConfig parse_config_file(const std::string& path, RunConfig base = {});

/// Enforces the benchmark tuning grid on a preset-derived configuration:
/// hidden size in {256, 512, 1024}, encoder/decoder depth in {1, 2, 3},
/// decoded vector width in {4, 8, 16, 32}, temporal-decoder hidden width in
/// {16, 32, 64, 128}, dropout in {0, 0.1, 0.2, 0.3, 0.5}, learning rate in
/// [1e-5, 1e-2], and horizon in {96, 192, 336, 720}.
void validate_preset_ranges(const RunConfig& cfg);

/// Canonical flat rendering: every key once, fixed order, shortest
/// round-trip number formatting. parse_config_text inverts it exactly.
std::string serialize(const RunConfig& cfg);

/// FNV-1a hash of the canonical rendering; stable across runs and platforms.
std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace tide

#endif  // TIDE_CONFIG_HPP
