#ifndef TIDE_CHECKPOINT_HPP
#define TIDE_CHECKPOINT_HPP

#include <nlohmann/json.hpp>
#include <string>

#include "tide/model.hpp"

namespace tide {

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Writes a versioned binary checkpoint: a JSON header (format version,
/// config, series count) followed by one record per parameter, keyed by the
/// stable traversal names ("encoder.block0.W1", ...). Values are raw 64-bit
/// doubles, so the round trip is lossless.
void save_checkpoint(const TiDEParams& params, const std::string& path);

/// Loads a checkpoint written by save_checkpoint. Rejects unknown magic,
/// version, or any mismatch between stored records and the structure implied
/// by the stored config.
TiDEParams load_checkpoint(const std::string& path);

}  // namespace tide

#endif  // TIDE_CHECKPOINT_HPP
