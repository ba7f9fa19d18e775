#include "tide/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

#include "tide/errors.hpp"

namespace tide {

namespace {

struct PresetRow {
  const char* name;
  Index hidden;
  int n_enc;
  int n_dec;
  Index out_dim;
  Index td_hidden;
  double dropout;
  bool layer_norm;
  double lr;
  bool rev_in;
};

constexpr std::array<PresetRow, 7> kPresets{{
    {"traffic", 256, 1, 1, 16, 64, 0.3, false, 6.55e-5, true},
    {"electricity", 1024, 2, 2, 8, 64, 0.5, true, 9.99e-4, false},
    {"ettm1", 1024, 1, 1, 8, 128, 0.5, true, 8.39e-5, false},
    {"ettm2", 512, 2, 2, 16, 128, 0.0, true, 2.52e-4, true},
    {"etth1", 256, 2, 2, 8, 128, 0.3, true, 3.82e-5, true},
    {"etth2", 512, 2, 2, 32, 16, 0.2, true, 2.24e-4, true},
    {"weather", 512, 1, 1, 8, 16, 0.0, true, 3.01e-5, false},
}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

[[noreturn]] void bad_value(const std::string& key, std::string_view value,
                            const char* expected) {
  throw ConfigError("key '" + key + "': cannot parse '" + std::string(value) +
                    "' as " + expected);
}

std::int64_t parse_int(const std::string& key, std::string_view v) {
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

std::uint64_t parse_uint(const std::string& key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    bad_value(key, v, "a nonnegative integer");
  }
  return out;
}

double parse_double(const std::string& key, std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(const std::string& key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad_value(key, v, "true or false");
}

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw ConfigError("unformattable number");
  return std::string(buf, p);
}

void append_key(std::string& out, const char* key, const std::string& value) {
  out += key;
  out += " = ";
  out += value;
  out += '\n';
}

template <typename T>
bool one_of(T v, std::initializer_list<T> allowed) {
  return std::find(allowed.begin(), allowed.end(), v) != allowed.end();
}

[[noreturn]] void out_of_grid(const char* key, const std::string& value,
                              const char* grid) {
  throw ConfigError(std::string("key '") + key + "': " + value +
                    " is outside the benchmark tuning grid " + grid);
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const PresetRow& row : kPresets) v.emplace_back(row.name);
    return v;
  }();
  return names;
}

bool is_preset(const std::string& name) {
  for (const PresetRow& row : kPresets) {
    if (name == row.name) return true;
  }
  return false;
}

RunConfig preset_config(const std::string& name) {
  for (const PresetRow& row : kPresets) {
    if (name != row.name) continue;
    RunConfig cfg;
    cfg.dataset_name = row.name;
    cfg.model.lookback = 720;
    cfg.model.horizon = 96;
    cfg.model.temporal_width = 4;
    cfg.model.hidden_size = row.hidden;
    cfg.model.num_encoder_layers = row.n_enc;
    cfg.model.num_decoder_layers = row.n_dec;
    cfg.model.decoder_output_dim = row.out_dim;
    cfg.model.temporal_decoder_hidden = row.td_hidden;
    cfg.model.dropout_level = row.dropout;
    cfg.model.layer_norm = row.layer_norm;
    cfg.model.rev_in = row.rev_in;
    cfg.train.max_lr = row.lr;
    cfg.train.batch_size = 512;
    return cfg;
  }
  std::string known;
  for (const std::string& n : preset_names()) {
    if (!known.empty()) known += ", ";
    known += n;
  }
  throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  const std::string_view v = trim(value);
  if (key == "dataset") {
    cfg.dataset_path = std::string(v);
  } else if (key == "datasetName") {
    cfg.dataset_name = std::string(v);
  } else if (key == "outdir") {
    cfg.outdir = std::string(v);
  } else if (key == "variant") {
    cfg.model.variant = variant_from_name(std::string(v));
  } else if (key == "lookback") {
    cfg.model.lookback = parse_int(key, v);
  } else if (key == "horizon") {
    cfg.model.horizon = parse_int(key, v);
  } else if (key == "covariateDim") {
    cfg.model.covariate_dim = parse_int(key, v);
  } else if (key == "staticDim") {
    cfg.model.static_dim = parse_int(key, v);
  } else if (key == "temporalWidth") {
    cfg.model.temporal_width = parse_int(key, v);
  } else if (key == "hiddenSize") {
    cfg.model.hidden_size = parse_int(key, v);
  } else if (key == "numEncoderLayers") {
    cfg.model.num_encoder_layers = static_cast<int>(parse_int(key, v));
  } else if (key == "numDecoderLayers") {
    cfg.model.num_decoder_layers = static_cast<int>(parse_int(key, v));
  } else if (key == "decoderOutputDim") {
    cfg.model.decoder_output_dim = parse_int(key, v);
  } else if (key == "temporalDecoderHidden") {
    cfg.model.temporal_decoder_hidden = parse_int(key, v);
  } else if (key == "dropoutLevel") {
    cfg.model.dropout_level = parse_double(key, v);
  } else if (key == "layerNorm") {
    cfg.model.layer_norm = parse_bool(key, v);
  } else if (key == "revIn") {
    cfg.model.rev_in = parse_bool(key, v);
  } else if (key == "timeFeatures") {
    cfg.time_features = parse_bool(key, v);
  } else if (key == "normalized") {
    cfg.normalized = parse_bool(key, v);
  } else if (key == "learningRate") {
    cfg.train.max_lr = parse_double(key, v);
  } else if (key == "batchSize") {
    cfg.train.batch_size = parse_int(key, v);
  } else if (key == "maxEpochs") {
    cfg.train.max_epochs = parse_int(key, v);
  } else if (key == "patience") {
    cfg.train.patience = parse_int(key, v);
  } else if (key == "seed") {
    cfg.train.seed = parse_uint(key, v);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s(line);
    if (const auto hash = s.find('#'); hash != std::string_view::npos) {
      s = s.substr(0, hash);
    }
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + std::string(s) + "'");
    }
    const std::string key(trim(s.substr(0, eq)));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    }
    apply_key(base, key, std::string(s.substr(eq + 1)));
  }
  return base;
}

RunConfig parse_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), std::move(base));
}

void validate_preset_ranges(const RunConfig& cfg) {
  const ModelConfig& m = cfg.model;
  if (!one_of<Index>(m.horizon, {96, 192, 336, 720})) {
    out_of_grid("horizon", std::to_string(m.horizon), "{96, 192, 336, 720}");
  }
  if (!one_of<Index>(m.hidden_size, {256, 512, 1024})) {
    out_of_grid("hiddenSize", std::to_string(m.hidden_size), "{256, 512, 1024}");
  }
  if (!one_of(m.num_encoder_layers, {1, 2, 3})) {
    out_of_grid("numEncoderLayers", std::to_string(m.num_encoder_layers), "{1, 2, 3}");
  }
  if (!one_of(m.num_decoder_layers, {1, 2, 3})) {
    out_of_grid("numDecoderLayers", std::to_string(m.num_decoder_layers), "{1, 2, 3}");
  }
  if (!one_of<Index>(m.decoder_output_dim, {4, 8, 16, 32})) {
    out_of_grid("decoderOutputDim", std::to_string(m.decoder_output_dim),
                "{4, 8, 16, 32}");
  }
  if (!one_of<Index>(m.temporal_decoder_hidden, {16, 32, 64, 128})) {
    out_of_grid("temporalDecoderHidden", std::to_string(m.temporal_decoder_hidden),
                "{16, 32, 64, 128}");
  }
  if (!one_of(m.dropout_level, {0.0, 0.1, 0.2, 0.3, 0.5})) {
    out_of_grid("dropoutLevel", format_double(m.dropout_level),
                "{0, 0.1, 0.2, 0.3, 0.5}");
  }
  if (cfg.train.max_lr < 1e-5 || cfg.train.max_lr > 1e-2) {
    out_of_grid("learningRate", format_double(cfg.train.max_lr), "[1e-5, 1e-2]");
  }
}

std::string serialize(const RunConfig& cfg) {
  std::string out;
  append_key(out, "dataset", cfg.dataset_path);
  append_key(out, "datasetName", cfg.dataset_name);
  append_key(out, "outdir", cfg.outdir);
  append_key(out, "variant", variant_name(cfg.model.variant));
  append_key(out, "lookback", std::to_string(cfg.model.lookback));
  append_key(out, "horizon", std::to_string(cfg.model.horizon));
  append_key(out, "covariateDim", std::to_string(cfg.model.covariate_dim));
  append_key(out, "staticDim", std::to_string(cfg.model.static_dim));
  append_key(out, "temporalWidth", std::to_string(cfg.model.temporal_width));
  append_key(out, "hiddenSize", std::to_string(cfg.model.hidden_size));
  append_key(out, "numEncoderLayers", std::to_string(cfg.model.num_encoder_layers));
  append_key(out, "numDecoderLayers", std::to_string(cfg.model.num_decoder_layers));
  append_key(out, "decoderOutputDim", std::to_string(cfg.model.decoder_output_dim));
  append_key(out, "temporalDecoderHidden",
             std::to_string(cfg.model.temporal_decoder_hidden));
  append_key(out, "dropoutLevel", format_double(cfg.model.dropout_level));
  append_key(out, "layerNorm", cfg.model.layer_norm ? "true" : "false");
  append_key(out, "revIn", cfg.model.rev_in ? "true" : "false");
  append_key(out, "timeFeatures", cfg.time_features ? "true" : "false");
  append_key(out, "normalized", cfg.normalized ? "true" : "false");
  append_key(out, "learningRate", format_double(cfg.train.max_lr));
  append_key(out, "batchSize", std::to_string(cfg.train.batch_size));
  append_key(out, "maxEpochs", std::to_string(cfg.train.max_epochs));
  append_key(out, "patience", std::to_string(cfg.train.patience));
  append_key(out, "seed", std::to_string(cfg.train.seed));
  return out;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  const std::string text = serialize(cfg);
  std::uint64_t h = 14695981039346656037ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace tide
