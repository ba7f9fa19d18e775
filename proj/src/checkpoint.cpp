#include "tide/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "tide/errors.hpp"

namespace tide {

namespace {

constexpr char kMagic[8] = {'T', 'I', 'D', 'E', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  return nlohmann::json{{"lookback", cfg.lookback},
                        {"horizon", cfg.horizon},
                        {"covariate_dim", cfg.covariate_dim},
                        {"temporal_width", cfg.temporal_width},
                        {"hidden_size", cfg.hidden_size},
                        {"num_encoder_layers", cfg.num_encoder_layers},
                        {"num_decoder_layers", cfg.num_decoder_layers},
                        {"decoder_output_dim", cfg.decoder_output_dim},
                        {"temporal_decoder_hidden", cfg.temporal_decoder_hidden},
                        {"dropout_level", cfg.dropout_level},
                        {"layer_norm", cfg.layer_norm},
                        {"rev_in", cfg.rev_in},
                        {"static_dim", cfg.static_dim},
                        {"variant", variant_name(cfg.variant)}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.lookback = j.at("lookback").get<Index>();
  cfg.horizon = j.at("horizon").get<Index>();
  cfg.covariate_dim = j.at("covariate_dim").get<Index>();
  cfg.temporal_width = j.at("temporal_width").get<Index>();
  cfg.hidden_size = j.at("hidden_size").get<Index>();
  cfg.num_encoder_layers = j.at("num_encoder_layers").get<int>();
  cfg.num_decoder_layers = j.at("num_decoder_layers").get<int>();
  cfg.decoder_output_dim = j.at("decoder_output_dim").get<Index>();
  cfg.temporal_decoder_hidden = j.at("temporal_decoder_hidden").get<Index>();
  cfg.dropout_level = j.at("dropout_level").get<double>();
  cfg.layer_norm = j.at("layer_norm").get<bool>();
  cfg.rev_in = j.at("rev_in").get<bool>();
  cfg.static_dim = j.at("static_dim").get<Index>();
  cfg.variant = variant_from_name(j.at("variant").get<std::string>());
  return cfg;
}

void save_checkpoint(const TiDEParams& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IngestError("cannot open checkpoint for writing: " + path);

  os.write(kMagic, sizeof(kMagic));
  const nlohmann::json header{{"version", kVersion},
                              {"num_series", params.num_series},
                              {"config", model_config_to_json(params.cfg)}};
  const std::string header_str = header.dump();
  write_u64(os, header_str.size());
  os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

  std::uint64_t count = 0;
  params.for_each_param([&count](const std::string&, const Tensor&) { ++count; });
  write_u64(os, count);

  params.for_each_param([&os](const std::string& name, const Tensor& t) {
    write_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(os, static_cast<std::uint64_t>(t.rank()));
    for (Index d : t.shape()) write_u64(os, static_cast<std::uint64_t>(d));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(double)));
  });
  if (!os) throw IngestError("write failure on checkpoint: " + path);
}

TiDEParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("checkpoint file not found: " + path);

  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IngestError("not a checkpoint file: " + path);
  }
  const std::uint64_t header_len = read_u64(is);
  std::string header_str(header_len, '\0');
  is.read(header_str.data(), static_cast<std::streamsize>(header_len));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const nlohmann::json::exception& e) {
    throw IngestError("corrupt checkpoint header in " + path + ": " + e.what());
  }
  if (header.at("version").get<std::uint32_t>() != kVersion) {
    throw IngestError("unsupported checkpoint version in " + path);
  }

  const ModelConfig cfg = model_config_from_json(header.at("config"));
  const Index num_series = header.at("num_series").get<Index>();
  TiDEParams params = TiDEParams::init(cfg, num_series, 0);

  const std::uint64_t count = read_u64(is);
  std::map<std::string, Tensor> stored;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t name_len = read_u64(is);
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(name_len));
    const std::uint64_t rank = read_u64(is);
    std::vector<Index> shape(rank);
    for (std::uint64_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<Index>(read_u64(is));
    }
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!is) throw IngestError("truncated checkpoint: " + path);
    stored.emplace(std::move(name), std::move(t));
  }

  std::uint64_t matched = 0;
  params.for_each_param([&](const std::string& name, Tensor& t) {
    auto it = stored.find(name);
    if (it == stored.end()) {
      throw IngestError("checkpoint " + path + " is missing parameter " + name);
    }
    if (it->second.shape() != t.shape()) {
      throw IngestError("checkpoint " + path + " parameter " + name + " has shape " +
                        it->second.shape_str() + ", expected " + t.shape_str());
    }
    t = it->second;
    ++matched;
  });
  if (matched != count) {
    throw IngestError("checkpoint " + path + " carries " + std::to_string(count) +
                      " parameters, model expects " + std::to_string(matched));
  }
  return params;
}

}  // namespace tide
