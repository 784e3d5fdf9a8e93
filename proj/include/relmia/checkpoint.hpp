#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "relmia/encoder.hpp"
#include "relmia/errors.hpp"
#include "relmia/schema.hpp"

namespace relmia {

inline nlohmann::json encoder_config_to_json(const EncoderConfig& c) {
  return {{"hidden_dim", c.hidden_dim},
          {"layers", c.layers},
          {"heads", c.heads},
          {"leaky_slope", c.leaky_slope},
          {"lambda_parent", c.lambda_parent},
          {"lambda_context", c.lambda_context},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  try {
    if (j.contains("hidden_dim")) c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    if (j.contains("layers")) c.layers = j.at("layers").get<std::size_t>();
    if (j.contains("heads")) c.heads = j.at("heads").get<std::size_t>();
    if (j.contains("leaky_slope")) c.leaky_slope = j.at("leaky_slope").get<double>();
    if (j.contains("lambda_parent")) c.lambda_parent = j.at("lambda_parent").get<double>();
    if (j.contains("lambda_context")) c.lambda_context = j.at("lambda_context").get<double>();
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("encoder config: ") + e.what());
  }
  c.validate();
  return c;
}

// Named-tensor document: config, schema fingerprint, per-type encoded widths
// and every tensor with shape and row-major values.
inline nlohmann::json checkpoint_to_json(const EncoderParams& p) {
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    const Matrix& m = p.tensors[i];
    tensors.push_back({{"name", p.names[i]},
                       {"rows", m.rows},
                       {"cols", m.cols},
                       {"values", m.data}});
  }
  return {{"config", encoder_config_to_json(p.config)},
          {"schema_fingerprint", p.schema_fp},
          {"raw_dims", p.meta.raw_dims},
          {"tensors", tensors}};
}

inline void save_checkpoint(const EncoderParams& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << checkpoint_to_json(p).dump(2) << '\n';
}

// Refuses to load a checkpoint whose schema fingerprint does not match the
// schema it is being attached to.
inline EncoderParams load_checkpoint(const std::string& path, const RelationalSchema& schema) {
  nlohmann::json j;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("checkpoint: cannot parse " + path + ": " + e.what());
    }
  }
  try {
    const std::string fp = j.at("schema_fingerprint").get<std::string>();
    const std::string expected = schema_fingerprint(schema);
    if (fp != expected)
      throw ConfigError("checkpoint: schema fingerprint mismatch (checkpoint " + fp +
                        ", schema " + expected + ")");
    const EncoderConfig config = encoder_config_from_json(j.at("config"));
    const auto dims = j.at("raw_dims").get<std::vector<std::size_t>>();
    EncoderParams p = init_encoder_params(GraphMeta::from_schema(schema, dims), config, fp);
    const auto& tensors = j.at("tensors");
    if (tensors.size() != p.tensors.size())
      throw DataError("checkpoint: tensor count mismatch");
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
      const auto& jt = tensors.at(i);
      if (jt.at("name").get<std::string>() != p.names[i])
        throw DataError("checkpoint: unexpected tensor '" +
                        jt.at("name").get<std::string>() + "' (expected '" + p.names[i] + "')");
      Matrix& m = p.tensors[i];
      if (jt.at("rows").get<std::size_t>() != m.rows ||
          jt.at("cols").get<std::size_t>() != m.cols)
        throw DataError("checkpoint: shape mismatch for tensor '" + p.names[i] + "'");
      m.data = jt.at("values").get<std::vector<double>>();
      if (m.data.size() != m.rows * m.cols)
        throw DataError("checkpoint: value count mismatch for tensor '" + p.names[i] + "'");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint: malformed document: " + std::string(e.what()));
  }
}

}  // namespace relmia
