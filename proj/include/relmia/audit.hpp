#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relmia/attacks.hpp"
#include "relmia/checkpoint.hpp"
#include "relmia/datagen.hpp"
#include "relmia/encoder.hpp"
#include "relmia/encoding.hpp"
#include "relmia/errors.hpp"
#include "relmia/hetero_graph.hpp"
#include "relmia/metrics.hpp"
#include "relmia/trace.hpp"

namespace relmia {

inline constexpr const char* kVersion = "0.1.0";

//===--------------------------------------------------------------------===//
// Audit configuration
//===--------------------------------------------------------------------===//

struct AttackSpec {
  std::string name;                      // mtmia | dcr | mc | kde
  EmbeddingSpace space = EmbeddingSpace::fused;  // mtmia only
  std::optional<double> radius;          // mc
  std::optional<double> bandwidth;       // kde
};

struct AuditConfig {
  std::string schema_path;
  std::string train_dir;
  std::string holdout_dir;
  std::string synth_dir;
  std::string out_dir;
  std::uint64_t seed = 1;
  EncoderConfig encoder;
  std::vector<AttackSpec> attacks;
  bool fidelity = false;

  nlohmann::json to_json() const {
    nlohmann::json jattacks = nlohmann::json::array();
    for (const auto& a : attacks) {
      nlohmann::json ja{{"name", a.name}};
      if (a.name == "mtmia") ja["space"] = to_string(a.space);
      if (a.radius) ja["radius"] = *a.radius;
      if (a.bandwidth) ja["bandwidth"] = *a.bandwidth;
      jattacks.push_back(ja);
    }
    return {{"schema", schema_path},
            {"train_dir", train_dir},
            {"holdout_dir", holdout_dir},
            {"synth_dir", synth_dir},
            {"out_dir", out_dir},
            {"seed", seed},
            {"encoder", encoder_config_to_json(encoder)},
            {"attacks", jattacks},
            {"fidelity", fidelity}};
  }

  static AuditConfig from_json(const nlohmann::json& j) {
    AuditConfig c;
    try {
      c.schema_path = j.at("schema").get<std::string>();
      c.train_dir = j.at("train_dir").get<std::string>();
      c.holdout_dir = j.at("holdout_dir").get<std::string>();
      c.synth_dir = j.at("synth_dir").get<std::string>();
      c.out_dir = j.at("out_dir").get<std::string>();
      if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
      c.encoder = j.contains("encoder") ? encoder_config_from_json(j.at("encoder"))
                                        : EncoderConfig{};
      if (!j.contains("encoder") || !j.at("encoder").contains("seed")) c.encoder.seed = c.seed;
      if (j.contains("fidelity")) c.fidelity = j.at("fidelity").get<bool>();
      if (j.contains("attacks")) {
        for (const auto& ja : j.at("attacks")) {
          AttackSpec a;
          a.name = ja.at("name").get<std::string>();
          if (a.name != "mtmia" && a.name != "dcr" && a.name != "mc" && a.name != "kde")
            throw ConfigError("audit config: unknown attack '" + a.name + "'");
          if (ja.contains("space"))
            a.space = embedding_space_from_string(ja.at("space").get<std::string>());
          if (ja.contains("radius")) a.radius = ja.at("radius").get<double>();
          if (ja.contains("bandwidth")) a.bandwidth = ja.at("bandwidth").get<double>();
          c.attacks.push_back(std::move(a));
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("audit config: ") + e.what());
    }
    if (c.attacks.empty()) throw ConfigError("audit config: attack list must not be empty");
    return c;
  }

  static AuditConfig from_file(const std::string& path) {
    nlohmann::json j;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file " + path + ": " + e.what());
    }
    return from_json(j);
  }

  void check_paths() const {
    namespace fs = std::filesystem;
    for (const auto& [label, p] :
         {std::pair<const char*, const std::string*>{"schema", &schema_path},
          {"train_dir", &train_dir},
          {"holdout_dir", &holdout_dir},
          {"synth_dir", &synth_dir}}) {
      if (!fs::exists(*p))
        throw ConfigError(std::string("audit config: ") + label + " path does not exist: " + *p);
    }
  }
};

//===--------------------------------------------------------------------===//
// Pipeline
//===--------------------------------------------------------------------===//

struct AttackOutcome {
  AttackSpec spec;
  AttackScoreSet scores;
  EvalReport report;
};

struct AuditResult {
  std::vector<AttackOutcome> attacks;
  std::optional<FidelityReport> fidelity;
  std::vector<std::string> warnings;
  std::vector<double> loss_history;
  bool encoder_trained = false;
  nlohmann::json manifest;
};

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << text;
}

inline void write_scores_csv(const std::string& path, const AttackScoreSet& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << "entity_id,attack,space,score,label\n";
  for (const auto& e : s.entries) {
    out << csv_escape(e.id) << ',' << s.attack << ',' << s.space << ','
        << format_double(e.score) << ',';
    if (e.label >= 0) out << e.label;
    out << '\n';
  }
}

inline void write_roc_csv(const std::string& path, const EvalReport& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << "fpr,tpr,threshold\n";
  for (const auto& pt : r.roc)
    out << format_double(pt.fpr) << ',' << format_double(pt.tpr) << ','
        << format_double(pt.threshold) << '\n';
}

inline std::string file_tag(const AttackSpec& a) {
  std::string space = a.name == "mtmia" ? to_string(a.space) : "raw-row";
  return a.name + "_" + space;
}

}  // namespace detail

// Runs the full audit: fit encodings on synthetic data, build graphs,
// decompose entities, train the encoder on synthetic subgraphs when an
// embedding attack is configured, score every train and holdout entity,
// evaluate, and write reports. Real data is not read before encoder training
// has completed.
inline AuditResult run_audit(const AuditConfig& config, RunTrace* trace = nullptr) {
  namespace fs = std::filesystem;
  config.encoder.validate();
  config.check_paths();
  fs::create_directories(config.out_dir);
  AuditResult result;

  if (trace) trace->stage("load_synth");
  const RelationalSchema schema = load_schema(config.schema_path, trace);
  const DatabaseInstance synth_db = load_database(schema, config.synth_dir, trace);
  const EncodingSpec enc = fit_encoding(schema, synth_db);

  IngestionReport synth_ingest;
  const auto synth_feats = apply_encoding(enc, schema, synth_db, &synth_ingest);
  const HeteroGraph synth_graph = build_graph(schema, synth_db, synth_feats);
  Decomposition synth_entities = decompose_entities(synth_graph);
  if (synth_entities.unreachable_nodes > 0)
    result.warnings.push_back("synth: " + std::to_string(synth_entities.unreachable_nodes) +
                              " nodes unreachable from any root, dropped");

  std::vector<std::size_t> dims;
  for (const auto& table_enc : enc.tables) dims.push_back(table_enc.size());
  const GraphMeta meta = GraphMeta::from_schema(schema, dims);
  const std::string fp = schema_fingerprint(schema);

  const bool needs_encoder = [&] {
    for (const auto& a : config.attacks)
      if (a.name == "mtmia") return true;
    return false;
  }();

  std::optional<EncoderParams> params;
  if (needs_encoder) {
    if (trace) trace->stage("train_encoder");
    TrainResult trained = train_encoder(config.encoder, meta, synth_entities.entities, fp);
    result.loss_history = trained.loss_history;
    result.encoder_trained = true;
    params = std::move(trained.params);
    save_checkpoint(*params, (fs::path(config.out_dir) / "encoder.ckpt.json").string());
  }
  if (trace) trace->stage("encoder_trained");

  // Real data enters only now.
  if (trace) trace->stage("load_real");
  const DatabaseInstance train_db = load_database(schema, config.train_dir, trace);
  const DatabaseInstance holdout_db = load_database(schema, config.holdout_dir, trace);
  IngestionReport train_ingest, holdout_ingest;
  const auto train_feats = apply_encoding(enc, schema, train_db, &train_ingest);
  const auto holdout_feats = apply_encoding(enc, schema, holdout_db, &holdout_ingest);
  const HeteroGraph train_graph = build_graph(schema, train_db, train_feats);
  const HeteroGraph holdout_graph = build_graph(schema, holdout_db, holdout_feats);
  Decomposition train_entities = decompose_entities(train_graph);
  Decomposition holdout_entities = decompose_entities(holdout_graph);
  for (const auto& [name, dec] :
       {std::pair<const char*, const Decomposition*>{"train", &train_entities},
        {"holdout", &holdout_entities}}) {
    if (dec->unreachable_nodes > 0)
      result.warnings.push_back(std::string(name) + ": " +
                                std::to_string(dec->unreachable_nodes) +
                                " nodes unreachable from any root, dropped");
  }
  if (train_entities.entities.size() != holdout_entities.entities.size())
    result.warnings.push_back(
        "entity count imbalance: " + std::to_string(train_entities.entities.size()) +
        " train vs " + std::to_string(holdout_entities.entities.size()) + " holdout");

  {
    nlohmann::json ingest{{"synth", synth_ingest.to_json()},
                          {"train", train_ingest.to_json()},
                          {"holdout", holdout_ingest.to_json()}};
    detail::write_text((fs::path(config.out_dir) / "ingestion.json").string(),
                       ingest.dump(2) + "\n");
  }

  // query sets with ground-truth labels; ids prefixed by split so they stay
  // unique even if the two databases reuse key values
  auto label_and_prefix = [](AttackScoreSet& s, std::size_t n_train) {
    for (std::size_t i = 0; i < s.entries.size(); ++i) {
      s.entries[i].label = i < n_train ? 1 : 0;
      s.entries[i].id =
          (i < n_train ? std::string("train/") : std::string("holdout/")) + s.entries[i].id;
    }
  };
  const std::size_t n_train = train_entities.entities.size();

  VectorSet query_rows = parent_rows(train_entities.entities);
  {
    const VectorSet holdout_rows = parent_rows(holdout_entities.entities);
    for (std::size_t i = 0; i < holdout_rows.ids.size(); ++i) query_rows.ids.push_back(holdout_rows.ids[i]);
    Matrix merged(query_rows.rows.rows + holdout_rows.rows.rows,
                  query_rows.rows.rows ? query_rows.rows.cols : holdout_rows.rows.cols);
    std::copy(query_rows.rows.data.begin(), query_rows.rows.data.end(), merged.data.begin());
    std::copy(holdout_rows.rows.data.begin(), holdout_rows.rows.data.end(),
              merged.data.begin() + static_cast<std::ptrdiff_t>(query_rows.rows.size()));
    query_rows.rows = std::move(merged);
  }
  const VectorSet synth_rows = parent_rows(synth_entities.entities);

  std::vector<EntityEmbedding> query_emb, synth_emb;
  if (needs_encoder) {
    if (trace) trace->stage("score");
    query_emb = encode_entities(*params, train_graph, train_entities.entities);
    auto holdout_emb = encode_entities(*params, holdout_graph, holdout_entities.entities);
    query_emb.insert(query_emb.end(), std::make_move_iterator(holdout_emb.begin()),
                     std::make_move_iterator(holdout_emb.end()));
    synth_emb = encode_entities(*params, synth_graph, synth_entities.entities);
  }

  for (const auto& spec : config.attacks) {
    AttackOutcome outcome;
    outcome.spec = spec;
    if (spec.name == "mtmia") {
      outcome.scores = embedding_dcr_score(query_emb, synth_emb, spec.space);
    } else if (spec.name == "dcr") {
      outcome.scores = dcr_score(query_rows, synth_rows);
    } else if (spec.name == "mc") {
      outcome.scores = mc_score(query_rows, synth_rows, spec.radius);
    } else {
      outcome.scores = kde_score(query_rows, synth_rows, spec.bandwidth);
    }
    label_and_prefix(outcome.scores, n_train);
    outcome.report = roc_and_auc(outcome.scores);

    const std::string tag = detail::file_tag(spec);
    nlohmann::json rj = outcome.report.to_json();
    rj["attack"] = outcome.scores.attack;
    rj["space"] = outcome.scores.space;
    detail::write_text((fs::path(config.out_dir) / ("report_" + tag + ".json")).string(),
                       rj.dump(2) + "\n");
    detail::write_scores_csv((fs::path(config.out_dir) / ("scores_" + tag + ".csv")).string(),
                             outcome.scores);
    detail::write_roc_csv((fs::path(config.out_dir) / ("roc_" + tag + ".csv")).string(),
                          outcome.report);
    result.attacks.push_back(std::move(outcome));
  }

  if (config.fidelity) {
    if (trace) trace->stage("fidelity");
    result.fidelity = fidelity_report(schema, train_db, train_graph, synth_db, synth_graph);
    detail::write_text((fs::path(config.out_dir) / "fidelity.json").string(),
                       result.fidelity->to_json().dump(2) + "\n");
  }

  nlohmann::json manifest{
      {"version", kVersion},
      {"seed", config.seed},
      {"config", config.to_json()},
      {"config_hash", to_hex(fnv1a64(config.to_json().dump()))},
      {"counts",
       {{"train_entities", train_entities.entities.size()},
        {"holdout_entities", holdout_entities.entities.size()},
        {"synth_entities", synth_entities.entities.size()}}},
      {"encoder_trained", result.encoder_trained},
      {"warnings", result.warnings}};
  if (result.encoder_trained) manifest["loss_history"] = result.loss_history;
  result.manifest = manifest;
  detail::write_text((fs::path(config.out_dir) / "manifest.json").string(),
                     manifest.dump(2) + "\n");
  return result;
}

// Decomposition audit: the same DCR attack applied to the raw root row and to
// each embedding space, reported as a fixed four-row table.
struct DecompositionAudit {
  std::vector<AttackOutcome> rows;  // raw-row, parent, context, final
  nlohmann::json table;
};

inline DecompositionAudit run_decompose_attack(const AuditConfig& base, RunTrace* trace = nullptr) {
  AuditConfig config = base;
  config.attacks = {AttackSpec{"dcr", EmbeddingSpace::fused, {}, {}},
                    AttackSpec{"mtmia", EmbeddingSpace::parent, {}, {}},
                    AttackSpec{"mtmia", EmbeddingSpace::context, {}, {}},
                    AttackSpec{"mtmia", EmbeddingSpace::fused, {}, {}}};
  AuditResult audit = run_audit(config, trace);

  DecompositionAudit out;
  nlohmann::json rows = nlohmann::json::array();
  for (auto& outcome : audit.attacks) {
    rows.push_back({{"attack", outcome.scores.attack},
                    {"space", outcome.scores.space},
                    {"auc", outcome.report.auc},
                    {"tpr_at_0", outcome.report.tpr_at_0},
                    {"tpr_at_1e-3", outcome.report.tpr_at_1e3},
                    {"tpr_at_1e-2", outcome.report.tpr_at_1e2}});
    out.rows.push_back(std::move(outcome));
  }
  out.table = {{"rows", rows}};
  detail::write_text(
      (std::filesystem::path(config.out_dir) / "decompose_attack.json").string(),
      out.table.dump(2) + "\n");
  return out;
}

// Fidelity-only pipeline: real training data against synthetic data.
inline FidelityReport run_fidelity(const AuditConfig& config, RunTrace* trace = nullptr) {
  namespace fs = std::filesystem;
  config.check_paths();
  fs::create_directories(config.out_dir);
  const RelationalSchema schema = load_schema(config.schema_path, trace);
  const DatabaseInstance synth_db = load_database(schema, config.synth_dir, trace);
  const DatabaseInstance train_db = load_database(schema, config.train_dir, trace);
  const EncodingSpec enc = fit_encoding(schema, synth_db);
  const HeteroGraph synth_graph = build_graph(schema, synth_db, apply_encoding(enc, schema, synth_db));
  const HeteroGraph train_graph = build_graph(schema, train_db, apply_encoding(enc, schema, train_db));
  FidelityReport rep = fidelity_report(schema, train_db, train_graph, synth_db, synth_graph);
  detail::write_text((fs::path(config.out_dir) / "fidelity.json").string(),
                     rep.to_json().dump(2) + "\n");
  return rep;
}

//===--------------------------------------------------------------------===//
// Toy benchmark writer
//===--------------------------------------------------------------------===//

struct ToyRunOptions {
  ToySpec spec;
  std::string generator = "memorizing";  // memorizing | independent
  double noise = 1.0;
  std::uint64_t synth_seed = 101;
  std::string out_dir;
};

// Writes schema.json, train/, holdout/, synth/ and a ready-to-run
// audit_config.json under out_dir.
inline void run_toy(const ToyRunOptions& opt) {
  namespace fs = std::filesystem;
  const ToyData toy = gen_toy(opt.spec);
  DatabaseInstance synth;
  if (opt.generator == "memorizing") {
    synth = mock_memorizing_generator(toy.schema, toy.train, opt.noise, opt.synth_seed);
  } else if (opt.generator == "independent") {
    synth = mock_independent_generator(toy.schema, toy.train, opt.synth_seed);
  } else {
    throw ConfigError("toy: unknown generator '" + opt.generator + "'");
  }
  fs::create_directories(opt.out_dir);
  detail::write_text((fs::path(opt.out_dir) / "schema.json").string(),
                     schema_to_json(toy.schema).dump(2) + "\n");
  save_database(toy.schema, toy.train, (fs::path(opt.out_dir) / "train").string());
  save_database(toy.schema, toy.holdout, (fs::path(opt.out_dir) / "holdout").string());
  save_database(toy.schema, synth, (fs::path(opt.out_dir) / "synth").string());

  AuditConfig audit;
  audit.schema_path = (fs::path(opt.out_dir) / "schema.json").string();
  audit.train_dir = (fs::path(opt.out_dir) / "train").string();
  audit.holdout_dir = (fs::path(opt.out_dir) / "holdout").string();
  audit.synth_dir = (fs::path(opt.out_dir) / "synth").string();
  audit.out_dir = (fs::path(opt.out_dir) / "audit").string();
  audit.seed = opt.spec.seed;
  audit.encoder.hidden_dim = 32;
  audit.encoder.epochs = 30;
  audit.encoder.seed = opt.spec.seed;
  audit.attacks = {AttackSpec{"mtmia", EmbeddingSpace::fused, {}, {}},
                   AttackSpec{"dcr", EmbeddingSpace::fused, {}, {}},
                   AttackSpec{"mc", EmbeddingSpace::fused, {}, {}},
                   AttackSpec{"kde", EmbeddingSpace::fused, {}, {}}};
  audit.fidelity = true;
  detail::write_text((fs::path(opt.out_dir) / "audit_config.json").string(),
                     audit.to_json().dump(2) + "\n");
}

}  // namespace relmia
