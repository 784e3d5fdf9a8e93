#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "relmia/encoder.hpp"
#include "relmia/errors.hpp"
#include "relmia/hetero_graph.hpp"
#include "relmia/matrix.hpp"

namespace relmia {

// Membership scores: one real number per entity, higher means more likely a
// training member. Thresholding and ROC analysis happen downstream.
struct ScoredEntity {
  std::string id;
  double score = 0.0;
  int label = -1;  // 1 member, 0 holdout, -1 unknown
};

struct AttackScoreSet {
  std::string attack;
  std::string space;  // parent | context | final | raw-row
  std::vector<ScoredEntity> entries;

  void validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& e : entries) {
      if (!std::isfinite(e.score))
        throw NumericError("attack '" + attack + "': non-finite score for entity '" + e.id + "'");
      if (!seen.insert(e.id).second)
        throw DataError("attack '" + attack + "': duplicate entity id '" + e.id + "'");
    }
  }
};

struct VectorSet {
  std::vector<std::string> ids;
  Matrix rows;
};

enum class EmbeddingSpace { parent, context, fused };

inline const char* to_string(EmbeddingSpace s) {
  switch (s) {
    case EmbeddingSpace::parent: return "parent";
    case EmbeddingSpace::context: return "context";
    default: return "final";
  }
}

inline EmbeddingSpace embedding_space_from_string(const std::string& s) {
  if (s == "parent") return EmbeddingSpace::parent;
  if (s == "context") return EmbeddingSpace::context;
  if (s == "final") return EmbeddingSpace::fused;
  throw ConfigError("unknown embedding space '" + s + "'");
}

inline const std::vector<double>& embedding_vector(const EntityEmbedding& e,
                                                   EmbeddingSpace s) {
  switch (s) {
    case EmbeddingSpace::parent: return e.parent;
    case EmbeddingSpace::context: return e.context;
    default: return e.fused;
  }
}

// The root row's encoded features; children are discarded. This is the
// single-table adaptation used by the baseline attacks.
inline std::vector<double> extract_parent_row(const EntitySubgraph& sub) {
  const Matrix& feats = sub.graph->features[sub.root_type];
  return std::vector<double>(feats.row(sub.root_index), feats.row(sub.root_index) + feats.cols);
}

inline VectorSet parent_rows(const std::vector<EntitySubgraph>& subs) {
  VectorSet out;
  if (subs.empty()) return out;
  const Matrix& feats = subs.front().graph->features[subs.front().root_type];
  out.rows = Matrix(subs.size(), feats.cols);
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const auto row = extract_parent_row(subs[i]);
    std::copy(row.begin(), row.end(), out.rows.row(i));
    out.ids.push_back(subs[i].entity_id());
  }
  return out;
}

// Distance to Closest Record: score = -min L2 distance to any reference row.
// Always <= 0, and exactly 0 iff the query matches a reference row.
inline AttackScoreSet dcr_score(const VectorSet& queries, const VectorSet& synth) {
  if (synth.rows.rows == 0) throw DataError("dcr: empty synthetic reference set");
  if (queries.rows.rows > 0 && queries.rows.cols != synth.rows.cols)
    throw DataError("dcr: query/reference dimensionality mismatch");
  AttackScoreSet out;
  out.attack = "dcr";
  out.space = "raw-row";
  out.entries.reserve(queries.rows.rows);
  for (std::size_t q = 0; q < queries.rows.rows; ++q) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < synth.rows.rows; ++s) {
      const double d2 = squared_distance(queries.rows.row(q), synth.rows.row(s),
                                         queries.rows.cols);
      if (d2 < best) best = d2;
    }
    out.entries.push_back({queries.ids[q], -std::sqrt(best), -1});
  }
  out.validate();
  return out;
}

// Median distance from each reference row to its nearest other reference row.
inline double median_nn_distance(const VectorSet& synth) {
  if (synth.rows.rows < 2)
    throw DataError("mc: radius heuristic needs at least 2 reference rows");
  std::vector<double> nn(synth.rows.rows, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < synth.rows.rows; ++i)
    for (std::size_t j = i + 1; j < synth.rows.rows; ++j) {
      const double d2 = squared_distance(synth.rows.row(i), synth.rows.row(j), synth.rows.cols);
      if (d2 < nn[i]) nn[i] = d2;
      if (d2 < nn[j]) nn[j] = d2;
    }
  std::sort(nn.begin(), nn.end());
  const std::size_t n = nn.size();
  const double med2 = (n % 2) ? nn[n / 2] : 0.5 * (nn[n / 2 - 1] + nn[n / 2]);
  return std::sqrt(med2);
}

// Monte Carlo density: fraction of reference rows within L2 radius of the
// query. Radius defaults to the median nearest-neighbour distance.
inline AttackScoreSet mc_score(const VectorSet& queries, const VectorSet& synth,
                               std::optional<double> radius = {}) {
  if (synth.rows.rows == 0) throw DataError("mc: empty synthetic reference set");
  if (queries.rows.rows > 0 && queries.rows.cols != synth.rows.cols)
    throw DataError("mc: query/reference dimensionality mismatch");
  const double eps = radius ? *radius : median_nn_distance(synth);
  const double eps2 = eps * eps;
  AttackScoreSet out;
  out.attack = "mc";
  out.space = "raw-row";
  out.entries.reserve(queries.rows.rows);
  for (std::size_t q = 0; q < queries.rows.rows; ++q) {
    std::size_t hits = 0;
    for (std::size_t s = 0; s < synth.rows.rows; ++s)
      if (squared_distance(queries.rows.row(q), synth.rows.row(s), queries.rows.cols) <= eps2)
        ++hits;
    out.entries.push_back(
        {queries.ids[q], static_cast<double>(hits) / static_cast<double>(synth.rows.rows), -1});
  }
  out.validate();
  return out;
}

// Log mean product-Gaussian kernel. Default per-dimension bandwidth is the
// Scott-style rule sigma_dim * n^(-1/(dim+4)), floored at 1e-6; a scalar
// bandwidth overrides every dimension.
inline AttackScoreSet kde_score(const VectorSet& queries, const VectorSet& synth,
                                std::optional<double> bandwidth = {}) {
  if (synth.rows.rows == 0) throw DataError("kde: empty synthetic reference set");
  if (queries.rows.rows > 0 && queries.rows.cols != synth.rows.cols)
    throw DataError("kde: query/reference dimensionality mismatch");
  const std::size_t dim = synth.rows.cols;
  const std::size_t n = synth.rows.rows;
  std::vector<double> h(dim, bandwidth ? *bandwidth : 0.0);
  if (!bandwidth) {
    const double factor =
        std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(dim) + 4.0));
    bool any_spread = false;
    for (std::size_t j = 0; j < dim; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += synth.rows(i, j);
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = synth.rows(i, j) - mean;
        ss += d * d;
      }
      const double sd = n >= 2 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
      if (sd > 0.0) any_spread = true;
      h[j] = std::max(1e-6, sd * factor);
    }
    if (!any_spread)
      throw NumericError("kde: degenerate density (reference data constant in every dimension)");
  }
  double log_norm = -0.5 * static_cast<double>(dim) * std::log(2.0 * 3.14159265358979323846);
  for (std::size_t j = 0; j < dim; ++j) log_norm -= std::log(h[j]);

  AttackScoreSet out;
  out.attack = "kde";
  out.space = "raw-row";
  out.entries.reserve(queries.rows.rows);
  std::vector<double> exponents(n);
  for (std::size_t q = 0; q < queries.rows.rows; ++q) {
    const double* qi = queries.rows.row(q);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n; ++s) {
      const double* si = synth.rows.row(s);
      double e = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double z = (qi[j] - si[j]) / h[j];
        e -= 0.5 * z * z;
      }
      exponents[s] = e;
      if (e > mx) mx = e;
    }
    double sum = 0.0;
    for (std::size_t s = 0; s < n; ++s) sum += std::exp(exponents[s] - mx);
    const double score = log_norm + mx + std::log(sum / static_cast<double>(n));
    out.entries.push_back({queries.ids[q], score, -1});
  }
  out.validate();
  return out;
}

// Nearest-synthetic-entity distance in a learned embedding space; reference
// embeddings are computed once by the caller and reused across spaces.
inline AttackScoreSet embedding_dcr_score(const std::vector<EntityEmbedding>& queries,
                                          const std::vector<EntityEmbedding>& synth,
                                          EmbeddingSpace space) {
  if (synth.empty()) throw DataError("mtmia: empty synthetic embedding set");
  AttackScoreSet out;
  out.attack = "mtmia";
  out.space = to_string(space);
  out.entries.reserve(queries.size());
  for (const auto& q : queries) {
    const auto& qv = embedding_vector(q, space);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : synth) {
      const auto& sv = embedding_vector(s, space);
      if (sv.size() != qv.size()) throw DataError("mtmia: embedding dimensionality mismatch");
      const double d2 = squared_distance(qv.data(), sv.data(), qv.size());
      if (d2 < best) best = d2;
    }
    out.entries.push_back({q.id, -std::sqrt(best), -1});
  }
  out.validate();
  return out;
}

inline AttackScoreSet mtmia_score(const EncoderParams& params, const HeteroGraph& query_graph,
                                  const std::vector<EntitySubgraph>& queries,
                                  const HeteroGraph& synth_graph,
                                  const std::vector<EntitySubgraph>& synth,
                                  EmbeddingSpace space = EmbeddingSpace::fused) {
  if (synth.empty()) throw DataError("mtmia: empty synthetic entity set");
  const auto query_emb = encode_entities(params, query_graph, queries);
  const auto synth_emb = encode_entities(params, synth_graph, synth);
  return embedding_dcr_score(query_emb, synth_emb, space);
}

// Child-table attack: each child row of the chosen type is scored on its own
// and an entity inherits the maximum over its rows. Entities without rows of
// that type score just below every scored entity.
inline AttackScoreSet child_table_score(
    const std::vector<EntitySubgraph>& queries, std::size_t child_type,
    const VectorSet& synth_rows,
    const std::function<AttackScoreSet(const VectorSet&, const VectorSet&)>& base) {
  VectorSet rows;
  std::vector<std::size_t> owner;
  if (!queries.empty()) {
    const HeteroGraph& g = *queries.front().graph;
    std::size_t total = 0;
    for (const auto& q : queries) total += q.nodes[child_type].size();
    rows.rows = Matrix(total, g.features[child_type].cols);
    std::size_t r = 0;
    for (std::size_t q = 0; q < queries.size(); ++q) {
      for (const std::uint32_t idx : queries[q].nodes[child_type]) {
        const double* src = g.features[child_type].row(idx);
        std::copy(src, src + rows.rows.cols, rows.rows.row(r));
        rows.ids.push_back("row" + std::to_string(r));
        owner.push_back(q);
        ++r;
      }
    }
  }
  if (rows.rows.rows == 0) throw DataError("child_table_score: no child rows to score");
  const AttackScoreSet row_scores = base(rows, synth_rows);

  constexpr double kUnset = -std::numeric_limits<double>::infinity();
  std::vector<double> best(queries.size(), kUnset);
  for (std::size_t r = 0; r < row_scores.entries.size(); ++r)
    best[owner[r]] = std::max(best[owner[r]], row_scores.entries[r].score);
  double floor = std::numeric_limits<double>::infinity();
  for (const double b : best)
    if (b != kUnset && b < floor) floor = b;

  AttackScoreSet out;
  out.attack = row_scores.attack + "-child";
  out.space = "raw-row";
  for (std::size_t q = 0; q < queries.size(); ++q)
    out.entries.push_back(
        {queries[q].entity_id(), best[q] == kUnset ? floor - 1.0 : best[q], -1});
  out.validate();
  return out;
}

}  // namespace relmia
