#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "relmia/attacks.hpp"
#include "relmia/database.hpp"
#include "relmia/errors.hpp"
#include "relmia/hetero_graph.hpp"
#include "relmia/schema.hpp"

namespace relmia {

//===--------------------------------------------------------------------===//
// Attack success: ROC, AUC, TPR at fixed FPR budgets
//===--------------------------------------------------------------------===//

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

struct EvalReport {
  double auc = 0.0;
  double tpr_at_0 = 0.0;
  double tpr_at_1e3 = 0.0;  // FPR <= 1e-3
  double tpr_at_1e2 = 0.0;  // FPR <= 1e-2
  std::size_t members = 0;
  std::size_t nonmembers = 0;
  std::vector<RocPoint> roc;

  nlohmann::json to_json(bool include_roc = true) const {
    nlohmann::json j{{"auc", auc},
                     {"tpr_at_0", tpr_at_0},
                     {"tpr_at_1e-3", tpr_at_1e3},
                     {"tpr_at_1e-2", tpr_at_1e2},
                     {"members", members},
                     {"nonmembers", nonmembers}};
    if (include_roc) {
      nlohmann::json points = nlohmann::json::array();
      for (const auto& pt : roc)
        points.push_back({{"fpr", pt.fpr}, {"tpr", pt.tpr}, {"threshold", pt.threshold}});
      j["roc"] = points;
    }
    return j;
  }
};

// AUC is the Mann-Whitney statistic with ties counted one half, computed from
// average ranks; this matches the pairwise-comparison definition exactly. ROC
// points sweep the unique scores descending with predict-positive meaning
// score >= threshold; TPR at budget alpha is the maximum TPR among operating
// points with empirical FPR <= alpha (zero if none qualifies).
inline EvalReport roc_and_auc(const AttackScoreSet& scores) {
  std::vector<std::pair<double, int>> labelled;
  for (const auto& e : scores.entries) {
    if (e.label != 0 && e.label != 1)
      throw DataError("roc_and_auc: entity '" + e.id + "' has no membership label");
    if (!std::isfinite(e.score))
      throw NumericError("roc_and_auc: non-finite score for entity '" + e.id + "'");
    labelled.emplace_back(e.score, e.label);
  }
  std::size_t np = 0, nn = 0;
  for (const auto& [s, l] : labelled) (l ? np : nn) += 1;
  if (np == 0 || nn == 0)
    throw DataError("roc_and_auc: need both member and holdout entities");

  std::sort(labelled.begin(), labelled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  EvalReport rep;
  rep.members = np;
  rep.nonmembers = nn;

  // average ranks over tie groups (ascending); rank sum of the positives
  double rank_sum_pos = 0.0;
  for (std::size_t i = 0; i < labelled.size();) {
    std::size_t j = i;
    while (j < labelled.size() && labelled[j].first == labelled[i].first) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (labelled[k].second) rank_sum_pos += avg_rank;
    i = j;
  }
  const double npd = static_cast<double>(np), nnd = static_cast<double>(nn);
  rep.auc = (rank_sum_pos - npd * (npd + 1.0) / 2.0) / (npd * nnd);

  // ROC sweep, descending scores
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = labelled.size(); i > 0;) {
    std::size_t j = i;
    const double threshold = labelled[i - 1].first;
    while (i > 0 && labelled[i - 1].first == threshold) {
      if (labelled[i - 1].second) ++tp;
      else ++fp;
      --i;
    }
    (void)j;
    rep.roc.push_back({static_cast<double>(fp) / nnd, static_cast<double>(tp) / npd, threshold});
  }

  auto tpr_at = [&](double alpha) {
    double best = 0.0;
    for (const auto& pt : rep.roc)
      if (pt.fpr <= alpha && pt.tpr > best) best = pt.tpr;
    return best;
  };
  rep.tpr_at_0 = tpr_at(0.0);
  rep.tpr_at_1e3 = tpr_at(1e-3);
  rep.tpr_at_1e2 = tpr_at(1e-2);
  return rep;
}

//===--------------------------------------------------------------------===//
// Fidelity: marginal, cardinality and cross-column agreement, all in [0,1]
//===--------------------------------------------------------------------===//

// 1 - sup |F_a - F_b| over the two empirical CDFs, computed exactly with
// integer step counts.
inline double ks_complement(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DataError("ks_complement: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t n = a.size(), m = b.size();
  std::size_t i = 0, j = 0;
  long long worst = 0;
  const long long ln = static_cast<long long>(n), lm = static_cast<long long>(m);
  while (i < n || j < m) {
    double x;
    if (i < n && (j >= m || a[i] <= b[j])) x = a[i];
    else x = b[j];
    while (i < n && a[i] == x) ++i;
    while (j < m && b[j] == x) ++j;
    const long long diff = std::llabs(static_cast<long long>(i) * lm -
                                      static_cast<long long>(j) * ln);
    if (diff > worst) worst = diff;
  }
  return 1.0 - static_cast<double>(worst) / static_cast<double>(ln * lm);
}

// 1 - total variation distance between the two empirical category
// distributions, over the union of categories.
inline double tv_complement(const std::vector<std::string>& a,
                            const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) throw DataError("tv_complement: empty sample");
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& v : a) counts[v].first += 1;
  for (const auto& v : b) counts[v].second += 1;
  double dist = 0.0;
  for (const auto& [cat, c] : counts)
    dist += std::abs(static_cast<double>(c.first) / static_cast<double>(a.size()) -
                     static_cast<double>(c.second) / static_cast<double>(b.size()));
  return 1.0 - 0.5 * dist;
}

struct FidelityDetail {
  nlohmann::json columns = nlohmann::json::object();    // one-way per column
  nlohmann::json relations = nlohmann::json::object();  // cardinality per relation
  nlohmann::json pairs = nlohmann::json::object();      // k-hop per pair
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<double> nonmissing_numeric(const Column& c) {
  std::vector<double> out;
  out.reserve(c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    if (!c.missing[i]) out.push_back(c.numeric[i]);
  return out;
}

inline std::vector<std::string> nonmissing_categorical(const Column& c) {
  std::vector<std::string> out;
  out.reserve(c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    if (!c.missing[i]) out.push_back(c.categorical[i]);
  return out;
}

inline bool pearson(const std::vector<double>& x, const std::vector<double>& y, double* rho) {
  const std::size_t n = x.size();
  if (n < 2) return false;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return false;
  *rho = sxy / std::sqrt(sxx * syy);
  return true;
}

}  // namespace detail

// Mean over all non-key columns of all tables: KS complement for numeric
// columns, TV complement for categorical ones. Empty tables are skipped with
// a warning.
inline double one_way_fidelity(const RelationalSchema& schema, const DatabaseInstance& real,
                               const DatabaseInstance& synth, FidelityDetail* detail = nullptr) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    const auto feats = schema.tables[ti].feature_columns();
    if (real.tables[ti].row_count == 0 || synth.tables[ti].row_count == 0) {
      if (detail)
        detail->warnings.push_back("one_way: table '" + schema.tables[ti].name +
                                   "' empty on one side, columns skipped");
      continue;
    }
    for (std::size_t j = 0; j < feats.size(); ++j) {
      const std::string key = schema.tables[ti].name + "." + feats[j].name;
      double score;
      if (feats[j].kind == ColumnKind::numeric) {
        auto a = detail::nonmissing_numeric(real.tables[ti].features[j]);
        auto b = detail::nonmissing_numeric(synth.tables[ti].features[j]);
        if (a.empty() || b.empty()) {
          if (detail) detail->warnings.push_back("one_way: column '" + key + "' all-missing, skipped");
          continue;
        }
        score = ks_complement(std::move(a), std::move(b));
      } else {
        auto a = detail::nonmissing_categorical(real.tables[ti].features[j]);
        auto b = detail::nonmissing_categorical(synth.tables[ti].features[j]);
        if (a.empty() || b.empty()) {
          if (detail) detail->warnings.push_back("one_way: column '" + key + "' all-missing, skipped");
          continue;
        }
        score = tv_complement(a, b);
      }
      if (detail) detail->columns[key] = score;
      sum += score;
      ++count;
    }
  }
  if (count == 0) throw DataError("one_way_fidelity: no scorable columns");
  return sum / static_cast<double>(count);
}

// Children-per-parent count distributions compared per relation via the KS
// complement; parents with zero children are included.
inline double cardinality_fidelity(const RelationalSchema& schema, const HeteroGraph& real,
                                   const HeteroGraph& synth, FidelityDetail* detail = nullptr) {
  if (real.relations.empty())
    throw DataError("cardinality_fidelity: schema has no foreign key relation");
  auto group_sizes = [](const HeteroGraph& g, std::size_t rel) {
    std::vector<double> counts(g.num_nodes(g.relations[rel].dst_type), 0.0);
    for (const auto& [s, d] : g.relations[rel].edges) counts[d] += 1.0;
    return counts;
  };
  double sum = 0.0;
  for (std::size_t r = 0; r < real.relations.size(); ++r) {
    double score = 0.0;
    auto a = group_sizes(real, r);
    auto b = group_sizes(synth, r);
    if (a.empty() || b.empty()) {
      if (detail)
        detail->warnings.push_back("cardinality: relation '" + real.relations[r].name +
                                   "' has no parents on one side, scored 0");
    } else {
      score = ks_complement(std::move(a), std::move(b));
    }
    if (detail) detail->relations[real.relations[r].name] = score;
    sum += score;
  }
  return sum / static_cast<double>(real.relations.size());
}

namespace detail {

struct PairedColumns {
  std::vector<std::pair<const Column*, const Column*>> cols;  // (first, second)
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // row index pairs
};

// Scores one column pair over paired rows; returns false if skipped.
inline bool score_pair(const Column& x_real, const Column& y_real, const Column& x_synth,
                       const Column& y_synth,
                       const std::vector<std::pair<std::uint32_t, std::uint32_t>>& real_pairs,
                       const std::vector<std::pair<std::uint32_t, std::uint32_t>>& synth_pairs,
                       double* score, std::string* why) {
  if (x_real.kind != y_real.kind) {
    *why = "mixed numeric/categorical pair";
    return false;
  }
  if (x_real.kind == ColumnKind::numeric) {
    auto collect = [](const Column& x, const Column& y,
                      const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
                      std::vector<double>* xs, std::vector<double>* ys) {
      for (const auto& [i, j] : pairs) {
        if (x.missing[i] || y.missing[j]) continue;
        xs->push_back(x.numeric[i]);
        ys->push_back(y.numeric[j]);
      }
    };
    std::vector<double> xr, yr, xs, ys;
    collect(x_real, y_real, real_pairs, &xr, &yr);
    collect(x_synth, y_synth, synth_pairs, &xs, &ys);
    double rho_real, rho_synth;
    if (!pearson(xr, yr, &rho_real) || !pearson(xs, ys, &rho_synth)) {
      *why = "zero variance or too few rows";
      return false;
    }
    *score = 1.0 - std::abs(rho_real - rho_synth) / 2.0;
    return true;
  }
  auto joint = [](const Column& x, const Column& y,
                  const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs) {
    std::vector<std::string> out;
    for (const auto& [i, j] : pairs) {
      if (x.missing[i] || y.missing[j]) continue;
      out.push_back(x.categorical[i] + "\x1f" + y.categorical[j]);
    }
    return out;
  };
  const auto a = joint(x_real, y_real, real_pairs);
  const auto b = joint(x_synth, y_synth, synth_pairs);
  if (a.empty() || b.empty()) {
    *why = "no jointly observed rows";
    return false;
  }
  *score = tv_complement(a, b);
  return true;
}

}  // namespace detail

// Column-pair dependence agreement at hop distance k. k = 0 pairs columns
// within one table; k = 1 pairs parent and child columns joined through one
// foreign key, one observation per child row.
inline double khop_correlation(const RelationalSchema& schema, const DatabaseInstance& real_db,
                               const HeteroGraph& real_g, const DatabaseInstance& synth_db,
                               const HeteroGraph& synth_g, int k,
                               FidelityDetail* detail = nullptr) {
  if (k != 0 && k != 1) throw ConfigError("khop_correlation: k must be 0 or 1");
  double sum = 0.0;
  std::size_t count = 0;
  auto consider = [&](const std::string& key, const Column& xr, const Column& yr,
                      const Column& xs, const Column& ys,
                      const std::vector<std::pair<std::uint32_t, std::uint32_t>>& rp,
                      const std::vector<std::pair<std::uint32_t, std::uint32_t>>& sp) {
    double score;
    std::string why;
    if (detail::score_pair(xr, yr, xs, ys, rp, sp, &score, &why)) {
      if (detail) detail->pairs[key] = score;
      sum += score;
      ++count;
    } else if (detail) {
      detail->pairs[key] = nullptr;
      detail->warnings.push_back("khop: pair '" + key + "' skipped (" + why + ")");
    }
  };

  if (k == 0) {
    for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
      const auto feats = schema.tables[ti].feature_columns();
      std::vector<std::pair<std::uint32_t, std::uint32_t>> rp, sp;
      for (std::uint32_t r = 0; r < real_db.tables[ti].row_count; ++r) rp.emplace_back(r, r);
      for (std::uint32_t r = 0; r < synth_db.tables[ti].row_count; ++r) sp.emplace_back(r, r);
      for (std::size_t i = 0; i < feats.size(); ++i)
        for (std::size_t j = i + 1; j < feats.size(); ++j)
          consider("0-hop:" + schema.tables[ti].name + "." + feats[i].name + "/" +
                       feats[j].name,
                   real_db.tables[ti].features[i], real_db.tables[ti].features[j],
                   synth_db.tables[ti].features[i], synth_db.tables[ti].features[j], rp, sp);
    }
  } else {
    for (std::size_t ri = 0; ri < real_g.relations.size(); ++ri) {
      const auto& rel = real_g.relations[ri];
      const auto parent_feats = schema.tables[rel.dst_type].feature_columns();
      const auto child_feats = schema.tables[rel.src_type].feature_columns();
      // one observation per child row: (parent row, child row)
      std::vector<std::pair<std::uint32_t, std::uint32_t>> rp, sp;
      for (const auto& [s, d] : rel.edges) rp.emplace_back(d, s);
      for (const auto& [s, d] : synth_g.relations[ri].edges) sp.emplace_back(d, s);
      for (std::size_t i = 0; i < parent_feats.size(); ++i)
        for (std::size_t j = 0; j < child_feats.size(); ++j)
          consider("1-hop:" + rel.name + ":" + parent_feats[i].name + "/" +
                       child_feats[j].name,
                   real_db.tables[rel.dst_type].features[i],
                   real_db.tables[rel.src_type].features[j],
                   synth_db.tables[rel.dst_type].features[i],
                   synth_db.tables[rel.src_type].features[j], rp, sp);
    }
  }
  if (count == 0) {
    if (detail)
      detail->warnings.push_back("khop: no scorable pairs at k=" + std::to_string(k));
    throw DataError("khop_correlation: no scorable column pairs at k=" + std::to_string(k));
  }
  return sum / static_cast<double>(count);
}

inline double avg_hop(const std::vector<double>& hop_scores) {
  if (hop_scores.empty()) throw DataError("avg_hop: no hop scores");
  double s = 0.0;
  for (const double v : hop_scores) s += v;
  return s / static_cast<double>(hop_scores.size());
}

struct FidelityReport {
  double one_way = 0.0;
  double cardinality = 0.0;
  std::map<int, double> hops;
  double avg_hop_score = 0.0;
  FidelityDetail detail;

  nlohmann::json to_json() const {
    nlohmann::json hop_json = nlohmann::json::object();
    for (const auto& [k, v] : hops) hop_json[std::to_string(k)] = v;
    return {{"one_way", one_way},
            {"cardinality", cardinality},
            {"hops", hop_json},
            {"avg_hop", avg_hop_score},
            {"detail",
             {{"columns", detail.columns},
              {"relations", detail.relations},
              {"pairs", detail.pairs}}},
            {"warnings", detail.warnings}};
  }
};

inline FidelityReport fidelity_report(const RelationalSchema& schema,
                                      const DatabaseInstance& real_db, const HeteroGraph& real_g,
                                      const DatabaseInstance& synth_db,
                                      const HeteroGraph& synth_g) {
  FidelityReport rep;
  rep.one_way = one_way_fidelity(schema, real_db, synth_db, &rep.detail);
  rep.cardinality = cardinality_fidelity(schema, real_g, synth_g, &rep.detail);
  std::vector<double> hop_values;
  for (const int k : {0, 1}) {
    if (k == 1 && real_g.relations.empty()) continue;
    try {
      const double v =
          khop_correlation(schema, real_db, real_g, synth_db, synth_g, k, &rep.detail);
      rep.hops[k] = v;
      hop_values.push_back(v);
    } catch (const DataError&) {
      // warning already recorded in detail
    }
  }
  rep.avg_hop_score = avg_hop(hop_values);
  return rep;
}

}  // namespace relmia
