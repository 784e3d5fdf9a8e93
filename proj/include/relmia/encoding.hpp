#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "relmia/database.hpp"
#include "relmia/matrix.hpp"
#include "relmia/schema.hpp"

namespace relmia {

// Feature encodings are fitted on the synthetic database only and then applied
// to every database under audit, so no statistics of the real data can leak
// into the transform.

struct NumericEncoding {
  double mean = 0.0;
  double stddev = 1.0;
  bool fallback = false;  // stddev substituted with 1 (zero variance / too few values)
};

struct CategoricalEncoding {
  std::vector<std::string> categories;  // sorted lexicographically
  std::unordered_map<std::string, std::size_t> code;
};

struct ColumnEncoding {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  NumericEncoding num;
  CategoricalEncoding cat;
};

struct EncodingSpec {
  std::vector<std::vector<ColumnEncoding>> tables;  // [table][feature column]
};

// Per-column counts of imputed and out-of-vocabulary cells seen while encoding.
struct IngestionReport {
  struct Entry {
    std::string table, column;
    std::size_t missing = 0;
    std::size_t unseen = 0;
  };
  std::vector<Entry> entries;

  std::size_t total_missing() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.missing;
    return n;
  }
  std::size_t total_unseen() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.unseen;
    return n;
  }

  nlohmann::json to_json() const {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& e : entries)
      cols.push_back({{"table", e.table},
                      {"column", e.column},
                      {"missing", e.missing},
                      {"unseen_categories", e.unseen}});
    return {{"columns", cols},
            {"total_missing", total_missing()},
            {"total_unseen_categories", total_unseen()}};
  }
};

inline EncodingSpec fit_encoding(const RelationalSchema& schema,
                                 const DatabaseInstance& synth) {
  if (synth.tables.size() != schema.tables.size())
    throw DataError("fit_encoding: database does not match schema");
  EncodingSpec spec;
  spec.tables.resize(schema.tables.size());
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    const auto feats = schema.tables[ti].feature_columns();
    const auto& data = synth.tables[ti];
    for (std::size_t j = 0; j < feats.size(); ++j) {
      ColumnEncoding enc;
      enc.name = feats[j].name;
      enc.kind = feats[j].kind;
      const Column& col = data.features[j];
      if (enc.kind == ColumnKind::numeric) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t r = 0; r < col.size(); ++r) {
          if (col.missing[r]) continue;
          sum += col.numeric[r];
          ++n;
        }
        enc.num.mean = n ? sum / static_cast<double>(n) : 0.0;
        double ss = 0.0;
        for (std::size_t r = 0; r < col.size(); ++r) {
          if (col.missing[r]) continue;
          const double d = col.numeric[r] - enc.num.mean;
          ss += d * d;
        }
        // sample (n-1) standard deviation; constant or near-empty columns fall
        // back to 1 so the transform stays defined
        if (n >= 2 && ss > 0.0) {
          enc.num.stddev = std::sqrt(ss / static_cast<double>(n - 1));
        } else {
          enc.num.stddev = 1.0;
          enc.num.fallback = true;
        }
      } else {
        std::vector<std::string> values;
        for (std::size_t r = 0; r < col.size(); ++r)
          if (!col.missing[r]) values.push_back(col.categorical[r]);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        enc.cat.categories = std::move(values);
        for (std::size_t c = 0; c < enc.cat.categories.size(); ++c)
          enc.cat.code.emplace(enc.cat.categories[c], c);
      }
      spec.tables[ti].push_back(std::move(enc));
    }
  }
  return spec;
}

// Numeric: (x - mean) / std. Categorical: ordinal code scaled into [0,1] by
// max(1, |categories|-1); a value unseen at fit time gets code |categories|.
// Missing cells encode to 0 and are counted in the report.
inline std::vector<Matrix> apply_encoding(const EncodingSpec& spec,
                                          const RelationalSchema& schema,
                                          const DatabaseInstance& db,
                                          IngestionReport* report = nullptr) {
  if (db.tables.size() != spec.tables.size())
    throw DataError("apply_encoding: database does not match encoding spec");
  std::vector<Matrix> out(db.tables.size());
  for (std::size_t ti = 0; ti < db.tables.size(); ++ti) {
    const auto& encs = spec.tables[ti];
    const auto& data = db.tables[ti];
    Matrix m(data.row_count, encs.size());
    for (std::size_t j = 0; j < encs.size(); ++j) {
      const ColumnEncoding& enc = encs[j];
      const Column& col = data.features[j];
      IngestionReport::Entry entry;
      entry.table = schema.tables[ti].name;
      entry.column = enc.name;
      if (enc.kind == ColumnKind::numeric) {
        for (std::size_t r = 0; r < data.row_count; ++r) {
          if (col.missing[r]) {
            m(r, j) = 0.0;
            ++entry.missing;
          } else {
            m(r, j) = (col.numeric[r] - enc.num.mean) / enc.num.stddev;
          }
        }
      } else {
        const double denom =
            std::max<std::size_t>(1, enc.cat.categories.empty()
                                         ? 1
                                         : enc.cat.categories.size() - 1);
        for (std::size_t r = 0; r < data.row_count; ++r) {
          if (col.missing[r]) {
            m(r, j) = 0.0;
            ++entry.missing;
            continue;
          }
          auto it = enc.cat.code.find(col.categorical[r]);
          std::size_t code;
          if (it == enc.cat.code.end()) {
            code = enc.cat.categories.size();
            ++entry.unseen;
          } else {
            code = it->second;
          }
          m(r, j) = static_cast<double>(code) / static_cast<double>(denom);
        }
      }
      if (report) report->entries.push_back(std::move(entry));
    }
    out[ti] = std::move(m);
  }
  return out;
}

}  // namespace relmia
