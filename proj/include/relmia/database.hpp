#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "relmia/csv.hpp"
#include "relmia/errors.hpp"
#include "relmia/schema.hpp"

namespace relmia {

// One feature column of one table. Numeric cells live in `numeric`,
// categorical cells in `categorical`; `missing[i]` marks gaps in either.
struct Column {
  ColumnKind kind = ColumnKind::numeric;
  std::vector<double> numeric;
  std::vector<std::string> categorical;
  std::vector<std::uint8_t> missing;

  std::size_t size() const { return missing.size(); }
};

struct TableData {
  std::size_t row_count = 0;
  std::vector<std::string> pk;                    // primary key value per row
  std::vector<std::vector<std::string>> fk;       // [fk index][row]
  std::vector<Column> features;                   // schema feature-column order
};

struct DatabaseInstance {
  std::vector<TableData> tables;  // aligned with schema.tables
};

namespace detail {

inline double parse_numeric_cell(const std::string& cell, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0')
    throw DataError(where + ": cannot parse numeric value '" + cell + "'");
  return v;
}

}  // namespace detail

// Primary keys unique per table; every foreign key resolves. Violations are
// ingestion errors naming the table and row.
inline void validate_database(const RelationalSchema& schema, const DatabaseInstance& db) {
  if (db.tables.size() != schema.tables.size())
    throw DataError("database: table count does not match schema");
  std::vector<std::unordered_set<std::string>> pk_sets(schema.tables.size());
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    const auto& spec = schema.tables[ti];
    const auto& data = db.tables[ti];
    auto& seen = pk_sets[ti];
    seen.reserve(data.row_count * 2);
    for (std::size_t r = 0; r < data.row_count; ++r) {
      if (!seen.insert(data.pk[r]).second)
        throw DataError("table '" + spec.name + "' row " + std::to_string(r) +
                        ": duplicate primary key '" + data.pk[r] + "'");
    }
  }
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    const auto& spec = schema.tables[ti];
    const auto& data = db.tables[ti];
    for (std::size_t f = 0; f < spec.foreign_keys.size(); ++f) {
      const std::size_t parent = schema.table_index(spec.foreign_keys[f].references);
      for (std::size_t r = 0; r < data.row_count; ++r) {
        if (!pk_sets[parent].count(data.fk[f][r]))
          throw DataError("table '" + spec.name + "' row " + std::to_string(r) +
                          ": foreign key '" + spec.foreign_keys[f].column +
                          "' value '" + data.fk[f][r] + "' does not resolve in table '" +
                          spec.foreign_keys[f].references + "'");
      }
    }
  }
}

inline TableData load_table_csv(const TableSpec& spec, const std::string& path,
                                RunTrace* trace = nullptr) {
  const auto rows = read_csv(path, trace);
  if (rows.empty()) throw DataError(path + ": missing header row");
  const auto& header = rows.front();
  std::unordered_map<std::string, std::size_t> col_of;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (!col_of.emplace(header[j], j).second)
      throw DataError(path + ": duplicate header column '" + header[j] + "'");
  }
  auto locate = [&](const std::string& name) {
    auto it = col_of.find(name);
    if (it == col_of.end())
      throw DataError(path + ": column '" + name + "' missing from header");
    return it->second;
  };

  const std::size_t pk_col = locate(spec.primary_key);
  std::vector<std::size_t> fk_cols;
  for (const auto& fk : spec.foreign_keys) fk_cols.push_back(locate(fk.column));
  const auto feats = spec.feature_columns();
  std::vector<std::size_t> feat_cols;
  for (const auto& c : feats) feat_cols.push_back(locate(c.name));

  TableData data;
  data.row_count = rows.size() - 1;
  data.pk.reserve(data.row_count);
  data.fk.assign(fk_cols.size(), {});
  for (auto& v : data.fk) v.reserve(data.row_count);
  data.features.resize(feats.size());
  for (std::size_t j = 0; j < feats.size(); ++j) {
    data.features[j].kind = feats[j].kind;
    data.features[j].missing.reserve(data.row_count);
  }

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size())
      throw DataError(path + " row " + std::to_string(r - 1) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(row.size()));
    if (row[pk_col].empty())
      throw DataError(path + " row " + std::to_string(r - 1) + ": empty primary key");
    data.pk.push_back(row[pk_col]);
    for (std::size_t f = 0; f < fk_cols.size(); ++f) {
      if (row[fk_cols[f]].empty())
        throw DataError(path + " row " + std::to_string(r - 1) + ": empty foreign key '" +
                        spec.foreign_keys[f].column + "'");
      data.fk[f].push_back(row[fk_cols[f]]);
    }
    for (std::size_t j = 0; j < feats.size(); ++j) {
      Column& col = data.features[j];
      const std::string& cell = row[feat_cols[j]];
      const bool missing = cell.empty();
      col.missing.push_back(missing ? 1 : 0);
      if (col.kind == ColumnKind::numeric) {
        col.numeric.push_back(
            missing ? 0.0
                    : detail::parse_numeric_cell(
                          cell, path + " row " + std::to_string(r - 1) + " column '" +
                                    feats[j].name + "'"));
      } else {
        col.categorical.push_back(missing ? std::string() : cell);
      }
    }
  }
  return data;
}

// Loads <dir>/<table>.csv for every schema table and validates keys.
inline DatabaseInstance load_database(const RelationalSchema& schema, const std::string& dir,
                                      RunTrace* trace = nullptr) {
  DatabaseInstance db;
  for (const auto& spec : schema.tables) {
    const auto path = (std::filesystem::path(dir) / (spec.name + ".csv")).string();
    db.tables.push_back(load_table_csv(spec, path, trace));
  }
  validate_database(schema, db);
  return db;
}

inline void save_database(const RelationalSchema& schema, const DatabaseInstance& db,
                          const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    const auto& spec = schema.tables[ti];
    const auto& data = db.tables[ti];
    std::vector<std::string> header;
    header.push_back(spec.primary_key);
    for (const auto& fk : spec.foreign_keys) header.push_back(fk.column);
    const auto feats = spec.feature_columns();
    for (const auto& c : feats) header.push_back(c.name);

    std::vector<std::vector<std::string>> rows(data.row_count);
    for (std::size_t r = 0; r < data.row_count; ++r) {
      auto& row = rows[r];
      row.reserve(header.size());
      row.push_back(data.pk[r]);
      for (std::size_t f = 0; f < data.fk.size(); ++f) row.push_back(data.fk[f][r]);
      for (std::size_t j = 0; j < data.features.size(); ++j) {
        const Column& col = data.features[j];
        if (col.missing[r]) {
          row.emplace_back();
        } else if (col.kind == ColumnKind::numeric) {
          row.push_back(format_double(col.numeric[r]));
        } else {
          row.push_back(col.categorical[r]);
        }
      }
    }
    write_csv((std::filesystem::path(dir) / (spec.name + ".csv")).string(), header, rows);
  }
}

}  // namespace relmia
