#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "relmia/csv.hpp"
#include "relmia/errors.hpp"

namespace relmia {

enum class ColumnKind { numeric, categorical };

inline const char* to_string(ColumnKind k) {
  return k == ColumnKind::numeric ? "numeric" : "categorical";
}

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
};

struct ForeignKeySpec {
  std::string column;      // column in the owning (child) table
  std::string references;  // referenced (parent) table name
};

struct TableSpec {
  std::string name;
  std::vector<ColumnSpec> columns;
  std::string primary_key;
  std::vector<ForeignKeySpec> foreign_keys;

  bool is_key_column(const std::string& col) const {
    if (col == primary_key) return true;
    for (const auto& fk : foreign_keys)
      if (fk.column == col) return true;
    return false;
  }

  // Non-key columns in declaration order. These are the modelled features.
  std::vector<ColumnSpec> feature_columns() const {
    std::vector<ColumnSpec> out;
    for (const auto& c : columns)
      if (!is_key_column(c.name)) out.push_back(c);
    return out;
  }
};

// Declarative description of a relational database: tables, keys and the
// designated root (user) table from which entities are decomposed.
struct RelationalSchema {
  std::vector<TableSpec> tables;
  std::string root_table;

  std::size_t table_index(const std::string& name) const {
    for (std::size_t i = 0; i < tables.size(); ++i)
      if (tables[i].name == name) return i;
    throw ConfigError("schema: unknown table '" + name + "'");
  }

  std::size_t root_index() const { return table_index(root_table); }

  void validate() const {
    if (tables.empty()) throw ConfigError("schema: no tables");
    for (const auto& t : tables) {
      if (t.name.empty()) throw ConfigError("schema: empty table name");
      for (std::size_t i = 0; i < t.columns.size(); ++i)
        for (std::size_t j = i + 1; j < t.columns.size(); ++j)
          if (t.columns[i].name == t.columns[j].name)
            throw ConfigError("schema: duplicate column '" + t.columns[i].name +
                              "' in table '" + t.name + "'");
      if (!has_column(t, t.primary_key))
        throw ConfigError("schema: primary key '" + t.primary_key +
                          "' not among columns of table '" + t.name + "'");
      for (const auto& fk : t.foreign_keys) {
        if (!has_column(t, fk.column))
          throw ConfigError("schema: foreign key column '" + fk.column +
                            "' not among columns of table '" + t.name + "'");
        if (fk.column == t.primary_key)
          throw ConfigError("schema: foreign key column '" + fk.column +
                            "' collides with primary key of table '" + t.name + "'");
        bool found = false;
        for (const auto& other : tables)
          if (other.name == fk.references) found = true;
        if (!found)
          throw ConfigError("schema: table '" + t.name + "' references unknown table '" +
                            fk.references + "'");
      }
    }
    bool root_found = false;
    for (const auto& t : tables)
      if (t.name == root_table) root_found = true;
    if (!root_found)
      throw ConfigError("schema: root_table '" + root_table + "' not among tables");

    // The table graph (tables as vertices, FK links as edges) must be connected.
    std::vector<std::size_t> comp(tables.size());
    for (std::size_t i = 0; i < comp.size(); ++i) comp[i] = i;
    auto find = [&](std::size_t x) {
      while (comp[x] != x) x = comp[x] = comp[comp[x]];
      return x;
    };
    for (std::size_t i = 0; i < tables.size(); ++i)
      for (const auto& fk : tables[i].foreign_keys)
        comp[find(i)] = find(table_index(fk.references));
    const std::size_t c0 = find(0);
    for (std::size_t i = 1; i < tables.size(); ++i)
      if (find(i) != c0)
        throw ConfigError("schema: table graph is not connected (table '" +
                          tables[i].name + "' unreachable)");
  }

 private:
  static bool has_column(const TableSpec& t, const std::string& name) {
    for (const auto& c : t.columns)
      if (c.name == name) return true;
    return false;
  }
};

inline nlohmann::json schema_to_json(const RelationalSchema& s) {
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& t : s.tables) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : t.columns)
      cols.push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
    nlohmann::json fks = nlohmann::json::array();
    for (const auto& fk : t.foreign_keys)
      fks.push_back({{"column", fk.column}, {"references", fk.references}});
    tables.push_back({{"name", t.name},
                      {"columns", cols},
                      {"primary_key", t.primary_key},
                      {"foreign_keys", fks}});
  }
  return {{"tables", tables}, {"root_table", s.root_table}};
}

inline RelationalSchema schema_from_json(const nlohmann::json& j) {
  RelationalSchema s;
  try {
    for (const auto& jt : j.at("tables")) {
      TableSpec t;
      t.name = jt.at("name").get<std::string>();
      for (const auto& jc : jt.at("columns")) {
        ColumnSpec c;
        c.name = jc.at("name").get<std::string>();
        const std::string kind = jc.at("kind").get<std::string>();
        if (kind == "numeric") c.kind = ColumnKind::numeric;
        else if (kind == "categorical") c.kind = ColumnKind::categorical;
        else throw ConfigError("schema: unknown column kind '" + kind + "'");
        t.columns.push_back(std::move(c));
      }
      t.primary_key = jt.at("primary_key").get<std::string>();
      if (jt.contains("foreign_keys")) {
        for (const auto& jf : jt.at("foreign_keys")) {
          t.foreign_keys.push_back({jf.at("column").get<std::string>(),
                                    jf.at("references").get<std::string>()});
        }
      }
      s.tables.push_back(std::move(t));
    }
    s.root_table = j.at("root_table").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("schema: malformed document: ") + e.what());
  }
  s.validate();
  return s;
}

inline RelationalSchema load_schema(const std::string& path, RunTrace* trace = nullptr) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path, trace));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema: cannot parse " + path + ": " + e.what());
  }
  return schema_from_json(j);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// Stable identity of a schema; checkpoints refuse to load against a mismatch.
inline std::string schema_fingerprint(const RelationalSchema& s) {
  return to_hex(fnv1a64(schema_to_json(s).dump()));
}

}  // namespace relmia
