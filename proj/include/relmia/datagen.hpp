#pragma once

#include <string>
#include <vector>

#include "relmia/database.hpp"
#include "relmia/errors.hpp"
#include "relmia/rng.hpp"
#include "relmia/schema.hpp"

namespace relmia {

// Two-table benchmark: Customers (root) and Transactions, one FK, all features
// standard normal. The only difference between members and holdouts is how
// many transactions each customer carries, which is exactly the relational
// leakage channel the embedding attack is meant to pick up.
struct ToySpec {
  std::size_t members = 500;
  std::size_t nonmembers = 500;
  std::size_t member_children = 100;
  std::size_t nonmember_children = 1;
  std::size_t customer_dims = 5;
  std::size_t transaction_dims = 5;
  std::uint64_t seed = 7;

  void validate() const {
    if (members < 1 || nonmembers < 1)
      throw ConfigError("toy: member and nonmember counts must be >= 1");
    if (customer_dims < 1 || transaction_dims < 1)
      throw ConfigError("toy: feature dimensions must be >= 1");
  }
};

struct ToyData {
  RelationalSchema schema;
  DatabaseInstance train;    // members
  DatabaseInstance holdout;  // nonmembers
};

namespace detail {

inline DatabaseInstance toy_db(const ToySpec& spec, Rng& rng, std::size_t n_customers,
                               std::size_t children_each, std::size_t customer_offset,
                               std::size_t transaction_offset) {
  DatabaseInstance db;
  TableData customers;
  customers.row_count = n_customers;
  customers.features.resize(spec.customer_dims);
  for (auto& c : customers.features) c.kind = ColumnKind::numeric;
  TableData transactions;
  transactions.row_count = n_customers * children_each;
  transactions.fk.resize(1);
  transactions.features.resize(spec.transaction_dims);
  for (auto& c : transactions.features) c.kind = ColumnKind::numeric;

  std::size_t tid = transaction_offset;
  for (std::size_t i = 0; i < n_customers; ++i) {
    const std::string cid = "c" + std::to_string(customer_offset + i);
    customers.pk.push_back(cid);
    for (std::size_t j = 0; j < spec.customer_dims; ++j) {
      customers.features[j].numeric.push_back(rng.normal());
      customers.features[j].missing.push_back(0);
    }
    for (std::size_t k = 0; k < children_each; ++k) {
      transactions.pk.push_back("t" + std::to_string(tid++));
      transactions.fk[0].push_back(cid);
      for (std::size_t j = 0; j < spec.transaction_dims; ++j) {
        transactions.features[j].numeric.push_back(rng.normal());
        transactions.features[j].missing.push_back(0);
      }
    }
  }
  db.tables.push_back(std::move(customers));
  db.tables.push_back(std::move(transactions));
  return db;
}

}  // namespace detail

inline ToyData gen_toy(const ToySpec& spec) {
  spec.validate();
  ToyData out;
  TableSpec customers;
  customers.name = "Customers";
  customers.columns.push_back({"customer_id", ColumnKind::categorical});
  for (std::size_t j = 0; j < spec.customer_dims; ++j)
    customers.columns.push_back({"c" + std::to_string(j), ColumnKind::numeric});
  customers.primary_key = "customer_id";
  TableSpec transactions;
  transactions.name = "Transactions";
  transactions.columns.push_back({"transaction_id", ColumnKind::categorical});
  transactions.columns.push_back({"customer_id", ColumnKind::categorical});
  for (std::size_t j = 0; j < spec.transaction_dims; ++j)
    transactions.columns.push_back({"t" + std::to_string(j), ColumnKind::numeric});
  transactions.primary_key = "transaction_id";
  transactions.foreign_keys.push_back({"customer_id", "Customers"});
  out.schema.tables = {std::move(customers), std::move(transactions)};
  out.schema.root_table = "Customers";
  out.schema.validate();

  Rng rng(spec.seed);
  out.train = detail::toy_db(spec, rng, spec.members, spec.member_children, 0, 0);
  out.holdout = detail::toy_db(spec, rng, spec.nonmembers, spec.nonmember_children,
                               spec.members, spec.members * spec.member_children);
  return out;
}

// Structural copy of the training database with fresh primary keys and
// Gaussian noise on numeric features. Noise 0 reproduces every feature value
// bit for bit: the strongest possible memorisation regime.
inline DatabaseInstance mock_memorizing_generator(const RelationalSchema& schema,
                                                  const DatabaseInstance& train,
                                                  double noise_scale,
                                                  std::uint64_t seed = 101) {
  if (noise_scale < 0) throw ConfigError("memorizing generator: noise scale must be >= 0");
  Rng rng(seed);
  DatabaseInstance synth = train;
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    TableData& t = synth.tables[ti];
    for (std::size_t r = 0; r < t.row_count; ++r)
      t.pk[r] = "s" + std::to_string(ti) + "_" + std::to_string(r);
    for (auto& col : t.features) {
      if (col.kind != ColumnKind::numeric || noise_scale == 0.0) continue;
      for (std::size_t r = 0; r < col.numeric.size(); ++r)
        if (!col.missing[r]) col.numeric[r] += rng.normal(0.0, noise_scale);
    }
  }
  // remap foreign keys to the renamed parents; the row structure is unchanged
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    const auto& spec = schema.tables[ti];
    for (std::size_t f = 0; f < spec.foreign_keys.size(); ++f) {
      const std::size_t parent = schema.table_index(spec.foreign_keys[f].references);
      std::unordered_map<std::string, std::string> remap;
      const auto& old_pk = train.tables[parent].pk;
      const auto& new_pk = synth.tables[parent].pk;
      for (std::size_t r = 0; r < old_pk.size(); ++r) remap.emplace(old_pk[r], new_pk[r]);
      for (auto& v : synth.tables[ti].fk[f]) v = remap.at(v);
    }
  }
  return synth;
}

// Null-hypothesis generator: keeps the training database's row counts and the
// entire foreign-key structure, but redraws every feature independently.
// Numeric columns come from a Gaussian fitted to the training column moments,
// categorical columns from the empirical category frequencies. Nothing about
// any individual record survives.
inline DatabaseInstance mock_independent_generator(const RelationalSchema& schema,
                                                   const DatabaseInstance& train,
                                                   std::uint64_t seed = 202) {
  Rng rng(seed);
  DatabaseInstance synth = mock_memorizing_generator(schema, train, 0.0, seed);
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    for (auto& col : synth.tables[ti].features) {
      if (col.kind == ColumnKind::numeric) {
        double mean = 0.0;
        std::size_t n = 0;
        for (std::size_t r = 0; r < col.size(); ++r)
          if (!col.missing[r]) {
            mean += col.numeric[r];
            ++n;
          }
        mean = n ? mean / static_cast<double>(n) : 0.0;
        double ss = 0.0;
        for (std::size_t r = 0; r < col.size(); ++r)
          if (!col.missing[r]) {
            const double d = col.numeric[r] - mean;
            ss += d * d;
          }
        const double sd = n >= 2 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        for (std::size_t r = 0; r < col.size(); ++r)
          if (!col.missing[r]) col.numeric[r] = rng.normal(mean, sd);
      } else {
        std::vector<std::string> values;
        for (std::size_t r = 0; r < col.size(); ++r)
          if (!col.missing[r]) values.push_back(col.categorical[r]);
        if (values.empty()) continue;
        for (std::size_t r = 0; r < col.size(); ++r)
          if (!col.missing[r]) col.categorical[r] = values[rng.index(values.size())];
      }
    }
  }
  return synth;
}

}  // namespace relmia
