#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "relmia/database.hpp"
#include "relmia/matrix.hpp"
#include "relmia/schema.hpp"

namespace relmia {

// Typed-graph form of a relational database: one node type per table, one node
// per row, one directed edge (child -> parent) per foreign key reference. The
// schema is preserved as the meta-structure; rows keep file order so identical
// inputs build identical graphs.
struct HeteroGraph {
  struct Relation {
    std::string name;       // "<child table>.<fk column>"
    std::size_t src_type;   // child (FK holder)
    std::size_t dst_type;   // referenced (parent) table
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // (src row, dst row)
  };

  std::vector<std::string> node_types;                 // table names
  std::size_t root_type = 0;
  std::vector<Matrix> features;                        // per type, row-aligned
  std::vector<std::vector<std::string>> node_keys;     // per type, primary key per node
  std::vector<Relation> relations;

  std::size_t num_nodes(std::size_t type) const { return node_keys[type].size(); }

  std::size_t total_nodes() const {
    std::size_t n = 0;
    for (const auto& keys : node_keys) n += keys.size();
    return n;
  }

  std::size_t total_edges() const {
    std::size_t n = 0;
    for (const auto& r : relations) n += r.edges.size();
    return n;
  }
};

// One root node plus everything transitively connected to it. Node index lists
// are sorted; edge lists keep the source graph's edge order.
struct EntitySubgraph {
  const HeteroGraph* graph = nullptr;
  std::size_t root_type = 0;
  std::uint32_t root_index = 0;
  std::vector<std::vector<std::uint32_t>> nodes;  // per type, sorted
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> edges;  // per relation

  const std::string& entity_id() const { return graph->node_keys[root_type][root_index]; }

  std::size_t total_nodes() const {
    std::size_t n = 0;
    for (const auto& v : nodes) n += v.size();
    return n;
  }
};

inline HeteroGraph build_graph(const RelationalSchema& schema, const DatabaseInstance& db,
                               const std::vector<Matrix>& features) {
  if (db.tables.size() != schema.tables.size())
    throw DataError("build_graph: database does not match schema");
  if (features.size() != schema.tables.size())
    throw DataError("build_graph: feature matrices do not match schema");

  HeteroGraph g;
  g.root_type = schema.root_index();
  std::vector<std::unordered_map<std::string, std::uint32_t>> pk_index(schema.tables.size());
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    const auto& data = db.tables[ti];
    if (features[ti].rows != data.row_count)
      throw DataError("build_graph: feature matrix for table '" + schema.tables[ti].name +
                      "' is not row-aligned");
    g.node_types.push_back(schema.tables[ti].name);
    g.features.push_back(features[ti]);
    g.node_keys.push_back(data.pk);
    auto& idx = pk_index[ti];
    idx.reserve(data.row_count * 2);
    for (std::size_t r = 0; r < data.row_count; ++r)
      idx.emplace(data.pk[r], static_cast<std::uint32_t>(r));
  }

  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    const auto& spec = schema.tables[ti];
    const auto& data = db.tables[ti];
    for (std::size_t f = 0; f < spec.foreign_keys.size(); ++f) {
      HeteroGraph::Relation rel;
      rel.name = spec.name + "." + spec.foreign_keys[f].column;
      rel.src_type = ti;
      rel.dst_type = schema.table_index(spec.foreign_keys[f].references);
      rel.edges.reserve(data.row_count);
      const auto& parents = pk_index[rel.dst_type];
      for (std::size_t r = 0; r < data.row_count; ++r) {
        auto it = parents.find(data.fk[f][r]);
        if (it == parents.end())
          throw DataError("table '" + spec.name + "' row " + std::to_string(r) +
                          ": foreign key '" + spec.foreign_keys[f].column + "' value '" +
                          data.fk[f][r] + "' does not resolve");
        rel.edges.emplace_back(static_cast<std::uint32_t>(r), it->second);
      }
      g.relations.push_back(std::move(rel));
    }
  }
  return g;
}

struct Decomposition {
  std::vector<EntitySubgraph> entities;
  std::size_t unreachable_nodes = 0;  // nodes in no root's component, dropped
};

// Splits the graph into the connected components around each root-type node.
// Two roots sharing a component is an error: entities must be disjoint.
inline Decomposition decompose_entities(const HeteroGraph& g) {
  const std::size_t n_types = g.node_types.size();
  std::vector<std::size_t> offset(n_types + 1, 0);
  for (std::size_t t = 0; t < n_types; ++t) offset[t + 1] = offset[t] + g.num_nodes(t);
  const std::size_t total = offset[n_types];

  // undirected adjacency in CSR form
  std::vector<std::uint32_t> degree(total, 0);
  for (const auto& rel : g.relations) {
    for (const auto& [s, d] : rel.edges) {
      ++degree[offset[rel.src_type] + s];
      ++degree[offset[rel.dst_type] + d];
    }
  }
  std::vector<std::size_t> adj_start(total + 1, 0);
  for (std::size_t i = 0; i < total; ++i) adj_start[i + 1] = adj_start[i] + degree[i];
  std::vector<std::uint32_t> adj(adj_start[total]);
  std::vector<std::size_t> fill(adj_start.begin(), adj_start.end() - 1);
  for (const auto& rel : g.relations) {
    for (const auto& [s, d] : rel.edges) {
      const auto gs = static_cast<std::uint32_t>(offset[rel.src_type] + s);
      const auto gd = static_cast<std::uint32_t>(offset[rel.dst_type] + d);
      adj[fill[gs]++] = gd;
      adj[fill[gd]++] = gs;
    }
  }

  constexpr std::uint32_t kUnassigned = 0xffffffffu;
  std::vector<std::uint32_t> component(total, kUnassigned);
  const std::size_t n_roots = g.num_nodes(g.root_type);
  Decomposition out;
  out.entities.reserve(n_roots);

  std::deque<std::uint32_t> queue;
  for (std::uint32_t r = 0; r < n_roots; ++r) {
    const auto root_global = static_cast<std::uint32_t>(offset[g.root_type] + r);
    if (component[root_global] != kUnassigned) {
      const auto& other = out.entities[component[root_global]];
      throw DataError("entangled entities: root '" + g.node_keys[g.root_type][r] +
                      "' shares a connected component with root '" + other.entity_id() + "'");
    }
    const auto cid = static_cast<std::uint32_t>(out.entities.size());
    EntitySubgraph sub;
    sub.graph = &g;
    sub.root_type = g.root_type;
    sub.root_index = r;
    sub.nodes.resize(n_types);
    sub.edges.resize(g.relations.size());

    component[root_global] = cid;
    queue.clear();
    queue.push_back(root_global);
    while (!queue.empty()) {
      const std::uint32_t u = queue.front();
      queue.pop_front();
      // locate type of u
      std::size_t t = 0;
      while (offset[t + 1] <= u) ++t;
      const auto local = static_cast<std::uint32_t>(u - offset[t]);
      if (t == g.root_type && local != r)
        throw DataError("entangled entities: root '" + g.node_keys[g.root_type][r] +
                        "' shares a connected component with root '" +
                        g.node_keys[g.root_type][local] + "'");
      sub.nodes[t].push_back(local);
      for (std::size_t e = adj_start[u]; e < adj_start[u + 1]; ++e) {
        const std::uint32_t v = adj[e];
        if (component[v] == kUnassigned) {
          component[v] = cid;
          queue.push_back(v);
        }
      }
    }
    for (auto& list : sub.nodes) std::sort(list.begin(), list.end());
    out.entities.push_back(std::move(sub));
  }

  // induced edges, assigned in source order
  for (std::size_t ri = 0; ri < g.relations.size(); ++ri) {
    const auto& rel = g.relations[ri];
    for (const auto& [s, d] : rel.edges) {
      const std::uint32_t cid = component[offset[rel.src_type] + s];
      if (cid != kUnassigned) out.entities[cid].edges[ri].emplace_back(s, d);
    }
  }
  for (std::size_t i = 0; i < total; ++i)
    if (component[i] == kUnassigned) ++out.unreachable_nodes;
  return out;
}

// Member/holdout marking of every node, per type, aligned with the graph.
using NodeLabels = std::vector<std::vector<int>>;

// Returns the common label of all nodes in the subgraph. A mixed subgraph
// means the graph was not a disjoint union of the two label classes.
inline int membership_consistency(const EntitySubgraph& sub, const NodeLabels& labels) {
  bool first = true;
  int value = 0;
  for (std::size_t t = 0; t < sub.nodes.size(); ++t) {
    for (const std::uint32_t i : sub.nodes[t]) {
      const int l = labels[t][i];
      if (first) {
        value = l;
        first = false;
      } else if (l != value) {
        throw DataError("theorem violated: connected subgraph of root '" + sub.entity_id() +
                        "' mixes labels (node type '" + sub.graph->node_types[t] + "' row " +
                        std::to_string(i) + ")");
      }
    }
  }
  if (first) throw DataError("membership_consistency: empty subgraph");
  return value;
}

// Disjoint union of two graphs over the same schema; b's nodes are appended
// after a's. Useful for assembling a combined member/holdout graph.
inline HeteroGraph disjoint_union(const HeteroGraph& a, const HeteroGraph& b) {
  if (a.node_types != b.node_types || a.root_type != b.root_type ||
      a.relations.size() != b.relations.size())
    throw DataError("disjoint_union: graphs have different schemas");
  HeteroGraph g;
  g.node_types = a.node_types;
  g.root_type = a.root_type;
  g.features.resize(a.node_types.size());
  g.node_keys.resize(a.node_types.size());
  for (std::size_t t = 0; t < a.node_types.size(); ++t) {
    if (a.features[t].cols != b.features[t].cols && a.features[t].rows && b.features[t].rows)
      throw DataError("disjoint_union: feature width mismatch for type '" + a.node_types[t] + "'");
    Matrix m(a.features[t].rows + b.features[t].rows,
             a.features[t].rows ? a.features[t].cols : b.features[t].cols);
    std::copy(a.features[t].data.begin(), a.features[t].data.end(), m.data.begin());
    std::copy(b.features[t].data.begin(), b.features[t].data.end(),
              m.data.begin() + static_cast<std::ptrdiff_t>(a.features[t].size()));
    g.features[t] = std::move(m);
    g.node_keys[t] = a.node_keys[t];
    g.node_keys[t].insert(g.node_keys[t].end(), b.node_keys[t].begin(), b.node_keys[t].end());
  }
  for (std::size_t ri = 0; ri < a.relations.size(); ++ri) {
    HeteroGraph::Relation rel;
    rel.name = a.relations[ri].name;
    rel.src_type = a.relations[ri].src_type;
    rel.dst_type = a.relations[ri].dst_type;
    rel.edges = a.relations[ri].edges;
    const auto soff = static_cast<std::uint32_t>(a.num_nodes(rel.src_type));
    const auto doff = static_cast<std::uint32_t>(a.num_nodes(rel.dst_type));
    for (const auto& [s, d] : b.relations[ri].edges)
      rel.edges.emplace_back(s + soff, d + doff);
    g.relations.push_back(std::move(rel));
  }
  return g;
}

}  // namespace relmia
