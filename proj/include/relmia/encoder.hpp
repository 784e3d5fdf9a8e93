#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "relmia/errors.hpp"
#include "relmia/hetero_graph.hpp"
#include "relmia/matrix.hpp"
#include "relmia/optim.hpp"
#include "relmia/rng.hpp"
#include "relmia/schema.hpp"
#include "relmia/tape.hpp"

namespace relmia {

struct EncoderConfig {
  std::size_t hidden_dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 1;
  double leaky_slope = 0.2;
  double lambda_parent = 1.0;
  double lambda_context = 1.0;
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::uint64_t seed = 17;

  void validate() const {
    if (hidden_dim < 1) throw ConfigError("encoder: hidden_dim must be >= 1");
    if (layers < 1) throw ConfigError("encoder: layers must be >= 1");
    if (heads < 1) throw ConfigError("encoder: heads must be >= 1");
    if (lambda_parent < 0 || lambda_context < 0)
      throw ConfigError("encoder: loss weights must be >= 0");
    if (lambda_parent == 0 && lambda_context == 0)
      throw ConfigError("encoder: loss weights must not both be zero");
    if (batch_size < 1) throw ConfigError("encoder: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("encoder: epochs must be >= 1");
    if (learning_rate <= 0) throw ConfigError("encoder: learning_rate must be > 0");
  }
};

// Message-passing structure derived from a schema: one relation per foreign
// key plus a reversed twin per relation, so information flows child->parent
// and parent->child with separate weights.
struct GraphMeta {
  struct RelationMeta {
    std::string name;
    std::size_t src_type = 0;
    std::size_t dst_type = 0;
    bool reversed = false;
    std::size_t graph_relation = 0;  // index into HeteroGraph::relations
  };

  std::vector<std::string> type_names;
  std::vector<std::size_t> raw_dims;  // encoded feature width per type
  std::size_t root_type = 0;
  std::vector<RelationMeta> relations;       // schema order, twins appended
  std::vector<std::size_t> incident_count;   // per type: relations arriving at it

  static GraphMeta from_schema(const RelationalSchema& schema,
                               const std::vector<std::size_t>& dims) {
    if (dims.size() != schema.tables.size())
      throw ConfigError("graph meta: dimension list does not match schema");
    GraphMeta m;
    m.root_type = schema.root_index();
    for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
      m.type_names.push_back(schema.tables[ti].name);
      m.raw_dims.push_back(dims[ti]);
    }
    std::size_t gi = 0;
    for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
      for (const auto& fk : schema.tables[ti].foreign_keys) {
        RelationMeta r;
        r.name = schema.tables[ti].name + "." + fk.column;
        r.src_type = ti;
        r.dst_type = schema.table_index(fk.references);
        r.reversed = false;
        r.graph_relation = gi++;
        m.relations.push_back(std::move(r));
      }
    }
    const std::size_t base = m.relations.size();
    for (std::size_t i = 0; i < base; ++i) {
      RelationMeta r;
      r.name = m.relations[i].name + "~rev";
      r.src_type = m.relations[i].dst_type;
      r.dst_type = m.relations[i].src_type;
      r.reversed = true;
      r.graph_relation = m.relations[i].graph_relation;
      m.relations.push_back(std::move(r));
    }
    m.incident_count.assign(m.type_names.size(), 0);
    for (const auto& r : m.relations) ++m.incident_count[r.dst_type];
    return m;
  }
};

constexpr std::size_t kNoTensor = static_cast<std::size_t>(-1);

// All trainable weights, stored as a flat named-tensor list with an index
// layout fixed by (meta, config). The flat form is what the optimizer,
// checkpoints and gradient checks operate on.
struct EncoderParams {
  EncoderConfig config;
  GraphMeta meta;
  std::string schema_fp;

  std::vector<std::string> names;
  std::vector<Matrix> tensors;

  // layout indices
  std::vector<std::size_t> in_w, in_b;                       // per type
  std::vector<std::vector<std::size_t>> rel_wsrc, rel_wdst;  // [layer][relation]
  std::vector<std::vector<std::vector<std::size_t>>> rel_attn;  // [layer][relation][head]
  std::vector<std::size_t> pool_u, pool_v, ctx_mix;          // per type, root unused
  std::size_t gate_w1 = kNoTensor, gate_b1 = kNoTensor;
  std::size_t gate_w2 = kNoTensor, gate_b2 = kNoTensor;
  std::size_t phi_w = kNoTensor, phi_b = kNoTensor;
  std::size_t dec_parent_w = kNoTensor, dec_parent_b = kNoTensor;
  std::vector<std::size_t> dec_ctx_w, dec_ctx_b;             // per type, root unused
};

namespace detail {

inline std::size_t add_tensor(EncoderParams& p, const std::string& name, std::size_t rows,
                              std::size_t cols) {
  p.names.push_back(name);
  p.tensors.emplace_back(rows, cols);
  return p.tensors.size() - 1;
}

inline void glorot_fill(Matrix& m, Rng& rng) {
  const double fan_in = static_cast<double>(m.rows);
  const double fan_out = static_cast<double>(m.cols);
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : m.data) v = rng.uniform(-bound, bound);
}

}  // namespace detail

// Fresh parameters: weight matrices uniform in +/-sqrt(6/(fan_in+fan_out))
// from the seeded generator, biases zero. Tensor order is fixed, so a seed
// fully determines the initial state.
inline EncoderParams init_encoder_params(const GraphMeta& meta, const EncoderConfig& config,
                                         const std::string& schema_fp) {
  config.validate();
  EncoderParams p;
  p.config = config;
  p.meta = meta;
  p.schema_fp = schema_fp;
  const std::size_t d = config.hidden_dim;
  const std::size_t n_types = meta.type_names.size();

  for (std::size_t t = 0; t < n_types; ++t) {
    p.in_w.push_back(detail::add_tensor(p, "input." + meta.type_names[t] + ".w",
                                        meta.raw_dims[t], d));
    p.in_b.push_back(detail::add_tensor(p, "input." + meta.type_names[t] + ".b", 1, d));
  }
  p.rel_wsrc.resize(config.layers);
  p.rel_wdst.resize(config.layers);
  p.rel_attn.resize(config.layers);
  for (std::size_t l = 0; l < config.layers; ++l) {
    for (const auto& rel : meta.relations) {
      const std::string prefix = "layer" + std::to_string(l) + "." + rel.name;
      p.rel_wsrc[l].push_back(detail::add_tensor(p, prefix + ".w_src", d, d));
      p.rel_wdst[l].push_back(detail::add_tensor(p, prefix + ".w_dst", d, d));
      p.rel_attn[l].emplace_back();
      for (std::size_t h = 0; h < config.heads; ++h)
        p.rel_attn[l].back().push_back(
            detail::add_tensor(p, prefix + ".attn" + std::to_string(h), d, 1));
    }
  }
  p.pool_u.assign(n_types, kNoTensor);
  p.pool_v.assign(n_types, kNoTensor);
  p.ctx_mix.assign(n_types, kNoTensor);
  for (std::size_t t = 0; t < n_types; ++t) {
    if (t == meta.root_type) continue;
    p.pool_u[t] = detail::add_tensor(p, "pool." + meta.type_names[t] + ".u", d, d);
    p.pool_v[t] = detail::add_tensor(p, "pool." + meta.type_names[t] + ".v", d, 1);
    p.ctx_mix[t] = detail::add_tensor(p, "context." + meta.type_names[t] + ".mix", d, d);
  }
  p.gate_w1 = detail::add_tensor(p, "gate.w1", 2 * d, d);
  p.gate_b1 = detail::add_tensor(p, "gate.b1", 1, d);
  p.gate_w2 = detail::add_tensor(p, "gate.w2", d, d);
  p.gate_b2 = detail::add_tensor(p, "gate.b2", 1, d);
  p.phi_w = detail::add_tensor(p, "phi.w", d, d);
  p.phi_b = detail::add_tensor(p, "phi.b", 1, d);
  p.dec_parent_w = detail::add_tensor(p, "decode.parent.w", d, meta.raw_dims[meta.root_type]);
  p.dec_parent_b = detail::add_tensor(p, "decode.parent.b", 1, meta.raw_dims[meta.root_type]);
  p.dec_ctx_w.assign(n_types, kNoTensor);
  p.dec_ctx_b.assign(n_types, kNoTensor);
  for (std::size_t t = 0; t < n_types; ++t) {
    if (t == meta.root_type) continue;
    p.dec_ctx_w[t] = detail::add_tensor(p, "decode." + meta.type_names[t] + ".w", d,
                                        meta.raw_dims[t]);
    p.dec_ctx_b[t] = detail::add_tensor(p, "decode." + meta.type_names[t] + ".b", 1,
                                        meta.raw_dims[t]);
  }

  Rng rng(config.seed);
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    if (p.names[i].ends_with(".b") || p.names[i].ends_with(".b1") ||
        p.names[i].ends_with(".b2"))
      continue;  // biases stay zero
    detail::glorot_fill(p.tensors[i], rng);
  }
  return p;
}

// A group of entity subgraphs flattened into per-type local node tables. Since
// entities are disjoint, running the encoder over the flattened batch is
// row-for-row identical to encoding each subgraph alone.
struct SubgraphBatch {
  std::size_t n_entities = 0;
  std::vector<std::string> ids;
  std::vector<Matrix> features;                        // per type
  std::vector<std::vector<std::uint32_t>> entity_of;   // per type, per local row
  std::vector<std::uint32_t> root_rows;                // per entity
  std::vector<std::vector<std::uint32_t>> edge_src;    // per meta relation
  std::vector<std::vector<std::uint32_t>> edge_dst;
  Matrix parent_target;                                // n_entities x raw_root
  std::vector<Matrix> context_target;                  // per type, root empty

  static SubgraphBatch assemble(const GraphMeta& meta,
                                const std::vector<const EntitySubgraph*>& subs) {
    SubgraphBatch b;
    b.n_entities = subs.size();
    const std::size_t n_types = meta.type_names.size();
    b.features.resize(n_types);
    b.entity_of.resize(n_types);
    b.edge_src.resize(meta.relations.size());
    b.edge_dst.resize(meta.relations.size());
    b.context_target.resize(n_types);
    b.root_rows.resize(b.n_entities);
    if (subs.empty()) return b;

    const HeteroGraph& g = *subs.front()->graph;
    std::vector<std::unordered_map<std::uint32_t, std::uint32_t>> local(n_types);
    std::vector<std::size_t> count(n_types, 0);
    for (const auto* sub : subs)
      for (std::size_t t = 0; t < n_types; ++t) count[t] += sub->nodes[t].size();
    for (std::size_t t = 0; t < n_types; ++t) {
      b.features[t] = Matrix(count[t], meta.raw_dims[t]);
      b.entity_of[t].reserve(count[t]);
      local[t].reserve(count[t] * 2);
    }
    b.parent_target = Matrix(b.n_entities, meta.raw_dims[meta.root_type]);
    for (std::size_t t = 0; t < n_types; ++t)
      if (t != meta.root_type) b.context_target[t] = Matrix(b.n_entities, meta.raw_dims[t]);

    for (std::size_t e = 0; e < subs.size(); ++e) {
      const EntitySubgraph& sub = *subs[e];
      if (sub.graph != &g)
        throw std::invalid_argument("subgraph batch: entities from different graphs");
      b.ids.push_back(sub.entity_id());
      for (std::size_t t = 0; t < n_types; ++t) {
        for (const std::uint32_t gidx : sub.nodes[t]) {
          const auto lidx = static_cast<std::uint32_t>(b.entity_of[t].size());
          local[t].emplace(gidx, lidx);
          b.entity_of[t].push_back(static_cast<std::uint32_t>(e));
          const double* src = g.features[t].row(gidx);
          double* dst = b.features[t].row(lidx);
          for (std::size_t j = 0; j < meta.raw_dims[t]; ++j) dst[j] = src[j];
          if (t == meta.root_type && gidx == sub.root_index) {
            b.root_rows[e] = lidx;
            for (std::size_t j = 0; j < meta.raw_dims[t]; ++j)
              b.parent_target(e, j) = src[j];
          } else if (t != meta.root_type) {
            for (std::size_t j = 0; j < meta.raw_dims[t]; ++j)
              b.context_target[t](e, j) += src[j];
          }
        }
      }
    }

    for (std::size_t r = 0; r < meta.relations.size(); ++r) {
      const auto& rel = meta.relations[r];
      std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // (dst, src) local
      for (const auto* sub : subs) {
        for (const auto& [s, d] : sub->edges[rel.graph_relation]) {
          const std::uint32_t gs = rel.reversed ? d : s;
          const std::uint32_t gd = rel.reversed ? s : d;
          pairs.emplace_back(local[rel.dst_type].at(gd), local[rel.src_type].at(gs));
        }
      }
      std::sort(pairs.begin(), pairs.end());
      b.edge_src[r].reserve(pairs.size());
      b.edge_dst[r].reserve(pairs.size());
      for (const auto& [d, s] : pairs) {
        b.edge_dst[r].push_back(d);
        b.edge_src[r].push_back(s);
      }
    }
    return b;
  }
};

namespace detail {

// GATv2-style relation messages: logits a^T leaky(W_src h_j + W_dst h_i),
// softmax over the in-neighbourhood of each destination, heads averaged.
inline Var relation_messages_op(Tape& tape, Var h_src, Var h_dst,
                                const std::vector<std::uint32_t>& src_idx,
                                const std::vector<std::uint32_t>& dst_idx,
                                std::size_t n_dst, Var w_src, Var w_dst,
                                const std::vector<Var>& attn, double slope, Var ones_row) {
  const Var s = tape.matmul(h_src, w_src);
  const Var d = tape.matmul(h_dst, w_dst);
  const Var se = tape.gather_rows(s, src_idx);
  const Var de = tape.gather_rows(d, dst_idx);
  const Var e = tape.leaky_relu(tape.add(se, de), slope);
  Var agg;
  for (const Var a : attn) {
    const Var logits = tape.matmul(e, a);
    const Var w = tape.segment_softmax(logits, dst_idx, n_dst);
    const Var weighted = tape.mul(tape.matmul(w, ones_row), se);
    const Var m = tape.segment_sum(weighted, dst_idx, n_dst);
    agg = agg.valid() ? tape.add(agg, m) : m;
  }
  if (attn.size() > 1) agg = tape.scale(agg, 1.0 / static_cast<double>(attn.size()));
  return agg;
}

// Per-node score v^T tanh(U h), softmax within each segment, weighted sum.
inline Var attention_pool_op(Tape& tape, Var h, const std::vector<std::uint32_t>& seg,
                             std::size_t n_seg, Var u, Var v, Var ones_row) {
  const Var scores = tape.matmul(tape.tanh(tape.matmul(h, u)), v);
  const Var w = tape.segment_softmax(scores, seg, n_seg);
  return tape.segment_sum(tape.mul(tape.matmul(w, ones_row), h), seg, n_seg);
}

}  // namespace detail

// Handles into a tape holding one encoder forward pass over a batch.
struct EncoderForward {
  std::vector<Var> params;        // aligned with EncoderParams::tensors
  std::vector<Var> hidden;        // per type, after the last layer
  Var z_parent, z_context, gate, z_final;
};

// Forward pass over parameter variables already registered on the tape, in
// tensor-layout order. Lets callers differentiate with respect to the
// parameters they registered themselves.
inline EncoderForward encoder_forward_with_vars(Tape& tape, const EncoderParams& p,
                                                const SubgraphBatch& batch,
                                                std::vector<Var> param_vars) {
  const std::size_t n_types = p.meta.type_names.size();
  const std::size_t d = p.config.hidden_dim;
  EncoderForward f;
  f.params = std::move(param_vars);
  if (f.params.size() != p.tensors.size())
    throw std::invalid_argument("encoder forward: parameter variable count mismatch");
  const Var ones_row = tape.constant(Matrix(1, d, 1.0));

  // input projection
  f.hidden.resize(n_types);
  for (std::size_t t = 0; t < n_types; ++t) {
    const Var x = tape.constant(batch.features[t]);
    f.hidden[t] = tape.add_rowvec(tape.matmul(x, f.params[p.in_w[t]]), f.params[p.in_b[t]]);
  }

  // message-passing layers: residual plus nonlinearity, per-relation messages
  // averaged over the relations incident to each type by schema
  for (std::size_t l = 0; l < p.config.layers; ++l) {
    std::vector<std::vector<Var>> arriving(n_types);
    for (std::size_t r = 0; r < p.meta.relations.size(); ++r) {
      if (batch.edge_src[r].empty()) continue;
      const auto& rel = p.meta.relations[r];
      std::vector<Var> attn;
      for (const std::size_t ai : p.rel_attn[l][r]) attn.push_back(f.params[ai]);
      const Var msg = detail::relation_messages_op(
          tape, f.hidden[rel.src_type], f.hidden[rel.dst_type], batch.edge_src[r],
          batch.edge_dst[r], batch.entity_of[rel.dst_type].size(),
          f.params[p.rel_wsrc[l][r]], f.params[p.rel_wdst[l][r]], attn,
          p.config.leaky_slope, ones_row);
      arriving[rel.dst_type].push_back(msg);
    }
    for (std::size_t t = 0; t < n_types; ++t) {
      if (arriving[t].empty()) {
        f.hidden[t] = tape.leaky_relu(f.hidden[t], p.config.leaky_slope);
        continue;
      }
      Var sum = arriving[t].front();
      for (std::size_t i = 1; i < arriving[t].size(); ++i)
        sum = tape.add(sum, arriving[t][i]);
      sum = tape.scale(sum, 1.0 / static_cast<double>(p.meta.incident_count[t]));
      f.hidden[t] = tape.leaky_relu(tape.add(f.hidden[t], sum), p.config.leaky_slope);
    }
  }

  f.z_parent = tape.gather_rows(f.hidden[p.meta.root_type], batch.root_rows);

  // relational context: type-wise attention pooling, mixed into a shared space
  Var zc;
  for (std::size_t t = 0; t < n_types; ++t) {
    if (t == p.meta.root_type || batch.entity_of[t].empty()) continue;
    const Var pooled =
        detail::attention_pool_op(tape, f.hidden[t], batch.entity_of[t], batch.n_entities,
                                  f.params[p.pool_u[t]], f.params[p.pool_v[t]], ones_row);
    const Var term = tape.matmul(pooled, f.params[p.ctx_mix[t]]);
    zc = zc.valid() ? tape.add(zc, term) : term;
  }
  if (!zc.valid()) zc = tape.constant(Matrix(batch.n_entities, d));
  f.z_context = zc;

  const Var gate_in = tape.concat_cols(f.z_parent, f.z_context);
  const Var gate_hidden = tape.leaky_relu(
      tape.add_rowvec(tape.matmul(gate_in, f.params[p.gate_w1]), f.params[p.gate_b1]),
      p.config.leaky_slope);
  f.gate = tape.sigmoid(
      tape.add_rowvec(tape.matmul(gate_hidden, f.params[p.gate_w2]), f.params[p.gate_b2]));
  const Var phi = tape.tanh(
      tape.add_rowvec(tape.matmul(f.z_context, f.params[p.phi_w]), f.params[p.phi_b]));
  f.z_final = tape.add(f.z_parent, tape.mul(f.gate, phi));
  return f;
}

inline EncoderForward encoder_forward(Tape& tape, const EncoderParams& p,
                                      const SubgraphBatch& batch) {
  std::vector<Var> vars;
  vars.reserve(p.tensors.size());
  for (const auto& t : p.tensors) vars.push_back(tape.input(t));
  return encoder_forward_with_vars(tape, p, batch, std::move(vars));
}

// Mean over entities of lambda_p * ||decode_parent(z) - x_root||^2 plus
// lambda_c * sum over child types of ||decode_type(z) - sum of child rows||^2.
inline Var reconstruction_loss_op(Tape& tape, const EncoderParams& p,
                                  const SubgraphBatch& batch, const EncoderForward& f) {
  if (batch.n_entities == 0)
    throw std::invalid_argument("reconstruction loss: empty batch");
  const Var pred_parent = tape.add_rowvec(tape.matmul(f.z_final, f.params[p.dec_parent_w]),
                                          f.params[p.dec_parent_b]);
  Var loss = tape.scale(tape.l2_diff(pred_parent, tape.constant(batch.parent_target)),
                        p.config.lambda_parent);
  for (std::size_t t = 0; t < p.meta.type_names.size(); ++t) {
    if (t == p.meta.root_type) continue;
    const Var pred = tape.add_rowvec(tape.matmul(f.z_final, f.params[p.dec_ctx_w[t]]),
                                     f.params[p.dec_ctx_b[t]]);
    loss = tape.add(loss, tape.scale(tape.l2_diff(pred, tape.constant(batch.context_target[t])),
                                     p.config.lambda_context));
  }
  return tape.scale(loss, 1.0 / static_cast<double>(batch.n_entities));
}

struct EntityEmbedding {
  std::string id;
  std::vector<double> parent;   // z_parent
  std::vector<double> context;  // z_context (pre-transform)
  std::vector<double> gate;     // g, componentwise in [0,1]
  std::vector<double> fused;    // z_final = z_parent + g .* phi(z_context)
};

namespace detail {

inline void check_graph_compat(const EncoderParams& p, const HeteroGraph& g) {
  if (g.node_types != p.meta.type_names || g.root_type != p.meta.root_type)
    throw std::invalid_argument("encoder: graph does not match trained schema");
  for (std::size_t t = 0; t < g.node_types.size(); ++t)
    if (g.features[t].cols != p.meta.raw_dims[t])
      throw std::invalid_argument("encoder: feature width mismatch for type '" +
                                  g.node_types[t] + "'");
}

inline std::vector<double> matrix_row(const Matrix& m, std::size_t r) {
  return std::vector<double>(m.row(r), m.row(r) + m.cols);
}

}  // namespace detail

inline std::vector<EntityEmbedding> encode_entities(const EncoderParams& p,
                                                    const HeteroGraph& graph,
                                                    const std::vector<EntitySubgraph>& subs,
                                                    std::size_t batch_size = 64) {
  detail::check_graph_compat(p, graph);
  std::vector<EntityEmbedding> out;
  out.reserve(subs.size());
  for (std::size_t begin = 0; begin < subs.size(); begin += batch_size) {
    const std::size_t end = std::min(subs.size(), begin + batch_size);
    std::vector<const EntitySubgraph*> ptrs;
    ptrs.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) ptrs.push_back(&subs[i]);
    const SubgraphBatch batch = SubgraphBatch::assemble(p.meta, ptrs);
    Tape tape;
    const EncoderForward f = encoder_forward(tape, p, batch);
    const Matrix& zp = tape.value(f.z_parent);
    const Matrix& zc = tape.value(f.z_context);
    const Matrix& g = tape.value(f.gate);
    const Matrix& zf = tape.value(f.z_final);
    for (std::size_t e = 0; e < batch.n_entities; ++e) {
      EntityEmbedding emb;
      emb.id = batch.ids[e];
      emb.parent = detail::matrix_row(zp, e);
      emb.context = detail::matrix_row(zc, e);
      emb.gate = detail::matrix_row(g, e);
      emb.fused = detail::matrix_row(zf, e);
      out.push_back(std::move(emb));
    }
  }
  return out;
}

inline EntityEmbedding encode_subgraph(const EncoderParams& p, const EntitySubgraph& sub) {
  return encode_entities(p, *sub.graph, {sub}, 1).front();
}

// One message-passing layer applied to explicit hidden states; forward only.
inline std::vector<Matrix> message_pass(const EncoderParams& p, const SubgraphBatch& batch,
                                        const std::vector<Matrix>& hidden, std::size_t layer) {
  if (layer >= p.config.layers)
    throw std::invalid_argument("message_pass: layer out of range");
  Tape tape;
  std::vector<Var> pv;
  pv.reserve(p.tensors.size());
  for (const auto& t : p.tensors) pv.push_back(tape.input(t));
  const Var ones_row = tape.constant(Matrix(1, p.config.hidden_dim, 1.0));
  std::vector<Var> h;
  for (const auto& m : hidden) h.push_back(tape.input(m));

  const std::size_t n_types = p.meta.type_names.size();
  std::vector<std::vector<Var>> arriving(n_types);
  for (std::size_t r = 0; r < p.meta.relations.size(); ++r) {
    if (batch.edge_src[r].empty()) continue;
    const auto& rel = p.meta.relations[r];
    std::vector<Var> attn;
    for (const std::size_t ai : p.rel_attn[layer][r]) attn.push_back(pv[ai]);
    arriving[rel.dst_type].push_back(detail::relation_messages_op(
        tape, h[rel.src_type], h[rel.dst_type], batch.edge_src[r], batch.edge_dst[r],
        batch.entity_of[rel.dst_type].size(), pv[p.rel_wsrc[layer][r]],
        pv[p.rel_wdst[layer][r]], attn, p.config.leaky_slope, ones_row));
  }
  std::vector<Matrix> out(n_types);
  for (std::size_t t = 0; t < n_types; ++t) {
    Var result;
    if (arriving[t].empty()) {
      result = tape.leaky_relu(h[t], p.config.leaky_slope);
    } else {
      Var sum = arriving[t].front();
      for (std::size_t i = 1; i < arriving[t].size(); ++i) sum = tape.add(sum, arriving[t][i]);
      sum = tape.scale(sum, 1.0 / static_cast<double>(p.meta.incident_count[t]));
      result = tape.leaky_relu(tape.add(h[t], sum), p.config.leaky_slope);
    }
    out[t] = tape.value(result);
  }
  return out;
}

// Forward-only pooling over explicit states; segments must partition the rows.
inline Matrix attention_pool(const Matrix& states, const std::vector<std::uint32_t>& segments,
                             std::size_t n_segments, const Matrix& u, const Matrix& v) {
  Tape tape;
  const Var h = tape.input(states);
  const Var pooled = detail::attention_pool_op(tape, h, segments, n_segments, tape.input(u),
                                               tape.input(v),
                                               tape.constant(Matrix(1, states.cols, 1.0)));
  return tape.value(pooled);
}

inline double reconstruction_loss(const EncoderParams& p,
                                  const std::vector<const EntitySubgraph*>& subs) {
  if (subs.empty()) throw std::invalid_argument("reconstruction loss: empty batch");
  const SubgraphBatch batch = SubgraphBatch::assemble(p.meta, subs);
  Tape tape;
  const EncoderForward f = encoder_forward(tape, p, batch);
  return tape.value(reconstruction_loss_op(tape, p, batch, f))(0, 0);
}

struct TrainResult {
  EncoderParams params;
  std::vector<double> loss_history;  // one entry per epoch
};

// Self-supervised reconstruction training over synthetic entity subgraphs.
// Deterministic given the config seed; the only randomness is the parameter
// init and the per-epoch batch order, both drawn from one generator.
inline TrainResult train_encoder(const EncoderConfig& config, const GraphMeta& meta,
                                 const std::vector<EntitySubgraph>& entities,
                                 const std::string& schema_fp) {
  config.validate();
  if (entities.size() < 2)
    throw DataError("train_encoder: need at least 2 synthetic entities");
  TrainResult result;
  result.params = init_encoder_params(meta, config, schema_fp);
  EncoderParams& p = result.params;
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ull);

  AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  AdamState state = AdamState::like(p.tensors);

  std::vector<std::size_t> order(entities.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<const EntitySubgraph*> ptrs;
      ptrs.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) ptrs.push_back(&entities[order[i]]);
      const SubgraphBatch batch = SubgraphBatch::assemble(meta, ptrs);

      Tape tape;
      const EncoderForward f = encoder_forward(tape, p, batch);
      const Var loss = reconstruction_loss_op(tape, p, batch, f);
      const double loss_value = tape.value(loss)(0, 0);
      if (!std::isfinite(loss_value))
        throw NumericError("train_encoder: non-finite loss at epoch " +
                           std::to_string(epoch) + " batch " +
                           std::to_string(begin / config.batch_size));
      epoch_loss += loss_value * static_cast<double>(batch.n_entities);
      tape.backward(loss);
      std::vector<const Matrix*> grads;
      grads.reserve(p.tensors.size());
      for (std::size_t i = 0; i < p.tensors.size(); ++i)
        grads.push_back(&tape.grad(f.params[i]));
      adam_step(p.tensors, grads, state, adam, &p.names);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(entities.size()));
  }
  return result;
}

}  // namespace relmia
