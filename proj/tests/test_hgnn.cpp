#include <catch2/catch_amalgamated.hpp>

#include "relmia/checkpoint.hpp"
#include "relmia/datagen.hpp"
#include "relmia/encoder.hpp"
#include "relmia/encoding.hpp"
#include "relmia/hetero_graph.hpp"

using namespace relmia;

namespace {

struct ToyFixture {
  RelationalSchema schema;
  HeteroGraph graph;
  std::vector<EntitySubgraph> entities;
  GraphMeta meta;
  std::string fp;

  explicit ToyFixture(ToySpec spec) {
    auto toy = gen_toy(spec);
    schema = toy.schema;
    const auto enc = fit_encoding(schema, toy.train);
    graph = build_graph(schema, toy.train, apply_encoding(enc, schema, toy.train));
    entities = decompose_entities(graph).entities;
    std::vector<std::size_t> dims;
    for (const auto& t : enc.tables) dims.push_back(t.size());
    meta = GraphMeta::from_schema(schema, dims);
    fp = schema_fingerprint(schema);
  }
};

ToySpec small_spec(std::size_t members, std::size_t children, std::uint64_t seed = 5) {
  ToySpec s;
  s.members = members;
  s.nonmembers = 1;
  s.member_children = children;
  s.nonmember_children = 1;
  s.customer_dims = 3;
  s.transaction_dims = 2;
  s.seed = seed;
  return s;
}

EncoderConfig small_config(std::size_t d = 8) {
  EncoderConfig c;
  c.hidden_dim = d;
  c.layers = 2;
  c.epochs = 5;
  c.batch_size = 16;
  c.seed = 99;
  return c;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST_CASE("config validation") {
  EncoderConfig c;
  c.hidden_dim = 0;
  REQUIRE_THROWS_AS(c.validate(), ConfigError);
  c = EncoderConfig{};
  c.lambda_parent = 0;
  c.lambda_context = 0;
  REQUIRE_THROWS_AS(c.validate(), ConfigError);
  c = EncoderConfig{};
  c.lambda_context = 0;
  REQUIRE_NOTHROW(c.validate());
}

TEST_CASE("message passing: node without incoming edges passes through the residual") {
  ToyFixture fx(small_spec(2, 1));
  const auto params = init_encoder_params(fx.meta, small_config(4), fx.fp);

  SubgraphBatch batch;
  batch.n_entities = 1;
  batch.ids = {"e"};
  batch.features = {Matrix(1, 3), Matrix(0, 2)};
  batch.entity_of = {{0}, {}};
  batch.root_rows = {0};
  batch.edge_src.resize(fx.meta.relations.size());
  batch.edge_dst.resize(fx.meta.relations.size());
  batch.parent_target = Matrix(1, 3);
  batch.context_target = {Matrix(), Matrix(1, 2)};

  Matrix h_root(1, 4);
  h_root.data = {0.5, -1.25, 2.0, -0.125};
  const auto out = message_pass(params, batch, {h_root, Matrix(0, 4)}, 0);
  for (std::size_t j = 0; j < 4; ++j) {
    const double x = h_root.data[j];
    REQUIRE(out[0](0, j) == (x > 0 ? x : 0.2 * x));
  }
}

TEST_CASE("message passing: one neighbour gets softmax weight exactly 1") {
  ToyFixture fx(small_spec(2, 1));
  auto params = init_encoder_params(fx.meta, small_config(4), fx.fp);

  SubgraphBatch batch;
  batch.n_entities = 1;
  batch.ids = {"e"};
  batch.features = {Matrix(1, 3), Matrix(1, 2)};
  batch.entity_of = {{0}, {0}};
  batch.root_rows = {0};
  batch.edge_src.resize(fx.meta.relations.size());
  batch.edge_dst.resize(fx.meta.relations.size());
  batch.edge_src[0] = {0};  // child -> root relation
  batch.edge_dst[0] = {0};

  Matrix h_root(1, 4), h_child(1, 4);
  for (std::size_t j = 0; j < 4; ++j) {
    h_root.data[j] = 0.1 * static_cast<double>(j + 1);
    h_child.data[j] = -0.3 + 0.2 * static_cast<double>(j);
  }
  const auto out = message_pass(params, batch, {h_root, h_child}, 0);

  // expected: leaky(h_root + (1/incident) * W_src h_child), weight exactly 1
  const Matrix& wsrc = params.tensors[params.rel_wsrc[0][0]];
  Matrix msg = matmul(h_child, wsrc);
  const double inv = 1.0 / static_cast<double>(fx.meta.incident_count[0]);
  for (std::size_t j = 0; j < 4; ++j) {
    const double pre = h_root.data[j] + inv * msg.data[j];
    REQUIRE(out[0](0, j) == Catch::Approx(pre > 0 ? pre : 0.2 * pre).margin(1e-12));
  }
}

TEST_CASE("message passing: three identical neighbours equal one") {
  ToyFixture fx(small_spec(2, 3));
  const auto params = init_encoder_params(fx.meta, small_config(4), fx.fp);

  auto make_batch = [&](std::size_t n_children) {
    SubgraphBatch b;
    b.n_entities = 1;
    b.ids = {"e"};
    b.features = {Matrix(1, 3), Matrix(n_children, 2)};
    b.entity_of = {{0}, std::vector<std::uint32_t>(n_children, 0)};
    b.root_rows = {0};
    b.edge_src.resize(fx.meta.relations.size());
    b.edge_dst.resize(fx.meta.relations.size());
    for (std::uint32_t c = 0; c < n_children; ++c) {
      b.edge_src[0].push_back(c);
      b.edge_dst[0].push_back(0);
    }
    return b;
  };
  Matrix h_root(1, 4);
  h_root.data = {0.4, -0.2, 0.9, 0.05};
  Matrix child_state(1, 4);
  child_state.data = {1.0, -0.5, 0.25, 0.75};

  const auto one = message_pass(params, make_batch(1), {h_root, child_state}, 0);
  Matrix three_children(3, 4);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < 4; ++j) three_children(r, j) = child_state.data[j];
  const auto three = message_pass(params, make_batch(3), {h_root, three_children}, 0);
  for (std::size_t j = 0; j < 4; ++j)
    REQUIRE(three[0](0, j) == Catch::Approx(one[0](0, j)).margin(1e-12));
}

TEST_CASE("attention pooling") {
  Rng rng(21);
  Matrix u(4, 4), v(4, 1);
  for (double& x : u.data) x = rng.normal();
  for (double& x : v.data) x = rng.normal();

  SECTION("a singleton segment pools to the node state") {
    Matrix h(1, 4);
    h.data = {0.3, -1.0, 0.7, 2.0};
    const Matrix pooled = attention_pool(h, {0}, 1, u, v);
    for (std::size_t j = 0; j < 4; ++j) REQUIRE(pooled(0, j) == Catch::Approx(h.data[j]));
  }
  SECTION("identical nodes pool to the common state") {
    Matrix h(5, 4);
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t j = 0; j < 4; ++j) h(r, j) = 0.1 * static_cast<double>(j) - 0.2;
    const Matrix pooled = attention_pool(h, {0, 0, 0, 0, 0}, 1, u, v);
    for (std::size_t j = 0; j < 4; ++j)
      REQUIRE(pooled(0, j) == Catch::Approx(h(0, j)).margin(1e-12));
  }
  SECTION("random segment matches the softmax-weighted sum oracle") {
    Matrix h(4, 4);
    for (double& x : h.data) x = rng.normal();
    const Matrix pooled = attention_pool(h, {0, 0, 0, 0}, 1, u, v);
    // oracle
    std::vector<double> scores(4);
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0;
      for (std::size_t j = 0; j < 4; ++j) {
        double t = 0;
        for (std::size_t k = 0; k < 4; ++k) t += h(r, k) * u(k, j);
        s += std::tanh(t) * v(j, 0);
      }
      scores[r] = s;
    }
    double mx = *std::max_element(scores.begin(), scores.end());
    double z = 0;
    for (double& s : scores) {
      s = std::exp(s - mx);
      z += s;
    }
    for (std::size_t j = 0; j < 4; ++j) {
      double want = 0;
      for (std::size_t r = 0; r < 4; ++r) want += scores[r] / z * h(r, j);
      REQUIRE(pooled(0, j) == Catch::Approx(want).margin(1e-12));
    }
  }
  SECTION("empty segments pool to zero") {
    Matrix h(2, 4);
    for (double& x : h.data) x = rng.normal();
    const Matrix pooled = attention_pool(h, {2, 2}, 3, u, v);
    for (std::size_t j = 0; j < 4; ++j) {
      REQUIRE(pooled(0, j) == 0.0);
      REQUIRE(pooled(1, j) == 0.0);
    }
  }
}

TEST_CASE("encode: childless root has zero context and z_final == z_parent at init") {
  ToyFixture fx(small_spec(3, 2));
  const auto params = init_encoder_params(fx.meta, small_config(), fx.fp);

  // synthesise a childless subgraph: keep only the root node
  EntitySubgraph lonely = fx.entities[0];
  lonely.nodes[1].clear();
  for (auto& e : lonely.edges) e.clear();

  const auto emb = encode_subgraph(params, lonely);
  for (const double v : emb.context) REQUIRE(v == 0.0);
  REQUIRE(max_abs_diff(emb.fused, emb.parent) == 0.0);
  for (const double g : emb.gate) {
    REQUIRE(g >= 0.0);
    REQUIRE(g <= 1.0);
  }
}

TEST_CASE("encode: output dimension is fixed across child counts 0, 1, 100") {
  ToySpec spec = small_spec(3, 100, 11);
  spec.nonmember_children = 1;
  ToyFixture fx(spec);
  const std::size_t d = 16;
  const auto params = init_encoder_params(fx.meta, small_config(d), fx.fp);

  EntitySubgraph none = fx.entities[0];
  none.nodes[1].clear();
  for (auto& e : none.edges) e.clear();
  EntitySubgraph one = fx.entities[1];
  one.nodes[1].resize(1);
  one.edges[0].resize(1);
  const EntitySubgraph& hundred = fx.entities[2];
  REQUIRE(hundred.nodes[1].size() == 100);

  const std::vector<const EntitySubgraph*> cases = {&none, &one, &hundred};
  for (const EntitySubgraph* sub : cases) {
    const auto emb = encode_subgraph(params, *sub);
    REQUIRE(emb.parent.size() == d);
    REQUIRE(emb.context.size() == d);
    REQUIRE(emb.gate.size() == d);
    REQUIRE(emb.fused.size() == d);
  }
}

TEST_CASE("encode: permuting child order changes nothing beyond roundoff") {
  ToyFixture fx(small_spec(2, 12, 13));
  const auto params = init_encoder_params(fx.meta, small_config(12), fx.fp);
  const EntitySubgraph& sub = fx.entities[0];
  EntitySubgraph shuffled = sub;
  Rng rng(77);
  rng.shuffle(shuffled.nodes[1]);
  rng.shuffle(shuffled.edges[0]);

  const auto a = encode_subgraph(params, sub);
  const auto b = encode_subgraph(params, shuffled);
  REQUIRE(max_abs_diff(a.parent, b.parent) <= 1e-9);
  REQUIRE(max_abs_diff(a.context, b.context) <= 1e-9);
  REQUIRE(max_abs_diff(a.fused, b.fused) <= 1e-9);
}

TEST_CASE("encode: batched and single-entity encodings agree bitwise") {
  ToyFixture fx(small_spec(6, 4, 17));
  const auto params = init_encoder_params(fx.meta, small_config(), fx.fp);
  const auto batched = encode_entities(params, fx.graph, fx.entities, 4);
  for (std::size_t i = 0; i < fx.entities.size(); ++i) {
    const auto single = encode_subgraph(params, fx.entities[i]);
    REQUIRE(single.fused == batched[i].fused);
    REQUIRE(single.parent == batched[i].parent);
  }
}

TEST_CASE("encode: fused embedding recomposes from its parts") {
  ToyFixture fx(small_spec(4, 5, 23));
  const auto params = init_encoder_params(fx.meta, small_config(), fx.fp);
  const auto embeddings = encode_entities(params, fx.graph, fx.entities);
  const Matrix& wphi = params.tensors[params.phi_w];
  const Matrix& bphi = params.tensors[params.phi_b];
  for (const auto& e : embeddings) {
    Matrix zc(1, e.context.size());
    zc.data = e.context;
    Matrix phi = matmul(zc, wphi);
    for (std::size_t j = 0; j < phi.cols; ++j)
      phi.data[j] = std::tanh(phi.data[j] + bphi.data[j]);
    for (std::size_t j = 0; j < e.fused.size(); ++j)
      REQUIRE(e.fused[j] == e.parent[j] + e.gate[j] * phi.data[j]);
    for (const double g : e.gate) {
      REQUIRE(g >= 0.0);
      REQUIRE(g <= 1.0);
    }
  }
}

TEST_CASE("loss: zero features and zero targets give exactly zero") {
  ToyFixture fx(small_spec(2, 2, 29));
  // wipe the graph features: every target and every input becomes zero
  for (auto& m : fx.graph.features)
    for (double& v : m.data) v = 0.0;
  const auto params = init_encoder_params(fx.meta, small_config(), fx.fp);
  std::vector<const EntitySubgraph*> ptrs;
  for (const auto& e : fx.entities) ptrs.push_back(&e);
  REQUIRE(reconstruction_loss(params, ptrs) == 0.0);
}

TEST_CASE("loss: lambda_c = 0 reduces to parent reconstruction error") {
  ToyFixture fx(small_spec(5, 3, 31));
  EncoderConfig cfg = small_config();
  cfg.lambda_context = 0.0;
  cfg.lambda_parent = 1.0;
  const auto params = init_encoder_params(fx.meta, cfg, fx.fp);
  std::vector<const EntitySubgraph*> ptrs;
  for (const auto& e : fx.entities) ptrs.push_back(&e);
  const double loss = reconstruction_loss(params, ptrs);

  // independent mean-squared-error recomputation
  const auto embeddings = encode_entities(params, fx.graph, fx.entities);
  const Matrix& w = params.tensors[params.dec_parent_w];
  const Matrix& b = params.tensors[params.dec_parent_b];
  double mse = 0.0;
  for (std::size_t i = 0; i < fx.entities.size(); ++i) {
    Matrix z(1, embeddings[i].fused.size());
    z.data = embeddings[i].fused;
    Matrix pred = matmul(z, w);
    const double* target = fx.graph.features[fx.graph.root_type].row(fx.entities[i].root_index);
    for (std::size_t j = 0; j < pred.cols; ++j) {
      const double diff = pred.data[j] + b.data[j] - target[j];
      mse += diff * diff;
    }
  }
  mse /= static_cast<double>(fx.entities.size());
  REQUIRE(loss == Catch::Approx(mse).epsilon(1e-12));
}

TEST_CASE("training: loss drops below a quarter of the initial loss") {
  ToyFixture fx(small_spec(40, 3, 37));
  EncoderConfig cfg;
  cfg.hidden_dim = 8;
  cfg.layers = 2;
  cfg.epochs = 100;
  cfg.batch_size = 16;
  cfg.learning_rate = 5e-3;
  cfg.seed = 3;
  const auto result = train_encoder(cfg, fx.meta, fx.entities, fx.fp);
  REQUIRE(result.loss_history.size() == 100);
  for (const double l : result.loss_history) REQUIRE(std::isfinite(l));
  REQUIRE(result.loss_history.back() < 0.25 * result.loss_history.front());
}

TEST_CASE("training: the same seed reproduces parameters bit for bit") {
  ToyFixture fx(small_spec(8, 2, 41));
  EncoderConfig cfg = small_config();
  cfg.epochs = 3;
  const auto a = train_encoder(cfg, fx.meta, fx.entities, fx.fp);
  const auto b = train_encoder(cfg, fx.meta, fx.entities, fx.fp);
  REQUIRE(a.loss_history == b.loss_history);
  for (std::size_t i = 0; i < a.params.tensors.size(); ++i)
    REQUIRE(a.params.tensors[i].data == b.params.tensors[i].data);
}

TEST_CASE("training requires at least two entities") {
  ToyFixture fx(small_spec(2, 1, 43));
  fx.entities.resize(1);
  REQUIRE_THROWS_AS(train_encoder(small_config(), fx.meta, fx.entities, fx.fp), DataError);
}

TEST_CASE("full encoder loss passes a finite-difference gradient check") {
  // three-node entity: one customer, two transactions. Features are scaled
  // down so the loss is small: central differences at step 1e-5 otherwise
  // drown coordinates whose true gradient is exactly zero (the softmax is
  // shift-invariant in the destination transform) in cancellation noise.
  ToyFixture fx(small_spec(2, 2, 47));
  for (auto& m : fx.graph.features)
    for (double& v : m.data) v *= 0.05;
  EncoderConfig cfg;
  cfg.hidden_dim = 5;
  cfg.layers = 2;
  cfg.seed = 7;
  const auto params = init_encoder_params(fx.meta, cfg, fx.fp);
  const SubgraphBatch batch = SubgraphBatch::assemble(fx.meta, {&fx.entities[0]});
  REQUIRE(fx.entities[0].total_nodes() == 3);

  const auto loss_fn = [&](Tape& tape, const std::vector<Var>& vars) {
    const EncoderForward f = encoder_forward_with_vars(tape, params, batch, vars);
    return reconstruction_loss_op(tape, params, batch, f);
  };
  const double err = grad_check(loss_fn, params.tensors, 1e-5);
  REQUIRE(err < 1e-4);
}

TEST_CASE("two attention heads still encode and train") {
  ToyFixture fx(small_spec(6, 2, 53));
  EncoderConfig cfg = small_config();
  cfg.heads = 2;
  cfg.epochs = 2;
  const auto result = train_encoder(cfg, fx.meta, fx.entities, fx.fp);
  const auto emb = encode_entities(result.params, fx.graph, fx.entities);
  REQUIRE(emb.size() == fx.entities.size());
  REQUIRE(emb[0].fused.size() == cfg.hidden_dim);
}

TEST_CASE("checkpoints round-trip and refuse mismatched schemas") {
  ToyFixture fx(small_spec(3, 2, 59));
  const auto params = init_encoder_params(fx.meta, small_config(), fx.fp);
  const std::string path = "ckpt_roundtrip.json";
  save_checkpoint(params, path);
  const auto loaded = load_checkpoint(path, fx.schema);
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    REQUIRE(loaded.tensors[i].data == params.tensors[i].data);
  REQUIRE(loaded.config.hidden_dim == params.config.hidden_dim);

  RelationalSchema other = fx.schema;
  other.tables[0].columns.push_back({"extra", ColumnKind::numeric});
  REQUIRE_THROWS_AS(load_checkpoint(path, other), ConfigError);
  std::remove(path.c_str());
}
