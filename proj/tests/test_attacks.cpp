#include <catch2/catch_amalgamated.hpp>

#include "relmia/attacks.hpp"
#include "relmia/datagen.hpp"
#include "relmia/encoding.hpp"
#include "relmia/metrics.hpp"
#include "relmia/rng.hpp"

using namespace relmia;

namespace {

VectorSet make_set(const std::vector<std::vector<double>>& rows, const std::string& prefix) {
  VectorSet s;
  if (rows.empty()) return s;
  s.rows = Matrix(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    s.ids.push_back(prefix + std::to_string(i));
    std::copy(rows[i].begin(), rows[i].end(), s.rows.row(i));
  }
  return s;
}

VectorSet random_set(Rng& rng, std::size_t n, std::size_t d, const std::string& prefix) {
  VectorSet s;
  s.rows = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    s.ids.push_back(prefix + std::to_string(i));
    for (std::size_t j = 0; j < d; ++j) s.rows(i, j) = rng.normal();
  }
  return s;
}

}  // namespace

TEST_CASE("dcr: exact match scores zero, the maximum") {
  const auto synth = make_set({{1, 2}, {3, 4}}, "s");
  const auto q = make_set({{3, 4}}, "q");
  const auto scores = dcr_score(q, synth);
  REQUIRE(scores.entries[0].score == 0.0);
}

TEST_CASE("dcr: hand geometry") {
  const auto synth = make_set({{0, 0}, {10, 0}}, "s");
  const auto q = make_set({{3, 0}}, "q");
  REQUIRE(dcr_score(q, synth).entries[0].score == Catch::Approx(-3.0));
}

TEST_CASE("dcr matches the exhaustive pairwise oracle") {
  Rng rng(5);
  const auto synth = random_set(rng, 40, 4, "s");
  const auto queries = random_set(rng, 100, 4, "q");
  const auto scores = dcr_score(queries, synth);
  for (std::size_t q = 0; q < 100; ++q) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < 40; ++s)
      best = std::min(best, euclidean_distance(queries.rows.row(q), synth.rows.row(s), 4));
    REQUIRE(scores.entries[q].score == -best);
    REQUIRE(scores.entries[q].score <= 0.0);
  }
}

TEST_CASE("dcr rejects bad inputs") {
  const auto q = make_set({{1, 2}}, "q");
  REQUIRE_THROWS_AS(dcr_score(q, VectorSet{}), DataError);
  REQUIRE_THROWS_AS(dcr_score(q, make_set({{1, 2, 3}}, "s")), DataError);
}

TEST_CASE("mc: counts within the ball") {
  const auto synth = make_set({{0, 0}, {1, 0}, {10, 10}}, "s");
  SECTION("far query scores zero") {
    const auto scores = mc_score(make_set({{100, 100}}, "q"), synth, 1.5);
    REQUIRE(scores.entries[0].score == 0.0);
  }
  SECTION("coincident query counts itself") {
    const auto scores = mc_score(make_set({{0, 0}}, "q"), synth, 1.5);
    REQUIRE(scores.entries[0].score >= 1.0 / 3.0);
  }
  SECTION("default radius is the median nearest-neighbour distance") {
    // nn distances: 1, 1, sqrt(181) -> median 1
    REQUIRE(median_nn_distance(synth) == Catch::Approx(1.0));
  }
  SECTION("single reference row without an explicit radius is an error") {
    REQUIRE_THROWS_AS(mc_score(make_set({{0, 0}}, "q"), make_set({{1, 1}}, "s")), DataError);
    REQUIRE_NOTHROW(mc_score(make_set({{0, 0}}, "q"), make_set({{1, 1}}, "s"), 5.0));
  }
}

TEST_CASE("mc matches the exhaustive ball oracle and stays in [0,1]") {
  Rng rng(9);
  const auto synth = random_set(rng, 50, 3, "s");
  const auto queries = random_set(rng, 50, 3, "q");
  const double radius = 0.9;
  const auto scores = mc_score(queries, synth, radius);
  for (std::size_t q = 0; q < 50; ++q) {
    std::size_t hits = 0;
    for (std::size_t s = 0; s < 50; ++s)
      if (euclidean_distance(queries.rows.row(q), synth.rows.row(s), 3) <= radius) ++hits;
    REQUIRE(scores.entries[q].score == Catch::Approx(hits / 50.0));
    REQUIRE(scores.entries[q].score >= 0.0);
    REQUIRE(scores.entries[q].score <= 1.0);
  }
}

TEST_CASE("kde: kernel peak at a single reference point") {
  for (std::size_t d : {1, 3, 5}) {
    std::vector<double> point(d, 0.7);
    const auto synth = make_set({point}, "s");
    const auto scores = kde_score(make_set({point}, "q"), synth, 1.0);
    REQUIRE(scores.entries[0].score ==
            Catch::Approx(-0.5 * static_cast<double>(d) * std::log(2.0 * 3.14159265358979323846)));
  }
}

TEST_CASE("kde: symmetric two-point reference, query at the midpoint") {
  const double a = 1.25;
  const auto synth = make_set({{-a}, {a}}, "s");
  const auto scores = kde_score(make_set({{0.0}}, "q"), synth, 1.0);
  const double expected = -0.5 * std::log(2.0 * 3.14159265358979323846) - a * a / 2.0;
  REQUIRE(scores.entries[0].score == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("kde matches direct summation to 1e-12") {
  Rng rng(31);
  const auto synth = random_set(rng, 50, 3, "s");
  const auto queries = random_set(rng, 20, 3, "q");
  const double h = 0.8;
  const auto scores = kde_score(queries, synth, h);
  for (std::size_t q = 0; q < 20; ++q) {
    double sum = 0.0;
    for (std::size_t s = 0; s < 50; ++s) {
      const double d2 = squared_distance(queries.rows.row(q), synth.rows.row(s), 3);
      sum += std::pow(2.0 * 3.14159265358979323846, -1.5) * std::pow(h, -3.0) *
             std::exp(-d2 / (2.0 * h * h));
    }
    REQUIRE(scores.entries[q].score == Catch::Approx(std::log(sum / 50.0)).margin(1e-12));
  }
}

TEST_CASE("kde: all-constant reference data is a degenerate density") {
  const auto synth = make_set({{1, 1}, {1, 1}, {1, 1}}, "s");
  REQUIRE_THROWS_AS(kde_score(make_set({{0, 0}}, "q"), synth), NumericError);
  // an explicit bandwidth sidesteps the heuristic
  REQUIRE_NOTHROW(kde_score(make_set({{0, 0}}, "q"), synth, 1.0));
}

TEST_CASE("extract_parent_row keeps only the root features") {
  ToySpec spec;
  spec.members = 3;
  spec.nonmembers = 1;
  spec.member_children = 4;
  spec.customer_dims = 5;
  const auto toy = gen_toy(spec);
  const auto enc = fit_encoding(toy.schema, toy.train);
  const auto g = build_graph(toy.schema, toy.train, apply_encoding(enc, toy.schema, toy.train));
  const auto entities = decompose_entities(g).entities;

  const auto row = extract_parent_row(entities[0]);
  REQUIRE(row.size() == 5);
  for (std::size_t j = 0; j < 5; ++j)
    REQUIRE(row[j] == g.features[g.root_type](entities[0].root_index, j));

  // independent of child count: drop all children, same vector
  EntitySubgraph bare = entities[0];
  bare.nodes[1].clear();
  for (auto& e : bare.edges) e.clear();
  REQUIRE(extract_parent_row(bare) == row);
}

TEST_CASE("embedding attack: a query identical to a reference entity scores zero") {
  std::vector<EntityEmbedding> synth(3);
  Rng rng(12);
  for (std::size_t i = 0; i < 3; ++i) {
    synth[i].id = "s" + std::to_string(i);
    for (int j = 0; j < 6; ++j) {
      synth[i].parent.push_back(rng.normal());
      synth[i].context.push_back(rng.normal());
      synth[i].fused.push_back(rng.normal());
      synth[i].gate.push_back(0.5);
    }
  }
  std::vector<EntityEmbedding> queries = {synth[1]};
  queries[0].id = "q0";
  for (const auto space :
       {EmbeddingSpace::parent, EmbeddingSpace::context, EmbeddingSpace::fused}) {
    const auto scores = embedding_dcr_score(queries, synth, space);
    REQUIRE(scores.entries[0].score == 0.0);
  }
  REQUIRE_THROWS_AS(embedding_dcr_score(queries, {}, EmbeddingSpace::fused), DataError);
}

TEST_CASE("embedding attack matches the all-pairs oracle") {
  Rng rng(13);
  auto fill = [&](std::size_t n, const std::string& prefix) {
    std::vector<EntityEmbedding> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      out[i].id = prefix + std::to_string(i);
      for (int j = 0; j < 4; ++j) {
        out[i].parent.push_back(rng.normal());
        out[i].context.push_back(rng.normal());
        out[i].fused.push_back(rng.normal());
        out[i].gate.push_back(0.5);
      }
    }
    return out;
  };
  const auto queries = fill(5, "q");
  const auto synth = fill(8, "s");
  const auto scores = embedding_dcr_score(queries, synth, EmbeddingSpace::fused);
  for (std::size_t q = 0; q < 5; ++q) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < 8; ++s)
      best = std::min(best, euclidean_distance(queries[q].fused.data(), synth[s].fused.data(), 4));
    REQUIRE(scores.entries[q].score == -best);
  }
}

TEST_CASE("adding a constant to every score leaves the ROC unchanged") {
  Rng rng(14);
  AttackScoreSet base;
  base.attack = "dcr";
  base.space = "raw-row";
  for (int i = 0; i < 60; ++i)
    base.entries.push_back({"e" + std::to_string(i), rng.normal(), i % 2});
  AttackScoreSet shifted = base;
  for (auto& e : shifted.entries) e.score += 123.25;
  const auto a = roc_and_auc(base);
  const auto b = roc_and_auc(shifted);
  REQUIRE(a.auc == b.auc);
  REQUIRE(a.tpr_at_0 == b.tpr_at_0);
  REQUIRE(a.tpr_at_1e2 == b.tpr_at_1e2);
}

TEST_CASE("child-table attack takes the maximum over child rows") {
  ToySpec spec;
  spec.members = 3;
  spec.nonmembers = 1;
  spec.member_children = 2;
  spec.transaction_dims = 2;
  const auto toy = gen_toy(spec);
  const auto enc = fit_encoding(toy.schema, toy.train);
  const auto g = build_graph(toy.schema, toy.train, apply_encoding(enc, toy.schema, toy.train));
  const auto entities = decompose_entities(g).entities;

  // reference rows: the exact child rows of entity 1
  VectorSet synth_rows;
  synth_rows.rows = Matrix(2, 2);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto idx = entities[1].nodes[1][k];
    std::copy(g.features[1].row(idx), g.features[1].row(idx) + 2, synth_rows.rows.row(k));
    synth_rows.ids.push_back("s" + std::to_string(k));
  }
  const auto scores = child_table_score(entities, 1, synth_rows, [](const auto& q, const auto& s) {
    return dcr_score(q, s);
  });
  REQUIRE(scores.entries.size() == 3);
  REQUIRE(scores.entries[1].score == 0.0);  // one of its rows matches exactly
  REQUIRE(scores.entries[0].score < 0.0);
  REQUIRE(scores.entries[2].score < 0.0);

  // an entity with no child rows lands strictly below every scored entity
  auto pruned = entities;
  pruned[0].nodes[1].clear();
  for (auto& e : pruned[0].edges) e.clear();
  const auto scores2 = child_table_score(pruned, 1, synth_rows, [](const auto& q, const auto& s) {
    return dcr_score(q, s);
  });
  REQUIRE(scores2.entries[0].score < scores2.entries[1].score);
  REQUIRE(scores2.entries[0].score < scores2.entries[2].score);
}

TEST_CASE("scoring is pure: repeated evaluation gives identical results") {
  Rng rng(15);
  const auto synth = random_set(rng, 30, 4, "s");
  const auto queries = random_set(rng, 30, 4, "q");
  const auto a = kde_score(queries, synth);
  const auto b = kde_score(queries, synth);
  for (std::size_t i = 0; i < a.entries.size(); ++i)
    REQUIRE(a.entries[i].score == b.entries[i].score);
}
