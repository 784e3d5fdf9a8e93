#include <catch2/catch_amalgamated.hpp>

#include "relmia/datagen.hpp"
#include "relmia/encoding.hpp"
#include "relmia/hetero_graph.hpp"
#include "relmia/metrics.hpp"
#include "relmia/rng.hpp"

using namespace relmia;

namespace {

AttackScoreSet make_scores(const std::vector<std::pair<double, int>>& scored) {
  AttackScoreSet s;
  s.attack = "test";
  s.space = "raw-row";
  for (std::size_t i = 0; i < scored.size(); ++i)
    s.entries.push_back({"e" + std::to_string(i), scored[i].first, scored[i].second});
  return s;
}

// O(n^2) pairwise AUC with ties counted one half
double auc_oracle(const AttackScoreSet& s) {
  double wins = 0.0;
  std::size_t np = 0, nn = 0;
  for (const auto& a : s.entries) {
    if (a.label != 1) continue;
    ++np;
    for (const auto& b : s.entries) {
      if (b.label != 0) continue;
      if (a.score > b.score) wins += 1.0;
      else if (a.score == b.score) wins += 0.5;
    }
  }
  for (const auto& b : s.entries)
    if (b.label == 0) ++nn;
  return wins / (static_cast<double>(np) * static_cast<double>(nn));
}

AttackScoreSet random_tied_scores(Rng& rng, std::size_t n) {
  std::vector<std::pair<double, int>> scored;
  for (std::size_t i = 0; i < n; ++i) {
    // coarse grid of values forces plenty of ties
    const double v = static_cast<double>(rng.index(7)) * 0.5 - 1.0;
    scored.emplace_back(v, rng.index(2) == 0 ? 0 : 1);
  }
  // guarantee both classes
  scored[0].second = 1;
  scored[n - 1].second = 0;
  return make_scores(scored);
}

}  // namespace

TEST_CASE("auc: perfectly separated scores") {
  const auto s = make_scores({{3.0, 1}, {2.5, 1}, {1.0, 0}, {0.5, 0}});
  const auto r = roc_and_auc(s);
  REQUIRE(r.auc == 1.0);
  REQUIRE(r.tpr_at_0 == 1.0);
  REQUIRE(r.members == 2);
  REQUIRE(r.nonmembers == 2);
}

TEST_CASE("auc: all-equal scores are pure chance") {
  const auto s = make_scores({{1.0, 1}, {1.0, 1}, {1.0, 0}, {1.0, 0}});
  const auto r = roc_and_auc(s);
  REQUIRE(r.auc == 0.5);
  REQUIRE(r.tpr_at_0 == 0.0);
  REQUIRE(r.tpr_at_1e2 == 0.0);
}

TEST_CASE("auc equals the pairwise oracle exactly on tie-laden sets") {
  Rng rng(1234);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_tied_scores(rng, 5 + rng.index(45));
    REQUIRE(roc_and_auc(s).auc == auc_oracle(s));
  }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
  Rng rng(77);
  const auto s = random_tied_scores(rng, 40);
  auto t = s;
  for (auto& e : t.entries) e.score = std::exp(0.5 * e.score) + 2.0;
  REQUIRE(roc_and_auc(s).auc == roc_and_auc(t).auc);
}

TEST_CASE("auc of negated scores complements to one") {
  Rng rng(78);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_tied_scores(rng, 30);
    auto neg = s;
    for (auto& e : neg.entries) e.score = -e.score;
    REQUIRE(roc_and_auc(s).auc + roc_and_auc(neg).auc == 1.0);
  }
}

TEST_CASE("tpr is nondecreasing in the fpr budget") {
  Rng rng(79);
  for (int trial = 0; trial < 30; ++trial) {
    const auto r = roc_and_auc(random_tied_scores(rng, 50));
    REQUIRE(r.tpr_at_0 <= r.tpr_at_1e3);
    REQUIRE(r.tpr_at_1e3 <= r.tpr_at_1e2);
  }
}

TEST_CASE("roc points are monotone in both coordinates") {
  Rng rng(80);
  const auto r = roc_and_auc(random_tied_scores(rng, 60));
  for (std::size_t i = 1; i < r.roc.size(); ++i) {
    REQUIRE(r.roc[i].fpr >= r.roc[i - 1].fpr);
    REQUIRE(r.roc[i].tpr >= r.roc[i - 1].tpr);
  }
  REQUIRE(r.roc.back().fpr == 1.0);
  REQUIRE(r.roc.back().tpr == 1.0);
}

TEST_CASE("tpr at zero fpr counts members strictly above the top nonmember") {
  const auto s = make_scores({{5.0, 1}, {4.0, 1}, {3.0, 0}, {3.0, 1}, {1.0, 0}});
  const auto r = roc_and_auc(s);
  REQUIRE(r.tpr_at_0 == Catch::Approx(2.0 / 3.0));  // the member tied at 3.0 is not free
}

TEST_CASE("single-class score sets are rejected") {
  REQUIRE_THROWS_AS(roc_and_auc(make_scores({{1.0, 1}, {2.0, 1}})), DataError);
  auto s = make_scores({{1.0, 1}, {2.0, 1}});
  s.entries[0].label = -1;
  REQUIRE_THROWS_AS(roc_and_auc(s), DataError);
}

TEST_CASE("ks complement") {
  SECTION("identical samples") {
    REQUIRE(ks_complement({1, 2, 3}, {1, 2, 3}) == 1.0);
  }
  SECTION("disjoint supports") {
    REQUIRE(ks_complement({1, 2, 3}, {10, 11}) == 0.0);
  }
  SECTION("enumerated ECDF steps") {
    REQUIRE(ks_complement({1, 2, 3}, {2, 3, 4}) == Catch::Approx(2.0 / 3.0));
  }
  SECTION("symmetry") {
    Rng rng(81);
    std::vector<double> a, b;
    for (int i = 0; i < 20; ++i) a.push_back(rng.normal());
    for (int i = 0; i < 31; ++i) b.push_back(rng.normal());
    REQUIRE(ks_complement(a, b) == ks_complement(b, a));
  }
  SECTION("matches a brute-force oracle") {
    Rng rng(82);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> a, b;
      const std::size_t n = 2 + rng.index(20), m = 2 + rng.index(20);
      for (std::size_t i = 0; i < n; ++i) a.push_back(static_cast<double>(rng.index(10)));
      for (std::size_t i = 0; i < m; ++i) b.push_back(static_cast<double>(rng.index(10)));
      double worst = 0.0;
      for (int x = -1; x < 11; ++x) {
        double fa = 0, fb = 0;
        for (const double v : a)
          if (v <= x) fa += 1.0;
        for (const double v : b)
          if (v <= x) fb += 1.0;
        worst = std::max(worst, std::abs(fa / static_cast<double>(n) - fb / static_cast<double>(m)));
      }
      REQUIRE(ks_complement(a, b) == Catch::Approx(1.0 - worst).margin(1e-12));
    }
  }
}

TEST_CASE("tv complement") {
  SECTION("identical empirical distributions") {
    REQUIRE(tv_complement({"a", "b", "a"}, {"a", "a", "b"}) == 1.0);
  }
  SECTION("disjoint category sets") {
    REQUIRE(tv_complement({"a", "a"}, {"b", "c"}) == 0.0);
  }
  SECTION("direct computation") {
    REQUIRE(tv_complement({"a", "a", "b"}, {"a", "b", "b"}) == Catch::Approx(2.0 / 3.0));
  }
  SECTION("symmetry") {
    REQUIRE(tv_complement({"x", "y", "y"}, {"x", "z"}) ==
            tv_complement({"x", "z"}, {"x", "y", "y"}));
  }
}

namespace {

struct FidelityFixture {
  RelationalSchema schema;
  DatabaseInstance real, synth;
  HeteroGraph real_g, synth_g;

  FidelityFixture(ToySpec spec, double noise, std::uint64_t gen_seed = 300) {
    auto toy = gen_toy(spec);
    schema = toy.schema;
    real = toy.train;
    synth = mock_memorizing_generator(schema, real, noise, gen_seed);
    const auto enc = fit_encoding(schema, synth);
    real_g = build_graph(schema, real, apply_encoding(enc, schema, real));
    synth_g = build_graph(schema, synth, apply_encoding(enc, schema, synth));
  }
};

}  // namespace

TEST_CASE("fidelity: a verbatim copy scores 1.0 on every metric") {
  ToySpec spec;
  spec.members = 40;
  spec.nonmembers = 1;
  spec.member_children = 3;
  FidelityFixture fx(spec, 0.0);
  const auto rep = fidelity_report(fx.schema, fx.real, fx.real_g, fx.synth, fx.synth_g);
  REQUIRE(rep.one_way == 1.0);
  REQUIRE(rep.cardinality == 1.0);
  REQUIRE(rep.hops.at(0) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(rep.hops.at(1) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(rep.avg_hop_score == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("one-way: a shifted column averages in as zero") {
  RelationalSchema s;
  TableSpec t;
  t.name = "T";
  t.columns = {{"id", ColumnKind::categorical},
               {"a", ColumnKind::numeric},
               {"b", ColumnKind::numeric},
               {"c", ColumnKind::numeric}};
  t.primary_key = "id";
  s.tables = {t};
  s.root_table = "T";
  auto db_of = [](const std::vector<double>& a, const std::vector<double>& b,
                  const std::vector<double>& c) {
    DatabaseInstance db;
    TableData d;
    d.row_count = a.size();
    d.features.resize(3);
    for (auto& col : d.features) col.kind = ColumnKind::numeric;
    d.features[0].numeric = a;
    d.features[1].numeric = b;
    d.features[2].numeric = c;
    for (auto& col : d.features) col.missing.assign(a.size(), 0);
    for (std::size_t i = 0; i < a.size(); ++i) d.pk.push_back("r" + std::to_string(i));
    db.tables = {d};
    return db;
  };
  const auto real = db_of({1, 2, 3}, {4, 5, 6}, {7, 8, 9});
  const auto synth = db_of({1001, 1002, 1003}, {4, 5, 6}, {7, 8, 9});
  REQUIRE(one_way_fidelity(s, real, synth) == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("cardinality fidelity compares children-per-parent distributions") {
  auto bare = [](std::size_t parents, const std::vector<std::size_t>& children_of) {
    HeteroGraph g;
    g.node_types = {"p", "c"};
    g.root_type = 0;
    std::size_t total = 0;
    for (const auto n : children_of) total += n;
    g.features = {Matrix(parents, 0), Matrix(total, 0)};
    g.node_keys.resize(2);
    for (std::size_t i = 0; i < parents; ++i) g.node_keys[0].push_back("p" + std::to_string(i));
    for (std::size_t i = 0; i < total; ++i) g.node_keys[1].push_back("c" + std::to_string(i));
    HeteroGraph::Relation rel;
    rel.name = "c.fk";
    rel.src_type = 1;
    rel.dst_type = 0;
    std::uint32_t c = 0;
    for (std::uint32_t p = 0; p < parents; ++p)
      for (std::size_t k = 0; k < children_of[p]; ++k) rel.edges.emplace_back(c++, p);
    g.relations = {rel};
    return g;
  };
  RelationalSchema dummy;  // only relations drive the metric
  dummy.tables.resize(2);

  SECTION("identical structure") {
    const auto a = bare(4, {1, 2, 0, 3});
    REQUIRE(cardinality_fidelity(dummy, a, a) == 1.0);
  }
  SECTION("all-ones versus all-twos is total disagreement") {
    const auto a = bare(3, {1, 1, 1});
    const auto b = bare(3, {2, 2, 2});
    REQUIRE(cardinality_fidelity(dummy, a, b) == 0.0);
  }
  SECTION("hand-enumerated mixed counts") {
    const auto a = bare(4, {0, 1, 1, 2});  // ECDF steps at 0:.25, 1:.75, 2:1
    const auto b = bare(4, {1, 1, 2, 2});  // 0:0, 1:.5, 2:1
    // sup diff = .25 at 0 vs .25... at 1: |.75-.5| = .25; max = .25
    REQUIRE(cardinality_fidelity(dummy, a, b) == Catch::Approx(0.75));
  }
}

TEST_CASE("k-hop correlation agreement") {
  ToySpec spec;
  spec.members = 60;
  spec.nonmembers = 1;
  spec.member_children = 2;
  spec.customer_dims = 2;
  spec.transaction_dims = 2;

  SECTION("verbatim copy gives 1.0 at both hops") {
    FidelityFixture fx(spec, 0.0);
    REQUIRE(khop_correlation(fx.schema, fx.real, fx.real_g, fx.synth, fx.synth_g, 0) ==
            Catch::Approx(1.0).margin(1e-12));
    REQUIRE(khop_correlation(fx.schema, fx.real, fx.real_g, fx.synth, fx.synth_g, 1) ==
            Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("opposite correlations score zero") {
    FidelityFixture fx(spec, 0.0);
    // real: second column equals the first; synth: the negation
    auto& rc = fx.real.tables[0].features;
    auto& sc = fx.synth.tables[0].features;
    rc[1].numeric = rc[0].numeric;
    sc[0].numeric = rc[0].numeric;
    for (std::size_t i = 0; i < rc[0].numeric.size(); ++i)
      sc[1].numeric.at(i) = -rc[0].numeric[i];
    FidelityDetail detail;
    const double v = khop_correlation(fx.schema, fx.real, fx.real_g, fx.synth, fx.synth_g, 0,
                                      &detail);
    const double pair0 = detail.pairs.at("0-hop:Customers.c0/c1").get<double>();
    REQUIRE(pair0 == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(v < 1.0);
  }
  SECTION("matches independently computed correlations") {
    FidelityFixture fx(spec, 0.4);
    FidelityDetail detail;
    khop_correlation(fx.schema, fx.real, fx.real_g, fx.synth, fx.synth_g, 0, &detail);
    auto rho = [](const std::vector<double>& x, const std::vector<double>& y) {
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
      }
      mx /= static_cast<double>(x.size());
      my /= static_cast<double>(x.size());
      double xx = 0, yy = 0, xy = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        xx += (x[i] - mx) * (x[i] - mx);
        yy += (y[i] - my) * (y[i] - my);
        xy += (x[i] - mx) * (y[i] - my);
      }
      return xy / std::sqrt(xx * yy);
    };
    const double real_rho =
        rho(fx.real.tables[0].features[0].numeric, fx.real.tables[0].features[1].numeric);
    const double synth_rho =
        rho(fx.synth.tables[0].features[0].numeric, fx.synth.tables[0].features[1].numeric);
    const double expected = 1.0 - std::abs(real_rho - synth_rho) / 2.0;
    REQUIRE(detail.pairs.at("0-hop:Customers.c0/c1").get<double>() ==
            Catch::Approx(expected).margin(1e-12));
  }
  SECTION("zero-variance columns are skipped with a warning") {
    FidelityFixture fx(spec, 0.0);
    auto& col = fx.real.tables[0].features[0];
    std::fill(col.numeric.begin(), col.numeric.end(), 3.0);
    FidelityDetail detail;
    khop_correlation(fx.schema, fx.real, fx.real_g, fx.synth, fx.synth_g, 0, &detail);
    bool warned = false;
    for (const auto& w : detail.warnings)
      if (w.find("skipped") != std::string::npos) warned = true;
    REQUIRE(warned);
  }
}

TEST_CASE("avg_hop is the arithmetic mean of the hop scores") {
  REQUIRE(avg_hop({0.9, 0.7}) == Catch::Approx(0.8));
  REQUIRE(avg_hop({0.42}) == 0.42);
  REQUIRE(avg_hop({0.948, 0.910}) == Catch::Approx(0.929).margin(1e-12));
  REQUIRE_THROWS_AS(avg_hop({}), DataError);
}

TEST_CASE("fidelity report serialises with stable keys") {
  ToySpec spec;
  spec.members = 10;
  spec.nonmembers = 1;
  spec.member_children = 2;
  FidelityFixture fx(spec, 0.1);
  const auto rep = fidelity_report(fx.schema, fx.real, fx.real_g, fx.synth, fx.synth_g);
  const auto j = rep.to_json();
  REQUIRE(j.contains("one_way"));
  REQUIRE(j.contains("cardinality"));
  REQUIRE(j.at("hops").contains("0"));
  REQUIRE(j.at("hops").contains("1"));
  REQUIRE(j.contains("avg_hop"));
}
