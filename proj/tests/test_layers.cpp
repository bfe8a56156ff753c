#include <doctest.h>

#include <cmath>
#include <numeric>

#include "compbench/errors.hpp"
#include "compbench/layers.hpp"
#include "support/generators.hpp"

using namespace compbench;
using testing_support::Gen;
using testing_support::Json;

namespace {

TensorSummary summary(const std::vector<double>& edges, const std::vector<double>& counts,
                      const std::string& path = "fc1.weight", TensorKind kind = TensorKind::weights) {
  TensorSummary s;
  s.model = "m";
  s.path = path;
  s.hist = Histogram{edges, counts};
  s.param_count = static_cast<long>(std::accumulate(counts.begin(), counts.end(), 0.0));
  s.kind = kind;
  return s;
}

LayerRecord record(const std::string& path, long params, long zeros, Histogram h) {
  LayerRecord r;
  r.path = path;
  r.param_count = params;
  r.zero_count = zeros;
  r.weight_hist = std::move(h);
  return r;
}

ModelLayers three_layers(const std::string& model, long fc1w_zeros, const Histogram& fc2w) {
  ModelLayers m;
  m.model = model;
  m.layers.push_back(record("fc1.weight", 8, fc1w_zeros, Histogram{{0, 1, 2}, {4, 4}}));
  m.layers.push_back(record("fc1.bias", 2, 1, Histogram{{0, 1}, {2}}));
  m.layers.push_back(record("fc2.weight", 4, 0, fc2w));
  return m;
}

Histogram random_histogram(Gen& g) {
  const int k = g.integer(1, 30);
  Histogram h;
  double x = g.real(-3, 3);
  h.edges.push_back(x);
  for (int i = 0; i < k; ++i) {
    x += g.real(0.01, 1.0);
    h.edges.push_back(x);
    h.counts.push_back(g.coin(0.2) ? 0.0 : static_cast<double>(g.integer(0, 500)));
  }
  return h;
}

}  // namespace

TEST_SUITE("layers") {
  TEST_CASE("make histogram") {
    const auto h = make_histogram({0.0, 0.5, 1.0, 1.0}, 2);
    CHECK(h.edges == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(h.counts == std::vector<double>{1, 3});
    const auto c = make_histogram({2.0, 2.0}, 5);
    CHECK(c.edges == std::vector<double>{2.0, 3.0});
    CHECK(c.counts == std::vector<double>{2});
  }

  TEST_CASE("histogram json validation") {
    CHECK_THROWS_AS(histogram_from_json(Json{{"edges", {0, 1}}, {"counts", {1, 2}}}, "x"), Error);
    CHECK_THROWS_AS(histogram_from_json(Json{{"edges", {1, 0}}, {"counts", {1}}}, "x"), Error);
    CHECK(to_json(Histogram{{0, 1}, {3}})["counts"][0].is_number_integer());
    CHECK(to_json(Histogram{{0, 1}, {2.5}})["counts"][0] == 2.5);
  }

  TEST_CASE("rebin examples") {
    const Histogram h{{0, 1}, {10}};
    CHECK(rebin(h, {0, 0.5, 1}).counts == std::vector<double>{5, 5});
    const Histogram same{{0, 1, 3}, {2, 7}};
    CHECK(rebin(same, same.edges).counts == same.counts);
    CHECK_THROWS_AS(rebin(h, {1, 0}), Error);
  }

  TEST_CASE("property: rebin conserves mass both ways") {
    Gen g(10);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto a = random_histogram(g);
      const auto b = random_histogram(g);
      const auto ab = rebin(a, b.edges);
      const auto aba = rebin(ab, a.edges);
      const double t = a.total();
      CHECK(std::fabs(ab.total() - t) <= 1e-9 * std::max(1.0, t));
      CHECK(std::fabs(aba.total() - t) <= 1e-9 * std::max(1.0, t));
    }
  }

  TEST_CASE("diff examples") {
    const auto base = summary({0, 1, 2}, {5, 5});
    const auto same = diff_histogram(base, base);
    CHECK(same.change_score == 0.0);
    for (const auto& bin : same.bins) {
      CHECK(bin.gained == 0.0);
      CHECK(bin.lost == 0.0);
    }
    const auto half = diff_histogram(base, summary({0, 1, 2}, {10, 0}));
    CHECK(half.change_score == doctest::Approx(0.5));
    CHECK(half.edges == base.hist.edges);
    CHECK(half.bins[0].gained == doctest::Approx(0.5));
    CHECK(half.bins[1].lost == doctest::Approx(0.5));
    const auto disjoint = diff_histogram(summary({0, 1}, {3}), summary({5, 6}, {4}));
    CHECK(disjoint.change_score == doctest::Approx(1.0));
    CHECK(disjoint.bins.size() == 40);
    CHECK_THROWS_WITH_AS(diff_histogram(base, summary({0, 1}, {1}, "fc2.weight")), doctest::Contains("PathMismatch"),
                         Error);
    CHECK_THROWS_WITH_AS(diff_histogram(base, summary({0, 1}, {1}, "fc1.weight", TensorKind::activations)),
                         doctest::Contains("KindMismatch"), Error);
  }

  TEST_CASE("property: diff decomposition and total variation bounds") {
    Gen g(12);
    for (int trial = 0; trial < 500; ++trial) {
      auto hb = random_histogram(g);
      auto hm = g.coin(0.3) ? hb : random_histogram(g);
      if (hb.total() == 0) hb.counts[0] = 1;
      if (hm.total() == 0) hm.counts[0] = 1;
      const auto b = summary(hb.edges, hb.counts);
      const auto m = summary(hm.edges, hm.counts);
      const auto d = diff_histogram(b, m);
      const auto r = diff_histogram(m, b);
      CHECK(d.change_score >= 0.0);
      CHECK(d.change_score <= 1.0);
      CHECK(d.change_score == doctest::Approx(r.change_score));
      double unchanged_plus_gained = 0.0, unchanged_plus_lost = 0.0, tv = 0.0;
      for (const auto& bin : d.bins) {
        unchanged_plus_gained += bin.unchanged + bin.gained;
        unchanged_plus_lost += bin.unchanged + bin.lost;
        tv += bin.gained + bin.lost;
        CHECK((bin.gained == 0.0 || bin.lost == 0.0));
      }
      CHECK(unchanged_plus_gained == doctest::Approx(1.0));
      CHECK(unchanged_plus_lost == doctest::Approx(1.0));
      CHECK(d.change_score == doctest::Approx(tv / 2));
      if (hb.edges == hm.edges && hb.counts == hm.counts) CHECK(d.change_score == 0.0);
    }
  }

  TEST_CASE("layer tree structure and aggregation") {
    const auto base = three_layers("base", 0, Histogram{{0, 1}, {4}});
    const auto tree = build_layer_tree({base}, std::nullopt);
    REQUIRE(tree.children.size() == 2);
    CHECK(tree.children[0].name == "fc1");
    CHECK(tree.children[0].children[0].path == "fc1.weight");
    CHECK(tree.children[0].children[1].path == "fc1.bias");
    CHECK(tree.children[1].children[0].path == "fc2.weight");
    const auto* fc1 = tree.children[0].cell("base");
    CHECK(fc1->param_count == 10);
    CHECK(fc1->zero_count == 1);
    CHECK(fc1->sparsity() == doctest::Approx(0.1));
    CHECK(tree.cell("base")->param_count == 14);
  }

  TEST_CASE("single path makes one chain") {
    ModelLayers m;
    m.model = "x";
    m.layers.push_back(record("fc1.weight", 1, 0, Histogram{{0, 1}, {1}}));
    const auto tree = build_layer_tree({m}, std::nullopt);
    REQUIRE(tree.children.size() == 1);
    REQUIRE(tree.children[0].children.size() == 1);
    CHECK(tree.children[0].children[0].leaf());
  }

  TEST_CASE("path set mismatch names the model") {
    auto base = three_layers("base", 0, Histogram{{0, 1}, {4}});
    auto other = three_layers("other", 0, Histogram{{0, 1}, {4}});
    other.layers.pop_back();
    CHECK_THROWS_WITH_AS(build_layer_tree({base, other}, std::string("base")), doctest::Contains("PathSetMismatch(other)"),
                         Error);
  }

  TEST_CASE("ranking") {
    const auto base = three_layers("base", 0, Histogram{{0, 1, 2}, {2, 2}});
    const auto same = three_layers("same", 0, Histogram{{0, 1, 2}, {2, 2}});
    const auto changed = three_layers("changed", 6, Histogram{{0, 1, 2}, {4, 0}});
    const auto tree = build_layer_tree({base, same, changed}, std::string("base"));
    const auto flat = rank_layers(tree, "same", LayerRankKind::weights);
    REQUIRE(flat.size() == 3);
    CHECK(flat[0].first == "fc1.bias");
    CHECK(flat[1].first == "fc1.weight");
    CHECK(flat[2].first == "fc2.weight");
    for (const auto& [p, s] : flat) CHECK(s == 0.0);
    const auto moved = rank_layers(tree, "changed", LayerRankKind::weights);
    CHECK(moved[0].first == "fc2.weight");
    CHECK(moved[0].second == doctest::Approx(0.5));
    const auto sparse = rank_layers(tree, "changed", LayerRankKind::sparsity, "base");
    CHECK(sparse[0].first == "fc1.weight");
    CHECK(sparse[0].second == doctest::Approx(0.75));
    CHECK_THROWS_AS(rank_layers(tree, "changed", LayerRankKind::sparsity), Error);
    CHECK_THROWS_AS(rank_layers(tree, "ghost", LayerRankKind::weights), Error);
  }

  TEST_CASE("layers json round trip") {
    auto m = three_layers("base", 2, Histogram{{0, 1}, {4}});
    m.layers[0].activation_hist = Histogram{{-1, 0, 1}, {3, 5}};
    m.activation_sample = {"t1", "t2"};
    const auto back = layers_from_json(to_json(m));
    CHECK(to_json(back) == to_json(m));
    CHECK(summary_of(back, "fc1.weight", TensorKind::activations)->hist.counts == std::vector<double>{3, 5});
    CHECK_FALSE(summary_of(back, "fc1.bias", TensorKind::activations).has_value());
    CHECK_THROWS_WITH_AS(summary_of(back, "fc9", TensorKind::weights), doctest::Contains("UnknownPath"), Error);
    Json bad = to_json(m);
    bad["layers"][0]["zero_count"] = 100;
    CHECK_THROWS_AS(layers_from_json(bad), Error);
  }
}
