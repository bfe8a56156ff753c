// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "compbench/behavior.hpp"
#include "compbench/http.hpp"
#include "compbench/layers.hpp"
#include "compbench/layout.hpp"
#include "compbench/analytics.hpp"
#include "compbench/selection.hpp"
#include "compbench/service.hpp"
#include "compbench/sim/scenarios.hpp"
#include "support/builders.hpp"
#include "support/generators.hpp"
#include "support/http_harness.hpp"
#include "support/layout_checks.hpp"
#include "support/selection_cases.hpp"
#include "support/sim_checks.hpp"

namespace fs = std::filesystem;
using namespace compbench;
using testing_support::DocBuilder;
using testing_support::Gen;

namespace {

// Collects failed expectations; a criterion passes when none were recorded.
class Expect {
 public:
  void that(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++count_;
  }
  bool ok() const { return count_ == 0; }
  std::string summary() const {
    std::ostringstream out;
    out << count_ << " failed";
    for (const auto& f : failures_) out << "; " << f;
    return out.str();
  }

 private:
  std::vector<std::string> failures_;
  int count_ = 0;
};

struct Criterion {
  std::string name;
  double limit_seconds;
  std::function<void(Expect&)> run;
};

std::string num(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

fs::path scratch_dir(const std::string& tag) {
  const fs::path d = fs::temp_directory_path() / ("compbench_accept_" + std::to_string(::getpid())) / tag;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void calibrate_example(Expect& e) {
  DocBuilder b;
  b.metric("accuracy", "maximize", "color");
  b.root("base", {{"accuracy", 0.9}});
  b.child("p", "base", "prune", {{"sparsity", 0.5}}, {{"accuracy", 0.85}});
  b.child("pq", "p", "quantize", {{"bits", 8}}, {{"accuracy", 0.8}});
  b.child("pc", "p", "calibrate", {{"samples", 128}}, {{"accuracy", 0.86}});
  b.child("pcq", "pc", "quantize", {{"bits", 8}}, {{"accuracy", 0.84}});
  const auto store = b.build();
  const auto cmp = build_comparison(store, {"pq", "pcq"}, "accuracy");
  e.that(cmp.variables.size() == 1, "expected one variable, got " + std::to_string(cmp.variables.size()));
  if (cmp.variables.size() != 1) return;
  const auto& v = cmp.variables[0];
  e.that(v.kind == VariableKind::presence, "variable kind is " + std::string(to_string(v.kind)));
  e.that(std::set<std::string>(v.values.begin(), v.values.end()) == std::set<std::string>{"true", "false"},
         "values are not {true, false}");
  e.that(v.assignment.at("pcq") == "true" && v.assignment.at("pq") == "false", "assignment is inverted");
  e.that(cmp.chart.has_value(), "no chart");
}

void minimality(Expect& e) {
  Gen g(20240601);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = testing_support::random_selection_case(g);
    const auto outcome = testing_support::check_minimality(c);
    e.that(outcome.ok, "case " + std::to_string(trial) + ": " + outcome.detail);
  }
}

void layout_invariants(Expect& e) {
  Gen g(77);
  for (int trial = 0; trial < 200; ++trial) {
    const auto store = testing_support::random_forest(g, 200, 8, 3).build();
    e.that(store.size() <= 200, "forest too large");
    for (auto mode : {LayoutMode::by_step, LayoutMode::by_operation}) {
      const auto first = compute_layout(store, mode, "accuracy", "size", std::nullopt);
      const auto second = compute_layout(store, mode, "accuracy", "size", std::nullopt);
      for (const auto& v : testing_support::layout_violations(store, first)) {
        e.that(false, "forest " + std::to_string(trial) + " " + std::string(to_string(mode)) + ": " + v);
      }
      e.that(to_json(first) == to_json(second), "forest " + std::to_string(trial) + ": layout not deterministic");
    }
  }
}

TensorSummary summary_on(std::vector<double> edges, std::vector<double> counts) {
  TensorSummary s;
  s.model = "m";
  s.path = "w";
  s.hist = Histogram{std::move(edges), std::move(counts)};
  return s;
}

Histogram random_histogram(Gen& g) {
  Histogram h;
  double x = g.real(-3, 3);
  h.edges.push_back(x);
  const int k = g.integer(1, 30);
  for (int i = 0; i < k; ++i) {
    x += g.real(0.01, 1.0);
    h.edges.push_back(x);
    h.counts.push_back(g.coin(0.2) ? 0.0 : static_cast<double>(g.integer(0, 500)));
  }
  return h;
}

void numeric_kernels(Expect& e) {
  Gen g(4242);
  double kl_min = 0.0;
  double kl_same = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const int n = g.integer(2, 12);
    const auto p = g.distribution(n, g.coin());
    const auto q = g.distribution(n, g.coin());
    kl_min = std::min(kl_min, kl_divergence(p, q));
    kl_same = std::max(kl_same, kl_divergence(p, p));
  }
  e.that(kl_min >= -1e-8, "KL minimum " + num(kl_min));
  e.that(kl_same <= 1e-9, "KL on identical pairs " + num(kl_same));

  for (int i = 0; i < 2000; ++i) {
    const auto a = random_histogram(g);
    const auto b = random_histogram(g);
    if (a.total() == 0.0 || b.total() == 0.0) continue;
    const double tv = diff_histogram(summary_on(a.edges, a.counts), summary_on(b.edges, b.counts)).change_score;
    e.that(tv >= 0.0 && tv <= 1.0 + 1e-12, "TV out of range: " + num(tv));
    const double self = diff_histogram(summary_on(a.edges, a.counts), summary_on(a.edges, a.counts)).change_score;
    e.that(self == 0.0, "TV on identity " + num(self));
    const double t = a.total();
    const auto ab = rebin(a, b.edges);
    const auto aba = rebin(ab, a.edges);
    e.that(std::fabs(ab.total() - t) <= 1e-9 * std::max(1.0, t), "rebin lost mass");
    e.that(std::fabs(aba.total() - t) <= 1e-9 * std::max(1.0, t), "rebin round trip lost mass");

    const double lo = g.real(-3, 0);
    const double hi = g.real(5, 9);
    const double disjoint =
        diff_histogram(summary_on({lo, lo + 1}, {g.real(1, 50)}), summary_on({hi, hi + 1}, {g.real(1, 50)})).change_score;
    e.that(std::fabs(disjoint - 1.0) <= 1e-12, "TV on disjoint supports " + num(disjoint));
  }

  double worst = 0.0;
  std::size_t checked = 0;
  for (int i = 0; i < 200; ++i) {
    auto c = testing_support::random_gradient_case(g);
    const auto r = testing_support::gradient_check(c);
    worst = std::max(worst, r.max_relative);
    checked += r.checked;
  }
  e.that(worst <= 1e-4, "gradient relative error " + num(worst));
  e.that(checked > 1000, "too few gradient probes: " + std::to_string(checked));
}

void compression_operators(Expect& e) {
  Gen g(99);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> w(static_cast<std::size_t>(g.integer(1, 300)));
    for (auto& v : w) v = g.real(-3, 3);
    const int bits = g.integer(2, 8);
    const auto v = testing_support::quantize_violation(w, bits);
    e.that(v.empty(), "quantize(" + std::to_string(bits) + "): " + v);
  }
  for (int i = 0; i < 300; ++i) {
    const auto net = testing_support::zero_free_net(g);
    e.that(testing_support::count_zero_weights(net) == 0, "net is not zero free");
    const double s = g.real(0.0, 1.0);
    const auto pruned = sim::prune_global_magnitude(net, s);
    const auto n = sim::stored_weight_count(net);
    const auto want = static_cast<std::size_t>(std::floor(s * static_cast<double>(n) + 1e-9));
    e.that(testing_support::count_zero_weights(pruned) == want,
           "prune(" + num(s) + ") zeroed " + std::to_string(testing_support::count_zero_weights(pruned)) +
               " of " + std::to_string(n) + ", expected " + std::to_string(want));
    const auto restored = sim::restore_layers(sim::quantize_uniform(pruned, g.integer(2, 8)), net, net.tensor_paths());
    e.that(restored == net, "restore(all) differs from base");
  }
}

double model_accuracy(const ModelStore& store, const std::string& id) {
  return store.node(id).metrics.at("accuracy");
}

void end_to_end(Expect& e) {
  {
    const fs::path dir = scratch_dir("user_study");
    sim::emit_fixtures(sim::Scenario::user_study, 1, dir);
    const auto store = load_store_file(dir / "experiments.json");
    e.that(store.size() == 20, "user_study has " + std::to_string(store.size()) + " models");
    for (auto mode : {LayoutMode::by_step, LayoutMode::by_operation}) {
      const auto layout = compute_layout(store, mode, "accuracy", "size", std::nullopt);
      e.that(testing_support::layout_violations(store, layout).empty(), "user_study layout violations");
    }
    MetricFilter f;
    f.metric = "accuracy";
    f.low = 0.9;
    const auto kept = apply_filters(store, {f});
    e.that(!kept.empty() && kept.size() < store.size(),
           "accuracy >= 0.9 keeps " + std::to_string(kept.size()) + " of " + std::to_string(store.size()));
    e.that(!pareto_front(store, "size", "accuracy").empty(), "empty Pareto front");
  }
  {
    const fs::path dir = scratch_dir("repair");
    sim::emit_fixtures(sim::Scenario::repair, 1, dir);
    const auto store = load_store_file(dir / "experiments.json");
    for (const std::string id : {"prune50", "prune70", "prune90", "prune95"}) {
      const double pruned = model_accuracy(store, id);
      const double restored = model_accuracy(store, id + "_restore");
      e.that(restored >= pruned, id + ": restored " + num(restored) + " < pruned " + num(pruned));
    }
  }
  {
    const fs::path dir = scratch_dir("bias_audit");
    sim::emit_fixtures(sim::Scenario::bias_audit, 1, dir);
    testing_support::write_session_config(dir);
    const Service service(load_config(dir / "session.json"));
    const auto r = service.handle(ApiRequest{
        "POST", "/v1/behaviors", {},
        Json{{"ids", {"base", "prune99"}}, {"relative_mode", "pct_error_change"}}.dump()});
    e.that(r.status == 200, "behaviors status " + std::to_string(r.status));
    if (r.status != 200) return;
    std::map<std::string, Json> cells;
    for (const auto& row : r.body["rows"]) cells[row["key"].get<std::string>()] = row["per_model"]["prune99"];
    e.that(cells.count("rare") && cells.count("common"), "missing rare or common group");
    if (!cells.count("rare") || !cells.count("common")) return;
    const Json& rare = cells["rare"];
    const Json& common = cells["common"];
    e.that(!common["relative"].is_null(), "common group has no base errors");
    if (common["relative"].is_null()) return;
    const bool rare_new_only = rare["relative"].is_null() && rare.value("new_errors", 0.0) > 0.0;
    e.that(rare_new_only || rare["relative"].get<double>() > common["relative"].get<double>(),
           "rare " + rare.dump() + " vs common " + common.dump());
  }
}

void behavior_arithmetic(Expect& e) {
  // Three groups, base errors 2 in "g"; model m has 5 errors there.
  std::vector<InstanceRecord> insts;
  for (const auto& [group, n] : std::vector<std::pair<std::string, int>>{{"g", 10}, {"h", 6}, {"k", 4}}) {
    for (int i = 0; i < n; ++i) insts.push_back({group + std::to_string(i), "cat", group, std::nullopt});
  }
  auto wrong_first = [&](const std::map<std::string, int>& errors) {
    std::map<std::string, double> v;
    std::map<std::string, int> used;
    for (const auto& inst : insts) v[inst.id] = used[*inst.group]++ < errors.at(*inst.group) ? 0.0 : 1.0;
    return v;
  };
  const MetricValues values{{"base", wrong_first({{"g", 2}, {"h", 3}, {"k", 0}})},
                            {"m", wrong_first({{"g", 5}, {"h", 1}, {"k", 2}})},
                            {"n", wrong_first({{"g", 2}, {"h", 6}, {"k", 0}})}};
  const auto rows =
      aggregate_rows(values, insts, GroupBy::group, "base", RelativeMode::pct_error_change, ComparisonMetric::correctness);
  for (const auto& row : rows) {
    const auto& b = row.per_model.at("base");
    e.that(b.relative.has_value() && *b.relative == 0.0, "base relative in " + row.key + " is not 0");
    if (row.key == "g") {
      const auto& m = row.per_model.at("m");
      e.that(m.relative && std::fabs(*m.relative - 150.0) < 1e-9, "g: expected +150%");
    }
  }
  e.that(rows.size() == 3, "expected three groups");
}

void api_contract(Expect& e) {
  const fs::path dir = scratch_dir("api");
  testing_support::ensure_user_study_fixture(dir);
  testing_support::LiveService live(load_config(dir / "session.json"));
  const auto report = testing_support::run_golden(live.port(), COMPBENCH_GOLDEN_DIR, false);
  e.that(report.checked >= 10, "too few golden cases");
  for (const auto& f : report.failures) e.that(false, f);
  e.that(testing_support::http_get(live.port(), "/v1/models/ghost").status == 404, "unknown model is not 404");
  e.that(testing_support::http_post(live.port(), "/v1/behaviors", Json{{"ids", {"base", "ghost"}}}).status == 404,
         "unknown id in behaviors is not 404");

  testing_support::MockProvider provider(dir);
  provider.set_wrong_model(true);
  SessionConfig c = load_config(dir / "session.json");
  c.outputs_dir.reset();
  c.layers_dir.reset();
  c.provider_url = provider.url();
  testing_support::LiveService via_provider(c, http_provider_transport(provider.url(), 2, 5000));
  const auto r = testing_support::http_post(via_provider.port(), "/v1/behaviors", Json{{"ids", {"base", "prune90"}}});
  e.that(r.status == 502, "echo violation gave " + std::to_string(r.status));
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"calibrate example yields one presence variable", 1.0, calibrate_example},
      {"variable-set minimality on 100 random selections", 60.0, minimality},
      {"layout invariants on 200 random forests", 30.0, layout_invariants},
      {"numeric kernels (KL, TV, rebin, gradients)", 60.0, numeric_kernels},
      {"compression operators (quantize, prune, restore)", 60.0, compression_operators},
      {"end-to-end fixtures (user_study, repair, bias_audit)", 120.0, end_to_end},
      {"behavior arithmetic (+150%, base relative 0)", 1.0, behavior_arithmetic},
      {"API contract (golden responses, 404, 502)", 60.0, api_contract},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Expect e;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(e);
    } catch (const std::exception& ex) {
      e.that(false, std::string("exception: ") + ex.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.limit_seconds) e.that(false, "took " + num(secs) + " s, limit " + num(c.limit_seconds) + " s");
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.2fs", secs);
    std::cout << (e.ok() ? "PASS " : "FAIL ") << c.name << " [" << timing << "]";
    if (!e.ok()) std::cout << ": " << e.summary();
    std::cout << std::endl;
    failed += e.ok() ? 0 : 1;
  }
  fs::remove_all(fs::temp_directory_path() / ("compbench_accept_" + std::to_string(::getpid())));
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
