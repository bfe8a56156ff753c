#include "compbench/sim/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "compbench/errors.hpp"
#include "compbench/layers.hpp"
#include "compbench/sim/rng.hpp"

namespace compbench::sim {

Scenario scenario_from_string(const std::string& s) {
  if (s == "user_study") return Scenario::user_study;
  if (s == "repair") return Scenario::repair;
  if (s == "bias_audit") return Scenario::bias_audit;
  throw Error(ErrorCode::InvalidArgument, s, "scenario must be user_study, repair or bias_audit");
}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::user_study: return "user_study";
    case Scenario::repair: return "repair";
    case Scenario::bias_audit: return "bias_audit";
  }
  return "user_study";
}

const SimModel& ScenarioRun::model(const std::string& id) const {
  for (const auto& m : models) {
    if (m.id == id) return m;
  }
  throw Error(ErrorCode::UnknownModel, id, "no such model");
}

namespace {

Json op(const std::string& name, Json parameters) {
  return Json{{"name", name}, {"parameters", std::move(parameters)}};
}

std::vector<std::string> split_paths(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto part = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!part.empty()) out.push_back(part);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string percent_suffix(double s) { return std::to_string(static_cast<int>(std::lround(s * 100.0))); }

}  // namespace

DenseNet apply_operation(const Json& operation, const DenseNet& parent, const DenseNet& root,
                         const SynthDataset& data) {
  const std::string name = operation.at("name").get<std::string>();
  const Json& p = operation.at("parameters");
  if (name == "prune") {
    const double s = p.at("sparsity").get<double>();
    if (p.contains("layer")) return prune_layer_magnitude(parent, p["layer"].get<std::string>(), s);
    return prune_global_magnitude(parent, s);
  }
  if (name == "quantize") return quantize_uniform(parent, p.at("bits").get<int>());
  if (name == "finetune") return finetune(parent, data, p.at("steps").get<int>(), p.at("lr").get<double>());
  if (name == "calibrate") {
    const auto n = std::min<std::size_t>(p.at("samples").get<std::size_t>(), data.train.size());
    const std::vector<Sample> sample(data.train.begin(), data.train.begin() + static_cast<std::ptrdiff_t>(n));
    return calibrate_biases(parent, root, batch_of(sample));
  }
  if (name == "restore") return restore_layers(parent, root, split_paths(p.at("paths").get<std::string>()));
  throw Error(ErrorCode::InvalidArgument, name, "the simulator has no such operation");
}

namespace {

class Builder {
 public:
  Builder(ScenarioRun& run, const DenseNet& root) : run_(run), root_(root) {}

  void add_root(const std::string& id) {
    run_.models.push_back({id, std::nullopt, Json(nullptr), root_, evaluate_model(root_, run_.dataset)});
  }

  const SimModel& add(const std::string& id, const std::string& parent, Json operation) {
    const DenseNet net = apply_operation(operation, run_.model(parent).net, root_, run_.dataset);
    run_.models.push_back({id, parent, std::move(operation), net, evaluate_model(net, run_.dataset)});
    return run_.models.back();
  }

 private:
  ScenarioRun& run_;
  const DenseNet& root_;
};

// Weight tensor whose histogram moved furthest from the root's.
std::string most_changed_weight_tensor(const DenseNet& net, const DenseNet& root) {
  std::string best;
  double best_score = -1.0;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    TensorSummary b;
    b.path = root.layers[li].weight_path();
    b.hist = make_histogram(root.layers[li].weights, kHistogramBins);
    TensorSummary m = b;
    m.hist = make_histogram(net.layers[li].weights, kHistogramBins);
    const double score = diff_histogram(b, m).change_score;
    if (score > best_score) {
      best_score = score;
      best = b.path;
    }
  }
  return best;
}

}  // namespace

ScenarioRun run_scenario(Scenario scenario, std::uint64_t seed) {
  ScenarioRun run;
  run.scenario = scenario;
  run.seed = seed;
  DatasetConfig cfg;
  if (scenario == Scenario::bias_audit) {
    cfg.rare_fraction = 0.1;
    cfg.test_per_class = 500;
  }
  run.dataset = make_dataset(cfg, seed);
  const DenseNet root = train_mlp(run.dataset, TrainConfig{}, seed + 1);

  Builder b(run, root);
  b.add_root("base");
  switch (scenario) {
    case Scenario::user_study: {
      b.add("quant8", "base", op("quantize", {{"bits", 8}}));
      std::vector<std::string> pruned;
      for (double s : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const std::string id = "prune" + percent_suffix(s);
        b.add(id, "base", op("prune", {{"sparsity", s}}));
        pruned.push_back(id);
      }
      b.add("prune_fc2_90", "base", op("prune", {{"sparsity", 0.9}, {"layer", "fc2.weight"}}));
      pruned.push_back("prune_fc2_90");
      for (const auto& id : pruned) {
        b.add(id + "_finetune", id, op("finetune", {{"steps", 100}, {"lr", 0.05}}));
        b.add(id + "_calibrate", id, op("calibrate", {{"samples", 128}}));
      }
      break;
    }
    case Scenario::repair: {
      for (double s : {0.5, 0.7, 0.9, 0.95}) {
        const std::string id = "prune" + percent_suffix(s);
        const SimModel& p = b.add(id, "base", op("prune", {{"sparsity", s}}));
        const std::string target = most_changed_weight_tensor(p.net, root);
        b.add(id + "_restore", id, op("restore", {{"paths", target}}));
      }
      break;
    }
    case Scenario::bias_audit: {
      for (double s : {0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99}) {
        b.add("prune" + percent_suffix(s), "base", op("prune", {{"sparsity", s}}));
      }
      break;
    }
  }

  std::vector<std::size_t> order(run.dataset.test.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed + 2);
  rng.shuffle(order);
  order.resize(std::min(order.size(), kActivationSampleSize));
  std::sort(order.begin(), order.end());
  for (std::size_t i : order) run.activation_sample.push_back(run.dataset.test[i].id);
  return run;
}

Json experiments_json(const ScenarioRun& run) {
  Json metrics = Json::array();
  metrics.push_back(Json{{"name", "latency"}, {"unit", "mults"}, {"objective", "minimize"}, {"default_encoding", "none"}});
  metrics.push_back(Json{{"name", "size"}, {"unit", "bytes"}, {"objective", "minimize"}, {"default_encoding", "size"}});
  metrics.push_back(
      Json{{"name", "sparsity"}, {"unit", "fraction"}, {"objective", "maximize"}, {"default_encoding", "none"}});
  metrics.push_back(
      Json{{"name", "accuracy"}, {"unit", "fraction"}, {"objective", "maximize"}, {"default_encoding", "color"}});
  Json models = Json::array();
  for (const auto& m : run.models) {
    Json mj;
    mj["id"] = m.id;
    mj["parent"] = m.parent ? Json(*m.parent) : Json(nullptr);
    mj["operation"] = m.operation;
    mj["metrics"] = Json{{"latency", m.metrics.latency},
                         {"size", m.metrics.size_bytes},
                         {"sparsity", m.metrics.sparsity},
                         {"accuracy", m.metrics.accuracy}};
    mj["tags"] = Json::array({std::string(to_string(run.scenario))});
    models.push_back(std::move(mj));
  }
  return Json{{"schema_version", 1}, {"metrics", std::move(metrics)}, {"models", std::move(models)}};
}

Json dataset_json(const ScenarioRun& run) {
  Json instances = Json::array();
  for (const auto& s : run.dataset.test) {
    instances.push_back(Json{{"id", s.id},
                             {"truth", class_name(s.y)},
                             {"group", s.group.empty() ? Json(nullptr) : Json(s.group)},
                             {"payload_ref", nullptr}});
  }
  return Json{{"instances", std::move(instances)}, {"classes", run.dataset.class_names()}};
}

Json outputs_json(const ScenarioRun& run, const SimModel& model) {
  const Batch p = predict_probs(model.net, batch_of(run.dataset.test));
  Json instances = Json::array();
  for (int r = 0; r < p.rows; ++r) {
    const double* row = &p.data[static_cast<std::size_t>(r) * p.cols];
    const int top = static_cast<int>(std::max_element(row, row + p.cols) - row);
    instances.push_back(Json{{"id", run.dataset.test[r].id},
                             {"label", class_name(top)},
                             {"probs", std::vector<double>(row, row + p.cols)}});
  }
  return Json{{"model", model.id}, {"instances", std::move(instances)}};
}

Json layers_json(const ScenarioRun& run, const SimModel& model) {
  std::vector<Sample> sample;
  for (const auto& id : run.activation_sample) {
    for (const auto& s : run.dataset.test) {
      if (s.id == id) {
        sample.push_back(s);
        break;
      }
    }
  }
  const std::vector<Batch> pre = forward_pre(model.net, batch_of(sample));
  ModelLayers out;
  out.model = model.id;
  out.activation_sample = run.activation_sample;
  for (std::size_t li = 0; li < model.net.layers.size(); ++li) {
    const auto& l = model.net.layers[li];
    LayerRecord w;
    w.path = l.weight_path();
    w.param_count = static_cast<long>(l.weights.size());
    w.zero_count = static_cast<long>(std::count(l.weights.begin(), l.weights.end(), 0.0));
    w.weight_hist = make_histogram(l.weights, kHistogramBins);
    w.activation_hist = make_histogram(pre[li].data, kHistogramBins);
    out.layers.push_back(std::move(w));
    LayerRecord bias;
    bias.path = l.bias_path();
    bias.param_count = static_cast<long>(l.bias.size());
    bias.zero_count = static_cast<long>(std::count(l.bias.begin(), l.bias.end(), 0.0));
    bias.weight_hist = make_histogram(l.bias, kHistogramBins);
    out.layers.push_back(std::move(bias));
  }
  return to_json(out);
}

namespace {

void write_json(const std::filesystem::path& path, const Json& j, int indent) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, path.string(), "cannot open for writing");
  f << j.dump(indent) << '\n';
  if (!f) throw Error(ErrorCode::IoError, path.string(), "write failed");
}

}  // namespace

void write_fixtures(const ScenarioRun& run, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "outputs", ec);
  if (!ec) std::filesystem::create_directories(out_dir / "layers", ec);
  if (ec) throw Error(ErrorCode::IoError, out_dir.string(), ec.message());
  write_json(out_dir / "experiments.json", experiments_json(run), 2);
  write_json(out_dir / "dataset.json", dataset_json(run), 1);
  for (const auto& m : run.models) {
    write_json(out_dir / "outputs" / (m.id + ".json"), outputs_json(run, m), -1);
    write_json(out_dir / "layers" / (m.id + ".json"), layers_json(run, m), -1);
  }
}

void emit_fixtures(Scenario scenario, std::uint64_t seed, const std::filesystem::path& out_dir) {
  write_fixtures(run_scenario(scenario, seed), out_dir);
}

}  // namespace compbench::sim
