#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "compbench/json.hpp"
#include "compbench/sim/dataset.hpp"
#include "compbench/sim/network.hpp"
#include "compbench/sim/operators.hpp"

namespace compbench::sim {

enum class Scenario { user_study, repair, bias_audit };

Scenario scenario_from_string(const std::string& s);
std::string_view to_string(Scenario s);

struct SimModel {
  std::string id;
  std::optional<std::string> parent;
  Json operation;  // null for the root
  DenseNet net;
  SimMetrics metrics;
};

struct ScenarioRun {
  Scenario scenario = Scenario::user_study;
  std::uint64_t seed = 0;
  SynthDataset dataset;
  std::vector<SimModel> models;  // parents before children
  std::vector<std::string> activation_sample;

  const SimModel& model(const std::string& id) const;
};

inline constexpr int kHistogramBins = 40;
inline constexpr std::size_t kActivationSampleSize = 256;

// Applies an operation record ({"name", "parameters"}) to `parent`; `root` is
// the reference network for restore and calibrate.
DenseNet apply_operation(const Json& operation, const DenseNet& parent, const DenseNet& root,
                         const SynthDataset& data);

ScenarioRun run_scenario(Scenario scenario, std::uint64_t seed);

Json experiments_json(const ScenarioRun& run);
Json dataset_json(const ScenarioRun& run);
Json outputs_json(const ScenarioRun& run, const SimModel& model);
Json layers_json(const ScenarioRun& run, const SimModel& model);

// Writes experiments.json, dataset.json, outputs/<id>.json and layers/<id>.json.
void write_fixtures(const ScenarioRun& run, const std::filesystem::path& out_dir);
void emit_fixtures(Scenario scenario, std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace compbench::sim
