#include <CLI11.hpp>

#include <cstdint>
#include <iostream>

#include "compbench/errors.hpp"
#include "compbench/http.hpp"
#include "compbench/layout.hpp"
#include "compbench/selection.hpp"
#include "compbench/service.hpp"
#include "compbench/sim/scenarios.hpp"
#include "compbench/store.hpp"

namespace {

std::vector<std::string> split_ids(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    auto part = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!part.empty()) out.push_back(std::move(part));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<std::string> metric_or_default(const compbench::ModelStore& store, const std::string& given,
                                             compbench::Encoding encoding) {
  if (given == "none") return std::nullopt;
  if (!given.empty()) return given;
  if (const auto* m = store.default_for(encoding)) return m->name;
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compbench: track and compare model-compression experiments"};
  app.require_subcommand(1);
  int indent = -1;
  app.add_option("--indent", indent, "JSON indentation for printed results (-1 = compact)");

  std::string validate_file;
  auto* validate = app.add_subcommand("validate", "Load and validate an experiments file");
  validate->add_option("file", validate_file, "experiments.json")->required();

  std::string layout_file;
  std::string layout_mode = "by_step";
  std::string layout_color;
  std::string layout_size;
  auto* layout = app.add_subcommand("layout", "Print the model-map layout");
  layout->add_option("file", layout_file, "experiments.json")->required();
  layout->add_option("--mode", layout_mode, "by_step or by_operation");
  layout->add_option("--color", layout_color, "color metric (default from the file, 'none' to disable)");
  layout->add_option("--size", layout_size, "size metric (default from the file, 'none' to disable)");

  std::string compare_file;
  std::string compare_select;
  std::string compare_metric;
  auto* compare = app.add_subcommand("compare", "Infer comparison variables for a selection");
  compare->add_option("file", compare_file, "experiments.json")->required();
  compare->add_option("--select", compare_select, "comma-separated model ids")->required();
  compare->add_option("--metric", compare_metric, "metric to chart (default: the color metric)");

  std::string sim_scenario;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  auto* sim = app.add_subcommand("sim", "Run a simulated compression scenario and write fixtures");
  sim->add_option("--scenario", sim_scenario, "user_study, repair or bias_audit")
      ->required()
      ->check(CLI::IsMember({"user_study", "repair", "bias_audit"}));
  sim->add_option("--seed", sim_seed, "random seed");
  sim->add_option("--out", sim_out, "output directory")->required();

  std::string serve_config;
  auto* serve = app.add_subcommand("serve", "Serve the /v1 HTTP API");
  serve->add_option("--config", serve_config, "session config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      const auto store = compbench::load_store_file(validate_file);
      std::cout << "ok: " << store.size() << " models, " << store.roots().size() << " roots, "
                << store.metrics().size() << " metrics\n";
      return 0;
    }
    if (*layout) {
      const auto store = compbench::load_store_file(layout_file);
      const auto mode = compbench::layout_mode_from_string(layout_mode);
      const auto result = compbench::compute_layout(store, mode,
                                                    metric_or_default(store, layout_color, compbench::Encoding::color),
                                                    metric_or_default(store, layout_size, compbench::Encoding::size),
                                                    std::nullopt);
      std::cout << compbench::to_json(result).dump(indent) << '\n';
      return 0;
    }
    if (*compare) {
      const auto store = compbench::load_store_file(compare_file);
      auto metric = metric_or_default(store, compare_metric, compbench::Encoding::color);
      if (!metric) throw compbench::Error(compbench::ErrorCode::InvalidArgument, "metric", "no metric to chart");
      const auto result = compbench::build_comparison(store, split_ids(compare_select), *metric);
      std::cout << compbench::to_json(result).dump(indent) << '\n';
      return 0;
    }
    if (*sim) {
      compbench::sim::emit_fixtures(compbench::sim::scenario_from_string(sim_scenario), sim_seed, sim_out);
      std::cout << "wrote " << sim_scenario << " fixtures (seed " << sim_seed << ") to " << sim_out << '\n';
      return 0;
    }
    if (*serve) {
      return compbench::run_service(compbench::load_config(serve_config));
    }
  } catch (const compbench::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
