#pragma once

#include <string>
#include <vector>

#include "compbench/selection.hpp"
#include "compbench/store.hpp"
#include "generators.hpp"
#include "selection_oracle.hpp"

namespace testing_support {

struct SelectionCase {
  compbench::ModelStore store;
  std::vector<std::string> selection;
};

// A random forest with paths of at most four operations and a selection of
// two to six of its models.
inline SelectionCase random_selection_case(Gen& g) {
  auto store = random_forest(g, 24, 4, 2).build();
  std::vector<std::string> ids;
  for (const auto& n : store.nodes()) ids.push_back(n.id);
  std::shuffle(ids.begin(), ids.end(), g.engine());
  const int want = std::min<int>(static_cast<int>(ids.size()), g.integer(2, 6));
  ids.resize(static_cast<std::size_t>(want));
  return {std::move(store), std::move(ids)};
}

struct MinimalityOutcome {
  bool ok = true;
  std::string detail;
  std::size_t alternatives = 0;
};

// Compares the engine's inferred cost with the exhaustive oracle. The oracle is
// searched up to the engine's count so any cheaper set would be found.
inline MinimalityOutcome check_minimality(const SelectionCase& c) {
  MinimalityOutcome out;
  const auto result = compbench::infer_variables(c.store, c.selection);
  out.alternatives = result.alternatives_examined;
  const auto cost = compbench::cost_of(result.variables);

  std::vector<std::vector<compbench::Operation>> paths;
  std::vector<std::string> models;
  for (const auto& id : c.selection) {
    paths.push_back(compbench::op_path(c.store, id));
    models.push_back(id);
  }
  const auto cands = compbench::candidate_variables(result.alignment);
  if (!compbench::explains(result.variables, cands, models)) {
    out.ok = false;
    out.detail = "inferred set does not explain its own alignment";
    return out;
  }
  const auto best = oracle::min_cost(paths, cost.count);
  if (!best) {
    out.ok = false;
    out.detail = "oracle found no explaining set";
    return out;
  }
  if (best->count != cost.count || best->complexity != cost.complexity) {
    out.ok = false;
    out.detail = "engine (" + std::to_string(cost.count) + "," + std::to_string(cost.complexity) + ") oracle (" +
                 std::to_string(best->count) + "," + std::to_string(best->complexity) + ")";
  }
  return out;
}

}  // namespace testing_support
