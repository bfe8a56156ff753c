#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "compbench/json.hpp"
#include "compbench/store.hpp"

namespace compbench {

// ---------------------------------------------------------------------------
// Path alignment
// ---------------------------------------------------------------------------

struct LabeledPath {
  std::string model;
  std::vector<Operation> ops;
};

// Operation paths of several models laid out on shared slots. Row i belongs to
// models[i]; each row's non-empty entries, read in slot order, are that
// model's op_path.
struct AlignedSlots {
  int slot_count = 0;
  std::vector<std::string> models;
  std::vector<std::vector<std::optional<Operation>>> per_model;

  const std::vector<std::optional<Operation>>& row(const std::string& model) const;
  std::size_t model_index(const std::string& model) const;
};

// Progressive alignment: the longest path seeds the slots, every further path
// (longest first, ties in input order) is merged by a longest common
// subsequence over operation names. Ties go to the earliest slots; unmatched
// operations open new slots after the existing slots of their gap.
AlignedSlots align_paths(const std::vector<LabeledPath>& paths);

// Every alignment reachable by the procedure above under any LCS tie-break,
// each optionally followed by merging runs of adjacent slots that no model
// occupies twice. The first entry is align_paths(). At most `limit` entries.
std::vector<AlignedSlots> alignment_alternatives(const std::vector<LabeledPath>& paths, std::size_t limit);

// ---------------------------------------------------------------------------
// Variables
// ---------------------------------------------------------------------------

enum class VariableKind { param_value, presence, op_type, pipeline_stage };

std::string_view to_string(VariableKind kind);

// Complexity weight used by the minimum-cost search. Parameters are simpler
// than presence, presence simpler than operation type.
int complexity_weight(VariableKind kind);

inline constexpr const char* kAbsentLabel = "absent";
inline constexpr const char* kUnsetLabel = "(none)";

struct Variable {
  VariableKind kind = VariableKind::presence;
  int slot = 0;
  int slot_end = 0;  // inclusive; differs from slot for merged variables
  std::optional<std::string> param_key;
  std::string name;
  std::vector<std::string> values;                // distinct labels, display order
  std::map<std::string, std::string> assignment;  // model id -> label

  int weight() const { return complexity_weight(kind); }
  bool operator==(const Variable& other) const;
};

// Every variable a single slot of the alignment can support, in slot order.
// Constant candidates are dropped.
std::vector<Variable> candidate_variables(const AlignedSlots& aligned);

struct VariableCost {
  int count = 0;
  int complexity = 0;
  auto operator<=>(const VariableCost&) const = default;
};

VariableCost cost_of(const std::vector<Variable>& variables);

// True when the labels of `chosen` determine the labels of every candidate.
bool explains(const std::vector<Variable>& chosen, const std::vector<Variable>& candidates,
              const std::vector<std::string>& models);

struct InferenceResult {
  AlignedSlots alignment;
  std::vector<Variable> variables;
  std::size_t alternatives_examined = 0;
};

struct InferenceOptions {
  std::size_t max_alternatives = 4096;
  // Above this many subsets per size the search turns greedy.
  std::size_t max_subsets_per_size = 200000;
};

// Minimum-cost variable set explaining the selection, over all alignment
// alternatives: fewest variables first, then lowest complexity sum.
InferenceResult infer_variables(const ModelStore& store, const std::vector<std::string>& selection,
                                const InferenceOptions& options = {});

// ---------------------------------------------------------------------------
// Simplification
// ---------------------------------------------------------------------------

// Folds the values of one parameter over consecutive operations.
using ParamCombiner = std::function<std::string(const std::vector<Scalar>&)>;

struct SimplifyOptions {
  std::map<std::string, ParamCombiner> combinable;

  // Sparsity combines as 1 - prod(1 - s_i).
  static SimplifyOptions defaults();
  // Registers `key` with the label-concatenation combiner.
  SimplifyOptions& with_concatenated(const std::string& key);
};

// Applies conditional merges (always; they lose nothing) and, while more than
// two variables remain, same-operation accumulation and cumulative pipeline
// merges, until nothing changes.
std::vector<Variable> simplify_variables(std::vector<Variable> variables, const AlignedSlots& aligned,
                                         const SimplifyOptions& options = SimplifyOptions::defaults());

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

struct ChartBar {
  std::string x_value;
  std::optional<std::string> color_value;
  std::string model;
  double value = 0.0;
};

struct ChartSpec {
  std::optional<Variable> x_variable;
  std::optional<Variable> color_variable;
  std::string metric;
  std::vector<ChartBar> bars;
};

struct RefinementGroup {
  std::vector<std::pair<std::string, std::string>> fixed;  // variable name -> value
  std::vector<Variable> free;
  std::vector<std::string> member_ids;
};

struct ComparisonResult {
  std::vector<Variable> variables;
  std::optional<ChartSpec> chart;
  std::vector<RefinementGroup> refinement;
};

ComparisonResult build_comparison(const ModelStore& store, const std::vector<std::string>& selection,
                                  const std::string& metric, const InferenceOptions& inference = {},
                                  const SimplifyOptions& simplify = SimplifyOptions::defaults());

Json to_json(const Variable& v);
Json to_json(const AlignedSlots& a);
Json to_json(const ComparisonResult& r);

}  // namespace compbench
