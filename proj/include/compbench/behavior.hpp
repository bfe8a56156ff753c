#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "compbench/json.hpp"
#include "compbench/store.hpp"

namespace compbench {

struct InstanceRecord {
  std::string id;
  std::string truth;  // class label or reference text
  std::optional<std::string> group;
  std::optional<std::string> payload_ref;

  // Row key when aggregating by group; falls back to the truth label.
  const std::string& group_key() const { return group ? *group : truth; }
};

struct Dataset {
  std::vector<InstanceRecord> instances;
  std::vector<std::string> classes;

  const InstanceRecord* find(const std::string& id) const;
};

Dataset dataset_from_json(const Json& j);
Json to_json(const Dataset& d);

struct OutputRecord {
  std::string model;
  std::string instance;
  std::optional<std::string> label;
  std::optional<std::vector<double>> probs;
  std::optional<std::string> text;
};

struct ModelOutputs {
  std::string model;
  std::vector<OutputRecord> records;

  const OutputRecord* find(const std::string& instance) const;
  void reindex();

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Validates record invariants; a missing label is filled from argmax(probs)
// using `classes` (index strings when no classes are declared).
ModelOutputs outputs_from_json(const Json& j, const std::vector<std::string>& classes);
Json to_json(const ModelOutputs& o);

enum class ComparisonMetric { correctness, confidence, top1_change, kl_divergence, text_f1, text_change };
enum class RelativeMode { absolute, difference, pct_error_change };
enum class GroupBy { instance, group };
enum class SortMode { absolute, relative };
enum class SortDirection { ascending, descending };

struct ComparisonMetricSpec {
  ComparisonMetric name = ComparisonMetric::correctness;
  RelativeMode relative_mode = RelativeMode::absolute;
};

ComparisonMetric comparison_metric_from_string(const std::string& s);
RelativeMode relative_mode_from_string(const std::string& s);
GroupBy group_by_from_string(const std::string& s);
std::string_view to_string(ComparisonMetric m);
std::string_view to_string(RelativeMode m);
bool requires_base(ComparisonMetric m);

inline constexpr double kKlEpsilon = 1e-10;

// KL(base || model) after adding kKlEpsilon to every entry and renormalizing.
double kl_divergence(const std::vector<double>& base, const std::vector<double>& model);

// Token-overlap F1 after lowercasing and stripping punctuation.
double text_f1(const std::string& prediction, const std::string& reference);

// Selected model closest to a root; ties go to the smallest id.
std::string default_base(const std::vector<std::string>& selection, const ModelStore& store);

std::map<std::string, double> eval_metric(ComparisonMetric metric, const ModelOutputs& model,
                                          const ModelOutputs* base, const std::vector<InstanceRecord>& instances);

struct BehaviorCell {
  double value = 0.0;
  std::optional<double> relative;
  bool relative_undefined = false;  // error change against a base without errors
  std::optional<long> new_errors;   // set together with relative_undefined
};

struct BehaviorRow {
  std::string key;
  std::map<std::string, BehaviorCell> per_model;
  int count = 0;
};

using MetricValues = std::map<std::string, std::map<std::string, double>>;  // model -> instance -> value

// Instance or group rows. pct_error_change is only defined for correctness:
// 100 * (E_model - E_base) / E_base over the group's error counts.
std::vector<BehaviorRow> aggregate_rows(const MetricValues& values, const std::vector<InstanceRecord>& instances,
                                        GroupBy group_by, const std::string& base, RelativeMode relative_mode,
                                        ComparisonMetric metric);

// Stable; undefined relatives sort last in either direction.
std::vector<BehaviorRow> sort_rows(std::vector<BehaviorRow> rows, const std::string& model, SortMode mode,
                                   SortDirection direction);

Json to_json(const BehaviorRow& row);

}  // namespace compbench
