#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "compbench/json.hpp"

namespace compbench {

using Scalar = std::variant<double, std::string, bool>;

std::string format_scalar(const Scalar& value);
Json scalar_to_json(const Scalar& value);

// An edge of the experiment forest: what was done to the parent model.
struct Operation {
  std::string name;
  std::vector<std::pair<std::string, Scalar>> parameters;  // insertion order

  const Scalar* param(std::string_view key) const;

  // name + canonical JSON of the parameters with sorted keys. Two operations
  // are considered the same iff their signatures match.
  std::string signature() const;

  // Human-readable form used by tooltips, e.g. "prune(sparsity=0.5)".
  std::string label() const;

  bool operator==(const Operation& other) const { return signature() == other.signature(); }
};

enum class Objective { maximize, minimize };
enum class Encoding { color, size, none };

struct MetricSpec {
  std::string name;
  std::string unit;
  Objective objective = Objective::maximize;
  std::optional<Encoding> default_encoding;
};

struct ModelNode {
  std::string id;
  std::optional<std::string> parent_id;
  std::optional<Operation> operation;
  std::map<std::string, double> metrics;
  std::vector<std::string> tags;

  std::optional<double> metric(std::string_view name) const;
  bool is_root() const { return !parent_id.has_value(); }
};

// Validated, immutable forest of models. Iteration follows document order.
class ModelStore {
 public:
  const std::vector<MetricSpec>& metrics() const { return metrics_; }
  const MetricSpec* find_metric(std::string_view name) const;
  const MetricSpec& metric(std::string_view name) const;  // throws UnknownMetric

  const std::vector<ModelNode>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  const ModelNode* find(std::string_view id) const;
  const ModelNode& node(std::string_view id) const;  // throws UnknownModel
  bool contains(std::string_view id) const { return find(id) != nullptr; }
  std::size_t index_of(std::string_view id) const;  // throws UnknownModel

  const std::vector<std::string>& roots() const { return roots_; }
  const std::vector<std::string>& children(std::string_view id) const;
  int depth(std::string_view id) const;

  // Metric specs with the given default encoding, if any.
  const MetricSpec* default_for(Encoding encoding) const;

 private:
  friend ModelStore load_store(const Json& document);

  std::vector<MetricSpec> metrics_;
  std::vector<ModelNode> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> children_;
  std::vector<int> depth_;
  std::vector<std::string> roots_;
};

inline constexpr int kSchemaVersion = 1;

ModelStore load_store(const Json& document);
ModelStore load_store_file(const std::filesystem::path& path);
Json to_json(const ModelStore& store);

Json to_json(const Operation& op);
Operation operation_from_json(const Json& j);
std::string_view to_string(Objective objective);
std::string_view to_string(Encoding encoding);

// Operations on the root-to-id path, root end first.
std::vector<Operation> op_path(const ModelStore& store, std::string_view id);

// Ids whose ancestor set contains `id`, in document order.
std::vector<std::string> select_descendants(const ModelStore& store, std::string_view id,
                                            bool include_self);

}  // namespace compbench
