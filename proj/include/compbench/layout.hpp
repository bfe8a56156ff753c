#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "compbench/json.hpp"
#include "compbench/store.hpp"

namespace compbench {

enum class LayoutMode { by_step, by_operation };

LayoutMode layout_mode_from_string(const std::string& s);
std::string_view to_string(LayoutMode mode);

struct EncodingScale {
  enum class Kind { sqrt_size, linear_color };
  std::string metric;
  double domain_min = 0.0;
  double domain_max = 0.0;
  double range_lo = 0.0;
  double range_hi = 0.0;
  Kind kind = Kind::linear_color;

  double operator()(double value) const;
};

struct NodePlacement {
  int column = 0;
  double row = 0.0;
  double x = 0.0;
  double y = 0.0;
  double radius = 0.0;
  std::optional<double> color_value;
  bool enabled = true;
};

struct EdgeStop {
  double t = 0.0;
  double width = 0.0;
  std::optional<double> color_value;
};

struct EdgeGeometry {
  std::string parent;
  std::string child;
  std::vector<EdgeStop> stops;
};

struct LayoutOptions {
  double col_spacing = 120.0;
  double row_spacing = 36.0;
  double min_radius = 4.0;
  double max_radius = 16.0;
  int edge_stops = 8;
};

struct MapLayout {
  LayoutMode mode = LayoutMode::by_step;
  std::vector<std::pair<std::string, NodePlacement>> nodes;  // document order
  std::vector<EdgeGeometry> edges;
  std::optional<EncodingScale> color_scale;
  std::optional<EncodingScale> size_scale;

  const NodePlacement& at(const std::string& id) const;
};

// Positions every model. Columns follow depth (by_step) or a canonical column
// per operation name (by_operation); rows come from a deterministic leaf order.
// `enabled` == nullopt means every model is enabled.
MapLayout compute_layout(const ModelStore& store, LayoutMode mode, const std::optional<std::string>& color_metric,
                         const std::optional<std::string>& size_metric,
                         const std::optional<std::set<std::string>>& enabled, const LayoutOptions& options = {});

// Canonical column per operation name: the deepest depth at which an edge
// with that name occurs.
std::map<std::string, int> canonical_operation_columns(const ModelStore& store);

// Declared metrics in declaration order (missing values as "n/a"), then the
// producing operation ("root" for roots).
std::vector<std::pair<std::string, std::string>> node_tooltip(const ModelStore& store, const std::string& id);

Json to_json(const MapLayout& layout);

}  // namespace compbench
