#include "compbench/layout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "compbench/errors.hpp"
#include "compbench/format.hpp"

namespace compbench {

LayoutMode layout_mode_from_string(const std::string& s) {
  if (s == "by_step" || s == "step") return LayoutMode::by_step;
  if (s == "by_operation" || s == "operation") return LayoutMode::by_operation;
  throw Error(ErrorCode::InvalidArgument, s, "layout mode must be by_step or by_operation");
}

std::string_view to_string(LayoutMode mode) {
  return mode == LayoutMode::by_step ? "by_step" : "by_operation";
}

namespace {

double signed_sqrt(double v) { return v < 0 ? -std::sqrt(-v) : std::sqrt(v); }

std::optional<EncodingScale> make_scale(const ModelStore& store, const std::optional<std::string>& metric,
                                        EncodingScale::Kind kind, double lo, double hi) {
  if (!metric) return std::nullopt;
  store.metric(*metric);
  EncodingScale s;
  s.metric = *metric;
  s.kind = kind;
  s.range_lo = lo;
  s.range_hi = hi;
  s.domain_min = std::numeric_limits<double>::infinity();
  s.domain_max = -s.domain_min;
  for (const auto& n : store.nodes()) {
    if (auto v = n.metric(*metric)) {
      s.domain_min = std::min(s.domain_min, *v);
      s.domain_max = std::max(s.domain_max, *v);
    }
  }
  if (s.domain_min > s.domain_max) s.domain_min = s.domain_max = 0.0;
  return s;
}

}  // namespace

double EncodingScale::operator()(double value) const {
  const double v = std::clamp(value, domain_min, domain_max);
  double t;
  if (domain_max == domain_min) {
    t = 0.5;
  } else if (kind == Kind::sqrt_size) {
    t = (signed_sqrt(v) - signed_sqrt(domain_min)) / (signed_sqrt(domain_max) - signed_sqrt(domain_min));
  } else {
    t = (v - domain_min) / (domain_max - domain_min);
  }
  return range_lo + (range_hi - range_lo) * t;
}

const NodePlacement& MapLayout::at(const std::string& id) const {
  for (const auto& [nid, p] : nodes) {
    if (nid == id) return p;
  }
  throw Error(ErrorCode::UnknownModel, id, "no such model");
}

std::map<std::string, int> canonical_operation_columns(const ModelStore& store) {
  std::map<std::string, int> canonical;
  for (const auto& n : store.nodes()) {
    if (!n.operation) continue;
    int& c = canonical[n.operation->name];
    c = std::max(c, store.depth(n.id));
  }
  return canonical;
}

MapLayout compute_layout(const ModelStore& store, LayoutMode mode, const std::optional<std::string>& color_metric,
                         const std::optional<std::string>& size_metric,
                         const std::optional<std::set<std::string>>& enabled, const LayoutOptions& options) {
  MapLayout layout;
  layout.mode = mode;
  layout.color_scale = make_scale(store, color_metric, EncodingScale::Kind::linear_color, 0.0, 1.0);
  layout.size_scale =
      make_scale(store, size_metric, EncodingScale::Kind::sqrt_size, options.min_radius, options.max_radius);

  const std::size_t count = store.size();
  std::vector<int> column(count, 0);
  std::vector<double> row(count, 0.0);

  // Columns. Document order need not be topological, so walk the forest.
  const auto canonical = canonical_operation_columns(store);
  std::vector<std::size_t> order;  // preorder, parents before children
  order.reserve(count);
  for (const auto& r : store.roots()) {
    std::vector<std::size_t> stack{store.index_of(r)};
    while (!stack.empty()) {
      std::size_t i = stack.back();
      stack.pop_back();
      order.push_back(i);
      const auto& kids = store.children(store.nodes()[i].id);
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(store.index_of(*it));
    }
  }
  for (std::size_t i : order) {
    const auto& n = store.nodes()[i];
    if (!n.parent_id) {
      column[i] = 0;
      continue;
    }
    const int parent_col = column[store.index_of(*n.parent_id)];
    if (mode == LayoutMode::by_step) {
      column[i] = parent_col + 1;
    } else {
      column[i] = std::max(parent_col + 1, canonical.at(n.operation->name));
    }
  }

  // Subtree sizes for the child ordering.
  std::vector<std::size_t> subtree(count, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto& n = store.nodes()[*it];
    if (n.parent_id) subtree[store.index_of(*n.parent_id)] += subtree[*it];
  }
  auto sorted_children = [&](std::size_t i) {
    std::vector<std::size_t> kids;
    for (const auto& c : store.children(store.nodes()[i].id)) kids.push_back(store.index_of(c));
    std::sort(kids.begin(), kids.end(), [&](std::size_t a, std::size_t b) {
      if (subtree[a] != subtree[b]) return subtree[a] > subtree[b];
      return store.nodes()[a].id < store.nodes()[b].id;
    });
    return kids;
  };

  // Rows: leaves numbered in DFS order, parents at the mean of their
  // children, one empty row between trees.
  double next_leaf = 0.0;
  for (std::size_t t = 0; t < store.roots().size(); ++t) {
    if (t > 0) next_leaf += 1.0;
    struct Frame {
      std::size_t node;
      std::vector<std::size_t> kids;
      std::size_t next = 0;
    };
    std::vector<Frame> stack;
    const std::size_t root = store.index_of(store.roots()[t]);
    stack.push_back({root, sorted_children(root)});
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < f.kids.size()) {
        const std::size_t k = f.kids[f.next++];
        stack.push_back({k, sorted_children(k)});
        continue;
      }
      if (f.kids.empty()) {
        row[f.node] = next_leaf;
        next_leaf += 1.0;
      } else {
        double sum = 0.0;
        for (std::size_t k : f.kids) sum += row[k];
        row[f.node] = sum / static_cast<double>(f.kids.size());
      }
      stack.pop_back();
    }
  }

  layout.nodes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& n = store.nodes()[i];
    NodePlacement p;
    p.column = column[i];
    p.row = row[i];
    p.x = column[i] * options.col_spacing;
    p.y = row[i] * options.row_spacing;
    p.radius = options.min_radius;
    if (layout.size_scale) {
      if (auto v = n.metric(layout.size_scale->metric)) p.radius = (*layout.size_scale)(*v);
    }
    if (layout.color_scale) {
      if (auto v = n.metric(layout.color_scale->metric)) p.color_value = (*layout.color_scale)(*v);
    }
    p.enabled = !enabled || enabled->count(n.id) > 0;
    layout.nodes.emplace_back(n.id, p);
  }

  // Edge width tracks node radius so a thick edge leads into a large node.
  constexpr double kWidthPerRadius = 0.375;
  const int stops = std::max(2, options.edge_stops);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& n = store.nodes()[i];
    if (!n.parent_id) continue;
    const auto& pp = layout.nodes[store.index_of(*n.parent_id)].second;
    const auto& cp = layout.nodes[i].second;
    EdgeGeometry e{*n.parent_id, n.id, {}};
    for (int s = 0; s < stops; ++s) {
      const double t = static_cast<double>(s) / (stops - 1);
      EdgeStop stop;
      stop.t = t;
      stop.width = kWidthPerRadius * (pp.radius + (cp.radius - pp.radius) * t);
      if (s == 0) {
        stop.color_value = pp.color_value;
      } else if (s == stops - 1) {
        stop.color_value = cp.color_value;
      } else if (pp.color_value && cp.color_value) {
        stop.color_value = *pp.color_value + (*cp.color_value - *pp.color_value) * t;
      }
      e.stops.push_back(stop);
    }
    layout.edges.push_back(std::move(e));
  }
  return layout;
}

std::vector<std::pair<std::string, std::string>> node_tooltip(const ModelStore& store, const std::string& id) {
  const auto& n = store.node(id);
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& m : store.metrics()) {
    auto v = n.metric(m.name);
    if (!v) {
      out.emplace_back(m.name, "n/a");
    } else if (m.unit.empty()) {
      out.emplace_back(m.name, format_number(*v));
    } else {
      out.emplace_back(m.name, format_number(*v) + " " + m.unit);
    }
  }
  out.emplace_back("operation", n.operation ? n.operation->label() : "root");
  return out;
}

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json scale_json(const std::optional<EncodingScale>& s) {
  if (!s) return nullptr;
  return Json{{"metric", s->metric},
              {"domain", {s->domain_min, s->domain_max}},
              {"range", {s->range_lo, s->range_hi}},
              {"kind", s->kind == EncodingScale::Kind::sqrt_size ? "sqrt_size" : "linear_color"}};
}

}  // namespace

Json to_json(const MapLayout& layout) {
  Json nodes = Json::object();
  for (const auto& [id, p] : layout.nodes) {
    nodes[id] = Json{{"column", p.column},        {"row", p.row},
                     {"x", p.x},                  {"y", p.y},
                     {"radius", p.radius},        {"color_value", optional_number(p.color_value)},
                     {"enabled", p.enabled}};
  }
  Json edges = Json::array();
  for (const auto& e : layout.edges) {
    Json stops = Json::array();
    for (const auto& s : e.stops) {
      stops.push_back(Json{{"t", s.t}, {"width", s.width}, {"color_value", optional_number(s.color_value)}});
    }
    edges.push_back(Json{{"parent", e.parent}, {"child", e.child}, {"stops", std::move(stops)}});
  }
  return Json{{"mode", to_string(layout.mode)},
              {"nodes", std::move(nodes)},
              {"edges", std::move(edges)},
              {"scales", {{"color", scale_json(layout.color_scale)}, {"size", scale_json(layout.size_scale)}}}};
}

}  // namespace compbench
