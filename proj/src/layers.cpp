#include "compbench/layers.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "compbench/errors.hpp"

namespace compbench {

std::string_view to_string(TensorKind k) { return k == TensorKind::weights ? "weights" : "activations"; }

TensorKind tensor_kind_from_string(const std::string& s) {
  if (s == "weights") return TensorKind::weights;
  if (s == "activations") return TensorKind::activations;
  throw Error(ErrorCode::BadRequest, s, "kind must be weights or activations");
}

double Histogram::total() const {
  double t = 0.0;
  for (double c : counts) t += c;
  return t;
}

Histogram make_histogram(const std::vector<double>& values, int bins) {
  if (bins < 1) throw Error(ErrorCode::InvalidArgument, "bins", "must be positive");
  Histogram h;
  if (values.empty()) {
    h.edges = {0.0, 1.0};
    h.counts = {0.0};
    return h;
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (lo == hi) {
    h.edges = {lo, lo + 1.0};
    h.counts = {static_cast<double>(values.size())};
    return h;
  }
  h.edges.resize(bins + 1);
  for (int i = 0; i <= bins; ++i) h.edges[i] = lo + (hi - lo) * i / bins;
  h.edges[bins] = hi;
  h.counts.assign(bins, 0.0);
  for (double v : values) {
    auto b = static_cast<long>((v - lo) / (hi - lo) * bins);
    b = std::clamp<long>(b, 0, bins - 1);
    while (b > 0 && v < h.edges[b]) --b;
    while (b < bins - 1 && v > h.edges[b + 1]) ++b;
    h.counts[b] += 1.0;
  }
  return h;
}

Histogram histogram_from_json(const Json& j, const std::string& subject) {
  if (!j.is_object() || !j.contains("edges") || !j.contains("counts") || !j["edges"].is_array() ||
      !j["counts"].is_array()) {
    throw Error(ErrorCode::ParseError, subject, "histogram needs edges and counts arrays");
  }
  Histogram h;
  for (const auto& e : j["edges"]) h.edges.push_back(e.get<double>());
  for (const auto& c : j["counts"]) h.counts.push_back(c.get<double>());
  if (h.counts.empty() || h.edges.size() != h.counts.size() + 1) {
    throw Error(ErrorCode::ParseError, subject, "histogram needs k counts and k+1 edges");
  }
  for (std::size_t i = 1; i < h.edges.size(); ++i) {
    if (!(h.edges[i] > h.edges[i - 1])) throw Error(ErrorCode::ParseError, subject, "edges must be increasing");
  }
  for (double c : h.counts) {
    if (!(c >= 0.0)) throw Error(ErrorCode::ParseError, subject, "negative histogram count");
  }
  return h;
}

Json to_json(const Histogram& h) {
  Json counts = Json::array();
  for (double c : h.counts) {
    if (c == std::floor(c) && std::fabs(c) < 9e15) {
      counts.push_back(static_cast<long long>(c));
    } else {
      counts.push_back(c);
    }
  }
  return Json{{"edges", h.edges}, {"counts", std::move(counts)}};
}

double TensorSummary::sparsity() const {
  return param_count == 0 ? 0.0 : static_cast<double>(zero_count) / static_cast<double>(param_count);
}

const LayerRecord* ModelLayers::find(const std::string& path) const {
  for (const auto& l : layers) {
    if (l.path == path) return &l;
  }
  return nullptr;
}

ModelLayers layers_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("model") || !j["model"].is_string() || !j.contains("layers") ||
      !j["layers"].is_array()) {
    throw Error(ErrorCode::ParseError, "layers", "expected {\"model\", \"layers\": [...]}");
  }
  ModelLayers m;
  m.model = j["model"].get<std::string>();
  std::set<std::string> seen;
  for (const auto& lj : j["layers"]) {
    LayerRecord r;
    if (!lj.contains("path") || !lj["path"].is_string()) throw Error(ErrorCode::ParseError, m.model, "layer without path");
    r.path = lj["path"].get<std::string>();
    if (r.path.empty() || !seen.insert(r.path).second) throw Error(ErrorCode::DuplicateId, r.path, "layer path");
    r.param_count = lj.value("param_count", 0L);
    r.zero_count = lj.value("zero_count", 0L);
    if (r.param_count < 0 || r.zero_count < 0 || r.zero_count > r.param_count) {
      throw Error(ErrorCode::ParseError, r.path, "need 0 <= zero_count <= param_count");
    }
    r.weight_hist = histogram_from_json(lj.at("weight_hist"), r.path);
    if (auto it = lj.find("activation_hist"); it != lj.end() && !it->is_null()) {
      r.activation_hist = histogram_from_json(*it, r.path);
    }
    m.layers.push_back(std::move(r));
  }
  if (auto it = j.find("activation_sample"); it != j.end() && it->is_array()) {
    for (const auto& s : *it) m.activation_sample.push_back(s.get<std::string>());
  }
  return m;
}

Json to_json(const ModelLayers& m) {
  Json layers = Json::array();
  for (const auto& l : m.layers) {
    Json lj{{"path", l.path},
            {"param_count", l.param_count},
            {"zero_count", l.zero_count},
            {"weight_hist", to_json(l.weight_hist)}};
    lj["activation_hist"] = l.activation_hist ? to_json(*l.activation_hist) : Json(nullptr);
    layers.push_back(std::move(lj));
  }
  Json out{{"model", m.model}, {"layers", std::move(layers)}};
  if (!m.activation_sample.empty()) out["activation_sample"] = m.activation_sample;
  return out;
}

std::optional<TensorSummary> summary_of(const ModelLayers& m, const std::string& path, TensorKind kind) {
  const LayerRecord* r = m.find(path);
  if (!r) throw Error(ErrorCode::UnknownPath, path, "model " + m.model);
  if (kind == TensorKind::activations && !r->activation_hist) return std::nullopt;
  TensorSummary s;
  s.model = m.model;
  s.path = path;
  s.param_count = r->param_count;
  s.zero_count = r->zero_count;
  s.kind = kind;
  s.hist = kind == TensorKind::weights ? r->weight_hist : *r->activation_hist;
  return s;
}

Histogram rebin(const Histogram& h, const std::vector<double>& target_edges) {
  if (target_edges.size() < 2) throw Error(ErrorCode::InvalidArgument, "edges", "need at least two target edges");
  for (std::size_t i = 1; i < target_edges.size(); ++i) {
    if (!(target_edges[i] > target_edges[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "edges", "target edges must be increasing");
    }
  }
  if (h.edges == target_edges) return h;
  const std::size_t k = target_edges.size() - 1;
  Histogram out;
  out.edges = target_edges;
  out.counts.assign(k, 0.0);
  const double t_lo = target_edges.front();
  const double t_hi = target_edges.back();
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double mass = h.counts[i];
    if (mass == 0.0) continue;
    const double a = h.edges[i];
    const double b = h.edges[i + 1];
    const double width = b - a;
    // Mass outside the target range lands in the boundary bins.
    if (a < t_lo) out.counts.front() += mass * (std::min(b, t_lo) - a) / width;
    if (b > t_hi) out.counts.back() += mass * (b - std::max(a, t_hi)) / width;
    const double lo = std::max(a, t_lo);
    const double hi = std::min(b, t_hi);
    if (!(hi > lo)) continue;
    auto j = static_cast<std::size_t>(std::upper_bound(target_edges.begin(), target_edges.end(), lo) -
                                      target_edges.begin());
    j = j == 0 ? 0 : j - 1;
    for (; j < k && target_edges[j] < hi; ++j) {
      const double overlap = std::min(hi, target_edges[j + 1]) - std::max(lo, target_edges[j]);
      if (overlap > 0.0) out.counts[j] += mass * overlap / width;
    }
  }
  return out;
}

TensorSummary rebin(const TensorSummary& s, const std::vector<double>& target_edges) {
  TensorSummary out = s;
  out.hist = rebin(s.hist, target_edges);
  return out;
}

DiffHistogram diff_histogram(const TensorSummary& base, const TensorSummary& model, int min_bins) {
  if (base.kind != model.kind) throw Error(ErrorCode::KindMismatch, model.path, "weights compared with activations");
  if (base.path != model.path) throw Error(ErrorCode::PathMismatch, model.path, "base path " + base.path);
  DiffHistogram d;
  Histogram b;
  Histogram m;
  if (base.hist.edges == model.hist.edges) {
    d.edges = base.hist.edges;
    b = base.hist;
    m = model.hist;
  } else {
    const double lo = std::min(base.hist.edges.front(), model.hist.edges.front());
    const double hi = std::max(base.hist.edges.back(), model.hist.edges.back());
    const auto k = static_cast<std::size_t>(
        std::max<std::size_t>({static_cast<std::size_t>(std::max(min_bins, 1)), base.hist.bins(), model.hist.bins()}));
    d.edges.resize(k + 1);
    for (std::size_t i = 0; i <= k; ++i) d.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k);
    d.edges[k] = hi;
    b = rebin(base.hist, d.edges);
    m = rebin(model.hist, d.edges);
  }
  const double tb = b.total();
  const double tm = m.total();
  d.bins.resize(b.counts.size());
  double l1 = 0.0;
  for (std::size_t i = 0; i < b.counts.size(); ++i) {
    const double bi = tb > 0.0 ? b.counts[i] / tb : 0.0;
    const double mi = tm > 0.0 ? m.counts[i] / tm : 0.0;
    d.bins[i].unchanged = std::min(bi, mi);
    d.bins[i].gained = std::max(0.0, mi - bi);
    d.bins[i].lost = std::max(0.0, bi - mi);
    l1 += std::fabs(mi - bi);
  }
  d.change_score = std::clamp(0.5 * l1, 0.0, 1.0);
  return d;
}

Json to_json(const DiffHistogram& d) {
  Json unchanged = Json::array();
  Json gained = Json::array();
  Json lost = Json::array();
  for (const auto& b : d.bins) {
    unchanged.push_back(b.unchanged);
    gained.push_back(b.gained);
    lost.push_back(b.lost);
  }
  return Json{{"edges", d.edges},
              {"unchanged", std::move(unchanged)},
              {"gained", std::move(gained)},
              {"lost", std::move(lost)},
              {"change_score", d.change_score}};
}

double LayerCell::sparsity() const {
  return param_count == 0 ? 0.0 : static_cast<double>(zero_count) / static_cast<double>(param_count);
}

const LayerCell* LayerTreeNode::cell(const std::string& model) const {
  for (const auto& [id, c] : per_model) {
    if (id == model) return &c;
  }
  return nullptr;
}

namespace {

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    parts.push_back(path.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return parts;
}

LayerTreeNode& child_named(LayerTreeNode& node, const std::string& name) {
  for (auto& c : node.children) {
    if (c.name == name) return c;
  }
  LayerTreeNode c;
  c.name = name;
  c.path = node.path.empty() ? name : node.path + "." + name;
  node.children.push_back(std::move(c));
  return node.children.back();
}

void aggregate(LayerTreeNode& node, const std::vector<std::string>& models) {
  if (node.leaf()) return;
  node.per_model.clear();
  for (const auto& id : models) node.per_model.emplace_back(id, LayerCell{});
  for (auto& c : node.children) {
    aggregate(c, models);
    for (std::size_t i = 0; i < models.size(); ++i) {
      node.per_model[i].second.param_count += c.per_model[i].second.param_count;
      node.per_model[i].second.zero_count += c.per_model[i].second.zero_count;
    }
  }
}

}  // namespace

LayerTreeNode build_layer_tree(const std::vector<ModelLayers>& models, const std::optional<std::string>& base) {
  if (models.empty()) throw Error(ErrorCode::InvalidArgument, {}, "no models to compare");
  std::vector<std::string> ids;
  for (const auto& m : models) ids.push_back(m.model);

  std::set<std::string> reference;
  for (const auto& l : models.front().layers) reference.insert(l.path);
  for (const auto& m : models) {
    std::set<std::string> paths;
    for (const auto& l : m.layers) paths.insert(l.path);
    if (paths != reference) {
      std::string missing;
      for (const auto& p : reference) {
        if (!paths.count(p)) missing += (missing.empty() ? "" : ",") + p;
      }
      for (const auto& p : paths) {
        if (!reference.count(p)) missing += (missing.empty() ? "" : ",") + p;
      }
      throw Error(ErrorCode::PathSetMismatch, m.model, missing);
    }
  }

  const ModelLayers* base_layers = nullptr;
  if (base) {
    for (const auto& m : models) {
      if (m.model == *base) base_layers = &m;
    }
    if (!base_layers) throw Error(ErrorCode::UnknownModel, *base, "base is not among the compared models");
  }

  LayerTreeNode root;
  for (const auto& layer : models.front().layers) {
    LayerTreeNode* node = &root;
    for (const auto& seg : split_path(layer.path)) node = &child_named(*node, seg);
    for (const auto& m : models) {
      const LayerRecord* r = m.find(layer.path);
      LayerCell cell;
      cell.param_count = r->param_count;
      cell.zero_count = r->zero_count;
      cell.weights = r->weight_hist;
      cell.activations = r->activation_hist;
      if (base_layers) {
        const auto bw = summary_of(*base_layers, layer.path, TensorKind::weights);
        const auto mw = summary_of(m, layer.path, TensorKind::weights);
        cell.weight_diff = diff_histogram(*bw, *mw);
        const auto ba = summary_of(*base_layers, layer.path, TensorKind::activations);
        const auto ma = summary_of(m, layer.path, TensorKind::activations);
        if (ba && ma) cell.activation_diff = diff_histogram(*ba, *ma);
      }
      node->per_model.emplace_back(m.model, std::move(cell));
    }
  }
  aggregate(root, ids);
  return root;
}

LayerRankKind layer_rank_kind_from_string(const std::string& s) {
  if (s == "weights") return LayerRankKind::weights;
  if (s == "activations") return LayerRankKind::activations;
  if (s == "sparsity") return LayerRankKind::sparsity;
  throw Error(ErrorCode::BadRequest, s, "kind must be weights, activations or sparsity");
}

namespace {

void collect_leaves(const LayerTreeNode& node, std::vector<const LayerTreeNode*>& out) {
  if (node.leaf()) {
    if (!node.path.empty()) out.push_back(&node);
    return;
  }
  for (const auto& c : node.children) collect_leaves(c, out);
}

}  // namespace

std::vector<std::pair<std::string, double>> rank_layers(const LayerTreeNode& tree, const std::string& model,
                                                        LayerRankKind kind, const std::string& base) {
  std::vector<const LayerTreeNode*> leaves;
  collect_leaves(tree, leaves);
  std::vector<std::pair<std::string, double>> out;
  for (const auto* leaf : leaves) {
    const LayerCell* cell = leaf->cell(model);
    if (!cell) throw Error(ErrorCode::UnknownModel, model, "not a compared model");
    double score = 0.0;
    switch (kind) {
      case LayerRankKind::weights:
        score = cell->weight_diff ? cell->weight_diff->change_score : 0.0;
        break;
      case LayerRankKind::activations:
        score = cell->activation_diff ? cell->activation_diff->change_score : 0.0;
        break;
      case LayerRankKind::sparsity: {
        const LayerCell* b = leaf->cell(base);
        if (!b) throw Error(ErrorCode::BaseRequired, "sparsity", "ranking by sparsity needs a base");
        score = std::fabs(cell->sparsity() - b->sparsity());
        break;
      }
    }
    out.emplace_back(leaf->path, score);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

Json to_json(const LayerTreeNode& node) {
  Json per_model = Json::object();
  for (const auto& [id, cell] : node.per_model) {
    Json cj{{"param_count", cell.param_count}, {"zero_count", cell.zero_count}, {"sparsity", cell.sparsity()}};
    if (cell.weights) cj["weights"] = to_json(*cell.weights);
    if (cell.activations) cj["activations"] = to_json(*cell.activations);
    if (cell.weight_diff) cj["weight_diff"] = to_json(*cell.weight_diff);
    if (cell.activation_diff) cj["activation_diff"] = to_json(*cell.activation_diff);
    per_model[id] = std::move(cj);
  }
  Json children = Json::array();
  for (const auto& c : node.children) children.push_back(to_json(c));
  return Json{{"path", node.path}, {"name", node.name}, {"per_model", std::move(per_model)},
              {"children", std::move(children)}};
}

}  // namespace compbench
