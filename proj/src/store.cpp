#include "compbench/store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "compbench/errors.hpp"
#include "compbench/format.hpp"

namespace compbench {

std::string format_scalar(const Scalar& value) {
  if (const auto* d = std::get_if<double>(&value)) return format_number(*d);
  if (const auto* b = std::get_if<bool>(&value)) return *b ? "true" : "false";
  return std::get<std::string>(value);
}

Json scalar_to_json(const Scalar& value) {
  if (const auto* d = std::get_if<double>(&value)) {
    if (*d == std::floor(*d) && std::fabs(*d) < 1e15) return Json(static_cast<long long>(*d));
    return Json(*d);
  }
  if (const auto* b = std::get_if<bool>(&value)) return Json(*b);
  return Json(std::get<std::string>(value));
}

const Scalar* Operation::param(std::string_view key) const {
  for (const auto& [k, v] : parameters) {
    if (k == key) return &v;
  }
  return nullptr;
}

std::string Operation::signature() const {
  std::vector<const std::pair<std::string, Scalar>*> sorted;
  sorted.reserve(parameters.size());
  for (const auto& p : parameters) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->first < b->first; });
  Json params = Json::object();
  for (const auto* p : sorted) params[p->first] = scalar_to_json(p->second);
  return name + params.dump();
}

std::string Operation::label() const {
  if (parameters.empty()) return name;
  std::string out = name + "(";
  bool first = true;
  for (const auto& [k, v] : parameters) {
    if (!first) out += ", ";
    first = false;
    out += k + "=" + format_scalar(v);
  }
  return out + ")";
}

std::optional<double> ModelNode::metric(std::string_view name) const {
  auto it = metrics.find(std::string(name));
  if (it == metrics.end()) return std::nullopt;
  return it->second;
}

const MetricSpec* ModelStore::find_metric(std::string_view name) const {
  for (const auto& m : metrics_) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

const MetricSpec& ModelStore::metric(std::string_view name) const {
  if (const auto* m = find_metric(name)) return *m;
  throw Error(ErrorCode::UnknownMetric, std::string(name), "no such metric");
}

const ModelNode* ModelStore::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

const ModelNode& ModelStore::node(std::string_view id) const {
  if (const auto* n = find(id)) return *n;
  throw Error(ErrorCode::UnknownModel, std::string(id), "no such model");
}

std::size_t ModelStore::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw Error(ErrorCode::UnknownModel, std::string(id), "no such model");
  return it->second;
}

const std::vector<std::string>& ModelStore::children(std::string_view id) const {
  return children_[index_of(id)];
}

int ModelStore::depth(std::string_view id) const { return depth_[index_of(id)]; }

const MetricSpec* ModelStore::default_for(Encoding encoding) const {
  for (const auto& m : metrics_) {
    if (m.default_encoding == encoding) return &m;
  }
  return nullptr;
}

std::string_view to_string(Objective objective) {
  return objective == Objective::maximize ? "maximize" : "minimize";
}

std::string_view to_string(Encoding encoding) {
  switch (encoding) {
    case Encoding::color: return "color";
    case Encoding::size: return "size";
    case Encoding::none: return "none";
  }
  return "none";
}

namespace {

[[noreturn]] void parse_fail(const std::string& what) {
  throw Error(ErrorCode::ParseError, {}, what);
}

const Json& require(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) parse_fail(where + ": missing field \"" + key + "\"");
  return *it;
}

std::string require_string(const Json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) parse_fail(where + ": field \"" + key + "\" must be a string");
  return v.get<std::string>();
}

MetricSpec metric_from_json(const Json& j) {
  if (!j.is_object()) parse_fail("metric entry must be an object");
  MetricSpec m;
  m.name = require_string(j, "name", "metric");
  if (m.name.empty()) parse_fail("metric name must be non-empty");
  if (auto it = j.find("unit"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) parse_fail("metric " + m.name + ": unit must be a string");
    m.unit = it->get<std::string>();
  }
  const std::string objective = require_string(j, "objective", "metric " + m.name);
  if (objective == "maximize") {
    m.objective = Objective::maximize;
  } else if (objective == "minimize") {
    m.objective = Objective::minimize;
  } else {
    throw Error(ErrorCode::InvalidMetricSpec, m.name, "objective must be maximize or minimize");
  }
  if (auto it = j.find("default_encoding"); it != j.end() && !it->is_null()) {
    const std::string enc = it->is_string() ? it->get<std::string>() : std::string{};
    if (enc == "color") {
      m.default_encoding = Encoding::color;
    } else if (enc == "size") {
      m.default_encoding = Encoding::size;
    } else if (enc == "none") {
      m.default_encoding = Encoding::none;
    } else {
      throw Error(ErrorCode::InvalidMetricSpec, m.name, "default_encoding must be color, size or none");
    }
  }
  return m;
}

Scalar scalar_from_json(const Json& v, const std::string& where) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return v.get<std::string>();
  parse_fail(where + ": parameter values must be numbers, strings or booleans");
}

}  // namespace

Operation operation_from_json(const Json& j) {
  if (!j.is_object()) parse_fail("operation must be an object");
  Operation op;
  op.name = require_string(j, "name", "operation");
  if (op.name.empty()) parse_fail("operation name must be non-empty");
  if (auto it = j.find("parameters"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) parse_fail("operation " + op.name + ": parameters must be an object");
    for (const auto& [key, value] : it->items()) {
      op.parameters.emplace_back(key, scalar_from_json(value, "operation " + op.name));
    }
  }
  return op;
}

Json to_json(const Operation& op) {
  Json params = Json::object();
  for (const auto& [k, v] : op.parameters) params[k] = scalar_to_json(v);
  return Json{{"name", op.name}, {"parameters", std::move(params)}};
}

ModelStore load_store(const Json& document) {
  if (!document.is_object()) parse_fail("experiment document must be a JSON object");
  const auto& version = require(document, "schema_version", "document");
  if (!version.is_number_integer() || version.get<int>() != kSchemaVersion) {
    throw Error(ErrorCode::UnsupportedSchema, version.dump(),
                "supported schema_version is " + std::to_string(kSchemaVersion));
  }

  ModelStore store;
  const auto& metrics = require(document, "metrics", "document");
  if (!metrics.is_array()) parse_fail("metrics must be an array");
  int color_defaults = 0;
  int size_defaults = 0;
  for (const auto& mj : metrics) {
    MetricSpec m = metric_from_json(mj);
    if (store.find_metric(m.name)) throw Error(ErrorCode::DuplicateMetric, m.name, "metric declared twice");
    if (m.default_encoding == Encoding::color && ++color_defaults > 1) {
      throw Error(ErrorCode::InvalidMetricSpec, m.name, "more than one metric defaults to color");
    }
    if (m.default_encoding == Encoding::size && ++size_defaults > 1) {
      throw Error(ErrorCode::InvalidMetricSpec, m.name, "more than one metric defaults to size");
    }
    store.metrics_.push_back(std::move(m));
  }

  const auto& models = require(document, "models", "document");
  if (!models.is_array()) parse_fail("models must be an array");
  for (const auto& mj : models) {
    if (!mj.is_object()) parse_fail("model entry must be an object");
    ModelNode n;
    n.id = require_string(mj, "id", "model");
    if (n.id.empty()) parse_fail("model id must be non-empty");
    if (store.index_.count(n.id)) throw Error(ErrorCode::DuplicateId, n.id, "model id used twice");

    if (auto it = mj.find("parent"); it != mj.end() && !it->is_null()) {
      if (!it->is_string()) parse_fail("model " + n.id + ": parent must be a string or null");
      n.parent_id = it->get<std::string>();
    }
    if (auto it = mj.find("operation"); it != mj.end() && !it->is_null()) {
      n.operation = operation_from_json(*it);
    }
    if (!n.parent_id && n.operation) throw Error(ErrorCode::RootWithOperation, n.id, "a root has no operation");
    if (n.parent_id && !n.operation) throw Error(ErrorCode::MissingOperation, n.id, "a child needs an operation");

    if (auto it = mj.find("metrics"); it != mj.end() && !it->is_null()) {
      if (!it->is_object()) parse_fail("model " + n.id + ": metrics must be an object");
      for (const auto& [name, value] : it->items()) {
        if (!store.find_metric(name)) throw Error(ErrorCode::UndeclaredMetric, n.id, "metric " + name);
        if (value.is_null()) continue;  // explicit "missing"
        if (!value.is_number()) parse_fail("model " + n.id + ": metric " + name + " must be a number");
        const double v = value.get<double>();
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteMetric, n.id, "metric " + name);
        n.metrics[name] = v;
      }
    }
    if (auto it = mj.find("tags"); it != mj.end() && !it->is_null()) {
      if (!it->is_array()) parse_fail("model " + n.id + ": tags must be an array");
      for (const auto& t : *it) {
        if (!t.is_string()) parse_fail("model " + n.id + ": tags must be strings");
        n.tags.push_back(t.get<std::string>());
      }
    }
    store.index_.emplace(n.id, store.nodes_.size());
    store.nodes_.push_back(std::move(n));
  }

  const std::size_t count = store.nodes_.size();
  std::vector<std::size_t> parent(count, count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& n = store.nodes_[i];
    if (!n.parent_id) continue;
    auto it = store.index_.find(*n.parent_id);
    if (it == store.index_.end()) throw Error(ErrorCode::UnknownParent, n.id, "parent " + *n.parent_id);
    parent[i] = it->second;
  }

  // Walk parent chains; a chain that revisits a node on the current walk is a cycle.
  enum class Mark : unsigned char { unvisited, active, done };
  std::vector<Mark> mark(count, Mark::unvisited);
  store.depth_.assign(count, 0);
  for (std::size_t start = 0; start < count; ++start) {
    std::vector<std::size_t> chain;
    std::size_t cur = start;
    while (cur != count && mark[cur] == Mark::unvisited) {
      mark[cur] = Mark::active;
      chain.push_back(cur);
      cur = parent[cur];
    }
    if (cur != count && mark[cur] == Mark::active) {
      throw Error(ErrorCode::CycleDetected, store.nodes_[cur].id, "parent links form a cycle");
    }
    int d = cur == count ? -1 : store.depth_[cur];
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      store.depth_[*it] = ++d;
      mark[*it] = Mark::done;
    }
  }

  store.children_.assign(count, {});
  for (std::size_t i = 0; i < count; ++i) {
    if (parent[i] == count) {
      store.roots_.push_back(store.nodes_[i].id);
    } else {
      store.children_[parent[i]].push_back(store.nodes_[i].id);
    }
  }
  return store;
}

ModelStore load_store_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, path.string(), "cannot open file");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string(), e.what());
  }
  return load_store(doc);
}

Json to_json(const ModelStore& store) {
  Json metrics = Json::array();
  for (const auto& m : store.metrics()) {
    Json mj{{"name", m.name}, {"unit", m.unit}, {"objective", to_string(m.objective)}};
    mj["default_encoding"] = m.default_encoding ? Json(to_string(*m.default_encoding)) : Json(nullptr);
    metrics.push_back(std::move(mj));
  }
  Json models = Json::array();
  for (const auto& n : store.nodes()) {
    Json mj{{"id", n.id}};
    mj["parent"] = n.parent_id ? Json(*n.parent_id) : Json(nullptr);
    mj["operation"] = n.operation ? to_json(*n.operation) : Json(nullptr);
    Json values = Json::object();
    for (const auto& m : store.metrics()) {
      if (auto v = n.metric(m.name)) values[m.name] = *v;
    }
    mj["metrics"] = std::move(values);
    mj["tags"] = n.tags;
    models.push_back(std::move(mj));
  }
  return Json{{"schema_version", kSchemaVersion}, {"metrics", std::move(metrics)}, {"models", std::move(models)}};
}

std::vector<Operation> op_path(const ModelStore& store, std::string_view id) {
  std::vector<Operation> ops;
  const ModelNode* n = &store.node(id);
  while (n->parent_id) {
    ops.push_back(*n->operation);
    n = &store.node(*n->parent_id);
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

std::vector<std::string> select_descendants(const ModelStore& store, std::string_view id,
                                            bool include_self) {
  const std::size_t origin = store.index_of(id);
  std::vector<bool> hit(store.size(), false);
  std::vector<std::string> frontier{std::string(id)};
  while (!frontier.empty()) {
    std::string cur = std::move(frontier.back());
    frontier.pop_back();
    for (const auto& child : store.children(cur)) {
      hit[store.index_of(child)] = true;
      frontier.push_back(child);
    }
  }
  if (include_self) hit[origin] = true;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (hit[i]) out.push_back(store.nodes()[i].id);
  }
  return out;
}

}  // namespace compbench
