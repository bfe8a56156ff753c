#include "compbench/service.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>

#include "compbench/analytics.hpp"
#include "compbench/layout.hpp"
#include "compbench/selection.hpp"

namespace compbench {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

Json read_json_file(const fs::path& path, ErrorCode missing_code, const std::string& subject) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(missing_code, subject, "cannot read " + path.string());
  try {
    return Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::LoadFailure, subject, path.string() + ": " + e.what());
  }
}

}  // namespace

SessionConfig config_from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::BadConfig, "config", "expected a JSON object");
  SessionConfig c;
  try {
    if (!j.contains("experiments") || !j.contains("dataset")) {
      throw Error(ErrorCode::BadConfig, "config", "\"experiments\" and \"dataset\" are required");
    }
    c.experiments = resolve(base_dir, j["experiments"].get<std::string>());
    c.dataset = resolve(base_dir, j["dataset"].get<std::string>());
    auto opt_string = [&](const char* key) -> std::optional<std::string> {
      auto it = j.find(key);
      if (it == j.end() || it->is_null()) return std::nullopt;
      return it->get<std::string>();
    };
    if (auto s = opt_string("outputs_dir")) c.outputs_dir = resolve(base_dir, *s);
    if (auto s = opt_string("layers_dir")) c.layers_dir = resolve(base_dir, *s);
    c.provider_url = opt_string("provider_url");
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.cache_size = j.value("cache_size", c.cache_size);
    c.provider_inflight = j.value("provider_inflight", c.provider_inflight);
    c.provider_timeout_ms = j.value("provider_timeout_ms", c.provider_timeout_ms);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::BadConfig, "config", e.what());
  }
  if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::BadConfig, "port", "out of range");
  if (c.provider_inflight < 1) throw Error(ErrorCode::BadConfig, "provider_inflight", "must be at least 1");
  if (!c.provider_url && (!c.outputs_dir || !c.layers_dir)) {
    throw Error(ErrorCode::BadConfig, "config", "need provider_url or both outputs_dir and layers_dir");
  }
  return c;
}

SessionConfig load_config(const fs::path& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw Error(ErrorCode::BadConfig, file.string(), "cannot read config file");
  Json j;
  try {
    j = Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::BadConfig, file.string(), e.what());
  }
  return config_from_json(j, file.parent_path());
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownModel:
    case ErrorCode::UnknownMetric:
    case ErrorCode::UnknownPath:
    case ErrorCode::MissingOutput:
      return 404;
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::ProviderProtocolViolation:
      return 502;
    case ErrorCode::LoadFailure:
    case ErrorCode::IoError:
    case ErrorCode::BadConfig:
      return 500;
    default:
      return 400;
  }
}

Json error_body(const Error& e) {
  return Json{{"code", std::string(to_string(e.code()))}, {"message", e.message()}, {"detail", e.subject()}};
}

Service::Service(SessionConfig config, ProviderTransport transport)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      outputs_cache_(config_.cache_size),
      layers_cache_(config_.cache_size) {
  if (config_.provider_url && !transport_) {
    throw Error(ErrorCode::BadConfig, "provider_url", "no transport for the provider");
  }
  try {
    store_ = load_store_file(config_.experiments);
    dataset_ = dataset_from_json(read_json_file(config_.dataset, ErrorCode::LoadFailure, "dataset"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::LoadFailure) throw;
    throw Error(ErrorCode::LoadFailure, e.subject(), e.what());
  }
}

namespace {

std::string id_set_key(const std::string& model, const std::vector<std::string>& ids) {
  std::vector<std::string> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  std::string joined;
  for (const auto& id : sorted) {
    joined += id;
    joined.push_back('\n');
  }
  return model + "#" + std::to_string(sorted.size()) + "#" + std::to_string(std::hash<std::string>{}(joined));
}

}  // namespace

std::shared_ptr<const ModelOutputs> Service::fetch_outputs(const std::string& model,
                                                           const std::vector<std::string>& instance_ids) const {
  store_.node(model);
  const bool remote = config_.provider_url.has_value();
  const std::string key = remote ? id_set_key(model, instance_ids) : model;
  if (auto hit = outputs_cache_.get(key)) return hit;
  std::shared_ptr<const ModelOutputs> value;
  if (remote) {
    value = std::make_shared<const ModelOutputs>(
        fetch_provider_outputs(transport_, model, instance_ids, dataset_.classes));
  } else {
    const Json j = read_json_file(*config_.outputs_dir / (model + ".json"), ErrorCode::MissingOutput, model);
    ModelOutputs o;
    try {
      o = outputs_from_json(j, dataset_.classes);
    } catch (const Error& e) {
      throw Error(ErrorCode::LoadFailure, model, e.what());
    }
    if (o.model != model) throw Error(ErrorCode::LoadFailure, model, "outputs file names model " + o.model);
    value = std::make_shared<const ModelOutputs>(std::move(o));
  }
  outputs_cache_.put(key, value);
  return value;
}

std::shared_ptr<const ModelLayers> Service::fetch_layers(const std::string& model) const {
  store_.node(model);
  if (auto hit = layers_cache_.get(model)) return hit;
  std::shared_ptr<const ModelLayers> value;
  if (config_.provider_url) {
    value = std::make_shared<const ModelLayers>(fetch_provider_layers(transport_, model, {}));
  } else {
    const Json j = read_json_file(*config_.layers_dir / (model + ".json"), ErrorCode::UnknownPath, model);
    ModelLayers l;
    try {
      l = layers_from_json(j);
    } catch (const Error& e) {
      throw Error(ErrorCode::LoadFailure, model, e.what());
    }
    if (l.model != model) throw Error(ErrorCode::LoadFailure, model, "layers file names model " + l.model);
    value = std::make_shared<const ModelLayers>(std::move(l));
  }
  layers_cache_.put(model, value);
  return value;
}

ApiResponse Service::handle(const ApiRequest& request) const {
  try {
    return {200, route(request)};
  } catch (const Error& e) {
    return {http_status(e.code()), error_body(e)};
  } catch (const Json::exception& e) {
    return {400, Json{{"code", "BadRequest"}, {"message", e.what()}, {"detail", request.path}}};
  } catch (const std::exception& e) {
    return {500, Json{{"code", "Internal"}, {"message", e.what()}, {"detail", request.path}}};
  }
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<std::string> query_value(const std::map<std::string, std::string>& q, const std::string& key) {
  auto it = q.find(key);
  if (it == q.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::BadRequest, key, "expected a number, got \"" + s + "\"");
  }
  return v;
}

long parse_long(const std::string& key, const std::string& s) {
  long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error(ErrorCode::BadRequest, key, "expected an integer, got \"" + s + "\"");
  }
  return v;
}

Json parse_body(const std::string& body) {
  if (body.empty()) return Json::object();
  try {
    Json j = Json::parse(body);
    if (!j.is_object()) throw Error(ErrorCode::BadRequest, "body", "expected a JSON object");
    return j;
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::BadRequest, "body", e.what());
  }
}

std::vector<std::string> id_list(const Json& body, const ModelStore& store) {
  auto it = body.find("ids");
  if (it == body.end() || !it->is_array()) throw Error(ErrorCode::BadRequest, "ids", "expected an array of model ids");
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& v : *it) {
    if (!v.is_string()) throw Error(ErrorCode::BadRequest, "ids", "model ids are strings");
    const auto id = v.get<std::string>();
    store.node(id);
    if (seen.insert(id).second) ids.push_back(id);
  }
  if (ids.empty()) throw Error(ErrorCode::BadRequest, "ids", "selection is empty");
  return ids;
}

std::string string_field(const Json& body, const char* key, const std::string& fallback) {
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) return fallback;
  if (!it->is_string()) throw Error(ErrorCode::BadRequest, key, "expected a string");
  return it->get<std::string>();
}

std::string base_for(const Json& body, const std::vector<std::string>& ids, const ModelStore& store) {
  const std::string base = string_field(body, "base", "");
  if (base.empty()) return default_base(ids, store);
  store.node(base);
  if (std::find(ids.begin(), ids.end(), base) == ids.end()) {
    throw Error(ErrorCode::BadRequest, base, "base must be one of the compared models");
  }
  return base;
}

}  // namespace

Json Service::route(const ApiRequest& request) const {
  const std::string prefix = "/v1/";
  if (request.path.rfind(prefix, 0) != 0) throw Error(ErrorCode::UnknownPath, request.path, "no such endpoint");
  std::vector<std::string> seg = split(request.path.substr(prefix.size()), '/');
  if (!seg.empty() && seg.back().empty()) seg.pop_back();
  const bool get = request.method == "GET";
  const bool post = request.method == "POST";
  auto bad_method = [&] { return Error(ErrorCode::BadRequest, request.path, request.method + " not supported here"); };

  if (seg.size() == 1 && seg[0] == "models") {
    if (!get) throw bad_method();
    return get_models();
  }
  if (seg.size() == 2 && seg[0] == "models") {
    if (!get) throw bad_method();
    return get_model(seg[1]);
  }
  if (seg.size() == 1 && seg[0] == "layout") {
    if (!get) throw bad_method();
    return get_layout(request.query);
  }
  if (seg.size() == 3 && seg[0] == "metrics" && seg[2] == "histogram") {
    if (!get) throw bad_method();
    return get_histogram(seg[1], request.query);
  }
  if (seg.size() == 1 && seg[0] == "filters") {
    if (!post) throw bad_method();
    return post_filters(parse_body(request.body));
  }
  if (seg.size() == 1 && seg[0] == "pareto") {
    if (!get) throw bad_method();
    return get_pareto(request.query);
  }
  if (seg.size() == 2 && seg[0] == "selection" && seg[1] == "compare") {
    if (!post) throw bad_method();
    return post_compare(parse_body(request.body));
  }
  if (seg.size() == 1 && seg[0] == "behaviors") {
    if (!post) throw bad_method();
    return post_behaviors(parse_body(request.body));
  }
  if (seg.size() == 1 && seg[0] == "layers") {
    if (!post) throw bad_method();
    return post_layers(parse_body(request.body));
  }
  throw Error(ErrorCode::UnknownPath, request.path, "no such endpoint");
}

Json Service::get_models() const {
  Json out = to_json(store_);
  out["roots"] = store_.roots();
  return out;
}

Json Service::get_model(const std::string& id) const {
  const ModelNode& node = store_.node(id);
  Json doc = to_json(store_);
  Json model;
  for (const auto& m : doc["models"]) {
    if (m["id"] == id) model = m;
  }
  Json path = Json::array();
  for (const auto& op : op_path(store_, id)) path.push_back(op.label());
  Json tooltip = Json::array();
  for (const auto& [label, value] : node_tooltip(store_, id)) tooltip.push_back(Json{{"label", label}, {"value", value}});
  return Json{{"model", std::move(model)},
              {"depth", store_.depth(node.id)},
              {"children", store_.children(node.id)},
              {"op_path", std::move(path)},
              {"tooltip", std::move(tooltip)}};
}

Json Service::get_layout(const std::map<std::string, std::string>& query) const {
  const LayoutMode mode = layout_mode_from_string(query_value(query, "mode").value_or("by_step"));
  auto encoding = [&](const char* key, Encoding enc) -> std::optional<std::string> {
    if (auto v = query_value(query, key)) {
      if (*v == "none") return std::nullopt;
      store_.metric(*v);
      return v;
    }
    if (const MetricSpec* m = store_.default_for(enc)) return m->name;
    return std::nullopt;
  };
  const auto color = encoding("color", Encoding::color);
  const auto size = encoding("size", Encoding::size);
  std::optional<std::set<std::string>> enabled;
  if (auto it = query.find("enabled"); it != query.end()) {
    enabled.emplace();
    if (!it->second.empty()) {
      for (const auto& id : split(it->second, ',')) {
        store_.node(id);
        enabled->insert(id);
      }
    }
  }
  LayoutOptions options;
  if (auto v = query_value(query, "col_spacing")) options.col_spacing = parse_double("col_spacing", *v);
  if (auto v = query_value(query, "row_spacing")) options.row_spacing = parse_double("row_spacing", *v);
  if (!(options.col_spacing > 0.0) || !(options.row_spacing > 0.0)) {
    throw Error(ErrorCode::BadRequest, "spacing", "spacings must be positive");
  }
  return to_json(compute_layout(store_, mode, color, size, enabled, options));
}

Json Service::get_histogram(const std::string& metric, const std::map<std::string, std::string>& query) const {
  long bins = 10;
  if (auto v = query_value(query, "bins")) bins = parse_long("bins", *v);
  if (bins < 1 || bins > 10000) throw Error(ErrorCode::BadRequest, "bins", "must lie in 1..10000");
  return to_json(metric_histogram(store_, metric, static_cast<int>(bins)));
}

Json Service::post_filters(const Json& body) const {
  std::vector<MetricFilter> filters;
  if (auto it = body.find("filters"); it != body.end()) {
    if (!it->is_array()) throw Error(ErrorCode::BadRequest, "filters", "expected an array");
    for (const auto& f : *it) filters.push_back(filter_from_json(f));
  }
  return Json{{"enabled", apply_filters(store_, filters)}};
}

Json Service::get_pareto(const std::map<std::string, std::string>& query) const {
  const auto x = query_value(query, "x");
  const auto y = query_value(query, "y");
  if (!x || !y) throw Error(ErrorCode::BadRequest, "pareto", "x and y metrics are required");
  return Json{{"x", *x}, {"y", *y}, {"front", pareto_front(store_, *x, *y)}};
}

Json Service::post_compare(const Json& body) const {
  const auto ids = id_list(body, store_);
  std::string metric = string_field(body, "metric", "");
  if (metric.empty()) {
    const MetricSpec* m = store_.default_for(Encoding::color);
    if (!m) throw Error(ErrorCode::BadRequest, "metric", "no metric given and none defaults to color");
    metric = m->name;
  }
  return to_json(build_comparison(store_, ids, metric));
}

Json Service::post_behaviors(const Json& body) const {
  const auto ids = id_list(body, store_);
  const std::string base = base_for(body, ids, store_);
  const ComparisonMetric metric = comparison_metric_from_string(string_field(body, "metric", "correctness"));
  const RelativeMode mode = relative_mode_from_string(string_field(body, "relative_mode", "absolute"));
  const GroupBy group_by = group_by_from_string(string_field(body, "group_by", "group"));
  const long offset = body.value("offset", 0L);
  const long limit = body.value("limit", 100L);
  if (offset < 0 || limit < 1 || limit > 10000) throw Error(ErrorCode::BadRequest, "paging", "need offset >= 0, 1 <= limit <= 10000");

  std::vector<std::string> instance_ids;
  for (const auto& inst : dataset_.instances) instance_ids.push_back(inst.id);
  const auto base_outputs = fetch_outputs(base, instance_ids);
  MetricValues values;
  for (const auto& id : ids) {
    const auto outputs = fetch_outputs(id, instance_ids);
    values[id] = eval_metric(metric, *outputs, base_outputs.get(), dataset_.instances);
  }
  auto rows = aggregate_rows(values, dataset_.instances, group_by, base, mode, metric);
  if (auto it = body.find("sort"); it != body.end() && !it->is_null()) {
    const Json& s = *it;
    if (!s.is_object()) throw Error(ErrorCode::BadRequest, "sort", "expected {model, mode, direction}");
    const std::string model = string_field(s, "model", base);
    const std::string sort_mode = string_field(s, "mode", "absolute");
    const std::string direction = string_field(s, "direction", "descending");
    if (sort_mode != "absolute" && sort_mode != "relative") throw Error(ErrorCode::BadRequest, "sort.mode", sort_mode);
    if (direction != "ascending" && direction != "descending") {
      throw Error(ErrorCode::BadRequest, "sort.direction", direction);
    }
    rows = sort_rows(std::move(rows), model, sort_mode == "absolute" ? SortMode::absolute : SortMode::relative,
                     direction == "ascending" ? SortDirection::ascending : SortDirection::descending);
  }

  Json page = Json::array();
  for (long i = offset; i < static_cast<long>(rows.size()) && i < offset + limit; ++i) {
    Json row = to_json(rows[i]);
    if (group_by == GroupBy::instance) {
      const InstanceRecord* inst = dataset_.find(rows[i].key);
      row["truth"] = inst->truth;
      row["group"] = inst->group ? Json(*inst->group) : Json(nullptr);
      row["payload_ref"] = inst->payload_ref ? Json(*inst->payload_ref) : Json(nullptr);
    }
    page.push_back(std::move(row));
  }
  return Json{{"models", ids},
              {"base", base},
              {"metric", std::string(to_string(metric))},
              {"relative_mode", std::string(to_string(mode))},
              {"group_by", group_by == GroupBy::instance ? "instance" : "group"},
              {"total", rows.size()},
              {"offset", offset},
              {"limit", limit},
              {"rows", std::move(page)}};
}

Json Service::post_layers(const Json& body) const {
  const auto ids = id_list(body, store_);
  const std::string base = base_for(body, ids, store_);
  const std::string kind_name = string_field(body, "kind", "weights");
  const LayerRankKind kind = layer_rank_kind_from_string(kind_name);
  std::vector<ModelLayers> layers;
  for (const auto& id : ids) layers.push_back(*fetch_layers(id));
  const LayerTreeNode tree = build_layer_tree(layers, base);
  Json out{{"models", ids}, {"base", base}, {"kind", kind_name}, {"tree", to_json(tree)}};
  const bool sorted = body.value("sort", false);
  if (sorted) {
    Json ranking = Json::object();
    for (const auto& id : ids) {
      Json list = Json::array();
      for (const auto& [path, score] : rank_layers(tree, id, kind, base)) {
        list.push_back(Json{{"path", path}, {"score", score}});
      }
      ranking[id] = std::move(list);
    }
    out["ranking"] = std::move(ranking);
  }
  return out;
}

}  // namespace compbench
