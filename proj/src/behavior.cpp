#include "compbench/behavior.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include "compbench/errors.hpp"

namespace compbench {

const InstanceRecord* Dataset::find(const std::string& id) const {
  for (const auto& r : instances) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

namespace {

std::optional<std::string> optional_string(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw Error(ErrorCode::ParseError, key, "expected a string");
}

}  // namespace

Dataset dataset_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("instances") || !j["instances"].is_array()) {
    throw Error(ErrorCode::ParseError, "dataset", "missing \"instances\" array");
  }
  Dataset d;
  std::set<std::string> seen;
  for (const auto& ij : j["instances"]) {
    InstanceRecord r;
    auto id = optional_string(ij, "id");
    auto truth = optional_string(ij, "truth");
    if (!id || !truth) throw Error(ErrorCode::ParseError, "dataset", "instances need id and truth");
    r.id = *id;
    r.truth = *truth;
    r.group = optional_string(ij, "group");
    r.payload_ref = optional_string(ij, "payload_ref");
    if (!seen.insert(r.id).second) throw Error(ErrorCode::DuplicateId, r.id, "instance id");
    d.instances.push_back(std::move(r));
  }
  if (auto it = j.find("classes"); it != j.end() && it->is_array()) {
    for (const auto& c : *it) d.classes.push_back(c.is_string() ? c.get<std::string>() : c.dump());
  }
  return d;
}

Json to_json(const Dataset& d) {
  Json instances = Json::array();
  for (const auto& r : d.instances) {
    instances.push_back(Json{{"id", r.id},
                             {"truth", r.truth},
                             {"group", r.group ? Json(*r.group) : Json(nullptr)},
                             {"payload_ref", r.payload_ref ? Json(*r.payload_ref) : Json(nullptr)}});
  }
  return Json{{"instances", std::move(instances)}, {"classes", d.classes}};
}

const OutputRecord* ModelOutputs::find(const std::string& instance) const {
  if (index_.size() != records.size()) {
    for (const auto& r : records) {
      if (r.instance == instance) return &r;
    }
    return nullptr;
  }
  auto it = index_.find(instance);
  return it == index_.end() ? nullptr : &records[it->second];
}

void ModelOutputs::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < records.size(); ++i) index_.emplace(records[i].instance, i);
}

namespace {

std::size_t argmax(const std::vector<double>& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::string class_name(std::size_t index, const std::vector<std::string>& classes) {
  return index < classes.size() ? classes[index] : std::to_string(index);
}

}  // namespace

ModelOutputs outputs_from_json(const Json& j, const std::vector<std::string>& classes) {
  if (!j.is_object() || !j.contains("model") || !j["model"].is_string() || !j.contains("instances") ||
      !j["instances"].is_array()) {
    throw Error(ErrorCode::ParseError, "outputs", "expected {\"model\", \"instances\": [...]}");
  }
  ModelOutputs out;
  out.model = j["model"].get<std::string>();
  for (const auto& ij : j["instances"]) {
    OutputRecord r;
    r.model = out.model;
    auto id = optional_string(ij, "id");
    if (!id) throw Error(ErrorCode::ParseError, out.model, "output record without id");
    r.instance = *id;
    r.label = optional_string(ij, "label");
    r.text = optional_string(ij, "text");
    if (auto it = ij.find("probs"); it != ij.end() && !it->is_null()) {
      if (!it->is_array() || it->empty()) throw Error(ErrorCode::ParseError, r.instance, "probs must be a non-empty array");
      std::vector<double> p;
      double sum = 0.0;
      for (const auto& v : *it) {
        if (!v.is_number()) throw Error(ErrorCode::ParseError, r.instance, "probs must be numbers");
        const double x = v.get<double>();
        if (!(x >= 0.0)) throw Error(ErrorCode::InvalidArgument, r.instance, "negative probability");
        p.push_back(x);
        sum += x;
      }
      if (std::fabs(sum - 1.0) > 1e-6) throw Error(ErrorCode::InvalidArgument, r.instance, "probs do not sum to 1");
      const std::string top = class_name(argmax(p), classes);
      if (r.label && *r.label != top) {
        throw Error(ErrorCode::InvalidArgument, r.instance, "label " + *r.label + " is not argmax(probs) " + top);
      }
      r.label = top;
      r.probs = std::move(p);
    }
    if (!r.label && !r.probs && !r.text) {
      throw Error(ErrorCode::InvalidArgument, r.instance, "output needs a label, probs or text");
    }
    out.records.push_back(std::move(r));
  }
  out.reindex();
  return out;
}

Json to_json(const ModelOutputs& o) {
  Json instances = Json::array();
  for (const auto& r : o.records) {
    Json rj{{"id", r.instance}};
    rj["label"] = r.label ? Json(*r.label) : Json(nullptr);
    rj["probs"] = r.probs ? Json(*r.probs) : Json(nullptr);
    rj["text"] = r.text ? Json(*r.text) : Json(nullptr);
    instances.push_back(std::move(rj));
  }
  return Json{{"model", o.model}, {"instances", std::move(instances)}};
}

ComparisonMetric comparison_metric_from_string(const std::string& s) {
  if (s == "correctness") return ComparisonMetric::correctness;
  if (s == "confidence") return ComparisonMetric::confidence;
  if (s == "top1_change") return ComparisonMetric::top1_change;
  if (s == "kl_divergence") return ComparisonMetric::kl_divergence;
  if (s == "text_f1") return ComparisonMetric::text_f1;
  if (s == "text_change") return ComparisonMetric::text_change;
  throw Error(ErrorCode::BadRequest, s, "unknown comparison metric");
}

RelativeMode relative_mode_from_string(const std::string& s) {
  if (s == "absolute") return RelativeMode::absolute;
  if (s == "difference") return RelativeMode::difference;
  if (s == "pct_error_change") return RelativeMode::pct_error_change;
  throw Error(ErrorCode::BadRequest, s, "unknown relative mode");
}

GroupBy group_by_from_string(const std::string& s) {
  if (s == "instance") return GroupBy::instance;
  if (s == "group") return GroupBy::group;
  throw Error(ErrorCode::BadRequest, s, "group_by must be instance or group");
}

std::string_view to_string(ComparisonMetric m) {
  switch (m) {
    case ComparisonMetric::correctness: return "correctness";
    case ComparisonMetric::confidence: return "confidence";
    case ComparisonMetric::top1_change: return "top1_change";
    case ComparisonMetric::kl_divergence: return "kl_divergence";
    case ComparisonMetric::text_f1: return "text_f1";
    case ComparisonMetric::text_change: return "text_change";
  }
  return "correctness";
}

std::string_view to_string(RelativeMode m) {
  switch (m) {
    case RelativeMode::absolute: return "absolute";
    case RelativeMode::difference: return "difference";
    case RelativeMode::pct_error_change: return "pct_error_change";
  }
  return "absolute";
}

bool requires_base(ComparisonMetric m) {
  return m == ComparisonMetric::top1_change || m == ComparisonMetric::kl_divergence ||
         m == ComparisonMetric::text_change;
}

double kl_divergence(const std::vector<double>& base, const std::vector<double>& model) {
  if (base.size() != model.size()) {
    throw Error(ErrorCode::InvalidArgument, {}, "probability vectors differ in length");
  }
  double zb = 0.0;
  double zm = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    zb += base[i] + kKlEpsilon;
    zm += model[i] + kKlEpsilon;
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double pb = (base[i] + kKlEpsilon) / zb;
    const double pm = (model[i] + kKlEpsilon) / zm;
    kl += pb * std::log(pb / pm);
  }
  return kl;
}

namespace {

std::vector<std::string> normalize_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::ispunct(c)) continue;
    if (std::isspace(c)) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    cur.push_back(static_cast<char>(std::tolower(c)));
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace

double text_f1(const std::string& prediction, const std::string& reference) {
  const auto pred = normalize_tokens(prediction);
  const auto ref = normalize_tokens(reference);
  if (pred.empty() || ref.empty()) return pred.empty() && ref.empty() ? 1.0 : 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : ref) ++counts[t];
  int common = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / pred.size();
  const double recall = static_cast<double>(common) / ref.size();
  return 2.0 * precision * recall / (precision + recall);
}

std::string default_base(const std::vector<std::string>& selection, const ModelStore& store) {
  if (selection.empty()) throw Error(ErrorCode::InvalidArgument, {}, "selection is empty");
  const std::string* best = nullptr;
  int best_depth = 0;
  for (const auto& id : selection) {
    const int d = store.depth(id);
    if (!best || d < best_depth || (d == best_depth && id < *best)) {
      best = &id;
      best_depth = d;
    }
  }
  return *best;
}

std::map<std::string, double> eval_metric(ComparisonMetric metric, const ModelOutputs& model,
                                          const ModelOutputs* base, const std::vector<InstanceRecord>& instances) {
  if (requires_base(metric) && !base) throw Error(ErrorCode::BaseRequired, std::string(to_string(metric)), "metric needs a base model");
  std::map<std::string, double> out;
  for (const auto& inst : instances) {
    const OutputRecord* m = model.find(inst.id);
    if (!m) throw Error(ErrorCode::MissingOutput, inst.id, "model " + model.model);
    const OutputRecord* b = nullptr;
    if (requires_base(metric)) {
      b = base->find(inst.id);
      if (!b) throw Error(ErrorCode::MissingOutput, inst.id, "base " + base->model);
    }
    auto need_label = [&](const OutputRecord* r) -> const std::string& {
      if (!r->label) throw Error(ErrorCode::MissingOutput, inst.id, "no label for model " + r->model);
      return *r->label;
    };
    auto need_probs = [&](const OutputRecord* r) -> const std::vector<double>& {
      if (!r->probs) throw Error(ErrorCode::MissingOutput, inst.id, "no probs for model " + r->model);
      return *r->probs;
    };
    auto need_text = [&](const OutputRecord* r) -> const std::string& {
      if (!r->text) throw Error(ErrorCode::MissingOutput, inst.id, "no text for model " + r->model);
      return *r->text;
    };
    double v = 0.0;
    switch (metric) {
      case ComparisonMetric::correctness:
        if (m->label) {
          v = *m->label == inst.truth ? 1.0 : 0.0;
        } else {
          v = normalize_tokens(need_text(m)) == normalize_tokens(inst.truth) ? 1.0 : 0.0;
        }
        break;
      case ComparisonMetric::confidence: {
        const auto& p = need_probs(m);
        v = *std::max_element(p.begin(), p.end());
        break;
      }
      case ComparisonMetric::top1_change: v = need_label(m) != need_label(b) ? 1.0 : 0.0; break;
      case ComparisonMetric::kl_divergence: v = kl_divergence(need_probs(b), need_probs(m)); break;
      case ComparisonMetric::text_f1: v = text_f1(need_text(m), inst.truth); break;
      case ComparisonMetric::text_change: v = need_text(m) != need_text(b) ? 1.0 : 0.0; break;
    }
    out[inst.id] = v;
  }
  return out;
}

std::vector<BehaviorRow> aggregate_rows(const MetricValues& values, const std::vector<InstanceRecord>& instances,
                                        GroupBy group_by, const std::string& base, RelativeMode relative_mode,
                                        ComparisonMetric metric) {
  if (relative_mode == RelativeMode::pct_error_change && metric != ComparisonMetric::correctness) {
    throw Error(ErrorCode::InvalidArgument, std::string(to_string(metric)),
                "pct_error_change is defined for correctness only");
  }
  if (!values.count(base)) throw Error(ErrorCode::UnknownModel, base, "base is not among the compared models");
  for (const auto& [model, per_instance] : values) {
    bool match = per_instance.size() == instances.size();
    for (std::size_t i = 0; match && i < instances.size(); ++i) match = per_instance.count(instances[i].id) > 0;
    if (!match) throw Error(ErrorCode::MismatchedInstanceSets, model, "instance ids differ from the base");
  }

  // Row membership in first-appearance order.
  std::vector<std::string> keys;
  std::map<std::string, std::vector<const InstanceRecord*>> members;
  for (const auto& inst : instances) {
    const std::string& key = group_by == GroupBy::instance ? inst.id : inst.group_key();
    auto [it, inserted] = members.try_emplace(key);
    if (inserted) keys.push_back(key);
    it->second.push_back(&inst);
  }

  std::vector<BehaviorRow> rows;
  rows.reserve(keys.size());
  for (const auto& key : keys) {
    const auto& insts = members[key];
    BehaviorRow row;
    row.key = key;
    row.count = static_cast<int>(insts.size());
    auto mean_of = [&](const std::map<std::string, double>& per_instance) {
      double sum = 0.0;
      for (const auto* inst : insts) sum += per_instance.at(inst->id);
      return sum / static_cast<double>(insts.size());
    };
    auto errors_of = [&](const std::map<std::string, double>& per_instance) {
      long e = 0;
      for (const auto* inst : insts) e += per_instance.at(inst->id) < 0.5 ? 1 : 0;
      return e;
    };
    const auto& base_values = values.at(base);
    const double base_mean = mean_of(base_values);
    const long base_errors = errors_of(base_values);
    for (const auto& [model, per_instance] : values) {
      BehaviorCell cell;
      cell.value = mean_of(per_instance);
      switch (relative_mode) {
        case RelativeMode::absolute: break;
        case RelativeMode::difference: cell.relative = model == base ? 0.0 : cell.value - base_mean; break;
        case RelativeMode::pct_error_change: {
          const long e = errors_of(per_instance);
          if (model == base || e == base_errors) {
            cell.relative = 0.0;
          } else if (base_errors == 0) {
            cell.relative_undefined = true;
            cell.new_errors = e;
          } else {
            cell.relative = 100.0 * static_cast<double>(e - base_errors) / static_cast<double>(base_errors);
          }
          break;
        }
      }
      row.per_model.emplace(model, cell);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<BehaviorRow> sort_rows(std::vector<BehaviorRow> rows, const std::string& model, SortMode mode,
                                   SortDirection direction) {
  for (const auto& r : rows) {
    if (!r.per_model.count(model)) throw Error(ErrorCode::UnknownModel, model, "not a compared model");
  }
  auto key = [&](const BehaviorRow& r) -> std::optional<double> {
    const auto& cell = r.per_model.at(model);
    if (mode == SortMode::absolute) return cell.value;
    return cell.relative;
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const BehaviorRow& a, const BehaviorRow& b) {
    const auto ka = key(a);
    const auto kb = key(b);
    if (!ka || !kb) return ka.has_value() && !kb.has_value();
    return direction == SortDirection::ascending ? *ka < *kb : *ka > *kb;
  });
  return rows;
}

Json to_json(const BehaviorRow& row) {
  Json per_model = Json::object();
  for (const auto& [model, cell] : row.per_model) {
    Json cj{{"value", cell.value}};
    cj["relative"] = cell.relative ? Json(*cell.relative) : Json(nullptr);
    if (cell.relative_undefined) {
      cj["relative_undefined"] = true;
      cj["new_errors"] = *cell.new_errors;
    }
    per_model[model] = std::move(cj);
  }
  return Json{{"key", row.key}, {"count", row.count}, {"per_model", std::move(per_model)}};
}

}  // namespace compbench
