#include "compbench/selection.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include "compbench/errors.hpp"
#include "compbench/format.hpp"

namespace compbench {

std::string_view to_string(VariableKind kind) {
  switch (kind) {
    case VariableKind::param_value: return "param_value";
    case VariableKind::presence: return "presence";
    case VariableKind::op_type: return "op_type";
    case VariableKind::pipeline_stage: return "pipeline_stage";
  }
  return "param_value";
}

int complexity_weight(VariableKind kind) {
  switch (kind) {
    case VariableKind::param_value: return 1;
    case VariableKind::presence: return 2;
    case VariableKind::op_type: return 3;
    case VariableKind::pipeline_stage: return 2;
  }
  return 3;
}

bool Variable::operator==(const Variable& other) const {
  return kind == other.kind && slot == other.slot && slot_end == other.slot_end && param_key == other.param_key &&
         name == other.name && values == other.values && assignment == other.assignment;
}

VariableCost cost_of(const std::vector<Variable>& variables) {
  VariableCost c;
  c.count = static_cast<int>(variables.size());
  for (const auto& v : variables) c.complexity += v.weight();
  return c;
}

namespace {

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) return std::nullopt;
  return v;
}

// "absent" and "(none)" first, then numbers ascending, then everything else
// lexicographically.
std::vector<std::string> ordered_labels(const std::set<std::string>& labels) {
  std::vector<std::string> out(labels.begin(), labels.end());
  auto rank = [](const std::string& s) {
    if (s == kAbsentLabel) return 0;
    if (s == kUnsetLabel) return 1;
    return parse_number(s) ? 2 : 3;
  };
  std::stable_sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
    const int ra = rank(a);
    const int rb = rank(b);
    if (ra != rb) return ra < rb;
    if (ra == 2) return *parse_number(a) < *parse_number(b);
    return a < b;
  });
  return out;
}

void refresh_values(Variable& v) {
  std::set<std::string> labels;
  for (const auto& [m, label] : v.assignment) labels.insert(label);
  v.values = ordered_labels(labels);
}

std::string canonical_label(const Operation& op) {
  if (op.parameters.empty()) return op.name;
  auto params = op.parameters;
  std::sort(params.begin(), params.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string out = op.name + "(";
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i) out += ", ";
    out += params[i].first + "=" + format_scalar(params[i].second);
  }
  return out + ")";
}

void disambiguate_names(std::vector<Variable>& vars) {
  std::map<std::string, int> seen;
  for (const auto& v : vars) ++seen[v.name];
  for (auto& v : vars) {
    if (seen[v.name] > 1) v.name += "@" + std::to_string(v.slot);
  }
}

std::size_t choose(std::size_t n, std::size_t k, std::size_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  long double r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    r = r * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    if (r > static_cast<long double>(cap)) return cap + 1;
  }
  return static_cast<std::size_t>(std::llround(r));
}

// Candidate labels interned per model so partitions can be compared cheaply.
struct LabelTable {
  std::vector<std::vector<int>> ids;  // [candidate][model]
  std::size_t models = 0;

  LabelTable(const std::vector<Variable>& cands, const std::vector<std::string>& model_ids) : models(model_ids.size()) {
    for (const auto& c : cands) {
      std::map<std::string, int> intern;
      std::vector<int> row;
      row.reserve(model_ids.size());
      for (const auto& m : model_ids) {
        auto it = c.assignment.find(m);
        const std::string label = it == c.assignment.end() ? std::string(kAbsentLabel) : it->second;
        row.push_back(intern.emplace(label, static_cast<int>(intern.size())).first->second);
      }
      ids.push_back(std::move(row));
    }
  }

  std::size_t classes(const std::vector<std::size_t>& chosen) const {
    std::set<std::vector<int>> keys;
    std::vector<int> key(chosen.size());
    for (std::size_t m = 0; m < models; ++m) {
      for (std::size_t i = 0; i < chosen.size(); ++i) key[i] = ids[chosen[i]][m];
      keys.insert(key);
    }
    return keys.size();
  }
};

struct SearchOutcome {
  std::vector<std::size_t> chosen;
  VariableCost cost;
  bool found = false;
};

SearchOutcome greedy_cover(const LabelTable& table, const std::vector<Variable>& cands, std::size_t target) {
  SearchOutcome out;
  std::vector<std::size_t> chosen;
  while (table.classes(chosen) < target) {
    std::size_t best = cands.size();
    std::size_t best_classes = 0;
    for (std::size_t c = 0; c < cands.size(); ++c) {
      if (std::find(chosen.begin(), chosen.end(), c) != chosen.end()) continue;
      auto trial = chosen;
      trial.push_back(c);
      const std::size_t k = table.classes(trial);
      if (k > best_classes || (k == best_classes && best < cands.size() && cands[c].weight() < cands[best].weight())) {
        best = c;
        best_classes = k;
      }
    }
    chosen.push_back(best);
  }
  // drop members that turned out redundant, heaviest first
  std::vector<std::size_t> by_weight = chosen;
  std::stable_sort(by_weight.begin(), by_weight.end(),
                   [&](std::size_t a, std::size_t b) { return cands[a].weight() > cands[b].weight(); });
  for (std::size_t c : by_weight) {
    auto trial = chosen;
    trial.erase(std::find(trial.begin(), trial.end(), c));
    if (table.classes(trial) == target) chosen = std::move(trial);
  }
  std::sort(chosen.begin(), chosen.end());
  out.chosen = chosen;
  out.found = true;
  out.cost.count = static_cast<int>(chosen.size());
  for (std::size_t c : chosen) out.cost.complexity += cands[c].weight();
  return out;
}

// Cheapest subset of `cands` whose labels determine all candidate labels.
// Only subsets of at most `max_count` variables are considered.
SearchOutcome min_explaining_subset(const std::vector<Variable>& cands, const std::vector<std::string>& models,
                                    int max_count, std::size_t max_subsets) {
  SearchOutcome out;
  const LabelTable table(cands, models);
  std::vector<std::size_t> all(cands.size());
  std::iota(all.begin(), all.end(), 0);
  const std::size_t target = table.classes(all);
  if (target <= 1) {
    out.found = true;
    return out;
  }
  const std::size_t n = cands.size();
  for (std::size_t k = 1; k <= n && static_cast<int>(k) <= max_count; ++k) {
    if (choose(n, k, max_subsets) > max_subsets) return greedy_cover(table, cands, target);
    std::vector<std::size_t> combo(k);
    std::iota(combo.begin(), combo.end(), 0);
    while (true) {
      if (table.classes(combo) == target) {
        int complexity = 0;
        for (std::size_t c : combo) complexity += cands[c].weight();
        if (!out.found || complexity < out.cost.complexity) {
          out.found = true;
          out.chosen = combo;
          out.cost = {static_cast<int>(k), complexity};
        }
      }
      // next combination in lexicographic order
      std::size_t i = k;
      while (i > 0 && combo[i - 1] == n - k + i - 1) --i;
      if (i == 0) break;
      ++combo[i - 1];
      for (std::size_t j = i; j < k; ++j) combo[j] = combo[j - 1] + 1;
    }
    if (out.found) return out;
  }
  return out;
}

}  // namespace

std::vector<Variable> candidate_variables(const AlignedSlots& aligned) {
  std::vector<Variable> out;
  const auto& models = aligned.models;
  for (int s = 0; s < aligned.slot_count; ++s) {
    std::vector<std::size_t> present;
    for (std::size_t m = 0; m < models.size(); ++m) {
      if (aligned.per_model[m][s]) present.push_back(m);
    }
    if (present.empty()) continue;
    const bool some_absent = present.size() < models.size();

    std::set<std::string> names;
    for (std::size_t m : present) names.insert(aligned.per_model[m][s]->name);
    std::string joined;
    for (const auto& n : names) joined += (joined.empty() ? "" : "|") + n;

    if (some_absent) {
      Variable v;
      v.kind = VariableKind::presence;
      v.slot = v.slot_end = s;
      v.name = joined;
      for (std::size_t m = 0; m < models.size(); ++m) {
        v.assignment[models[m]] = aligned.per_model[m][s] ? "true" : "false";
      }
      refresh_values(v);
      out.push_back(std::move(v));
    }

    if (names.size() == 1) {
      std::set<std::string> keys;
      for (std::size_t m : present) {
        for (const auto& [k, val] : aligned.per_model[m][s]->parameters) keys.insert(k);
      }
      for (const auto& key : keys) {
        Variable v;
        v.kind = VariableKind::param_value;
        v.slot = v.slot_end = s;
        v.param_key = key;
        v.name = joined + "." + key;
        std::set<std::string> present_labels;
        for (std::size_t m = 0; m < models.size(); ++m) {
          const auto& op = aligned.per_model[m][s];
          if (!op) {
            v.assignment[models[m]] = kAbsentLabel;
            continue;
          }
          const Scalar* p = op->param(key);
          std::string label = p ? format_scalar(*p) : std::string(kUnsetLabel);
          present_labels.insert(label);
          v.assignment[models[m]] = std::move(label);
        }
        if (present_labels.size() < 2) continue;
        refresh_values(v);
        out.push_back(std::move(v));
      }
    } else {
      Variable v;
      v.kind = VariableKind::op_type;
      v.slot = v.slot_end = s;
      v.name = "operation";
      for (std::size_t m = 0; m < models.size(); ++m) {
        const auto& op = aligned.per_model[m][s];
        v.assignment[models[m]] = op ? canonical_label(*op) : std::string(kAbsentLabel);
      }
      refresh_values(v);
      out.push_back(std::move(v));
    }
  }
  disambiguate_names(out);
  return out;
}

bool explains(const std::vector<Variable>& chosen, const std::vector<Variable>& candidates,
              const std::vector<std::string>& models) {
  std::vector<Variable> all = chosen;
  all.insert(all.end(), candidates.begin(), candidates.end());
  const LabelTable table(all, models);
  std::vector<std::size_t> first(chosen.size());
  std::iota(first.begin(), first.end(), 0);
  std::vector<std::size_t> every(all.size());
  std::iota(every.begin(), every.end(), 0);
  return table.classes(first) == table.classes(every);
}

namespace {

std::vector<std::string> normalized_selection(const ModelStore& store, const std::vector<std::string>& selection) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& id : selection) {
    store.node(id);
    if (seen.insert(id).second) out.push_back(id);
  }
  return out;
}

}  // namespace

InferenceResult infer_variables(const ModelStore& store, const std::vector<std::string>& selection,
                                const InferenceOptions& options) {
  const auto models = normalized_selection(store, selection);
  if (models.empty()) throw Error(ErrorCode::InvalidArgument, {}, "selection is empty");

  std::vector<LabeledPath> paths;
  for (const auto& id : models) paths.push_back({id, op_path(store, id)});

  InferenceResult best;
  bool have_best = false;
  VariableCost best_cost;
  const auto alternatives = alignment_alternatives(paths, options.max_alternatives);
  best.alternatives_examined = alternatives.size();
  for (const auto& alignment : alternatives) {
    const auto cands = candidate_variables(alignment);
    const int bound = have_best ? best_cost.count : static_cast<int>(cands.size());
    const auto outcome = min_explaining_subset(cands, models, bound, options.max_subsets_per_size);
    if (!outcome.found) continue;
    if (!have_best || outcome.cost < best_cost) {
      have_best = true;
      best_cost = outcome.cost;
      best.alignment = alignment;
      best.variables.clear();
      for (std::size_t c : outcome.chosen) best.variables.push_back(cands[c]);
      if (best_cost.count == 0) break;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Simplification
// ---------------------------------------------------------------------------

namespace {

double round_label_value(double v) { return std::round(v * 1e12) / 1e12; }

std::string combine_sparsity(const std::vector<Scalar>& values) {
  double keep = 1.0;
  for (const auto& v : values) {
    double s = 0.0;
    if (const auto* d = std::get_if<double>(&v)) {
      s = *d;
    } else if (const auto* str = std::get_if<std::string>(&v)) {
      s = parse_number(*str).value_or(0.0);
    }
    keep *= 1.0 - s;
  }
  return format_number(round_label_value(1.0 - keep));
}

std::string concatenate_labels(const std::vector<Scalar>& values) {
  std::string out;
  for (const auto& v : values) out += (out.empty() ? "" : "+") + format_scalar(v);
  return out;
}

// Presence variable A and a variable B on the same models where B is "absent"
// exactly when A is false: B alone carries A's information.
bool conditional_merge(std::vector<Variable>& vars, const std::vector<std::string>& models) {
  for (std::size_t a = 0; a < vars.size(); ++a) {
    if (vars[a].kind != VariableKind::presence) continue;
    for (std::size_t b = 0; b < vars.size(); ++b) {
      if (a == b || vars[b].kind == VariableKind::presence) continue;
      bool conditional = true;
      for (const auto& m : models) {
        auto ai = vars[a].assignment.find(m);
        auto bi = vars[b].assignment.find(m);
        const bool a_true = ai != vars[a].assignment.end() && ai->second == "true";
        const bool b_defined = bi != vars[b].assignment.end() && bi->second != kAbsentLabel;
        if (a_true != b_defined) {
          conditional = false;
          break;
        }
      }
      if (!conditional) continue;
      Variable merged = vars[b];
      for (const auto& m : models) {
        if (vars[a].assignment.at(m) != "true") merged.assignment[m] = kAbsentLabel;
      }
      refresh_values(merged);
      const std::size_t keep = std::min(a, b);
      const std::size_t drop = std::max(a, b);
      vars[keep] = std::move(merged);
      vars.erase(vars.begin() + static_cast<std::ptrdiff_t>(drop));
      return true;
    }
  }
  return false;
}

// Consecutive slots applying the same operation with a combinable parameter
// fold into one variable holding the combined parameter.
bool accumulate_merge(std::vector<Variable>& vars, const AlignedSlots& aligned, const SimplifyOptions& options) {
  const auto& models = aligned.models;
  auto slot_name = [&](int s) -> std::optional<std::string> {
    std::optional<std::string> name;
    for (const auto& row : aligned.per_model) {
      if (!row[s]) continue;
      if (name && *name != row[s]->name) return std::nullopt;
      name = row[s]->name;
    }
    return name;
  };
  for (const auto& [key, combiner] : options.combinable) {
    auto slot_has_key = [&](int s) {
      for (const auto& row : aligned.per_model) {
        if (row[s] && !row[s]->param(key)) return false;
      }
      return true;
    };
    int s = 0;
    while (s < aligned.slot_count) {
      const auto name = slot_name(s);
      if (!name || !slot_has_key(s)) {
        ++s;
        continue;
      }
      int t = s;
      while (t + 1 < aligned.slot_count && slot_name(t + 1) == name && slot_has_key(t + 1)) ++t;
      if (t > s) {
        std::vector<std::size_t> touching;
        for (std::size_t i = 0; i < vars.size(); ++i) {
          const auto& v = vars[i];
          const bool inside = v.slot >= s && v.slot_end <= t;
          const bool folds = v.kind == VariableKind::presence ||
                             (v.kind == VariableKind::param_value && v.param_key == key);
          if (inside && folds) touching.push_back(i);
        }
        if (touching.size() >= 2) {
          Variable folded;
          folded.kind = VariableKind::param_value;
          folded.slot = s;
          folded.slot_end = t;
          folded.param_key = key;
          folded.name = *name + "." + key;
          for (std::size_t m = 0; m < models.size(); ++m) {
            std::vector<Scalar> values;
            for (int k = s; k <= t; ++k) {
              if (const auto& op = aligned.per_model[m][k]) values.push_back(*op->param(key));
            }
            folded.assignment[models[m]] = values.empty() ? std::string(kAbsentLabel) : combiner(values);
          }
          refresh_values(folded);
          if (folded.values.size() >= 2) {
            const std::size_t at = touching.front();
            for (auto it = touching.rbegin(); it != touching.rend(); ++it) {
              vars.erase(vars.begin() + static_cast<std::ptrdiff_t>(*it));
            }
            vars.insert(vars.begin() + static_cast<std::ptrdiff_t>(at), std::move(folded));
            return true;
          }
        }
      }
      s = t + 1;
    }
  }
  return false;
}

// Presence variables whose present slots form a prefix for every model
// collapse into one ordinal stage variable.
bool cumulative_merge(std::vector<Variable>& vars, const AlignedSlots& aligned) {
  const auto& models = aligned.models;
  std::vector<std::size_t> presence;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].kind == VariableKind::presence && vars[i].slot == vars[i].slot_end) presence.push_back(i);
  }
  std::sort(presence.begin(), presence.end(), [&](std::size_t a, std::size_t b) { return vars[a].slot < vars[b].slot; });
  const std::size_t p = std::min<std::size_t>(presence.size(), 12);
  if (p < 2) return false;

  // largest subsets first, then lexicographically smallest mask
  std::vector<unsigned> masks;
  for (unsigned mask = 1; mask < (1u << p); ++mask) {
    if (__builtin_popcount(mask) >= 2) masks.push_back(mask);
  }
  std::stable_sort(masks.begin(), masks.end(),
                   [](unsigned a, unsigned b) { return __builtin_popcount(a) > __builtin_popcount(b); });

  for (unsigned mask : masks) {
    std::vector<std::size_t> subset;
    for (std::size_t i = 0; i < p; ++i) {
      if (mask & (1u << i)) subset.push_back(presence[i]);
    }
    std::vector<int> stage(models.size(), 0);
    bool chain = true;
    for (std::size_t m = 0; m < models.size() && chain; ++m) {
      bool gap = false;
      for (std::size_t v : subset) {
        const bool present = vars[v].assignment.at(models[m]) == "true";
        if (present && gap) chain = false;
        if (present) ++stage[m];
        if (!present) gap = true;
      }
    }
    if (!chain) continue;

    // stage labels: the operation reached at each stage
    const std::size_t stages = subset.size() + 1;
    std::vector<std::string> labels(stages);
    const int first_slot = vars[subset.front()].slot;
    std::optional<std::string> before;
    bool before_consistent = true;
    for (std::size_t m = 0; m < models.size(); ++m) {
      if (stage[m] != 0) continue;
      std::string last = "root";
      for (int s = 0; s < first_slot; ++s) {
        if (const auto& op = aligned.per_model[m][s]) last = op->name;
      }
      if (before && *before != last) before_consistent = false;
      before = last;
    }
    labels[0] = before && before_consistent ? *before : "base";
    for (std::size_t j = 1; j < stages; ++j) {
      const int slot = vars[subset[j - 1]].slot;
      for (const auto& row : aligned.per_model) {
        if (row[slot]) {
          labels[j] = row[slot]->name;
          break;
        }
      }
    }
    std::map<std::string, int> uses;
    for (const auto& l : labels) ++uses[l];
    for (std::size_t j = 0; j < stages; ++j) {
      if (uses[labels[j]] > 1) labels[j] += "@" + std::to_string(j);
    }

    Variable merged;
    merged.kind = VariableKind::pipeline_stage;
    merged.slot = first_slot;
    merged.slot_end = vars[subset.back()].slot;
    merged.name = "stage";
    std::vector<bool> used(stages, false);
    for (std::size_t m = 0; m < models.size(); ++m) {
      merged.assignment[models[m]] = labels[stage[m]];
      used[stage[m]] = true;
    }
    for (std::size_t j = 0; j < stages; ++j) {
      if (used[j]) merged.values.push_back(labels[j]);
    }

    std::vector<std::size_t> drop = subset;
    std::sort(drop.begin(), drop.end());
    const std::size_t at = drop.front();
    for (auto it = drop.rbegin(); it != drop.rend(); ++it) vars.erase(vars.begin() + static_cast<std::ptrdiff_t>(*it));
    vars.insert(vars.begin() + static_cast<std::ptrdiff_t>(at), std::move(merged));
    return true;
  }
  return false;
}

}  // namespace

SimplifyOptions SimplifyOptions::defaults() {
  SimplifyOptions o;
  o.combinable["sparsity"] = combine_sparsity;
  return o;
}

SimplifyOptions& SimplifyOptions::with_concatenated(const std::string& key) {
  combinable[key] = concatenate_labels;
  return *this;
}

std::vector<Variable> simplify_variables(std::vector<Variable> variables, const AlignedSlots& aligned,
                                         const SimplifyOptions& options) {
  bool changed = true;
  while (changed) {
    changed = conditional_merge(variables, aligned.models);
    if (changed) continue;
    if (variables.size() <= 2) break;
    // Accumulation runs before the stage merge: repeated applications of one
    // operation would otherwise produce indistinguishable stage labels.
    changed = accumulate_merge(variables, aligned, options) || cumulative_merge(variables, aligned);
  }
  disambiguate_names(variables);
  return variables;
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

namespace {

std::size_t value_index(const Variable& v, const std::string& label) {
  auto it = std::find(v.values.begin(), v.values.end(), label);
  return static_cast<std::size_t>(it - v.values.begin());
}

Variable restricted(const Variable& v, const std::vector<std::string>& members) {
  Variable out = v;
  out.assignment.clear();
  for (const auto& m : members) out.assignment[m] = v.assignment.at(m);
  std::vector<std::string> kept;
  for (const auto& label : v.values) {
    for (const auto& [m, l] : out.assignment) {
      if (l == label) {
        kept.push_back(label);
        break;
      }
    }
  }
  out.values = std::move(kept);
  return out;
}

}  // namespace

ComparisonResult build_comparison(const ModelStore& store, const std::vector<std::string>& selection,
                                  const std::string& metric, const InferenceOptions& inference,
                                  const SimplifyOptions& simplify) {
  store.metric(metric);
  const auto models = normalized_selection(store, selection);
  if (models.empty()) throw Error(ErrorCode::InvalidArgument, {}, "selection is empty");

  const auto inferred = infer_variables(store, models, inference);
  ComparisonResult result;
  result.variables = simplify_variables(inferred.variables, inferred.alignment, simplify);
  const auto& vars = result.variables;

  if (vars.size() <= 2) {
    ChartSpec chart;
    chart.metric = metric;
    if (vars.size() == 1) {
      chart.x_variable = vars[0];
    } else if (vars.size() == 2) {
      const bool swap = vars[1].values.size() > vars[0].values.size() ||
                        (vars[1].values.size() == vars[0].values.size() && vars[1].weight() < vars[0].weight());
      chart.x_variable = vars[swap ? 1 : 0];
      chart.color_variable = vars[swap ? 0 : 1];
    }
    std::vector<std::pair<std::pair<std::size_t, std::size_t>, std::size_t>> order;
    for (std::size_t i = 0; i < models.size(); ++i) {
      auto value = store.node(models[i]).metric(metric);
      if (!value) continue;
      ChartBar bar;
      bar.model = models[i];
      bar.value = *value;
      bar.x_value = chart.x_variable ? chart.x_variable->assignment.at(models[i]) : models[i];
      if (chart.color_variable) bar.color_value = chart.color_variable->assignment.at(models[i]);
      const std::size_t xi = chart.x_variable ? value_index(*chart.x_variable, bar.x_value) : i;
      const std::size_t ci = chart.color_variable ? value_index(*chart.color_variable, *bar.color_value) : 0;
      order.push_back({{xi, ci}, chart.bars.size()});
      chart.bars.push_back(std::move(bar));
    }
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<ChartBar> sorted;
    for (const auto& [key, idx] : order) sorted.push_back(chart.bars[idx]);
    chart.bars = std::move(sorted);
    result.chart = std::move(chart);
    return result;
  }

  std::set<std::vector<std::string>> emitted;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    for (std::size_t j = i + 1; j < vars.size(); ++j) {
      std::map<std::vector<std::string>, std::vector<std::string>> groups;
      std::vector<std::vector<std::string>> key_order;
      for (const auto& m : models) {
        std::vector<std::string> key;
        for (std::size_t k = 0; k < vars.size(); ++k) {
          if (k != i && k != j) key.push_back(vars[k].assignment.at(m));
        }
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) key_order.push_back(key);
        it->second.push_back(m);
      }
      for (const auto& key : key_order) {
        const auto& members = groups[key];
        if (members.size() < 2) continue;
        auto sorted_members = members;
        std::sort(sorted_members.begin(), sorted_members.end());
        if (!emitted.insert(sorted_members).second) continue;
        RefinementGroup g;
        std::size_t ki = 0;
        for (std::size_t k = 0; k < vars.size(); ++k) {
          if (k == i || k == j) continue;
          g.fixed.emplace_back(vars[k].name, key[ki++]);
        }
        g.free = {restricted(vars[i], members), restricted(vars[j], members)};
        g.member_ids = members;
        result.refinement.push_back(std::move(g));
      }
    }
  }
  return result;
}

Json to_json(const Variable& v) {
  Json assignment = Json::object();
  for (const auto& [m, label] : v.assignment) assignment[m] = label;
  return Json{{"kind", to_string(v.kind)},
              {"name", v.name},
              {"slot", v.slot},
              {"slot_end", v.slot_end},
              {"param_key", v.param_key ? Json(*v.param_key) : Json(nullptr)},
              {"values", v.values},
              {"assignment", std::move(assignment)}};
}

Json to_json(const AlignedSlots& a) {
  Json per_model = Json::object();
  for (std::size_t m = 0; m < a.models.size(); ++m) {
    Json row = Json::array();
    for (const auto& op : a.per_model[m]) row.push_back(op ? to_json(*op) : Json(nullptr));
    per_model[a.models[m]] = std::move(row);
  }
  return Json{{"slot_count", a.slot_count}, {"per_model", std::move(per_model)}};
}

Json to_json(const ComparisonResult& r) {
  Json vars = Json::array();
  for (const auto& v : r.variables) vars.push_back(to_json(v));
  Json out{{"result", r.chart ? "chart" : "refinement"}, {"variables", std::move(vars)}};
  if (r.chart) {
    Json bars = Json::array();
    for (const auto& b : r.chart->bars) {
      bars.push_back(Json{{"x", b.x_value},
                          {"color", b.color_value ? Json(*b.color_value) : Json(nullptr)},
                          {"model", b.model},
                          {"value", b.value}});
    }
    out["chart"] = Json{{"x_variable", r.chart->x_variable ? to_json(*r.chart->x_variable) : Json(nullptr)},
                        {"color_variable", r.chart->color_variable ? to_json(*r.chart->color_variable) : Json(nullptr)},
                        {"metric", r.chart->metric},
                        {"bars", std::move(bars)}};
  } else {
    out["chart"] = nullptr;
  }
  Json groups = Json::array();
  for (const auto& g : r.refinement) {
    Json fixed = Json::object();
    for (const auto& [name, value] : g.fixed) fixed[name] = value;
    Json free = Json::array();
    for (const auto& v : g.free) free.push_back(to_json(v));
    groups.push_back(Json{{"fixed", std::move(fixed)}, {"free", std::move(free)}, {"member_ids", g.member_ids}});
  }
  out["refinement"] = std::move(groups);
  return out;
}

}  // namespace compbench
