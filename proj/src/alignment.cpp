#include <algorithm>
#include <set>

#include "compbench/errors.hpp"
#include "compbench/selection.hpp"

namespace compbench {

const std::vector<std::optional<Operation>>& AlignedSlots::row(const std::string& model) const {
  return per_model[model_index(model)];
}

std::size_t AlignedSlots::model_index(const std::string& model) const {
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i] == model) return i;
  }
  throw Error(ErrorCode::UnknownModel, model, "no such model");
}

namespace {

// Slot layout under construction. cells[m][s] is the position of model m's
// operation in slot s, or -1. Models are indexed in input order.
struct Grid {
  std::vector<std::string> names;  // one name per slot while merging
  std::vector<std::vector<int>> cells;
};

using Matching = std::vector<std::pair<int, int>>;  // (slot, path position)

// All maximum-length order-preserving matchings of equal names, in
// lexicographic (slot, position) order; the first one prefers the earliest
// slots.
std::vector<Matching> max_matchings(const std::vector<std::string>& slots, const std::vector<Operation>& path,
                                    std::size_t limit) {
  const int n = static_cast<int>(slots.size());
  const int m = static_cast<int>(path.size());
  std::vector<std::vector<int>> suffix(n + 1, std::vector<int>(m + 1, 0));
  for (int i = n - 1; i >= 0; --i) {
    for (int j = m - 1; j >= 0; --j) {
      suffix[i][j] = slots[i] == path[j].name ? 1 + suffix[i + 1][j + 1]
                                              : std::max(suffix[i + 1][j], suffix[i][j + 1]);
    }
  }

  std::vector<Matching> out;
  Matching current;
  auto walk = [&](auto&& self, int i, int j) -> void {
    if (out.size() >= limit) return;
    if (suffix[i][j] == 0) {
      out.push_back(current);
      return;
    }
    for (int a = i; a < n; ++a) {
      for (int b = j; b < m; ++b) {
        if (slots[a] != path[b].name || 1 + suffix[a + 1][b + 1] != suffix[i][j]) continue;
        current.emplace_back(a, b);
        self(self, a + 1, b + 1);
        current.pop_back();
        if (out.size() >= limit) return;
      }
    }
  };
  walk(walk, 0, 0);
  return out;
}

Grid merge_path(const Grid& grid, std::size_t model, const std::vector<Operation>& path, const Matching& matching) {
  Grid out;
  out.cells.assign(grid.cells.size(), {});
  auto push_existing = [&](int s) {
    out.names.push_back(grid.names[s]);
    for (std::size_t r = 0; r < grid.cells.size(); ++r) {
      out.cells[r].push_back(r == model ? -1 : grid.cells[r][s]);
    }
  };
  auto push_new = [&](int pos) {
    out.names.push_back(path[pos].name);
    for (std::size_t r = 0; r < grid.cells.size(); ++r) out.cells[r].push_back(r == model ? pos : -1);
  };

  int slot = 0;
  int pos = 0;
  auto fill_gap = [&](int slot_end, int pos_end) {
    for (; slot < slot_end; ++slot) push_existing(slot);
    for (; pos < pos_end; ++pos) push_new(pos);
  };
  for (const auto& [s, p] : matching) {
    fill_gap(s, p);
    push_existing(s);
    out.cells[model].back() = p;
    ++slot;
    ++pos;
  }
  fill_gap(static_cast<int>(grid.names.size()), static_cast<int>(path.size()));
  return out;
}

AlignedSlots to_aligned(const Grid& grid, const std::vector<LabeledPath>& paths) {
  AlignedSlots a;
  a.slot_count = static_cast<int>(grid.names.size());
  for (std::size_t m = 0; m < paths.size(); ++m) {
    a.models.push_back(paths[m].model);
    std::vector<std::optional<Operation>> row(a.slot_count);
    for (int s = 0; s < a.slot_count; ++s) {
      if (grid.cells[m][s] >= 0) row[s] = paths[m].ops[grid.cells[m][s]];
    }
    a.per_model.push_back(std::move(row));
  }
  return a;
}

std::vector<std::size_t> merge_order(const std::vector<LabeledPath>& paths) {
  std::vector<std::size_t> order(paths.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return paths[a].ops.size() > paths[b].ops.size(); });
  return order;
}

Grid seed_grid(const std::vector<LabeledPath>& paths, std::size_t seed) {
  Grid g;
  g.cells.assign(paths.size(), {});
  for (std::size_t p = 0; p < paths[seed].ops.size(); ++p) {
    g.names.push_back(paths[seed].ops[p].name);
    for (std::size_t r = 0; r < paths.size(); ++r) g.cells[r].push_back(r == seed ? static_cast<int>(p) : -1);
  }
  return g;
}

std::vector<Grid> progressive_alternatives(const std::vector<LabeledPath>& paths, std::size_t limit) {
  const auto order = merge_order(paths);
  std::vector<Grid> alts{seed_grid(paths, order.front())};
  for (std::size_t k = 1; k < order.size(); ++k) {
    const std::size_t model = order[k];
    std::vector<Grid> next;
    std::set<std::vector<std::vector<int>>> seen;
    for (const auto& g : alts) {
      for (const auto& matching : max_matchings(g.names, paths[model].ops, limit)) {
        Grid merged = merge_path(g, model, paths[model].ops, matching);
        if (seen.insert(merged.cells).second) next.push_back(std::move(merged));
        if (next.size() >= limit) break;
      }
      if (next.size() >= limit) break;
    }
    alts = std::move(next);
  }
  return alts;
}

// Variants of `a` where runs of adjacent slots without a shared model are
// fused into one slot. The unmodified alignment is not included.
void slot_fusions(const AlignedSlots& a, std::vector<AlignedSlots>& out, std::size_t limit) {
  const int n = a.slot_count;
  if (n < 2) return;
  auto occupied = [&](int s, std::size_t m) { return a.per_model[m][s].has_value(); };

  // block_start[s] = first slot of the block that slot s joins.
  std::vector<bool> fuse(n, false);  // fuse[s]: slot s joins the block of slot s-1
  auto emit = [&]() {
    AlignedSlots v;
    v.models = a.models;
    v.per_model.assign(a.models.size(), {});
    for (int s = 0; s < n; ++s) {
      if (!fuse[s]) {
        for (auto& row : v.per_model) row.emplace_back();
        ++v.slot_count;
      }
      for (std::size_t m = 0; m < a.models.size(); ++m) {
        if (occupied(s, m)) v.per_model[m].back() = a.per_model[m][s];
      }
    }
    out.push_back(std::move(v));
  };

  std::vector<bool> block(a.models.size(), false);
  auto walk = [&](auto&& self, int s, bool any) -> void {
    if (out.size() >= limit) return;
    if (s == n) {
      if (any) emit();
      return;
    }
    const auto saved = block;
    // start a new block at s
    fuse[s] = false;
    for (std::size_t m = 0; m < block.size(); ++m) block[m] = occupied(s, m);
    self(self, s + 1, any);
    block = saved;
    // join the current block
    if (s > 0) {
      bool clash = false;
      for (std::size_t m = 0; m < block.size(); ++m) clash = clash || (block[m] && occupied(s, m));
      if (!clash) {
        fuse[s] = true;
        for (std::size_t m = 0; m < block.size(); ++m) block[m] = block[m] || occupied(s, m);
        self(self, s + 1, true);
        block = saved;
        fuse[s] = false;
      }
    }
  };
  walk(walk, 0, false);
}

}  // namespace

AlignedSlots align_paths(const std::vector<LabeledPath>& paths) {
  if (paths.empty()) throw Error(ErrorCode::InvalidArgument, {}, "align_paths needs at least one path");
  return to_aligned(progressive_alternatives(paths, 1).front(), paths);
}

std::vector<AlignedSlots> alignment_alternatives(const std::vector<LabeledPath>& paths, std::size_t limit) {
  if (paths.empty()) throw Error(ErrorCode::InvalidArgument, {}, "align_paths needs at least one path");
  limit = std::max<std::size_t>(limit, 1);
  std::vector<AlignedSlots> out;
  for (const auto& g : progressive_alternatives(paths, limit)) out.push_back(to_aligned(g, paths));
  const std::size_t base_count = out.size();
  for (std::size_t i = 0; i < base_count && out.size() < limit; ++i) {
    const AlignedSlots base = out[i];
    slot_fusions(base, out, limit);
  }
  return out;
}

}  // namespace compbench
