#pragma once

#include <optional>
#include <string>
#include <vector>

#include "compbench/json.hpp"

namespace compbench {

enum class TensorKind { weights, activations };

std::string_view to_string(TensorKind k);
TensorKind tensor_kind_from_string(const std::string& s);

// Counts are masses, so rebinned histograms keep fractional values.
struct Histogram {
  std::vector<double> edges;
  std::vector<double> counts;

  double total() const;
  std::size_t bins() const { return counts.size(); }
};

// Equal-width histogram over [min, max]; a constant sample gets the single bin [v, v+1].
Histogram make_histogram(const std::vector<double>& values, int bins);
Histogram histogram_from_json(const Json& j, const std::string& subject);
Json to_json(const Histogram& h);

struct TensorSummary {
  std::string model;
  std::string path;
  long param_count = 0;
  long zero_count = 0;
  Histogram hist;
  TensorKind kind = TensorKind::weights;

  double sparsity() const;
};

struct LayerRecord {
  std::string path;
  long param_count = 0;
  long zero_count = 0;
  Histogram weight_hist;
  std::optional<Histogram> activation_hist;
};

struct ModelLayers {
  std::string model;
  std::vector<LayerRecord> layers;
  std::vector<std::string> activation_sample;

  const LayerRecord* find(const std::string& path) const;
};

ModelLayers layers_from_json(const Json& j);
Json to_json(const ModelLayers& m);

std::optional<TensorSummary> summary_of(const ModelLayers& m, const std::string& path, TensorKind kind);

Histogram rebin(const Histogram& h, const std::vector<double>& target_edges);
TensorSummary rebin(const TensorSummary& s, const std::vector<double>& target_edges);

struct DiffBin {
  double unchanged = 0.0;
  double gained = 0.0;
  double lost = 0.0;
};

struct DiffHistogram {
  std::vector<double> edges;
  std::vector<DiffBin> bins;
  double change_score = 0.0;
};

inline constexpr int kDefaultDiffBins = 40;

// Identical edge lists are compared in place; otherwise both histograms are
// rebinned onto max(min_bins, bins of either) equal-width bins over the union range.
DiffHistogram diff_histogram(const TensorSummary& base, const TensorSummary& model, int min_bins = kDefaultDiffBins);
Json to_json(const DiffHistogram& d);

struct LayerCell {
  long param_count = 0;
  long zero_count = 0;
  std::optional<Histogram> weights;
  std::optional<Histogram> activations;
  std::optional<DiffHistogram> weight_diff;
  std::optional<DiffHistogram> activation_diff;

  double sparsity() const;
};

struct LayerTreeNode {
  std::string path;  // empty for the root
  std::string name;  // last path segment
  std::vector<LayerTreeNode> children;
  std::vector<std::pair<std::string, LayerCell>> per_model;  // compared-model order

  bool leaf() const { return children.empty(); }
  const LayerCell* cell(const std::string& model) const;
};

// Diffs are filled on leaves when `base` names one of the models.
LayerTreeNode build_layer_tree(const std::vector<ModelLayers>& models, const std::optional<std::string>& base);

enum class LayerRankKind { weights, activations, sparsity };
LayerRankKind layer_rank_kind_from_string(const std::string& s);

// Leaf layers by descending change, ties by path. The sparsity kind ranks by
// |sparsity(model) - sparsity(base)| and needs the base id.
std::vector<std::pair<std::string, double>> rank_layers(const LayerTreeNode& tree, const std::string& model,
                                                        LayerRankKind kind, const std::string& base = {});

Json to_json(const LayerTreeNode& node);

}  // namespace compbench
