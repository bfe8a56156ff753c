#pragma once

#include <string>
#include <vector>

#include "compbench/sim/dataset.hpp"
#include "compbench/sim/network.hpp"

namespace compbench::sim {

// Zeroes the floor(s*N) smallest-magnitude weights across all layers (biases
// excluded); ties go to the lower (layer, flat index). Existing zeros take part
// in the ranking.
DenseNet prune_global_magnitude(const DenseNet& net, double sparsity);

// Same ranking restricted to one weight tensor, e.g. "fc2.weight".
DenseNet prune_layer_magnitude(const DenseNet& net, const std::string& path, double sparsity);

double round_half_away_from_zero(double v);

// Symmetric per-tensor grid: scale = max|w| / (2^(bits-1) - 1). Returns the scale
// (0 for an all-zero tensor, which is left untouched).
double quantize_tensor(std::vector<double>& w, int bits);

DenseNet quantize_uniform(const DenseNet& net, int bits);

// Copies the listed tensors (and their pruning masks) from `base`.
DenseNet restore_layers(const DenseNet& net, const DenseNet& base, const std::vector<std::string>& paths);

// Layer by layer, shifts biases so the mean pre-activation over `sample`
// matches the base network's, feeding corrected activations forward.
DenseNet calibrate_biases(const DenseNet& net, const DenseNet& base, const Batch& sample);

// Gradient descent on the train split with pruned positions frozen at zero.
// Weights leave the quantization grid, so storage goes back to 32 bits.
DenseNet finetune(const DenseNet& net, const SynthDataset& data, int steps, double lr);

struct SimMetrics {
  double accuracy = 0.0;
  double sparsity = 0.0;    // zero weights / all weights
  double size_bytes = 0.0;  // stored weights * bits / 8
  double latency = 0.0;     // multiplies per forward pass of one instance
};

// Stored weights are the unpruned positions; a weight that happens to round to
// zero under quantization still occupies storage.
std::size_t stored_weight_count(const DenseNet& net);
std::size_t zero_weight_count(const DenseNet& net);
SimMetrics evaluate_model(const DenseNet& net, const SynthDataset& data);

}  // namespace compbench::sim
