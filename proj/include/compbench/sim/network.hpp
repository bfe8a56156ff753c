#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "compbench/sim/dataset.hpp"

namespace compbench::sim {

struct DenseLayer {
  std::string name;
  int in = 0;
  int out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;
  std::vector<unsigned char> pruned;  // per weight; pruned positions are held at zero

  std::string weight_path() const { return name + ".weight"; }
  std::string bias_path() const { return name + ".bias"; }

  bool operator==(const DenseLayer&) const = default;
};

struct DenseNet {
  std::vector<DenseLayer> layers;
  int bits = 32;  // storage precision of the weights

  int input_dim() const { return layers.front().in; }
  int output_dim() const { return layers.back().out; }
  std::size_t weight_count() const;
  std::vector<std::string> tensor_paths() const;
  // Mutable access to a tensor by "<layer>.weight" or "<layer>.bias".
  std::vector<double>* tensor(const std::string& path);
  const std::vector<double>* tensor(const std::string& path) const;

  bool operator==(const DenseNet&) const = default;
};

// He-normal weights, zero biases. Layers are named fc1, fc2, ...
DenseNet init_mlp(const std::vector<int>& dims, std::uint64_t seed);

// Row-major batch of inputs.
struct Batch {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
};

Batch batch_of(const std::vector<Sample>& samples);
Batch batch_of(const std::vector<std::vector<double>>& rows);

// Pre-activations of every layer; ReLU between layers.
std::vector<Batch> forward_pre(const DenseNet& net, const Batch& x);
// Softmax probabilities of the last layer.
Batch predict_probs(const DenseNet& net, const Batch& x);

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;
};

// Mean softmax cross-entropy over the batch; fills `grad` when non-null.
double loss_and_gradient(const DenseNet& net, const Batch& x, const std::vector<int>& y, Gradients* grad);

double accuracy(const DenseNet& net, const std::vector<Sample>& samples);

struct TrainConfig {
  int epochs = 200;
  double lr = 0.1;
  std::vector<int> hidden = {32};
};

// Full-batch gradient descent on the train split. `loss_curve`, when given,
// receives the loss before each epoch followed by the final loss.
DenseNet train_mlp(const SynthDataset& data, const TrainConfig& cfg, std::uint64_t seed,
                   std::vector<double>* loss_curve = nullptr);

std::vector<int> labels_of(const std::vector<Sample>& samples);

}  // namespace compbench::sim
