#include "compbench/sim/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "compbench/errors.hpp"

namespace compbench::sim {

namespace {

void check_sparsity(double s) {
  if (!(s >= 0.0 && s < 1.0)) throw Error(ErrorCode::InvalidArgument, "sparsity", "must lie in [0, 1)");
}

struct WeightRef {
  std::size_t layer;
  std::size_t index;
  double magnitude;
};

void zero_smallest(DenseNet& net, std::vector<WeightRef> refs, double sparsity) {
  const auto k = static_cast<std::size_t>(std::floor(sparsity * static_cast<double>(refs.size()) + 1e-9));
  if (k == 0) return;
  std::sort(refs.begin(), refs.end(), [](const WeightRef& a, const WeightRef& b) {
    if (a.magnitude != b.magnitude) return a.magnitude < b.magnitude;
    if (a.layer != b.layer) return a.layer < b.layer;
    return a.index < b.index;
  });
  for (std::size_t i = 0; i < k; ++i) {
    auto& l = net.layers[refs[i].layer];
    l.weights[refs[i].index] = 0.0;
    l.pruned[refs[i].index] = 1;
  }
}

}  // namespace

DenseNet prune_global_magnitude(const DenseNet& net, double sparsity) {
  check_sparsity(sparsity);
  DenseNet out = net;
  std::vector<WeightRef> refs;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    for (std::size_t j = 0; j < net.layers[li].weights.size(); ++j) {
      refs.push_back({li, j, std::fabs(net.layers[li].weights[j])});
    }
  }
  zero_smallest(out, std::move(refs), sparsity);
  return out;
}

DenseNet prune_layer_magnitude(const DenseNet& net, const std::string& path, double sparsity) {
  check_sparsity(sparsity);
  DenseNet out = net;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    if (net.layers[li].weight_path() != path) continue;
    std::vector<WeightRef> refs;
    for (std::size_t j = 0; j < net.layers[li].weights.size(); ++j) {
      refs.push_back({li, j, std::fabs(net.layers[li].weights[j])});
    }
    zero_smallest(out, std::move(refs), sparsity);
    return out;
  }
  throw Error(ErrorCode::UnknownPath, path, "no such weight tensor");
}

double round_half_away_from_zero(double v) { return v < 0.0 ? -std::floor(-v + 0.5) : std::floor(v + 0.5); }

double quantize_tensor(std::vector<double>& w, int bits) {
  if (bits < 2 || bits > 16) throw Error(ErrorCode::InvalidArgument, "bits", "must lie in 2..16");
  double max_abs = 0.0;
  for (double v : w) max_abs = std::max(max_abs, std::fabs(v));
  if (max_abs == 0.0) return 0.0;
  const double qmax = static_cast<double>((1 << (bits - 1)) - 1);
  const double scale = max_abs / qmax;
  for (auto& v : w) {
    const double q = std::clamp(round_half_away_from_zero(v / scale), -qmax, qmax);
    v = q * scale;
  }
  return scale;
}

DenseNet quantize_uniform(const DenseNet& net, int bits) {
  DenseNet out = net;
  for (auto& l : out.layers) quantize_tensor(l.weights, bits);
  out.bits = bits;
  return out;
}

DenseNet restore_layers(const DenseNet& net, const DenseNet& base, const std::vector<std::string>& paths) {
  DenseNet out = net;
  for (const auto& path : paths) {
    std::vector<double>* dst = out.tensor(path);
    const std::vector<double>* src = base.tensor(path);
    if (!dst || !src) throw Error(ErrorCode::UnknownPath, path, "tensor missing from one of the networks");
    if (dst->size() != src->size()) throw Error(ErrorCode::ShapeMismatch, path, "tensor sizes differ");
    *dst = *src;
    for (std::size_t li = 0; li < out.layers.size(); ++li) {
      if (out.layers[li].weight_path() == path) out.layers[li].pruned = base.layers[li].pruned;
    }
  }
  // Once every tensor comes from the base, so does the storage precision.
  const auto all = out.tensor_paths();
  if (std::all_of(all.begin(), all.end(),
                  [&](const std::string& p) { return std::find(paths.begin(), paths.end(), p) != paths.end(); })) {
    out.bits = base.bits;
  }
  return out;
}

DenseNet calibrate_biases(const DenseNet& net, const DenseNet& base, const Batch& sample) {
  if (sample.rows == 0) throw Error(ErrorCode::InvalidArgument, "sample", "calibration sample is empty");
  if (net.layers.size() != base.layers.size()) throw Error(ErrorCode::ShapeMismatch, "layers", "networks have different depths");
  const std::vector<Batch> target = forward_pre(base, sample);
  DenseNet out = net;
  Batch h = sample;
  for (std::size_t li = 0; li < out.layers.size(); ++li) {
    auto& l = out.layers[li];
    DenseNet single;
    single.layers.push_back(l);
    Batch z = forward_pre(single, h).front();
    for (int o = 0; o < l.out; ++o) {
      double want = 0.0;
      double have = 0.0;
      for (int r = 0; r < z.rows; ++r) {
        want += target[li].data[static_cast<std::size_t>(r) * l.out + o];
        have += z.data[static_cast<std::size_t>(r) * l.out + o];
      }
      const double delta = (want - have) / z.rows;
      l.bias[o] += delta;
      for (int r = 0; r < z.rows; ++r) z.data[static_cast<std::size_t>(r) * l.out + o] += delta;
    }
    for (auto& v : z.data) v = v > 0.0 ? v : 0.0;
    h = std::move(z);
  }
  return out;
}

DenseNet finetune(const DenseNet& net, const SynthDataset& data, int steps, double lr) {
  if (steps < 0) throw Error(ErrorCode::InvalidArgument, "steps", "must be non-negative");
  if (steps == 0) return net;
  if (!(lr > 0.0)) throw Error(ErrorCode::InvalidArgument, "lr", "must be positive");
  DenseNet out = net;
  const Batch x = batch_of(data.train);
  const std::vector<int> y = labels_of(data.train);
  Gradients g;
  for (int s = 0; s < steps; ++s) {
    loss_and_gradient(out, x, y, &g);
    for (std::size_t li = 0; li < out.layers.size(); ++li) {
      auto& l = out.layers[li];
      for (std::size_t j = 0; j < l.weights.size(); ++j) {
        if (!l.pruned[j]) l.weights[j] -= lr * g.weights[li][j];
      }
      for (std::size_t j = 0; j < l.bias.size(); ++j) l.bias[j] -= lr * g.bias[li][j];
    }
  }
  out.bits = 32;
  return out;
}

std::size_t stored_weight_count(const DenseNet& net) {
  std::size_t n = 0;
  for (const auto& l : net.layers) n += static_cast<std::size_t>(std::count(l.pruned.begin(), l.pruned.end(), 0));
  return n;
}

std::size_t zero_weight_count(const DenseNet& net) {
  std::size_t n = 0;
  for (const auto& l : net.layers) n += static_cast<std::size_t>(std::count(l.weights.begin(), l.weights.end(), 0.0));
  return n;
}

SimMetrics evaluate_model(const DenseNet& net, const SynthDataset& data) {
  SimMetrics m;
  m.accuracy = accuracy(net, data.test);
  const auto total = static_cast<double>(net.weight_count());
  m.sparsity = total == 0.0 ? 0.0 : static_cast<double>(zero_weight_count(net)) / total;
  const auto stored = static_cast<double>(stored_weight_count(net));
  m.size_bytes = stored * net.bits / 8.0;
  m.latency = stored;
  return m;
}

}  // namespace compbench::sim
