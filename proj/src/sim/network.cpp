#include "compbench/sim/network.hpp"

#include <algorithm>
#include <cmath>

#include "compbench/errors.hpp"
#include "compbench/sim/rng.hpp"

namespace compbench::sim {

std::size_t DenseNet::weight_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size();
  return n;
}

std::vector<std::string> DenseNet::tensor_paths() const {
  std::vector<std::string> out;
  for (const auto& l : layers) {
    out.push_back(l.weight_path());
    out.push_back(l.bias_path());
  }
  return out;
}

std::vector<double>* DenseNet::tensor(const std::string& path) {
  for (auto& l : layers) {
    if (path == l.weight_path()) return &l.weights;
    if (path == l.bias_path()) return &l.bias;
  }
  return nullptr;
}

const std::vector<double>* DenseNet::tensor(const std::string& path) const {
  return const_cast<DenseNet*>(this)->tensor(path);
}

DenseNet init_mlp(const std::vector<int>& dims, std::uint64_t seed) {
  if (dims.size() < 2) throw Error(ErrorCode::DimensionMismatch, "dims", "need at least input and output sizes");
  for (int d : dims) {
    if (d < 1) throw Error(ErrorCode::DimensionMismatch, "dims", "sizes must be positive");
  }
  Rng rng(seed);
  DenseNet net;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    DenseLayer l;
    l.name = "fc" + std::to_string(i + 1);
    l.in = dims[i];
    l.out = dims[i + 1];
    const double std = std::sqrt(2.0 / l.in);
    l.weights.resize(static_cast<std::size_t>(l.in) * l.out);
    for (auto& w : l.weights) w = std * rng.normal();
    l.bias.assign(l.out, 0.0);
    l.pruned.assign(l.weights.size(), 0);
    net.layers.push_back(std::move(l));
  }
  return net;
}

Batch batch_of(const std::vector<Sample>& samples) {
  Batch b;
  b.rows = static_cast<int>(samples.size());
  b.cols = samples.empty() ? 0 : static_cast<int>(samples.front().x.size());
  b.data.reserve(static_cast<std::size_t>(b.rows) * b.cols);
  for (const auto& s : samples) b.data.insert(b.data.end(), s.x.begin(), s.x.end());
  return b;
}

Batch batch_of(const std::vector<std::vector<double>>& rows) {
  Batch b;
  b.rows = static_cast<int>(rows.size());
  b.cols = rows.empty() ? 0 : static_cast<int>(rows.front().size());
  for (const auto& r : rows) b.data.insert(b.data.end(), r.begin(), r.end());
  return b;
}

namespace {

// z = x W^T + b
Batch affine(const DenseLayer& l, const Batch& x) {
  if (x.cols != l.in) throw Error(ErrorCode::DimensionMismatch, l.name, "input width differs from layer fan-in");
  Batch z;
  z.rows = x.rows;
  z.cols = l.out;
  z.data.resize(static_cast<std::size_t>(z.rows) * z.cols);
  for (int r = 0; r < x.rows; ++r) {
    const double* xr = &x.data[static_cast<std::size_t>(r) * x.cols];
    double* zr = &z.data[static_cast<std::size_t>(r) * z.cols];
    for (int o = 0; o < l.out; ++o) {
      const double* w = &l.weights[static_cast<std::size_t>(o) * l.in];
      double s = l.bias[o];
      for (int i = 0; i < l.in; ++i) s += w[i] * xr[i];
      zr[o] = s;
    }
  }
  return z;
}

Batch relu(Batch z) {
  for (auto& v : z.data) v = v > 0.0 ? v : 0.0;
  return z;
}

void softmax_rows(Batch& z) {
  for (int r = 0; r < z.rows; ++r) {
    double* row = &z.data[static_cast<std::size_t>(r) * z.cols];
    const double m = *std::max_element(row, row + z.cols);
    double s = 0.0;
    for (int c = 0; c < z.cols; ++c) {
      row[c] = std::exp(row[c] - m);
      s += row[c];
    }
    for (int c = 0; c < z.cols; ++c) row[c] /= s;
  }
}

}  // namespace

std::vector<Batch> forward_pre(const DenseNet& net, const Batch& x) {
  std::vector<Batch> pre;
  const Batch* h = &x;
  Batch act;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    pre.push_back(affine(net.layers[i], *h));
    if (i + 1 < net.layers.size()) {
      act = relu(pre.back());
      h = &act;
    }
  }
  return pre;
}

Batch predict_probs(const DenseNet& net, const Batch& x) {
  Batch z = std::move(forward_pre(net, x).back());
  softmax_rows(z);
  return z;
}

double loss_and_gradient(const DenseNet& net, const Batch& x, const std::vector<int>& y, Gradients* grad) {
  if (static_cast<int>(y.size()) != x.rows) throw Error(ErrorCode::DimensionMismatch, "labels", "one label per row");
  if (x.rows == 0) throw Error(ErrorCode::InvalidArgument, "batch", "empty batch");
  const std::size_t L = net.layers.size();
  std::vector<Batch> acts;  // input to each layer
  std::vector<Batch> pre;
  acts.push_back(x);
  for (std::size_t i = 0; i < L; ++i) {
    pre.push_back(affine(net.layers[i], acts.back()));
    if (i + 1 < L) acts.push_back(relu(pre.back()));
  }
  Batch p = pre.back();
  softmax_rows(p);
  const int k = p.cols;
  double loss = 0.0;
  for (int r = 0; r < p.rows; ++r) {
    if (y[r] < 0 || y[r] >= k) throw Error(ErrorCode::DimensionMismatch, "labels", "label outside output range");
    loss -= std::log(std::max(p.data[static_cast<std::size_t>(r) * k + y[r]], 1e-300));
  }
  loss /= x.rows;
  if (!grad) return loss;

  grad->weights.assign(L, {});
  grad->bias.assign(L, {});
  // dz of the last layer: (p - onehot) / n
  Batch dz = p;
  for (int r = 0; r < p.rows; ++r) dz.data[static_cast<std::size_t>(r) * k + y[r]] -= 1.0;
  for (auto& v : dz.data) v /= x.rows;
  for (std::size_t li = L; li-- > 0;) {
    const DenseLayer& l = net.layers[li];
    const Batch& a = acts[li];
    auto& gw = grad->weights[li];
    auto& gb = grad->bias[li];
    gw.assign(l.weights.size(), 0.0);
    gb.assign(l.out, 0.0);
    for (int r = 0; r < dz.rows; ++r) {
      const double* dzr = &dz.data[static_cast<std::size_t>(r) * l.out];
      const double* ar = &a.data[static_cast<std::size_t>(r) * l.in];
      for (int o = 0; o < l.out; ++o) {
        const double g = dzr[o];
        if (g == 0.0) continue;
        gb[o] += g;
        double* gwo = &gw[static_cast<std::size_t>(o) * l.in];
        for (int i = 0; i < l.in; ++i) gwo[i] += g * ar[i];
      }
    }
    if (li == 0) break;
    Batch da;
    da.rows = dz.rows;
    da.cols = l.in;
    da.data.assign(static_cast<std::size_t>(da.rows) * da.cols, 0.0);
    for (int r = 0; r < dz.rows; ++r) {
      const double* dzr = &dz.data[static_cast<std::size_t>(r) * l.out];
      double* dar = &da.data[static_cast<std::size_t>(r) * l.in];
      for (int o = 0; o < l.out; ++o) {
        const double g = dzr[o];
        if (g == 0.0) continue;
        const double* w = &l.weights[static_cast<std::size_t>(o) * l.in];
        for (int i = 0; i < l.in; ++i) dar[i] += g * w[i];
      }
    }
    const Batch& z_prev = pre[li - 1];
    for (std::size_t j = 0; j < da.data.size(); ++j) {
      if (!(z_prev.data[j] > 0.0)) da.data[j] = 0.0;
    }
    dz = std::move(da);
  }
  return loss;
}

std::vector<int> labels_of(const std::vector<Sample>& samples) {
  std::vector<int> y;
  y.reserve(samples.size());
  for (const auto& s : samples) y.push_back(s.y);
  return y;
}

double accuracy(const DenseNet& net, const std::vector<Sample>& samples) {
  if (samples.empty()) return 0.0;
  const Batch p = predict_probs(net, batch_of(samples));
  int correct = 0;
  for (int r = 0; r < p.rows; ++r) {
    const double* row = &p.data[static_cast<std::size_t>(r) * p.cols];
    const int top = static_cast<int>(std::max_element(row, row + p.cols) - row);
    correct += top == samples[r].y ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

DenseNet train_mlp(const SynthDataset& data, const TrainConfig& cfg, std::uint64_t seed,
                   std::vector<double>* loss_curve) {
  if (cfg.epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs", "must be at least 1");
  if (!(cfg.lr > 0.0)) throw Error(ErrorCode::InvalidArgument, "lr", "must be positive");
  std::vector<int> dims{data.dim};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(data.classes);
  DenseNet net = init_mlp(dims, seed);
  const Batch x = batch_of(data.train);
  const std::vector<int> y = labels_of(data.train);
  Gradients g;
  for (int e = 0; e < cfg.epochs; ++e) {
    const double loss = loss_and_gradient(net, x, y, &g);
    if (loss_curve) loss_curve->push_back(loss);
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
      auto& l = net.layers[li];
      for (std::size_t j = 0; j < l.weights.size(); ++j) l.weights[j] -= cfg.lr * g.weights[li][j];
      for (std::size_t j = 0; j < l.bias.size(); ++j) l.bias[j] -= cfg.lr * g.bias[li][j];
    }
  }
  if (loss_curve) loss_curve->push_back(loss_and_gradient(net, x, y, nullptr));
  return net;
}

}  // namespace compbench::sim
