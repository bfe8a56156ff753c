#include "compbench/sim/dataset.hpp"

#include <cmath>
#include <cstdio>

#include "compbench/errors.hpp"
#include "compbench/sim/rng.hpp"

namespace compbench::sim {

std::string class_name(int y) { return "class_" + std::to_string(y); }

std::vector<std::string> SynthDataset::class_names() const {
  std::vector<std::string> out;
  for (int c = 0; c < classes; ++c) out.push_back(class_name(c));
  return out;
}

bool SynthDataset::has_groups() const { return !train.empty() && !train.front().group.empty(); }

namespace {

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Rejection-samples `count` points of N(0, scale^2) per coordinate until all
// pairwise distances reach `min_distance`.
std::vector<std::vector<double>> draw_centers(Rng& rng, int count, int dim, double scale, double min_distance) {
  while (true) {
    std::vector<std::vector<double>> centers(count, std::vector<double>(dim));
    for (auto& c : centers) {
      for (auto& v : c) v = scale * rng.normal();
    }
    bool ok = true;
    for (int i = 0; ok && i < count; ++i) {
      for (int j = i + 1; ok && j < count; ++j) ok = distance(centers[i], centers[j]) >= min_distance;
    }
    if (ok) return centers;
  }
}

std::string sample_id(char prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%05zu", prefix, index);
  return buf;
}

}  // namespace

SynthDataset make_dataset(const DatasetConfig& cfg, std::uint64_t seed) {
  if (cfg.dim < 2 || cfg.classes < 2 || cfg.sigma <= 0.0 || cfg.train_per_class < 1 || cfg.test_per_class < 1 ||
      cfg.rare_fraction < 0.0 || cfg.rare_fraction >= 1.0 || cfg.center_scale <= 0.0 || cfg.rare_center_scale <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "dataset", "invalid dataset configuration");
  }
  Rng rng(seed);
  SynthDataset d;
  d.seed = seed;
  d.dim = cfg.dim;
  d.classes = cfg.classes;
  d.sigma = cfg.sigma;
  const double min_distance = 4.0 * cfg.sigma;
  const bool grouped = cfg.rare_fraction > 0.0;

  std::vector<std::vector<double>> rare_centers;
  std::vector<double> neutral(cfg.dim / 2, 0.0);
  if (!grouped) {
    d.centers = draw_centers(rng, cfg.classes, cfg.dim, cfg.center_scale * cfg.sigma, min_distance);
  } else {
    const int half = cfg.dim / 2;
    auto common = draw_centers(rng, cfg.classes, half, cfg.center_scale * cfg.sigma, min_distance);
    rare_centers = draw_centers(rng, cfg.classes, cfg.dim - half, cfg.rare_center_scale * cfg.sigma, min_distance);
    for (const auto& c : common) {
      for (int k = 0; k < half; ++k) neutral[k] += c[k] / cfg.classes;
    }
    for (const auto& c : common) {
      std::vector<double> full(cfg.dim, 0.0);
      std::copy(c.begin(), c.end(), full.begin());
      d.centers.push_back(std::move(full));
    }
  }

  auto draw = [&](int per_class, char prefix, std::vector<Sample>& out) {
    const int rare_per_class = grouped ? static_cast<int>(std::lround(per_class * cfg.rare_fraction)) : 0;
    for (int c = 0; c < cfg.classes; ++c) {
      for (int i = 0; i < per_class; ++i) {
        Sample s;
        s.y = c;
        s.x.resize(cfg.dim);
        const bool rare = i < rare_per_class;
        if (!grouped) {
          for (int k = 0; k < cfg.dim; ++k) s.x[k] = d.centers[c][k] + cfg.sigma * rng.normal();
        } else {
          const int half = cfg.dim / 2;
          s.group = rare ? "rare" : "common";
          for (int k = 0; k < half; ++k) {
            s.x[k] = (rare ? neutral[k] : d.centers[c][k]) + cfg.sigma * rng.normal();
          }
          for (int k = half; k < cfg.dim; ++k) {
            s.x[k] = (rare ? rare_centers[c][k - half] : 0.0) + cfg.sigma * rng.normal();
          }
        }
        out.push_back(std::move(s));
      }
    }
    rng.shuffle(out);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].id = sample_id(prefix, i);
  };
  draw(cfg.train_per_class, 'r', d.train);
  draw(cfg.test_per_class, 't', d.test);
  return d;
}

}  // namespace compbench::sim
