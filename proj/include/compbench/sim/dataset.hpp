#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace compbench::sim {

struct Sample {
  std::string id;
  std::vector<double> x;
  int y = 0;
  std::string group;  // empty unless the dataset defines subgroups
};

struct SynthDataset {
  std::uint64_t seed = 0;
  int dim = 16;
  int classes = 4;
  double sigma = 0.5;
  std::vector<std::vector<double>> centers;
  std::vector<Sample> train;
  std::vector<Sample> test;

  std::vector<std::string> class_names() const;
  bool has_groups() const;
};

struct DatasetConfig {
  int dim = 16;
  int classes = 4;
  double sigma = 0.5;
  int train_per_class = 400;
  int test_per_class = 200;
  // Share of samples drawn from the rare subgroup (0 disables subgroups).
  double rare_fraction = 0.0;
  // Standard deviation of the center coordinates, in units of sigma.
  double center_scale = 1.0;
  double rare_center_scale = 6.0;
};

// Gaussian blobs around class centers at pairwise distance >= 4 sigma.
// With rare_fraction > 0 the first half of the features carries the class for
// "common" samples and the second half for "rare" ones, whose first half sits
// at the mean of the common centers.
SynthDataset make_dataset(const DatasetConfig& cfg, std::uint64_t seed);

std::string class_name(int y);

}  // namespace compbench::sim
