#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "compbench/json.hpp"
#include "compbench/store.hpp"

namespace compbench {

struct MetricHistogram {
  std::string metric;
  std::vector<double> edges;  // k + 1, strictly increasing
  std::vector<long> counts;   // k
  std::map<std::string, int> model_bins;
};

// Inclusive range filter over one metric.
struct MetricFilter {
  std::string metric;
  double low = -std::numeric_limits<double>::infinity();
  double high = std::numeric_limits<double>::infinity();
};

// Equal-width bins over [min, max] of the observed values; the maximum lands in
// the last bin. All-equal values collapse to a single bin [v, v + 1].
MetricHistogram metric_histogram(const ModelStore& store, const std::string& metric, int bins);

// Ids (document order) satisfying every filter; a model missing a filtered
// metric is disabled.
std::vector<std::string> apply_filters(const ModelStore& store, const std::vector<MetricFilter>& filters);

// Non-dominated models for the two metrics under their declared objectives,
// sorted by x ascending. Models missing either metric are not considered.
std::vector<std::string> pareto_front(const ModelStore& store, const std::string& x_metric,
                                      const std::string& y_metric);

Json to_json(const MetricHistogram& h);
MetricFilter filter_from_json(const Json& j);

}  // namespace compbench
