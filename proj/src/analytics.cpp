#include "compbench/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "compbench/errors.hpp"

namespace compbench {

MetricHistogram metric_histogram(const ModelStore& store, const std::string& metric, int bins) {
  store.metric(metric);
  if (bins < 1) throw Error(ErrorCode::InvalidArgument, metric, "bins must be positive");

  std::vector<std::pair<std::string, double>> values;
  for (const auto& n : store.nodes()) {
    if (auto v = n.metric(metric)) values.emplace_back(n.id, *v);
  }
  if (values.empty()) throw Error(ErrorCode::NoValues, metric, "no model reports this metric");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& [id, v] : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  MetricHistogram h;
  h.metric = metric;
  if (lo == hi) {
    h.edges = {lo, lo + 1.0};
    h.counts = {static_cast<long>(values.size())};
    for (const auto& [id, v] : values) h.model_bins[id] = 0;
    return h;
  }

  const double width = (hi - lo) / bins;
  h.edges.resize(bins + 1);
  for (int i = 0; i < bins; ++i) h.edges[i] = lo + width * i;
  h.edges[bins] = hi;
  h.counts.assign(bins, 0);
  for (const auto& [id, v] : values) {
    int b = std::clamp(static_cast<int>(std::floor((v - lo) / width)), 0, bins - 1);
    // floating point can put a value on the wrong side of an edge
    while (b > 0 && v < h.edges[b]) --b;
    while (b < bins - 1 && v >= h.edges[b + 1]) ++b;
    ++h.counts[b];
    h.model_bins[id] = b;
  }
  return h;
}

std::vector<std::string> apply_filters(const ModelStore& store, const std::vector<MetricFilter>& filters) {
  for (const auto& f : filters) {
    store.metric(f.metric);
    if (!(f.low <= f.high)) throw Error(ErrorCode::InvalidArgument, f.metric, "filter low must be <= high");
  }
  std::vector<std::string> enabled;
  for (const auto& n : store.nodes()) {
    bool ok = true;
    for (const auto& f : filters) {
      auto v = n.metric(f.metric);
      if (!v || *v < f.low || *v > f.high) {
        ok = false;
        break;
      }
    }
    if (ok) enabled.push_back(n.id);
  }
  return enabled;
}

std::vector<std::string> pareto_front(const ModelStore& store, const std::string& x_metric,
                                      const std::string& y_metric) {
  const auto& xs = store.metric(x_metric);
  const auto& ys = store.metric(y_metric);
  // Orient both axes so that larger is better.
  const double xsign = xs.objective == Objective::maximize ? 1.0 : -1.0;
  const double ysign = ys.objective == Objective::maximize ? 1.0 : -1.0;

  struct Point {
    std::size_t order;
    const ModelNode* node;
    double x;  // oriented
    double y;  // oriented
    double raw_x;
  };
  std::vector<Point> pts;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& n = store.nodes()[i];
    auto x = n.metric(x_metric);
    auto y = n.metric(y_metric);
    if (x && y) pts.push_back({i, &n, xsign * *x, ysign * *y, *x});
  }

  // Sweep from best x to worst. Within a group of equal x only the best y
  // survives; it is kept unless an earlier group (strictly better x) reached
  // at least the same y.
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    if (a.x != b.x) return a.x > b.x;
    if (a.y != b.y) return a.y > b.y;
    return a.order < b.order;
  });
  std::vector<Point> front;
  double best_prior_y = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size();) {
    std::size_t j = i;
    while (j < pts.size() && pts[j].x == pts[i].x) ++j;
    const double group_best = pts[i].y;
    if (group_best > best_prior_y) {
      for (std::size_t k = i; k < j && pts[k].y == group_best; ++k) front.push_back(pts[k]);
    }
    best_prior_y = std::max(best_prior_y, group_best);
    i = j;
  }

  std::sort(front.begin(), front.end(), [](const Point& a, const Point& b) {
    if (a.raw_x != b.raw_x) return a.raw_x < b.raw_x;
    return a.order < b.order;
  });
  std::vector<std::string> ids;
  for (const auto& p : front) ids.push_back(p.node->id);
  return ids;
}

Json to_json(const MetricHistogram& h) {
  Json bins = Json::object();
  for (const auto& [id, b] : h.model_bins) bins[id] = b;
  return Json{{"metric", h.metric}, {"edges", h.edges}, {"counts", h.counts}, {"model_bins", std::move(bins)}};
}

MetricFilter filter_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("metric") || !j["metric"].is_string()) {
    throw Error(ErrorCode::BadRequest, {}, "filter needs a string \"metric\"");
  }
  MetricFilter f;
  f.metric = j["metric"].get<std::string>();
  f.low = j.contains("low") && j["low"].is_number() ? j["low"].get<double>()
                                                     : -std::numeric_limits<double>::infinity();
  f.high = j.contains("high") && j["high"].is_number() ? j["high"].get<double>()
                                                        : std::numeric_limits<double>::infinity();
  return f;
}

}  // namespace compbench
