#include "mdd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mdd {

double gini(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double total = 0.0;
  for (double v : values) {
    if (v < 0.0 || !std::isfinite(v)) throw std::invalid_argument("gini: values must be >= 0");
    total += v;
  }
  if (total == 0.0) return 0.0;
  // Sorted form of the pairwise sum: sum_i (2i - n + 1) x_(i).
  std::vector<double> x(values.begin(), values.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double weighted = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) weighted += (2.0 * static_cast<double>(i) - n + 1.0) * x[i];
  return weighted / (n * total);
}

std::vector<double> depot_load(const EpisodeTrace& trace, int num_depots) {
  std::vector<double> load(static_cast<std::size_t>(num_depots), 0.0);
  for (const auto& row : trace.rows) {
    load.at(static_cast<std::size_t>(row.plan.start_depot)) += row.plan.parcel_mass;
  }
  return load;
}

double early_arrival(const WorldContext& ctx, const EpisodeTrace& trace) {
  double sum = 0.0;
  std::size_t count = 0;
  const double wh = ctx.config.window_hours();
  for (std::size_t i = 0; i < trace.delivered_window.size(); ++i) {
    const int t = trace.delivered_window[i];
    if (t == 0) continue;
    sum += std::max(0, ctx.requests[i].demand_window - t) * wh;
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

namespace {

std::vector<double> min_max(std::span<const double> v) {
  std::vector<double> out(v.size(), 0.0);
  if (v.empty()) return out;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double span = *hi - *lo;
  if (span <= 0.0) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / span;
  return out;
}

}  // namespace

std::vector<double> combined_cost(std::span<const double> mean_energy,
                                  std::span<const double> avg_delay) {
  if (mean_energy.size() != avg_delay.size()) {
    throw std::invalid_argument("combined_cost: component lengths differ");
  }
  auto e = min_max(mean_energy);
  const auto d = min_max(avg_delay);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] += d[i];
  return e;
}

}  // namespace mdd
