#pragma once

// Evaluation metrics computed from episode traces.

#include "mdd/environment.hpp"

#include <span>
#include <vector>

namespace mdd {

/// Mean absolute difference over all ordered pairs divided by twice the mean. All-zero (or empty)
/// input gives 0. Throws on negative values.
double gini(std::span<const double> values);

/// Parcel mass loaded at each start depot over the episode, kg.
std::vector<double> depot_load(const EpisodeTrace& trace, int num_depots);

/// Mean over delivered requests of max(0, t_i - t_delivered) in hours; 0 when nothing delivered.
double early_arrival(const WorldContext& ctx, const EpisodeTrace& trace);

/// Per-method normalized energy plus normalized delay, each min-max scaled across the batch. A
/// component whose values are all equal contributes 0.
std::vector<double> combined_cost(std::span<const double> mean_energy,
                                  std::span<const double> avg_delay);

/// Kilograms of CO2 for an energy amount in joules at a fixed grid intensity (g/kWh).
inline double co2_kg(double joules, double grams_per_kwh = 125.0) {
  return joules / 3.6e6 * grams_per_kwh / 1000.0;
}

}  // namespace mdd
