#pragma once

// Discrete-time delivery world: pending-request dynamics, delays, drone positions, observations
// and the per-drone reward. Routes themselves are produced by the planner.

#include "mdd/core.hpp"
#include "mdd/segmentation.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace mdd {

/// One drone's route for a window: start depot, customers in visiting order, end depot.
struct Plan {
  int drone = -1;
  std::vector<std::size_t> customers;  // indices into WorldContext::requests
  int start_depot = 0;
  int end_depot = 0;
  double path_length = 0.0;  // meters
  double energy = 0.0;       // joules
  double parcel_mass = 0.0;  // kg loaded at the start depot
  bool feasible = true;
};

/// Everything that stays fixed during an episode.
struct WorldContext {
  ScenarioConfig config;
  DroneSpec drone;
  EnvironmentConstants constants;
  std::vector<Request> requests;  // sorted by demand window
  ServiceMap map;
  std::vector<int> request_area;  // area_of(location) per request
  double battery_capacity = 0.0;  // joules
  double range_cap = 0.0;         // route length cap used by this world (meters)

  /// Window in which request `i` becomes visible.
  int release_window(std::size_t i) const;
};

WorldContext make_context(const ScenarioConfig& config, const DroneSpec& drone,
                          const EnvironmentConstants& constants, std::vector<Request> requests,
                          ServiceMap map);

/// Replaces the route-length cap and sizes the battery so that flying the cap empty drains it.
WorldContext with_range_cap(WorldContext ctx, double range_cap);

struct DroneState {
  int depot = 0;
  double battery = 1.0;
};

struct WorldState {
  int window = 1;
  std::vector<std::size_t> pending;  // ascending request indices, status pending
  std::vector<DroneState> drones;
  std::vector<RequestStatus> status;
  std::vector<int> delivered_window;  // 0 until delivered
  std::size_t next_arrival = 0;       // first request not yet released

  std::size_t delivered_count() const;
  std::size_t not_yet_arrived(std::size_t total) const { return total - next_arrival; }
};

/// Drones start at depot u mod N with a full battery; window 1 requests are pending.
WorldState initial_state(const WorldContext& ctx);

/// Delay of a request in hours at window t; zero when delivered or not yet due.
double delay(int t, int demand_window, bool pending, double window_hours);

/// Serves the routes' customers, moves drones to the route end depots, swaps batteries, releases
/// the next window's requests and increments the window. Throws std::logic_error when a route
/// serves a request that is not pending or two routes share a customer.
WorldState advance_window(const WorldContext& ctx, const WorldState& state,
                          std::span<const Plan> executed_routes);

struct DelaySummary {
  double sum = 0.0;  // hours
  int count = 0;
  double max = 0.0;  // hours
};

/// Per-area delay summaries of the pending requests at the current window.
std::vector<DelaySummary> area_summaries(const WorldContext& ctx, const WorldState& state);

struct Observation {
  int own_area = 0;
  double battery = 1.0;
  DelaySummary own;
  std::vector<DelaySummary> neighbors;  // in action order
  std::vector<std::size_t> visible;     // requests in own and neighbouring areas

  /// One-hot area, battery, then log1p of (sum, count, max) for own and neighbour areas.
  Eigen::VectorXd encode(int num_areas) const;
};

Observation observe(const WorldContext& ctx, const WorldState& state, int drone);
Observation observe(const WorldContext& ctx, const WorldState& state, int drone,
                    std::span<const DelaySummary> summaries);

/// Length of Observation::encode for a map with `num_areas` areas and `k` action neighbours.
inline int observation_size(int num_areas, int k) { return num_areas + 1 + 3 * (1 + k); }

struct RewardNormalizers {
  double delay_scale = 1.0;   // hours
  double energy_scale = 1.0;  // joules
  double delay_center = 0.0;
  double energy_center = 0.0;
};

/// Defaults used for a scenario: delay scaled by one window's arrivals each a window late, energy
/// by the battery capacity, both centred at zero.
RewardNormalizers default_normalizers(const WorldContext& ctx);

double reward(double alpha, double delay_sum, double route_energy, const RewardNormalizers& norm);

}  // namespace mdd
