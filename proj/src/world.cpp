#include "mdd/world.hpp"

#include "mdd/energy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mdd {

int WorldContext::release_window(std::size_t i) const {
  return std::max(1, requests[i].demand_window - config.release_lead_windows);
}

WorldContext make_context(const ScenarioConfig& config, const DroneSpec& drone,
                          const EnvironmentConstants& constants, std::vector<Request> requests,
                          ServiceMap map) {
  validate(config);
  validate(drone);
  validate(constants);
  WorldContext ctx;
  ctx.config = config;
  ctx.drone = drone;
  ctx.constants = constants;
  ctx.requests = std::move(requests);
  std::stable_sort(ctx.requests.begin(), ctx.requests.end(), [](const Request& a, const Request& b) {
    return a.demand_window != b.demand_window ? a.demand_window < b.demand_window : a.id < b.id;
  });
  ctx.map = std::move(map);
  ctx.request_area.reserve(ctx.requests.size());
  for (const auto& r : ctx.requests) ctx.request_area.push_back(ctx.map.area_of(r.location));
  ctx.battery_capacity = battery_capacity(drone, constants);
  ctx.range_cap = drone.max_range;
  return ctx;
}

WorldContext with_range_cap(WorldContext ctx, double range_cap) {
  if (!(range_cap > 0.0)) throw std::invalid_argument("range cap must be > 0");
  ctx.range_cap = range_cap;
  ctx.battery_capacity = leg_energy(ctx.drone, ctx.constants, 0.0, range_cap);
  return ctx;
}

std::size_t WorldState::delivered_count() const {
  return static_cast<std::size_t>(
      std::count(status.begin(), status.end(), RequestStatus::delivered));
}

namespace {

void release_until(const WorldContext& ctx, WorldState& s, int window) {
  while (s.next_arrival < ctx.requests.size() && ctx.release_window(s.next_arrival) <= window) {
    s.pending.push_back(s.next_arrival);
    ++s.next_arrival;
  }
}

}  // namespace

WorldState initial_state(const WorldContext& ctx) {
  WorldState s;
  s.window = 1;
  s.status.assign(ctx.requests.size(), RequestStatus::pending);
  s.delivered_window.assign(ctx.requests.size(), 0);
  for (int u = 0; u < ctx.config.num_drones; ++u) {
    s.drones.push_back({u % ctx.map.size(), 1.0});
  }
  release_until(ctx, s, 1);
  return s;
}

double delay(int t, int demand_window, bool pending, double window_hours) {
  if (!pending || t < demand_window) return 0.0;
  return (t - demand_window) * window_hours;
}

WorldState advance_window(const WorldContext& ctx, const WorldState& state,
                          std::span<const Plan> executed_routes) {
  WorldState next = state;
  std::vector<char> served(ctx.requests.size(), 0);
  std::vector<char> is_pending(ctx.requests.size(), 0);
  for (std::size_t i : state.pending) is_pending[i] = 1;

  for (const Plan& plan : executed_routes) {
    if (plan.drone < 0 || plan.drone >= static_cast<int>(next.drones.size())) {
      throw std::logic_error("route refers to unknown drone " + std::to_string(plan.drone));
    }
    for (std::size_t i : plan.customers) {
      if (i >= ctx.requests.size() || !is_pending[i]) {
        throw std::logic_error("route serves request that is not pending");
      }
      if (served[i]) {
        throw std::logic_error("request " + std::to_string(ctx.requests[i].id) +
                               " served by two routes");
      }
      served[i] = 1;
      next.status[i] = RequestStatus::delivered;
      next.delivered_window[i] = state.window;
    }
    auto& drone = next.drones[static_cast<std::size_t>(plan.drone)];
    drone.depot = plan.end_depot;
    drone.battery = 1.0;
  }

  std::erase_if(next.pending, [&](std::size_t i) { return served[i] != 0; });
  next.window = state.window + 1;
  release_until(ctx, next, next.window);
  return next;
}

std::vector<DelaySummary> area_summaries(const WorldContext& ctx, const WorldState& state) {
  std::vector<DelaySummary> out(static_cast<std::size_t>(ctx.map.size()));
  const double wh = ctx.config.window_hours();
  for (std::size_t i : state.pending) {
    const double d = delay(state.window, ctx.requests[i].demand_window, true, wh);
    auto& s = out[static_cast<std::size_t>(ctx.request_area[i])];
    s.sum += d;
    s.count += 1;
    s.max = std::max(s.max, d);
  }
  return out;
}

Observation observe(const WorldContext& ctx, const WorldState& state, int drone) {
  const auto summaries = area_summaries(ctx, state);
  return observe(ctx, state, drone, summaries);
}

Observation observe(const WorldContext& ctx, const WorldState& state, int drone,
                    std::span<const DelaySummary> summaries) {
  const auto& d = state.drones.at(static_cast<std::size_t>(drone));
  Observation obs;
  obs.own_area = d.depot;
  obs.battery = d.battery;
  obs.own = summaries[static_cast<std::size_t>(d.depot)];
  const auto targets = ctx.map.action_targets(d.depot);
  for (std::size_t k = 1; k < targets.size(); ++k) {
    obs.neighbors.push_back(summaries[static_cast<std::size_t>(targets[k])]);
  }
  for (std::size_t i : state.pending) {
    if (std::find(targets.begin(), targets.end(), ctx.request_area[i]) != targets.end()) {
      obs.visible.push_back(i);
    }
  }
  return obs;
}

Eigen::VectorXd Observation::encode(int num_areas) const {
  const int k = static_cast<int>(neighbors.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(observation_size(num_areas, k));
  v(own_area) = 1.0;
  v(num_areas) = battery;
  auto put = [&](int at, const DelaySummary& s) {
    v(at) = std::log1p(s.sum);
    v(at + 1) = std::log1p(s.count);
    v(at + 2) = std::log1p(s.max);
  };
  put(num_areas + 1, own);
  for (int j = 0; j < k; ++j) put(num_areas + 4 + 3 * j, neighbors[static_cast<std::size_t>(j)]);
  return v;
}

RewardNormalizers default_normalizers(const WorldContext& ctx) {
  RewardNormalizers n;
  const double per_window =
      static_cast<double>(ctx.requests.size()) / std::max(1, ctx.config.num_windows);
  n.delay_scale = std::max(1.0, per_window * ctx.config.window_hours());
  n.energy_scale = ctx.battery_capacity > 0.0 ? ctx.battery_capacity : 1.0;
  return n;
}

double reward(double alpha, double delay_sum, double route_energy, const RewardNormalizers& norm) {
  const auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const double d = sigmoid((delay_sum - norm.delay_center) / norm.delay_scale);
  const double e = sigmoid((route_energy - norm.energy_center) / norm.energy_scale);
  return -(1.0 - alpha) * d - alpha * e;
}

}  // namespace mdd
