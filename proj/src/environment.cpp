#include "mdd/environment.hpp"

#include "mdd/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

namespace mdd {

int UniformSelector::select(const Eigen::MatrixXd&, std::span<const char> mask, Rng& rng) {
  std::vector<int> legal;
  for (std::size_t a = 0; a < mask.size(); ++a) {
    if (mask[a]) legal.push_back(static_cast<int>(a));
  }
  if (legal.empty()) throw std::logic_error("no legal action");
  std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
  return legal[pick(rng)];
}

int FixedSelector::select(const Eigen::MatrixXd&, std::span<const char> mask, Rng&) {
  if (action_ >= 0 && static_cast<std::size_t>(action_) < mask.size() && mask[action_]) return action_;
  for (std::size_t a = 0; a < mask.size(); ++a) {
    if (mask[a]) return static_cast<int>(a);
  }
  throw std::logic_error("no legal action");
}

void ObservationHistory::reset(int drones, int features, int length) {
  features_ = features;
  length_ = std::max(1, length);
  stacks_.assign(static_cast<std::size_t>(drones), Eigen::MatrixXd::Zero(features_, length_));
}

Eigen::MatrixXd ObservationHistory::push(int drone, const Eigen::VectorXd& features) {
  auto& m = stacks_.at(static_cast<std::size_t>(drone));
  if (features.size() != features_) throw std::invalid_argument("observation size changed");
  for (int c = 0; c + 1 < length_; ++c) m.col(c) = m.col(c + 1);
  m.col(length_ - 1) = features;
  return m;
}

RangeController::RangeController(std::shared_ptr<ActionSelector> selector, PlannerOptions options)
    : selector_(std::move(selector)), options_(options) {
  if (!selector_) throw std::invalid_argument("RangeController needs a selector");
}

void RangeController::reset(const WorldContext& ctx) {
  history_.reset(ctx.config.num_drones,
                 observation_size(ctx.map.size(), ctx.map.neighbor_count()), selector_->history());
}

WindowDecision RangeController::decide(const WorldContext& ctx, const WorldState& state, Rng& rng) {
  const auto summaries = area_summaries(ctx, state);
  const std::size_t drones = state.drones.size();
  WindowDecision d;
  std::vector<FlightRange> ranges;
  const std::vector<char> mask(static_cast<std::size_t>(ctx.map.neighbor_count() + 1), 1);
  for (std::size_t u = 0; u < drones; ++u) {
    const auto obs = observe(ctx, state, static_cast<int>(u), summaries);
    AgentStep step;
    step.input = history_.push(static_cast<int>(u), obs.encode(ctx.map.size()));
    step.mask = mask;
    step.action = selector_->select(step.input, step.mask, rng);
    ranges.push_back(action_range(ctx, obs.own_area, step.action));
    d.visible.push_back(obs.visible);
    d.agents.push_back(std::move(step));
  }
  auto plan = plan_window(ctx, state, ranges, options_);
  d.routes = std::move(plan.routes);
  d.dropped = plan.dropped.size();
  return d;
}

WindowDecision GlobalController::decide(const WorldContext& ctx, const WorldState& state, Rng&) {
  const auto summaries = area_summaries(ctx, state);
  WindowDecision d;
  std::vector<FlightRange> ranges;
  for (std::size_t u = 0; u < state.drones.size(); ++u) {
    const auto obs = observe(ctx, state, static_cast<int>(u), summaries);
    ranges.push_back(global_range(ctx, obs.own_area));
    d.visible.push_back(obs.visible);
  }
  auto plan = plan_window(ctx, state, ranges, options_);
  d.routes = std::move(plan.routes);
  d.dropped = plan.dropped.size();
  return d;
}

PlanChoiceController::PlanChoiceController(std::shared_ptr<ActionSelector> selector, int max_parcels)
    : selector_(std::move(selector)), max_parcels_(max_parcels) {
  if (!selector_) throw std::invalid_argument("PlanChoiceController needs a selector");
  if (max_parcels < 1 || max_parcels > 10) {
    throw std::invalid_argument("PlanChoiceController: max_parcels must be in [1, 10]");
  }
}

void PlanChoiceController::reset(const WorldContext& ctx) {
  history_.reset(ctx.config.num_drones,
                 input_size(ctx.map.size(), ctx.map.neighbor_count(), max_parcels_),
                 selector_->history());
}

WindowDecision PlanChoiceController::decide(const WorldContext& ctx, const WorldState& state,
                                            Rng& rng) {
  const auto summaries = area_summaries(ctx, state);
  const std::size_t drones = state.drones.size();
  const int slots = slot_count(max_parcels_);
  const int base = observation_size(ctx.map.size(), ctx.map.neighbor_count());
  const double wh = ctx.config.window_hours();
  std::vector<char> claimed(ctx.requests.size(), 0);

  WindowDecision d;
  for (std::size_t u = 0; u < drones; ++u) {
    const auto obs = observe(ctx, state, static_cast<int>(u), summaries);
    const int depot = obs.own_area;
    const auto areas = ctx.map.action_targets(depot);

    FlightRange range;
    range.start_depot = depot;
    range.areas = areas;
    range.end_depots = areas;
    range.max_path = ctx.range_cap;
    WorldState unclaimed = state;
    std::erase_if(unclaimed.pending, [&](std::size_t i) { return claimed[i] != 0; });
    const auto candidates = top_delayed_candidates(ctx, unclaimed, range, max_parcels_);
    std::vector<double> masses;
    for (std::size_t i : candidates) masses.push_back(ctx.requests[i].parcel_mass);
    const auto combos =
        enumerate_combinations(candidates, masses, ctx.drone.max_payload, max_parcels_);

    std::vector<Plan> options(static_cast<std::size_t>(slots));
    std::vector<char> mask(static_cast<std::size_t>(slots), 0);
    Eigen::VectorXd features = Eigen::VectorXd::Zero(base + kFeaturesPerSlot * slots);
    features.head(base) = obs.encode(ctx.map.size());

    options[0] = cost_plan(ctx, static_cast<int>(u), depot, {}, depot, ctx.range_cap);
    mask[0] = 1;
    features(base) = 1.0;
    for (std::size_t j = 1; j < combos.size(); ++j) {
      const auto& combo = combos[j];
      std::vector<Point2D> points;
      double delay_sum = 0.0;
      for (std::size_t i : combo) {
        points.push_back(ctx.requests[i].location);
        delay_sum += delay(state.window, ctx.requests[i].demand_window, true, wh);
      }
      Plan best;
      best.feasible = false;
      for (int end : areas) {
        const auto route = greedy_route(ctx.map.depot(depot), points, ctx.map.depot(end));
        std::vector<std::size_t> ordered;
        for (std::size_t pos : route.order) ordered.push_back(combo[pos]);
        Plan p = cost_plan(ctx, static_cast<int>(u), depot, ordered, end, ctx.range_cap);
        if (p.feasible && (!best.feasible || p.energy < best.energy)) best = std::move(p);
      }
      if (!best.feasible) continue;
      const int at = base + kFeaturesPerSlot * static_cast<int>(j);
      features(at) = 1.0;
      features(at + 1) = best.energy / ctx.battery_capacity;
      features(at + 2) = std::log1p(delay_sum);
      features(at + 3) = static_cast<double>(combo.size()) / max_parcels_;
      mask[j] = 1;
      options[j] = std::move(best);
    }

    AgentStep step;
    step.input = history_.push(static_cast<int>(u), features);
    step.mask = mask;
    step.action = selector_->select(step.input, step.mask, rng);
    Plan chosen = options[static_cast<std::size_t>(step.action)];
    for (std::size_t i : chosen.customers) claimed[i] = 1;
    d.routes.push_back(std::move(chosen));
    d.visible.push_back(obs.visible);
    d.agents.push_back(std::move(step));
  }
  return d;
}

namespace {

void check_routes(const WorldContext& ctx, const WorldState& state, std::span<const Plan> routes) {
  if (routes.size() != state.drones.size()) throw std::logic_error("one route per drone required");
  for (std::size_t u = 0; u < routes.size(); ++u) {
    const Plan& p = routes[u];
    const auto fail = [&](const std::string& what) {
      throw std::logic_error("window " + std::to_string(state.window) + ", drone " +
                             std::to_string(u) + ": " + what);
    };
    if (p.drone != static_cast<int>(u)) fail("route assigned to the wrong drone");
    if (p.start_depot != state.drones[u].depot) fail("route does not start at the drone's depot");
    if (p.end_depot < 0 || p.end_depot >= ctx.map.size()) fail("route does not end at a depot");
    if (!p.feasible) fail("infeasible route executed");
    if (p.parcel_mass > ctx.drone.max_payload + 1e-9) fail("payload exceeded");
    if (p.path_length > ctx.range_cap * (1.0 + 1e-12)) fail("range exceeded");
    if (p.energy > ctx.battery_capacity * (1.0 + 1e-12)) fail("battery exhausted");
    std::vector<std::size_t> seen(p.customers);
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) fail("customer repeated");
  }
}

}  // namespace

EpisodeResult run_episode(const WorldContext& ctx, Controller& controller, Rng& rng,
                          const EpisodeOptions& options) {
  using Clock = std::chrono::steady_clock;
  EpisodeResult result;
  auto& trace = result.trace;
  auto& m = result.metrics;
  const std::size_t total = ctx.requests.size();
  const double wh = ctx.config.window_hours();
  const int drones = ctx.config.num_drones;
  m.requests = total;
  m.area_delay.assign(static_cast<std::size_t>(ctx.map.size()), 0.0);

  controller.reset(ctx);
  WorldState state = initial_state(ctx);
  std::vector<std::vector<AgentStep>> steps;
  std::vector<std::vector<double>> rewards;
  double reward_sum = 0.0;
  std::size_t reward_count = 0;

  for (int t = 1; t <= ctx.config.num_windows; ++t) {
    for (std::size_t i : state.pending) {
      const double d = delay(t, ctx.requests[i].demand_window, true, wh);
      m.delay_sum += d;
      m.area_delay[static_cast<std::size_t>(ctx.request_area[i])] += d;
    }

    const auto started = Clock::now();
    WindowDecision decision = controller.decide(ctx, state, rng);
    const double seconds = std::chrono::duration<double>(Clock::now() - started).count();
    if (options.check_invariants) check_routes(ctx, state, decision.routes);

    WorldState next = advance_window(ctx, state, decision.routes);

    // Requests left pending are charged the delay they carry into the next window.
    double fleet_share = 0.0;
    for (std::size_t i : next.pending) {
      fleet_share += delay(t + 1, ctx.requests[i].demand_window, true, wh);
    }
    fleet_share /= std::max(1, drones);

    std::vector<double> window_rewards(static_cast<std::size_t>(drones), 0.0);
    for (int u = 0; u < drones; ++u) {
      const Plan& p = decision.routes[static_cast<std::size_t>(u)];
      double observed_delay = fleet_share;
      if (ctx.config.reward_scope == RewardScope::observed) {
        observed_delay = 0.0;
        for (std::size_t i : decision.visible[static_cast<std::size_t>(u)]) {
          if (next.status[i] == RequestStatus::pending) {
            observed_delay += delay(t + 1, ctx.requests[i].demand_window, true, wh);
          }
        }
      }
      const double r = reward(ctx.config.alpha, observed_delay, p.energy, options.normalizers);
      window_rewards[static_cast<std::size_t>(u)] = r;
      reward_sum += r;
      ++reward_count;
      m.total_energy += p.energy;

      TraceRow row;
      row.window = t;
      row.drone = u;
      row.action = decision.agents.empty() ? -1 : decision.agents[static_cast<std::size_t>(u)].action;
      row.plan = p;
      row.battery_after = 1.0 - p.energy / ctx.battery_capacity;
      row.reward = r;
      row.observed_delay = observed_delay;
      for (std::size_t i : p.customers) {
        row.served_delays.push_back(std::max(0, t - ctx.requests[i].demand_window) * wh);
      }
      if (options.check_invariants && row.battery_after < -1e-12) {
        throw std::logic_error("battery below zero");
      }
      trace.rows.push_back(std::move(row));
    }

    WindowCounts counts;
    counts.window = t;
    counts.delivered = next.delivered_count();
    counts.pending = next.pending.size();
    counts.not_arrived = next.not_yet_arrived(total);
    counts.seconds = seconds;
    for (std::size_t i : next.pending) {
      counts.delay_sum += delay(t, ctx.requests[i].demand_window, true, wh);
    }
    if (options.check_invariants && counts.delivered + counts.pending + counts.not_arrived != total) {
      throw std::logic_error("request conservation violated at window " + std::to_string(t));
    }
    trace.windows.push_back(counts);

    if (options.record_transitions && !decision.agents.empty()) {
      steps.push_back(std::move(decision.agents));
      rewards.push_back(std::move(window_rewards));
    }
    state = std::move(next);
  }

  trace.delivered_window = state.delivered_window;

  for (std::size_t w = 0; w < steps.size(); ++w) {
    for (std::size_t u = 0; u < steps[w].size(); ++u) {
      Transition tr;
      tr.drone = static_cast<int>(u);
      tr.window = static_cast<int>(w) + 1;
      tr.observation = steps[w][u].input;
      tr.mask = steps[w][u].mask;
      tr.action = steps[w][u].action;
      tr.reward = rewards[w][u];
      tr.terminal = w + 1 == steps.size();
      const auto& after = tr.terminal ? steps[w][u] : steps[w + 1][u];
      tr.next_observation = after.input;
      tr.next_mask = after.mask;
      tr.next_action = after.action;
      result.transitions.push_back(std::move(tr));
    }
  }

  m.delivered = state.delivered_count();
  m.mean_energy_kj = drones > 0 ? m.total_energy / drones / 1000.0 : 0.0;
  m.avg_delay = total > 0 ? m.delay_sum / static_cast<double>(total) : 0.0;
  m.delay_unfairness = gini(m.area_delay);
  double seconds = 0.0;
  for (const auto& w : trace.windows) seconds += w.seconds;
  m.avg_running_time = trace.windows.empty() ? 0.0 : seconds / trace.windows.size();
  m.avg_early_arrival = early_arrival(ctx, trace);
  m.depot_load = depot_load(trace, ctx.map.size());
  m.mean_reward = reward_count > 0 ? reward_sum / reward_count : 0.0;
  return result;
}

RewardNormalizers calibrated_normalizers(const WorldContext& ctx, std::uint64_t seed,
                                         const PlannerOptions& options) {
  RewardNormalizers n = default_normalizers(ctx);
  RangeController pilot(std::make_shared<UniformSelector>(), options);
  Rng rng(seed);
  EpisodeOptions eo;
  eo.normalizers = n;
  eo.check_invariants = false;
  const auto result = run_episode(ctx, pilot, rng, eo);
  double sum = 0.0;
  for (const auto& row : result.trace.rows) sum += row.observed_delay;
  if (!result.trace.rows.empty() && sum > 0.0) n.delay_scale = sum / result.trace.rows.size();
  return n;
}

void write_trace_csv(std::ostream& out, const WorldContext& ctx, const EpisodeTrace& trace) {
  const auto old_precision = out.precision(10);
  out << "window,drone,action,start_depot,end_depot,route,path_m,energy_j,parcel_kg,battery_after,"
         "reward,observed_delay_h,served_delays_h\n";
  for (const auto& row : trace.rows) {
    out << row.window << ',' << row.drone << ',' << row.action << ',' << row.plan.start_depot << ','
        << row.plan.end_depot << ',';
    out << 'D' << row.plan.start_depot;
    for (std::size_t i : row.plan.customers) out << ' ' << ctx.requests[i].id;
    out << " D" << row.plan.end_depot << ',';
    out << row.plan.path_length << ',' << row.plan.energy << ',' << row.plan.parcel_mass << ','
        << row.battery_after << ',' << row.reward << ',' << row.observed_delay << ',';
    for (std::size_t k = 0; k < row.served_delays.size(); ++k) {
      if (k) out << ' ';
      out << row.served_delays[k];
    }
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace mdd
