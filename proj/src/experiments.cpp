#include "mdd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mdd {

std::string to_string(MethodId m) {
  switch (m) {
    case MethodId::mar_ops: return "mar_ops";
    case MethodId::ops_global: return "ops_global";
    case MethodId::ops_random: return "ops_random";
    case MethodId::mappo: return "mappo";
    case MethodId::squares: return "squares";
  }
  return "unknown";
}

std::optional<MethodId> parse_method(const std::string& name) {
  std::string key = name;
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) {
    return c == '-' ? '_' : static_cast<char>(std::tolower(c));
  });
  for (MethodId m : kAllMethods) {
    if (to_string(m) == key) return m;
  }
  return std::nullopt;
}

bool is_learned(MethodId m) {
  return m == MethodId::mar_ops || m == MethodId::mappo || m == MethodId::squares;
}

MapKind map_kind(MethodId m) { return m == MethodId::squares ? MapKind::grid : MapKind::kmeans; }

AgentKind agent_kind(MethodId m) {
  return m == MethodId::mappo ? AgentKind::plan_choice : AgentKind::flight_range;
}

Scenario synthetic_scenario(const ScenarioConfig& config, const DroneSpec& drone,
                            const EnvironmentConstants& constants) {
  Scenario s;
  s.config = config;
  s.drone = drone;
  s.constants = constants;
  s.synthetic = true;
  s.requests = generate_synthetic(config, drone, config.cluster_count, config.requests_per_window);
  return s;
}

std::vector<Request> episode_requests(const Scenario& scenario, std::uint64_t seed) {
  if (!scenario.synthetic) return scenario.requests;
  ScenarioConfig c = scenario.config;
  c.rng_seed = seed;
  return generate_synthetic(c, scenario.drone, c.cluster_count, c.requests_per_window);
}

ServiceMap build_map(const Scenario& scenario, MapKind kind) {
  const auto& c = scenario.config;
  if (kind == MapKind::grid) return grid_segment(c.map_bounds, c.num_depots, c.action_neighbors);
  std::vector<Point2D> points;
  points.reserve(scenario.requests.size());
  for (const auto& r : scenario.requests) points.push_back(r.location);
  return kmeans_segment(points, c.num_depots, c.rng_seed, c.map_bounds, c.action_neighbors);
}

WorldContext method_context(const Scenario& scenario, MethodId method, const ServiceMap& map,
                            std::vector<Request> requests) {
  if (map.kind() != map_kind(method)) {
    throw std::invalid_argument("service map kind does not match method " + to_string(method));
  }
  auto ctx = make_context(scenario.config, scenario.drone, scenario.constants, std::move(requests), map);
  if (method == MethodId::ops_global) {
    // Long enough for any route through max_parcels customers anywhere on the map.
    const double cap = (scenario.config.max_parcels_per_drone + 1) * scenario.config.map_bounds.diagonal();
    ctx = with_range_cap(std::move(ctx), std::max(cap, ctx.range_cap));
  }
  return ctx;
}

RewardNormalizers method_normalizers(const Scenario& scenario, MethodId method,
                                     const ServiceMap& map, const PlannerOptions& options) {
  const auto ctx = method_context(scenario, method, map, scenario.requests);
  return calibrated_normalizers(ctx, scenario.config.rng_seed, options);
}

std::vector<RequestId> unreachable_requests(const WorldContext& ctx) {
  std::vector<RequestId> out;
  for (std::size_t i = 0; i < ctx.requests.size(); ++i) {
    const std::size_t one[] = {i};
    bool reachable = false;
    for (int a = 0; a < ctx.map.size() && !reachable; ++a) {
      reachable = cost_plan(ctx, 0, a, one, a, ctx.range_cap).feasible;
    }
    if (!reachable) out.push_back(ctx.requests[i].id);
  }
  return out;
}

LoadedConfig load_config(const KeyValueConfig& kv) {
  LoadedConfig out;
  apply(kv, out.scenario);
  apply(kv, out.drone);
  apply(kv, out.constants);
  auto& e = out.experiment;
  auto& l = e.learning;
  e.planner.max_parcels = out.scenario.max_parcels_per_drone;
  kv.get("repetitions", e.repetitions);
  kv.get("eval_seed", e.eval_seed);
  kv.get("greedy_eval", e.greedy_eval);
  kv.get("gamma", l.gamma);
  kv.get("clip", l.clip);
  kv.get("actor_lr", l.actor_lr);
  kv.get("critic_lr", l.critic_lr);
  kv.get("episodes", l.episodes);
  kv.get("batch_size", l.batch_size);
  kv.get("epochs_per_update", l.epochs_per_update);
  kv.get("hidden", l.hidden);
  kv.get("history", l.history);
  kv.get("recurrent", l.recurrent);
  kv.get("grad_clip", l.grad_clip);
  std::string critic = l.critic == CriticKind::q ? "q" : "v";
  kv.get("critic", critic);
  if (critic != "q" && critic != "v") throw std::invalid_argument("critic must be q or v");
  l.critic = critic == "q" ? CriticKind::q : CriticKind::v;
  int capacity = static_cast<int>(l.buffer_capacity);
  kv.get("buffer_capacity", capacity);
  if (capacity < 1) throw std::invalid_argument("buffer_capacity must be >= 1");
  l.buffer_capacity = static_cast<std::size_t>(capacity);
  kv.get("clear_buffer_after_update", l.clear_buffer_after_update);
  kv.get("bootstrap_horizon", l.bootstrap_horizon);
  kv.get("normalize_advantages", l.normalize_advantages);
  kv.get("learning_seed", l.seed);

  const auto unused = kv.unused_keys();
  if (!unused.empty()) throw std::invalid_argument("unknown config key: " + unused.front());
  validate(out.scenario);
  validate(out.drone);
  validate(out.constants);
  validate(l);
  if (e.repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  return out;
}

std::uint64_t training_seed(std::uint64_t learning_seed, int episode) {
  // Disjoint from evaluation seeds in practice: high bit set.
  return (learning_seed << 32) ^ (std::uint64_t{1} << 63) ^ static_cast<std::uint64_t>(episode);
}

TrainedAgent train_method(const Scenario& scenario, MethodId method, const ServiceMap& map,
                          const ExperimentConfig& config) {
  if (!is_learned(method)) throw std::invalid_argument(to_string(method) + " is not trained");
  auto current = std::make_shared<std::optional<WorldContext>>();
  const bool fixed = !scenario.synthetic;
  EpisodeSource source = [&, current, fixed](int episode) -> const WorldContext& {
    if (!current->has_value() || !fixed) {
      current->emplace(method_context(
          scenario, method, map,
          episode_requests(scenario, training_seed(config.learning.seed, episode))));
    }
    return **current;
  };
  return train(agent_kind(method), source, config.planner, config.learning,
               method_normalizers(scenario, method, map, config.planner));
}

MetricStats stats(std::span<const double> values) {
  MetricStats s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

MethodRun run_method(const Scenario& scenario, MethodId method, const ServiceMap& map,
                     std::shared_ptr<const PolicyNetwork> policy, const ExperimentConfig& config) {
  if (is_learned(method) && !policy) {
    throw std::invalid_argument(to_string(method) + " needs a trained policy");
  }
  MethodRun run;
  run.normalizers = method_normalizers(scenario, method, map, config.planner);
  auto& rep = run.report;
  rep.reward_normalizers = run.normalizers;
  rep.method = method;
  rep.repetitions = config.repetitions;
  rep.depot_load.assign(static_cast<std::size_t>(map.size()), 0.0);
  rep.unreachable_requests =
      unreachable_requests(method_context(scenario, method, map, scenario.requests)).size();
  std::vector<double> unfair, early, delivered, co2;

  for (int r = 0; r < config.repetitions; ++r) {
    const std::uint64_t seed = config.eval_seed + static_cast<std::uint64_t>(r);
    const auto ctx = method_context(scenario, method, map, episode_requests(scenario, seed));
    std::unique_ptr<Controller> controller;
    switch (method) {
      case MethodId::ops_global:
        controller = std::make_unique<GlobalController>(config.planner);
        break;
      case MethodId::ops_random:
        controller = std::make_unique<RangeController>(std::make_shared<UniformSelector>(),
                                                       config.planner);
        break;
      default:
        if (policy->network().shape().input != agent_features(agent_kind(method), ctx, config.planner.max_parcels) ||
            policy->actions() != agent_actions(agent_kind(method), ctx, config.planner.max_parcels)) {
          throw std::invalid_argument("policy does not fit the scenario of " + to_string(method));
        }
        controller = make_agent_controller(
            agent_kind(method), std::make_shared<PolicySelector>(policy, config.greedy_eval),
            config.planner);
    }
    Rng rng(seed);
    EpisodeOptions eo;
    eo.normalizers = run.normalizers;
    auto result = run_episode(ctx, *controller, rng, eo);
    const auto& m = result.metrics;
    rep.energy_samples.push_back(m.mean_energy_kj);
    rep.delay_samples.push_back(m.avg_delay);
    rep.running_time_samples.push_back(m.avg_running_time);
    unfair.push_back(m.delay_unfairness);
    early.push_back(m.avg_early_arrival);
    delivered.push_back(m.requests ? static_cast<double>(m.delivered) / m.requests : 1.0);
    co2.push_back(co2_kg(m.total_energy));
    for (std::size_t d = 0; d < rep.depot_load.size(); ++d) {
      rep.depot_load[d] += m.depot_load[d] / config.repetitions;
    }
    if (r == 0) run.first = std::move(result);
  }
  rep.mean_energy_kj = stats(rep.energy_samples);
  rep.avg_delay = stats(rep.delay_samples);
  rep.avg_running_time = stats(rep.running_time_samples);
  rep.delay_unfairness = stats(unfair);
  rep.avg_early_arrival = stats(early);
  rep.delivered_fraction = stats(delivered);
  rep.co2_kg = stats(co2);
  return run;
}

CombinedNormalizers apply_combined_cost(std::vector<MetricsReport>& reports) {
  CombinedNormalizers n;
  if (reports.empty()) return n;
  std::vector<double> e, d;
  for (const auto& r : reports) {
    e.push_back(r.mean_energy_kj.mean);
    d.push_back(r.avg_delay.mean);
  }
  n.energy_min = *std::min_element(e.begin(), e.end());
  n.energy_max = *std::max_element(e.begin(), e.end());
  n.delay_min = *std::min_element(d.begin(), d.end());
  n.delay_max = *std::max_element(d.begin(), d.end());
  const auto scale = [](double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.0; };
  const auto means = combined_cost(e, d);
  for (std::size_t k = 0; k < reports.size(); ++k) {
    auto& r = reports[k];
    std::vector<double> per_rep;
    for (std::size_t s = 0; s < r.energy_samples.size(); ++s) {
      per_rep.push_back(scale(r.energy_samples[s], n.energy_min, n.energy_max) +
                        scale(r.delay_samples[s], n.delay_min, n.delay_max));
    }
    r.combined_cost = stats(per_rep);
    r.combined_cost.mean = means[k];
  }
  return n;
}

namespace {

nlohmann::json stat_json(const MetricStats& s) { return {{"mean", s.mean}, {"std", s.std}}; }

}  // namespace

nlohmann::json report_json(const Scenario& scenario, const ExperimentConfig& config,
                           const std::vector<MetricsReport>& reports,
                           const CombinedNormalizers& normalizers,
                           const std::map<MethodId, std::vector<CurvePoint>>& training) {
  const auto& c = scenario.config;
  const auto& l = config.learning;
  nlohmann::json j;
  j["format"] = "mdd-report";
  j["version"] = 1;
  j["notes"] = {
      {"alpha", "alpha = 0.5 is the default trade-off weight; alpha = 0.2 is the alternative "
                "operating point suggested for the basic scenario. Set the alpha key to choose."},
      {"combined_cost", "mean energy and average delay are each min-max scaled to [0, 1] across "
                        "the methods in this report and summed, so combined cost lies in [0, 2]"},
      {"co2", "presentation conversion at a fixed 125 g CO2 per kWh"},
      {"running_time", "wall-clock values are written to timing.json"}};
  j["scenario"] = {{"map_width_m", c.map_bounds.width},
                   {"map_height_m", c.map_bounds.height},
                   {"num_depots", c.num_depots},
                   {"num_drones", c.num_drones},
                   {"num_windows", c.num_windows},
                   {"window_duration_s", c.window_duration},
                   {"alpha", c.alpha},
                   {"reward_scope", c.reward_scope == RewardScope::fleet ? "fleet" : "observed"},
                   {"max_parcels_per_drone", c.max_parcels_per_drone},
                   {"action_neighbors", c.action_neighbors},
                   {"rng_seed", c.rng_seed},
                   {"layout_seed", c.layout_seed},
                   {"synthetic", scenario.synthetic},
                   {"requests_per_episode", scenario.requests.size()}};
  j["drone"] = {{"body_mass_kg", scenario.drone.body_mass},
                {"battery_mass_kg", scenario.drone.battery_mass},
                {"rotor_diameter_m", scenario.drone.rotor_diameter},
                {"rotor_count", scenario.drone.rotor_count},
                {"ground_speed_mps", scenario.drone.ground_speed},
                {"power_efficiency", scenario.drone.power_efficiency},
                {"max_payload_kg", scenario.drone.max_payload},
                {"max_range_m", scenario.drone.max_range},
                {"battery_capacity_j", battery_capacity(scenario.drone, scenario.constants)}};
  j["constants"] = {{"gravity", scenario.constants.gravity},
                    {"air_density", scenario.constants.air_density},
                    {"pitch_rad", scenario.constants.pitch_angle}};
  j["learning"] = {{"gamma", l.gamma},
                   {"clip", l.clip},
                   {"actor_lr", l.actor_lr},
                   {"critic_lr", l.critic_lr},
                   {"episodes", l.episodes},
                   {"batch_size", l.batch_size},
                   {"epochs_per_update", l.epochs_per_update},
                   {"hidden", l.hidden},
                   {"history", l.history},
                   {"recurrent", l.recurrent},
                   {"grad_clip", l.grad_clip},
                   {"critic", l.critic == CriticKind::q ? "q" : "v"},
                   {"buffer_capacity", l.buffer_capacity},
                   {"clear_buffer_after_update", l.clear_buffer_after_update},
                   {"bootstrap_horizon", l.bootstrap_horizon},
                   {"normalize_advantages", l.normalize_advantages},
                   {"seed", l.seed}};
  j["evaluation"] = {{"repetitions", config.repetitions},
                     {"eval_seed", config.eval_seed},
                     {"greedy", config.greedy_eval}};

  j["combined_cost_normalizers"] = {{"energy_min_kj", normalizers.energy_min},
                                    {"energy_max_kj", normalizers.energy_max},
                                    {"delay_min_h", normalizers.delay_min},
                                    {"delay_max_h", normalizers.delay_max}};
  auto& methods = j["methods"] = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json m;
    m["method"] = to_string(r.method);
    m["repetitions"] = r.repetitions;
    m["mean_energy_kj"] = stat_json(r.mean_energy_kj);
    m["avg_delay_h"] = stat_json(r.avg_delay);
    m["combined_cost"] = stat_json(r.combined_cost);
    m["delay_unfairness"] = stat_json(r.delay_unfairness);
    m["avg_early_arrival_h"] = stat_json(r.avg_early_arrival);
    m["delivered_fraction"] = stat_json(r.delivered_fraction);
    m["co2_kg"] = stat_json(r.co2_kg);
    m["depot_load_kg"] = r.depot_load;
    m["unreachable_requests"] = r.unreachable_requests;
    m["reward_normalizers"] = {{"delay_scale_h", r.reward_normalizers.delay_scale},
                               {"delay_center_h", r.reward_normalizers.delay_center},
                               {"energy_scale_j", r.reward_normalizers.energy_scale},
                               {"energy_center_j", r.reward_normalizers.energy_center}};
    methods.push_back(std::move(m));
  }
  auto& tr = j["training"] = nlohmann::json::object();
  for (const auto& [method, curve] : training) {
    const std::size_t tail = std::min<std::size_t>(curve.size(), 50);
    double reward = 0.0;
    for (std::size_t k = curve.size() - tail; k < curve.size(); ++k) reward += curve[k].mean_reward;
    tr[to_string(method)] = {{"episodes", curve.size()},
                             {"final_mean_reward", tail ? reward / tail : 0.0}};
  }
  return j;
}

nlohmann::json timing_json(const std::vector<MetricsReport>& reports) {
  nlohmann::json j;
  j["unit"] = "seconds per window (planner + policy)";
  for (const auto& r : reports) j[to_string(r.method)] = stat_json(r.avg_running_time);
  return j;
}

}  // namespace mdd
