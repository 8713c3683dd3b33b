#pragma once

// Method matrix, repetitions and reports.

#include "mdd/dataset.hpp"
#include "mdd/learning.hpp"
#include "mdd/metrics.hpp"

#include "json.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mdd {

enum class MethodId { mar_ops, ops_global, ops_random, mappo, squares };

inline constexpr std::array<MethodId, 5> kAllMethods{MethodId::mar_ops, MethodId::ops_global,
                                                     MethodId::ops_random, MethodId::mappo,
                                                     MethodId::squares};

std::string to_string(MethodId m);
std::optional<MethodId> parse_method(const std::string& name);

bool is_learned(MethodId m);
MapKind map_kind(MethodId m);
AgentKind agent_kind(MethodId m);

/// Problem definition shared by every method. With `synthetic` set, each episode draws a fresh
/// request set from the same demand layout; otherwise every episode replays `requests`.
struct Scenario {
  ScenarioConfig config;
  DroneSpec drone;
  EnvironmentConstants constants;
  std::vector<Request> requests;  // reference set; segmentation runs on these locations
  bool synthetic = true;
};

Scenario synthetic_scenario(const ScenarioConfig& config, const DroneSpec& drone,
                            const EnvironmentConstants& constants);

/// Request set for an episode drawn with `seed` (the reference set when not synthetic).
std::vector<Request> episode_requests(const Scenario& scenario, std::uint64_t seed);

ServiceMap build_map(const Scenario& scenario, MapKind kind);

/// World for `method`: the whole-map method gets a route cap spanning the map (and a battery sized
/// to match), the rest the drone's range.
WorldContext method_context(const Scenario& scenario, MethodId method, const ServiceMap& map,
                            std::vector<Request> requests);

/// Reward normalizers for a method, calibrated on the reference request set.
RewardNormalizers method_normalizers(const Scenario& scenario, MethodId method,
                                     const ServiceMap& map, const PlannerOptions& options);

/// Requests that no single-customer round trip from any depot of the context's map can serve
/// within range, payload and battery limits.
std::vector<RequestId> unreachable_requests(const WorldContext& ctx);

struct ExperimentConfig {
  LearningConfig learning;
  PlannerOptions planner;
  int repetitions = 10;
  std::uint64_t eval_seed = 1000;
  bool greedy_eval = true;
};

/// Maps scenario, planner, learning and experiment keys from a flat config.
struct LoadedConfig {
  ScenarioConfig scenario;
  DroneSpec drone;
  EnvironmentConstants constants;
  ExperimentConfig experiment;
};
/// Throws std::invalid_argument on unknown keys or invalid values.
LoadedConfig load_config(const KeyValueConfig& kv);

/// Training-episode request seed for episode `e` of a run with learning seed `s`.
std::uint64_t training_seed(std::uint64_t learning_seed, int episode);

TrainedAgent train_method(const Scenario& scenario, MethodId method, const ServiceMap& map,
                          const ExperimentConfig& config);

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (0 for one repetition)
};

MetricStats stats(std::span<const double> values);

struct MetricsReport {
  MethodId method = MethodId::mar_ops;
  int repetitions = 0;
  MetricStats mean_energy_kj;
  MetricStats avg_delay;
  MetricStats combined_cost;
  MetricStats delay_unfairness;
  MetricStats avg_running_time;
  MetricStats avg_early_arrival;
  MetricStats delivered_fraction;
  MetricStats co2_kg;  // fleet total per episode at 125 g/kWh
  std::vector<double> depot_load;  // kg per depot, mean over repetitions
  std::size_t unreachable_requests = 0;  // in the reference request set, for this method's map
  RewardNormalizers reward_normalizers;
  std::vector<double> energy_samples;
  std::vector<double> delay_samples;
  std::vector<double> running_time_samples;
};

struct MethodRun {
  RewardNormalizers normalizers;  // also copied into the report
  MetricsReport report;
  EpisodeResult first;  // the first repetition, for traces
};

/// Runs `config.repetitions` episodes with seeds eval_seed, eval_seed + 1, ... Learned methods
/// need `policy`; throws std::invalid_argument without one.
MethodRun run_method(const Scenario& scenario, MethodId method, const ServiceMap& map,
                     std::shared_ptr<const PolicyNetwork> policy, const ExperimentConfig& config);

/// Fills combined_cost for every report from per-batch min-max normalizers of the method means.
struct CombinedNormalizers {
  double energy_min = 0.0, energy_max = 0.0, delay_min = 0.0, delay_max = 0.0;
};
CombinedNormalizers apply_combined_cost(std::vector<MetricsReport>& reports);

/// Deterministic report (no wall-clock values).
nlohmann::json report_json(const Scenario& scenario, const ExperimentConfig& config,
                           const std::vector<MetricsReport>& reports,
                           const CombinedNormalizers& normalizers,
                           const std::map<MethodId, std::vector<CurvePoint>>& training);

/// Wall-clock measurements kept apart from the deterministic report.
nlohmann::json timing_json(const std::vector<MetricsReport>& reports);

}  // namespace mdd
