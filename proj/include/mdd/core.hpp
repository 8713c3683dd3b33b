#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace mdd {

/// Planar location in meters (local frame, origin at the map's lower-left corner).
using Point2D = Eigen::Vector2d;

/// The single random engine type used everywhere; one instance per run.
using Rng = std::mt19937_64;

using RequestId = std::int64_t;

inline double euclidean_distance(const Point2D& a, const Point2D& b) { return (a - b).norm(); }

struct Bounds {
  double width = 10000.0;
  double height = 10000.0;

  bool contains(const Point2D& p) const {
    return p.allFinite() && p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= width && p.y() <= height;
  }
  double diagonal() const { return std::hypot(width, height); }
};

enum class RequestStatus : std::uint8_t { pending, delivered };

/// A customer node. `demand_window` is t_i, 1-based.
struct Request {
  RequestId id = 0;
  Point2D location = Point2D::Zero();
  double parcel_mass = 0.0;
  int demand_window = 1;
  RequestStatus status = RequestStatus::pending;
};

/// Airframe constants. Defaults are the delivery drone used throughout the evaluation scenarios.
struct DroneSpec {
  double body_mass = 2.0;
  double battery_mass = 1.0;
  double rotor_diameter = 0.5;
  int rotor_count = 4;
  double ground_speed = 10.0;
  double power_efficiency = 0.8;
  double max_payload = 2.5;
  double max_range = 3000.0;

  double empty_mass() const { return body_mass + battery_mass; }
};

struct EnvironmentConstants {
  double gravity = 9.81;
  double air_density = 1.225;
  double pitch_angle = 10.0 * std::numbers::pi / 180.0;
};

/// Whose pending delay enters a drone's reward: the requests in its own and neighbouring areas,
/// or the whole fleet's backlog split evenly across drones.
enum class RewardScope { observed, fleet };

/// Shape of the simulated world. Anything not needed by every module lives in its own config.
struct ScenarioConfig {
  Bounds map_bounds;
  int num_depots = 16;
  int num_drones = 8;
  int num_windows = 12;
  double window_duration = 1800.0;  // seconds
  double alpha = 0.5;
  RewardScope reward_scope = RewardScope::fleet;
  int max_parcels_per_drone = 4;
  std::uint64_t rng_seed = 1;

  // Action set is "stay" plus this many nearest neighbouring depots.
  int action_neighbors = 3;
  // Requests become visible this many windows before their demand window (0: at t_i).
  int release_lead_windows = 0;

  // Synthetic generator.
  std::uint64_t layout_seed = 1;
  int cluster_count = 12;
  double cluster_sigma = 450.0;
  int requests_per_window = 40;
  double parcel_mass_min = 0.2;
  double parcel_mass_max = 1.0;

  double window_hours() const { return window_duration / 3600.0; }
};

/// Throws std::invalid_argument naming the first violated field.
void validate(const DroneSpec& spec);
void validate(const EnvironmentConstants& consts);
void validate(const ScenarioConfig& config);

/// Throws std::invalid_argument if the request violates its type invariants for this scenario.
void validate_request(const Request& r, const ScenarioConfig& config, const DroneSpec& spec);

}  // namespace mdd
