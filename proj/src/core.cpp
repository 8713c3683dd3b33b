#include "mdd/core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mdd {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void validate(const DroneSpec& s) {
  require(positive(s.body_mass), "drone body_mass must be > 0");
  require(positive(s.battery_mass), "drone battery_mass must be > 0");
  require(positive(s.rotor_diameter), "drone rotor_diameter must be > 0");
  require(s.rotor_count > 0, "drone rotor_count must be > 0");
  require(positive(s.ground_speed), "drone ground_speed must be > 0");
  require(positive(s.power_efficiency) && s.power_efficiency <= 1.0,
          "drone power_efficiency must be in (0, 1]");
  require(positive(s.max_payload), "drone max_payload must be > 0");
  require(positive(s.max_range), "drone max_range must be > 0");
}

void validate(const EnvironmentConstants& c) {
  require(positive(c.gravity), "gravity must be > 0");
  require(positive(c.air_density), "air_density must be > 0");
  require(std::isfinite(c.pitch_angle) && c.pitch_angle >= 0.0 &&
              c.pitch_angle < std::numbers::pi / 2.0,
          "pitch_angle must be in [0, pi/2)");
}

void validate(const ScenarioConfig& c) {
  require(positive(c.map_bounds.width) && positive(c.map_bounds.height), "map bounds must be > 0");
  require(c.num_depots >= 1, "num_depots must be >= 1");
  require(c.num_drones >= 0, "num_drones must be >= 0");
  require(c.num_windows >= 1, "num_windows must be >= 1");
  require(positive(c.window_duration), "window_duration must be > 0");
  require(c.alpha >= 0.0 && c.alpha <= 1.0, "alpha must be in [0, 1]");
  require(c.max_parcels_per_drone >= 1, "max_parcels_per_drone must be >= 1");
  require(c.action_neighbors >= 0, "action_neighbors must be >= 0");
  require(c.release_lead_windows >= 0, "release_lead_windows must be >= 0");
  require(c.cluster_count >= 1, "cluster_count must be >= 1");
  require(positive(c.cluster_sigma), "cluster_sigma must be > 0");
  require(c.requests_per_window >= 0, "requests_per_window must be >= 0");
  require(positive(c.parcel_mass_min) && c.parcel_mass_max >= c.parcel_mass_min,
          "parcel mass range must satisfy 0 < min <= max");
}

void validate_request(const Request& r, const ScenarioConfig& config, const DroneSpec& spec) {
  require(config.map_bounds.contains(r.location),
          "request " + std::to_string(r.id) + " lies outside the map bounds");
  require(positive(r.parcel_mass), "request " + std::to_string(r.id) + " has non-positive mass");
  require(r.parcel_mass <= spec.max_payload,
          "request " + std::to_string(r.id) + " exceeds the drone payload");
  require(r.demand_window >= 1 && r.demand_window <= config.num_windows,
          "request " + std::to_string(r.id) + " has demand window outside [1, T]");
}

}  // namespace mdd
