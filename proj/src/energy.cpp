#include "mdd/energy.hpp"

#include <algorithm>
#include <numeric>

namespace mdd {

LegResult<double> evaluate_leg(const DroneSpec& spec, const EnvironmentConstants& consts,
                               double parcel_mass, double distance) {
  if (!(distance >= 0.0)) throw std::invalid_argument("leg distance must be >= 0");
  if (parcel_mass < 0.0) throw std::invalid_argument("parcel mass must be >= 0");
  const auto in = model_inputs(spec, consts, parcel_mass);
  LegResult<double> leg{};
  leg.thrust = required_thrust(in.total_mass, in.pitch, consts.gravity);
  leg.induced_velocity = solve_induced_velocity(leg.thrust, in);
  leg.residual = induced_velocity_residual(leg.induced_velocity, leg.thrust, in);
  leg.power = leg_power(leg.thrust, leg.induced_velocity, in);
  leg.energy = leg.power * distance / spec.ground_speed;
  return leg;
}

double leg_energy(const DroneSpec& spec, const EnvironmentConstants& consts, double parcel_mass,
                  double distance) {
  if (distance == 0.0) return 0.0;
  return evaluate_leg(spec, consts, parcel_mass, distance).energy;
}

double route_energy(const DroneSpec& spec, const EnvironmentConstants& consts,
                    std::span<const Stop> stops) {
  if (stops.size() < 2) throw std::invalid_argument("route needs at least two stops");
  if (stops.front().drop_mass != 0.0 || stops.back().drop_mass != 0.0) {
    throw std::invalid_argument("route must start and end at a depot");
  }
  double carried = std::accumulate(stops.begin(), stops.end(), 0.0,
                                   [](double acc, const Stop& s) { return acc + s.drop_mass; });
  if (carried > spec.max_payload + 1e-9) throw std::invalid_argument("route exceeds the drone payload");

  double total = 0.0;
  for (std::size_t i = 1; i < stops.size(); ++i) {
    // Legs into the final depot are flown empty.
    const double mass = i + 1 == stops.size() ? 0.0 : carried;
    total += leg_energy(spec, consts, mass,
                        euclidean_distance(stops[i - 1].location, stops[i].location));
    const double drop = stops[i].drop_mass;
    if (drop > carried + 1e-9) throw std::logic_error("route drops more mass than it carries");
    carried = remaining_parcel_mass(carried, std::min(drop, carried));
  }
  return total;
}

double battery_capacity(const DroneSpec& spec, const EnvironmentConstants& consts) {
  return leg_energy(spec, consts, 0.0, spec.max_range);
}

}  // namespace mdd
