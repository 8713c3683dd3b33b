#pragma once

// Multirotor flight energy: thrust from mass and pitch, the momentum-theory induced velocity,
// shaft power and per-leg energy. Parcels are dropped one by one along a route, so the carried
// mass shrinks leg by leg and the final leg into a depot is flown empty.

#include "mdd/core.hpp"

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace mdd {

template <typename Scalar>
struct EnergyModelInputs {
  Scalar total_mass;
  Scalar ground_speed;
  Scalar pitch;
  Scalar air_density;
  Scalar rotor_diameter;
  Scalar rotor_count;
  Scalar efficiency;
};

template <typename Scalar>
struct LegResult {
  Scalar thrust;
  Scalar induced_velocity;
  Scalar power;
  Scalar energy;
  Scalar residual;
};

template <typename Scalar>
Scalar required_thrust(Scalar total_mass, Scalar pitch, Scalar gravity) {
  using std::tan;
  if (!(total_mass > Scalar(0))) throw std::invalid_argument("required_thrust: mass must be > 0");
  if (!(pitch < Scalar(std::numbers::pi / 2)) || pitch < Scalar(0)) {
    throw std::invalid_argument("required_thrust: pitch must be in [0, pi/2)");
  }
  return total_mass * gravity * (Scalar(1) + tan(pitch));
}

inline double remaining_parcel_mass(double current, double dropped) {
  if (dropped < 0.0 || dropped > current) {
    throw std::logic_error("remaining_parcel_mass: dropped mass exceeds carried mass");
  }
  return current - dropped;
}

/// Rotor disk term pi * d^2 * r * rho.
template <typename Scalar>
Scalar rotor_disk_factor(const EnergyModelInputs<Scalar>& in) {
  return Scalar(std::numbers::pi) * in.rotor_diameter * in.rotor_diameter * in.rotor_count *
         in.air_density;
}

/// Mismatch of the induced-velocity balance, vi * k * |airflow| - 2 * thrust. Zero at the root,
/// negative below it, positive above it.
template <typename Scalar>
Scalar induced_velocity_residual(Scalar vi, Scalar thrust, const EnergyModelInputs<Scalar>& in) {
  using std::cos, std::sin, std::sqrt;
  const Scalar horizontal = in.ground_speed * cos(in.pitch);
  const Scalar vertical = in.ground_speed * sin(in.pitch) + vi;
  return vi * rotor_disk_factor(in) * sqrt(horizontal * horizontal + vertical * vertical) -
         Scalar(2) * thrust;
}

/// Closed-form induced velocity in hover; it is also an upper bound on the root in forward flight.
template <typename Scalar>
Scalar hover_induced_velocity(Scalar thrust, const EnergyModelInputs<Scalar>& in) {
  using std::sqrt;
  return sqrt(Scalar(2) * thrust / rotor_disk_factor(in));
}

/// Damped fixed-point iteration on vi = 2T / (k * |airflow(vi)|). The damping weight is chosen from
/// the local slope of the map (1 / (1 - g')), and every iterate is kept inside a sign bracket that
/// starts at [0, hover vi]; a step leaving the bracket falls back to bisection.
template <typename Scalar>
Scalar solve_induced_velocity(Scalar thrust, const EnergyModelInputs<Scalar>& in,
                              Scalar rel_tol = Scalar(1e-13), int max_iter = 200) {
  using std::abs, std::cos, std::sin, std::sqrt;
  if (!(thrust > Scalar(0))) throw std::invalid_argument("solve_induced_velocity: thrust must be > 0");
  if (!(in.ground_speed >= Scalar(0))) {
    throw std::invalid_argument("solve_induced_velocity: ground speed must be >= 0");
  }
  const Scalar k = rotor_disk_factor(in);
  const Scalar horizontal = in.ground_speed * cos(in.pitch);
  const Scalar climb = in.ground_speed * sin(in.pitch);
  const Scalar target = Scalar(2) * thrust;

  Scalar lo = Scalar(0);
  Scalar hi = hover_induced_velocity(thrust, in);
  Scalar vi = hi;
  for (int iter = 0; iter < max_iter; ++iter) {
    const Scalar vertical = climb + vi;
    const Scalar airflow = sqrt(horizontal * horizontal + vertical * vertical);
    const Scalar residual = vi * k * airflow - target;
    if (abs(residual) <= rel_tol * target) return vi;
    if (residual < Scalar(0)) {
      lo = vi;
    } else {
      hi = vi;
    }
    const Scalar mapped = target / (k * airflow);
    const Scalar slope = -mapped * vertical / (airflow * airflow);
    const Scalar weight = Scalar(1) / (Scalar(1) - slope);
    Scalar next = vi + weight * (mapped - vi);
    if (!(next > lo && next < hi)) next = (lo + hi) / Scalar(2);
    if (next == vi) return vi;
    vi = next;
  }
  throw std::runtime_error("solve_induced_velocity: no convergence");
}

template <typename Scalar>
Scalar leg_power(Scalar thrust, Scalar induced_velocity, const EnergyModelInputs<Scalar>& in) {
  using std::sin;
  if (!(in.efficiency > Scalar(0))) throw std::invalid_argument("leg_power: efficiency must be > 0");
  return (in.ground_speed * sin(in.pitch) + induced_velocity) * thrust / in.efficiency;
}

inline EnergyModelInputs<double> model_inputs(const DroneSpec& spec, const EnvironmentConstants& consts,
                                              double parcel_mass) {
  return {spec.empty_mass() + parcel_mass,
          spec.ground_speed,
          consts.pitch_angle,
          consts.air_density,
          spec.rotor_diameter,
          static_cast<double>(spec.rotor_count),
          spec.power_efficiency};
}

/// Full thrust/velocity/power/energy breakdown for one straight leg.
LegResult<double> evaluate_leg(const DroneSpec& spec, const EnvironmentConstants& consts,
                               double parcel_mass, double distance);

double leg_energy(const DroneSpec& spec, const EnvironmentConstants& consts, double parcel_mass,
                  double distance);

/// A route node and the parcel mass handed over there (zero at depots).
struct Stop {
  Point2D location;
  double drop_mass = 0.0;
};

/// Sequential drop-off: the drone leaves the first stop carrying the sum of all drop masses.
double route_energy(const DroneSpec& spec, const EnvironmentConstants& consts,
                    std::span<const Stop> stops);

/// Energy to fly the airframe's max range empty; a full battery holds exactly this much.
double battery_capacity(const DroneSpec& spec, const EnvironmentConstants& consts);

}  // namespace mdd
