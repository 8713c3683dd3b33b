#pragma once

// Independent reference implementations and random generators shared by the tests. The reference
// implementations never call the production code they check; the world generator builds on it.

#include "mdd/dataset.hpp"
#include "mdd/learning.hpp"
#include "mdd/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using Gen = std::mt19937_64;

inline double uniform(Gen& g, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(g); }
inline int uniform_int(Gen& g, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(g); }

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

// Induced-velocity balance written out longhand.
inline double balance(double vi, double thrust, double v, double pitch, double rho, double d, double r) {
  const double h = v * std::cos(pitch);
  const double z = v * std::sin(pitch) + vi;
  return vi * std::numbers::pi * d * d * r * rho * std::sqrt(h * h + z * z) - 2.0 * thrust;
}

// Plain bisection on [0, hover root]; the balance is increasing in vi there.
inline double bisect_induced_velocity(double thrust, double v, double pitch, double rho, double d, double r) {
  double lo = 0.0;
  double hi = std::sqrt(2.0 * thrust / (std::numbers::pi * d * d * r * rho));
  for (int i = 0; i < 400 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (balance(mid, thrust, v, pitch, rho, d, r) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Energy of one leg from first principles with the bisection root.
inline double leg_energy(const mdd::DroneSpec& s, const mdd::EnvironmentConstants& c, double parcel,
                         double distance) {
  const double mass = s.body_mass + s.battery_mass + parcel;
  const double thrust = mass * c.gravity * (1.0 + std::tan(c.pitch_angle));
  const double vi = bisect_induced_velocity(thrust, s.ground_speed, c.pitch_angle, c.air_density,
                                            s.rotor_diameter, s.rotor_count);
  const double power = (s.ground_speed * std::sin(c.pitch_angle) + vi) * thrust / s.power_efficiency;
  return power * distance / s.ground_speed;
}

struct Exhaustive {
  bool feasible = false;
  double cost = std::numeric_limits<double>::infinity();
  std::vector<int> choice;
};

// Tries every choice vector; keeps exact covers of the universe with minimum summed energy.
// Up to 3 drones, 6 customers and 16 plans per drone; plans serve random subsets of at most four
// universe customers, sometimes without an idle plan so that infeasible instances occur too.
inline mdd::PartitionInstance random_partition_instance(Gen& g) {
  mdd::PartitionInstance inst;
  const int customers = uniform_int(g, 0, 6);
  for (int i = 0; i < customers; ++i) inst.universe.push_back(static_cast<std::size_t>(10 + 3 * i));
  inst.plans.resize(static_cast<std::size_t>(uniform_int(g, 1, 3)));
  for (auto& list : inst.plans) {
    const int count = uniform_int(g, 1, 16);
    const bool idle = uniform(g, 0, 1) < 0.7;
    for (int k = idle ? 1 : 0; k < count; ++k) {
      mdd::Plan p;
      for (auto c : inst.universe) {
        if (p.customers.size() < 4 && uniform(g, 0, 1) < 0.35) p.customers.push_back(c);
      }
      std::shuffle(p.customers.begin(), p.customers.end(), g);
      p.energy = p.customers.empty() ? 0.0 : uniform(g, 1.0, 1000.0);
      list.push_back(std::move(p));
    }
    if (idle) list.push_back(mdd::Plan{});
  }
  return inst;
}

inline Exhaustive exhaustive_partition(const mdd::PartitionInstance& inst) {
  Exhaustive best;
  const std::size_t drones = inst.plans.size();
  std::vector<int> choice(drones, 0);
  for (std::size_t u = 0; u < drones; ++u) {
    if (inst.plans[u].empty()) return best;
  }
  while (true) {
    std::vector<std::size_t> served;
    double cost = 0.0;
    for (std::size_t u = 0; u < drones; ++u) {
      const auto& p = inst.plans[u][static_cast<std::size_t>(choice[u])];
      served.insert(served.end(), p.customers.begin(), p.customers.end());
      cost += p.energy;
    }
    std::sort(served.begin(), served.end());
    auto uni = inst.universe;
    std::sort(uni.begin(), uni.end());
    if (served == uni && cost < best.cost) {
      best.feasible = true;
      best.cost = cost;
      best.choice = choice;
    }
    std::size_t u = 0;
    while (u < drones && ++choice[u] == static_cast<int>(inst.plans[u].size())) choice[u++] = 0;
    if (u == drones) break;
  }
  return best;
}

// Small random world: 2-9 k-means areas, 1-5 drones, 1-8 windows, either reward scope.
inline mdd::WorldContext random_world(Gen& g) {
  mdd::ScenarioConfig c;
  c.map_bounds = {uniform(g, 2000, 8000), uniform(g, 2000, 8000)};
  c.num_depots = uniform_int(g, 2, 9);
  c.num_drones = uniform_int(g, 1, 5);
  c.num_windows = uniform_int(g, 1, 8);
  c.action_neighbors = uniform_int(g, 1, c.num_depots - 1);
  c.max_parcels_per_drone = uniform_int(g, 1, 4);
  c.rng_seed = g();
  c.layout_seed = g();
  c.cluster_count = uniform_int(g, 1, 6);
  c.cluster_sigma = uniform(g, 100, 900);
  c.alpha = uniform(g, 0, 1);
  c.reward_scope = uniform(g, 0, 1) < 0.5 ? mdd::RewardScope::fleet : mdd::RewardScope::observed;
  const mdd::DroneSpec d;
  auto rs = mdd::generate_synthetic(c, d, c.num_windows, uniform_int(g, c.num_depots, 15));
  std::vector<mdd::Point2D> pts;
  for (const auto& r : rs) pts.push_back(r.location);
  auto map = mdd::kmeans_segment(pts, c.num_depots, c.rng_seed, c.map_bounds, c.action_neighbors);
  return mdd::make_context(c, d, mdd::EnvironmentConstants{}, std::move(rs), std::move(map));
}

inline double path_length(const mdd::Point2D& start, const std::vector<mdd::Point2D>& pts,
                          const std::vector<std::size_t>& order, const mdd::Point2D& end) {
  double len = 0.0;
  mdd::Point2D at = start;
  for (auto i : order) {
    len += std::hypot(pts[i].x() - at.x(), pts[i].y() - at.y());
    at = pts[i];
  }
  return len + std::hypot(end.x() - at.x(), end.y() - at.y());
}

// Shortest start -> all customers -> end path over every permutation.
inline double best_path_length(const mdd::Point2D& start, const std::vector<mdd::Point2D>& pts,
                               const mdd::Point2D& end) {
  std::vector<std::size_t> order(pts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  double best = std::numeric_limits<double>::infinity();
  do {
    best = std::min(best, path_length(start, pts, order, end));
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

// Mean absolute difference over all ordered pairs over twice the mean.
inline double pairwise_gini(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double sum = 0.0, diff = 0.0;
  for (double a : x) {
    sum += a;
    for (double b : x) diff += std::abs(a - b);
  }
  if (sum == 0.0) return 0.0;
  return diff / (2.0 * n * n * (sum / n));
}

// Central differences of f with respect to every entry of `params`.
template <typename F>
Eigen::VectorXd numeric_gradient(Eigen::VectorXd& params, F&& f, double h = 1e-5) {
  Eigen::VectorXd g(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = f();
    params[i] = keep - h;
    const double down = f();
    params[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Largest |a - n| / max(|a|, |n|, floor) over the entries.
inline double max_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& n, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(n[i]), floor});
    worst = std::max(worst, std::abs(a[i] - n[i]) / scale);
  }
  return worst;
}

}  // namespace oracle
