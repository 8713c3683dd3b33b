#include "mdd/planner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace mdd {

std::vector<std::size_t> top_delayed_candidates(std::vector<CandidateKey> keys, int max_parcels) {
  std::sort(keys.begin(), keys.end(), [](const CandidateKey& a, const CandidateKey& b) {
    if (a.delay != b.delay) return a.delay > b.delay;
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.id < b.id;
  });
  const auto n = std::min(keys.size(), static_cast<std::size_t>(std::max(0, max_parcels)));
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(keys[i].index);
  return out;
}

std::vector<std::size_t> top_delayed_candidates(const WorldContext& ctx, const WorldState& state,
                                                const FlightRange& range, int max_parcels) {
  std::vector<char> in_range(static_cast<std::size_t>(ctx.map.size()), 0);
  for (int a : range.areas) in_range[static_cast<std::size_t>(a)] = 1;
  const Point2D& start = ctx.map.depot(range.start_depot);
  const double wh = ctx.config.window_hours();
  std::vector<CandidateKey> keys;
  for (std::size_t i : state.pending) {
    if (!in_range[static_cast<std::size_t>(ctx.request_area[i])]) continue;
    const Request& r = ctx.requests[i];
    keys.push_back({i, delay(state.window, r.demand_window, true, wh),
                    euclidean_distance(start, r.location), r.id});
  }
  return top_delayed_candidates(std::move(keys), max_parcels);
}

std::vector<std::vector<std::size_t>> enumerate_combinations(std::span<const std::size_t> candidates,
                                                             std::span<const double> masses,
                                                             double max_payload, int max_parcels) {
  if (candidates.size() != masses.size()) {
    throw std::invalid_argument("enumerate_combinations: one mass per candidate");
  }
  if (candidates.size() > 20) throw std::invalid_argument("enumerate_combinations: too many candidates");
  std::vector<std::vector<std::size_t>> out{{}};
  const std::uint32_t n = static_cast<std::uint32_t>(candidates.size());
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    if (std::popcount(mask) > max_parcels) continue;
    double mass = 0.0;
    std::vector<std::size_t> subset;
    for (std::uint32_t b = 0; b < n; ++b) {
      if (mask & (1u << b)) {
        mass += masses[b];
        subset.push_back(candidates[b]);
      }
    }
    if (mass <= max_payload + 1e-9) out.push_back(std::move(subset));
  }
  return out;
}

GreedyRoute greedy_route(const Point2D& start, std::span<const Point2D> customers,
                         const Point2D& end) {
  GreedyRoute route;
  std::vector<char> visited(customers.size(), 0);
  Point2D at = start;
  for (std::size_t step = 0; step < customers.size(); ++step) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < customers.size(); ++j) {
      if (visited[j]) continue;
      const double d = euclidean_distance(at, customers[j]);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    visited[best] = 1;
    route.order.push_back(best);
    route.length += best_d;
    at = customers[best];
  }
  route.length += euclidean_distance(at, end);
  return route;
}

Plan cost_plan(const WorldContext& ctx, int drone, int start_depot,
               std::span<const std::size_t> ordered_customers, int end_depot, double max_path) {
  Plan plan;
  plan.drone = drone;
  plan.start_depot = start_depot;
  plan.end_depot = end_depot;
  plan.customers.assign(ordered_customers.begin(), ordered_customers.end());

  std::vector<Stop> stops;
  stops.reserve(ordered_customers.size() + 2);
  stops.push_back({ctx.map.depot(start_depot), 0.0});
  for (std::size_t i : ordered_customers) {
    const Request& r = ctx.requests[i];
    stops.push_back({r.location, r.parcel_mass});
    plan.parcel_mass += r.parcel_mass;
  }
  stops.push_back({ctx.map.depot(end_depot), 0.0});
  for (std::size_t s = 1; s < stops.size(); ++s) {
    plan.path_length += euclidean_distance(stops[s - 1].location, stops[s].location);
  }

  plan.feasible = plan.parcel_mass <= ctx.drone.max_payload + 1e-9 &&
                  plan.path_length <= max_path * (1.0 + 1e-12);
  if (!plan.feasible) return plan;
  plan.energy = route_energy(ctx.drone, ctx.constants, stops);
  plan.feasible = plan.energy <= ctx.battery_capacity * (1.0 + 1e-12);
  return plan;
}

double solution_cost(const PartitionInstance& instance, std::span<const int> choice) {
  double cost = 0.0;
  for (std::size_t u = 0; u < instance.plans.size(); ++u) {
    cost += instance.plans[u][static_cast<std::size_t>(choice[u])].energy;
  }
  return cost;
}

namespace {

class Bits {
 public:
  explicit Bits(std::size_t n = 0) : words_((n + 63) / 64, 0) {}
  void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
  bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1u; }
  bool intersects(const Bits& o) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      if (words_[w] & o.words_[w]) return true;
    }
    return false;
  }
  void merge(const Bits& o) {
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] |= o.words_[w];
  }
  void remove(const Bits& o) {
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] &= ~o.words_[w];
  }

 private:
  std::vector<std::uint64_t> words_;
};

struct Option {
  int drone;
  int plan;
  double cost;
  int size;
  Bits mask;
};

class ExactCoverSearch {
 public:
  explicit ExactCoverSearch(const PartitionInstance& inst) : inst_(inst) {
    const std::size_t drones = inst.plans.size();
    std::map<std::size_t, std::size_t> position;
    for (std::size_t c = 0; c < inst.universe.size(); ++c) position[inst.universe[c]] = c;
    customers_ = inst.universe.size();

    by_drone_.resize(drones);
    by_customer_.resize(customers_);
    for (std::size_t u = 0; u < drones; ++u) {
      for (std::size_t k = 0; k < inst.plans[u].size(); ++k) {
        const Plan& p = inst.plans[u][k];
        Option opt{static_cast<int>(u), static_cast<int>(k), p.energy,
                   static_cast<int>(p.customers.size()), Bits(customers_)};
        for (std::size_t i : p.customers) {
          auto it = position.find(i);
          if (it == position.end()) {
            throw std::invalid_argument("partition plan serves a customer outside the universe");
          }
          opt.mask.set(it->second);
        }
        options_.push_back(std::move(opt));
      }
    }
    // Cheapest first, then drone, then plan index, so ties resolve lexicographically.
    std::vector<std::size_t> order(options_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const Option& x = options_[a];
      const Option& y = options_[b];
      if (x.cost != y.cost) return x.cost < y.cost;
      if (x.drone != y.drone) return x.drone < y.drone;
      return x.plan < y.plan;
    });
    for (std::size_t o : order) {
      by_drone_[static_cast<std::size_t>(options_[o].drone)].push_back(o);
      for (std::size_t c = 0; c < customers_; ++c) {
        if (options_[o].mask.test(c)) by_customer_[c].push_back(o);
      }
    }
  }

  PartitionSolution run() {
    PartitionSolution sol;
    assigned_.assign(inst_.plans.size(), 0);
    choice_.assign(inst_.plans.size(), -1);
    covered_ = Bits(customers_);
    covered_count_ = 0;
    best_cost_ = std::numeric_limits<double>::infinity();
    search(0.0);
    sol.nodes = nodes_;
    if (best_choice_.empty() && !inst_.plans.empty()) return sol;
    sol.feasible = true;
    sol.choice = best_choice_;
    sol.cost = inst_.plans.empty() ? 0.0 : best_cost_;
    return sol;
  }

 private:
  bool compatible(const Option& o) const {
    return !assigned_[static_cast<std::size_t>(o.drone)] && !o.mask.intersects(covered_);
  }

  void search(double partial) {
    ++nodes_;
    const std::size_t drones = inst_.plans.size();

    double bound = partial;
    int capacity = 0;
    int branch_kind = -1;  // 0: drone, 1: customer
    std::size_t branch_index = 0;
    std::size_t branch_count = std::numeric_limits<std::size_t>::max();
    bool any_free = false;

    for (std::size_t u = 0; u < drones; ++u) {
      if (assigned_[u]) continue;
      any_free = true;
      std::size_t count = 0;
      double cheapest = std::numeric_limits<double>::infinity();
      int largest = 0;
      for (std::size_t o : by_drone_[u]) {
        const Option& opt = options_[o];
        if (opt.mask.intersects(covered_)) continue;
        if (count == 0) cheapest = opt.cost;
        largest = std::max(largest, opt.size);
        ++count;
      }
      if (count == 0) return;
      bound += cheapest;
      capacity += largest;
      if (count < branch_count) {
        branch_count = count;
        branch_kind = 0;
        branch_index = u;
      }
    }

    const int uncovered = static_cast<int>(customers_ - covered_count_);
    if (!any_free) {
      if (uncovered == 0) accept();
      return;
    }
    if (capacity < uncovered) return;
    if (bound > best_cost_ + 1e-9 * std::max(1.0, std::abs(best_cost_))) return;

    for (std::size_t c = 0; c < customers_; ++c) {
      if (covered_.test(c)) continue;
      std::size_t count = 0;
      for (std::size_t o : by_customer_[c]) {
        if (compatible(options_[o])) ++count;
      }
      if (count == 0) return;
      if (count < branch_count) {
        branch_count = count;
        branch_kind = 1;
        branch_index = c;
      }
    }

    const auto& candidates = branch_kind == 0 ? by_drone_[branch_index] : by_customer_[branch_index];
    for (std::size_t o : candidates) {
      const Option& opt = options_[o];
      if (!compatible(opt)) continue;
      const auto u = static_cast<std::size_t>(opt.drone);
      assigned_[u] = 1;
      choice_[u] = opt.plan;
      covered_.merge(opt.mask);
      covered_count_ += static_cast<std::size_t>(opt.size);
      search(partial + opt.cost);
      covered_count_ -= static_cast<std::size_t>(opt.size);
      covered_.remove(opt.mask);
      choice_[u] = -1;
      assigned_[u] = 0;
    }
  }

  void accept() {
    const double cost = solution_cost(inst_, choice_);
    if (cost < best_cost_ || (cost == best_cost_ && choice_ < best_choice_)) {
      best_cost_ = cost;
      best_choice_ = choice_;
    }
  }

  const PartitionInstance& inst_;
  std::size_t customers_ = 0;
  std::vector<Option> options_;
  std::vector<std::vector<std::size_t>> by_drone_;
  std::vector<std::vector<std::size_t>> by_customer_;

  std::vector<char> assigned_;
  std::vector<int> choice_;
  Bits covered_;
  std::size_t covered_count_ = 0;
  double best_cost_ = 0.0;
  std::vector<int> best_choice_;
  std::size_t nodes_ = 0;
};

}  // namespace

PartitionSolution select_plans(const PartitionInstance& instance) {
  for (const auto& list : instance.plans) {
    if (list.empty()) throw std::invalid_argument("select_plans: a drone has no plans");
  }
  PartitionSolution sol;
  std::vector<char> reachable(instance.universe.size(), 0);
  std::map<std::size_t, std::size_t> position;
  for (std::size_t c = 0; c < instance.universe.size(); ++c) position[instance.universe[c]] = c;
  for (const auto& list : instance.plans) {
    for (const Plan& p : list) {
      for (std::size_t i : p.customers) {
        if (auto it = position.find(i); it != position.end()) reachable[it->second] = 1;
      }
    }
  }
  for (std::size_t c = 0; c < instance.universe.size(); ++c) {
    if (!reachable[c]) sol.uncoverable.push_back(instance.universe[c]);
  }
  if (!sol.uncoverable.empty()) return sol;
  return ExactCoverSearch(instance).run();
}

void write_instance(std::ostream& out, const PartitionInstance& instance) {
  const auto old_precision = out.precision(17);
  out << "universe " << instance.universe.size();
  for (std::size_t i : instance.universe) out << ' ' << i;
  out << '\n';
  for (std::size_t u = 0; u < instance.plans.size(); ++u) {
    out << "drone " << u << ' ' << instance.plans[u].size() << '\n';
    for (const Plan& p : instance.plans[u]) {
      out << "plan " << p.energy << ' ' << p.customers.size();
      for (std::size_t i : p.customers) out << ' ' << i;
      out << '\n';
    }
  }
  out.precision(old_precision);
}

PartitionInstance read_instance(std::istream& in) {
  PartitionInstance inst;
  std::string word;
  std::size_t n = 0;
  if (!(in >> word >> n) || word != "universe") throw std::runtime_error("instance: expected universe");
  inst.universe.resize(n);
  for (auto& i : inst.universe) {
    if (!(in >> i)) throw std::runtime_error("instance: truncated universe");
  }
  while (in >> word) {
    if (word != "drone") throw std::runtime_error("instance: expected drone, got " + word);
    std::size_t u = 0, count = 0;
    if (!(in >> u >> count) || u != inst.plans.size()) throw std::runtime_error("instance: bad drone line");
    auto& list = inst.plans.emplace_back();
    for (std::size_t k = 0; k < count; ++k) {
      Plan p;
      std::size_t m = 0;
      if (!(in >> word >> p.energy >> m) || word != "plan") throw std::runtime_error("instance: bad plan line");
      p.drone = static_cast<int>(u);
      p.customers.resize(m);
      for (auto& i : p.customers) {
        if (!(in >> i)) throw std::runtime_error("instance: truncated plan");
      }
      list.push_back(std::move(p));
    }
  }
  return inst;
}

FlightRange action_range(const WorldContext& ctx, int depot, int action) {
  const auto targets = ctx.map.action_targets(depot);
  if (action < 0 || action >= static_cast<int>(targets.size())) {
    throw std::out_of_range("action outside the legal action set");
  }
  FlightRange r;
  r.start_depot = depot;
  const int dest = targets[static_cast<std::size_t>(action)];
  r.areas = dest == depot ? std::vector<int>{depot} : std::vector<int>{depot, dest};
  r.end_depots = {dest};
  r.max_path = ctx.range_cap;
  return r;
}

FlightRange global_range(const WorldContext& ctx, int depot) {
  FlightRange r;
  r.start_depot = depot;
  r.areas.resize(static_cast<std::size_t>(ctx.map.size()));
  std::iota(r.areas.begin(), r.areas.end(), 0);
  r.end_depots = r.areas;
  r.max_path = ctx.range_cap;
  return r;
}

namespace {

std::vector<Plan> drone_plans(const WorldContext& ctx, int drone, const FlightRange& range,
                              std::span<const std::size_t> candidates, int max_parcels) {
  std::vector<double> masses;
  for (std::size_t i : candidates) masses.push_back(ctx.requests[i].parcel_mass);
  const auto combos = enumerate_combinations(candidates, masses, ctx.drone.max_payload, max_parcels);

  std::vector<Plan> plans;
  bool has_empty = false;
  const Point2D& start = ctx.map.depot(range.start_depot);
  for (const auto& combo : combos) {
    std::vector<Point2D> points;
    for (std::size_t i : combo) points.push_back(ctx.requests[i].location);
    for (int end : range.end_depots) {
      const auto route = greedy_route(start, points, ctx.map.depot(end));
      std::vector<std::size_t> ordered;
      for (std::size_t pos : route.order) ordered.push_back(combo[pos]);
      Plan p = cost_plan(ctx, drone, range.start_depot, ordered, end, range.max_path);
      if (!p.feasible) continue;
      if (combo.empty()) has_empty = true;
      plans.push_back(std::move(p));
    }
  }
  if (!has_empty) {
    plans.push_back(cost_plan(ctx, drone, range.start_depot, {}, range.start_depot, range.max_path));
  }
  return plans;
}

}  // namespace

WindowPlan plan_window(const WorldContext& ctx, const WorldState& state,
                       std::span<const FlightRange> ranges, const PlannerOptions& options) {
  const std::size_t drones = state.drones.size();
  if (ranges.size() != drones) throw std::invalid_argument("plan_window: one flight range per drone");

  WindowPlan out;
  out.routes.resize(drones);
  std::vector<std::vector<std::size_t>> candidates(drones);
  std::vector<char> in_universe(ctx.requests.size(), 0);
  for (std::size_t u = 0; u < drones; ++u) {
    candidates[u] = top_delayed_candidates(ctx, state, ranges[u], options.max_parcels);
    for (std::size_t i : candidates[u]) in_universe[i] = 1;
  }

  const double wh = ctx.config.window_hours();
  const auto least_delayed = [&](std::span<const std::size_t> pool) {
    // Lowest delay first; among equals, the most recently released request.
    return *std::min_element(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
      const double da = delay(state.window, ctx.requests[a].demand_window, true, wh);
      const double db = delay(state.window, ctx.requests[b].demand_window, true, wh);
      return da != db ? da < db : a > b;
    });
  };

  // Only the cheapest plan per customer set can be part of a minimum-energy selection.
  std::vector<std::vector<Plan>> generated(drones);
  for (std::size_t u = 0; u < drones; ++u) {
    std::map<std::vector<std::size_t>, std::size_t> best;
    for (Plan& p : drone_plans(ctx, static_cast<int>(u), ranges[u], candidates[u], options.max_parcels)) {
      auto key = p.customers;
      std::sort(key.begin(), key.end());
      auto [it, fresh] = best.try_emplace(key, generated[u].size());
      if (fresh) {
        generated[u].push_back(std::move(p));
      } else if (p.energy < generated[u][it->second].energy) {
        generated[u][it->second] = std::move(p);
      }
    }
  }

  // Drones sharing a candidate interact; everything else decomposes.
  std::vector<std::size_t> parent(drones);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::map<std::size_t, std::size_t> first_holder;
  for (std::size_t u = 0; u < drones; ++u) {
    for (std::size_t i : candidates[u]) {
      auto [it, fresh] = first_holder.try_emplace(i, u);
      if (!fresh) parent[find(u)] = find(it->second);
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> components;
  for (std::size_t u = 0; u < drones; ++u) components[find(u)].push_back(u);

  std::vector<char> allowed = in_universe;
  for (const auto& [root, members] : components) {
    std::vector<std::size_t> universe;
    for (std::size_t u : members) {
      for (std::size_t i : candidates[u]) universe.push_back(i);
    }
    std::sort(universe.begin(), universe.end());
    universe.erase(std::unique(universe.begin(), universe.end()), universe.end());

    while (true) {
      PartitionInstance inst;
      inst.universe = universe;
      inst.plans.resize(members.size());
      for (std::size_t k = 0; k < members.size(); ++k) {
        for (const Plan& p : generated[members[k]]) {
          if (std::all_of(p.customers.begin(), p.customers.end(),
                          [&](std::size_t i) { return allowed[i] != 0; })) {
            inst.plans[k].push_back(p);
          }
        }
      }

      // A customer only one drone can reach must ride with that drone's other such customers.
      std::optional<std::size_t> drop;
      for (std::size_t k = 0; k < members.size() && !drop; ++k) {
        std::vector<std::size_t> exclusive;
        for (std::size_t i : candidates[members[k]]) {
          if (!allowed[i]) continue;
          bool shared = false;
          for (std::size_t o = 0; o < members.size() && !shared; ++o) {
            if (o == k) continue;
            const auto& other = candidates[members[o]];
            shared = std::find(other.begin(), other.end(), i) != other.end();
          }
          if (!shared) exclusive.push_back(i);
        }
        if (exclusive.empty()) continue;
        const bool coverable = std::any_of(inst.plans[k].begin(), inst.plans[k].end(), [&](const Plan& p) {
          return std::all_of(exclusive.begin(), exclusive.end(), [&](std::size_t i) {
            return std::find(p.customers.begin(), p.customers.end(), i) != p.customers.end();
          });
        });
        if (!coverable) drop = least_delayed(exclusive);
      }

      if (!drop) {
        const auto sol = select_plans(inst);
        ++out.solves;
        out.solver_nodes += sol.nodes;
        if (sol.feasible) {
          for (std::size_t k = 0; k < members.size(); ++k) {
            out.routes[members[k]] = inst.plans[k][static_cast<std::size_t>(sol.choice[k])];
          }
          out.universe.insert(out.universe.end(), universe.begin(), universe.end());
          break;
        }
        drop = sol.uncoverable.empty() ? least_delayed(universe) : least_delayed(sol.uncoverable);
      }
      allowed[*drop] = 0;
      out.dropped.push_back(*drop);
      std::erase(universe, *drop);
    }
  }
  std::sort(out.universe.begin(), out.universe.end());
  return out;
}

}  // namespace mdd
