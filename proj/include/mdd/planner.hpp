#pragma once

// Optimized plan selection for one window: pick the most delayed requests each drone may reach,
// enumerate payload-feasible customer combinations, route each greedily, cost it with the energy
// model, then choose one plan per drone so every selected request is served exactly once at
// minimum total energy.

#include "mdd/energy.hpp"
#include "mdd/world.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace mdd {

/// Where a drone may fly this window: requests in `areas` are eligible, routes start at
/// `start_depot` and end at one of `end_depots`, and may be at most `max_path` meters long.
struct FlightRange {
  int start_depot = 0;
  std::vector<int> areas;
  std::vector<int> end_depots;
  double max_path = 0.0;
};

struct CandidateKey {
  std::size_t index = 0;  // request index
  double delay = 0.0;
  double distance = 0.0;  // to the start depot
  RequestId id = 0;
};

/// Up to `max_parcels` keys ordered by delay (descending), distance, then id.
std::vector<std::size_t> top_delayed_candidates(std::vector<CandidateKey> keys, int max_parcels);

std::vector<std::size_t> top_delayed_candidates(const WorldContext& ctx, const WorldState& state,
                                                const FlightRange& range, int max_parcels);

/// All subsets (as candidate values, in candidate order) of size <= max_parcels whose total mass
/// fits the payload. The empty subset comes first; the rest follow in bitmask order.
std::vector<std::vector<std::size_t>> enumerate_combinations(std::span<const std::size_t> candidates,
                                                             std::span<const double> masses,
                                                             double max_payload, int max_parcels);

struct GreedyRoute {
  std::vector<std::size_t> order;  // positions into the customer list
  double length = 0.0;
};

/// Nearest-neighbour order from `start` through every customer, then to `end`.
GreedyRoute greedy_route(const Point2D& start, std::span<const Point2D> customers,
                         const Point2D& end);

/// Energy and feasibility of visiting `ordered_customers` from `start_depot` to `end_depot`.
/// A plan is infeasible when it is longer than `max_path`, heavier than the payload or needs
/// more than `battery_capacity` joules.
Plan cost_plan(const WorldContext& ctx, int drone, int start_depot,
               std::span<const std::size_t> ordered_customers, int end_depot, double max_path);

/// One-plan-per-drone selection problem. Plans must be feasible and reference only universe
/// customers.
struct PartitionInstance {
  std::vector<std::vector<Plan>> plans;  // per drone
  std::vector<std::size_t> universe;
};

struct PartitionSolution {
  bool feasible = false;
  std::vector<int> choice;  // plan index per drone
  double cost = 0.0;
  std::vector<std::size_t> uncoverable;  // universe customers that appear in no plan
  std::size_t nodes = 0;
};

/// Exact minimum-energy exact cover by depth-first branch and bound. Branches on the drone or
/// customer with the fewest compatible plans, bounding by the cheapest compatible plan per free
/// drone and by how many customers the free drones can still carry. Ties go to the
/// lexicographically smallest choice vector.
PartitionSolution select_plans(const PartitionInstance& instance);

/// Sum of chosen plan energies, accumulated in drone order.
double solution_cost(const PartitionInstance& instance, std::span<const int> choice);

/// Plain-text instance format:
///   universe <n> <request index>...
///   drone <u> <plan count>
///   plan <energy> <customer count> <request index>...
void write_instance(std::ostream& out, const PartitionInstance& instance);
PartitionInstance read_instance(std::istream& in);

struct PlannerOptions {
  int max_parcels = 4;
};

struct WindowPlan {
  std::vector<Plan> routes;               // one per drone
  std::vector<std::size_t> universe;      // customers finally required to be covered
  std::vector<std::size_t> dropped;       // removed from the universe to restore feasibility
  std::size_t solver_nodes = 0;
  int solves = 0;
};

/// Generates each drone's plans (one plan per combination and end depot, plus a stay plan when the
/// drone has no feasible empty plan), then solves the selection. While the selection is
/// infeasible, the least delayed customer is dropped from the universe (uncoverable customers
/// first) and the problem re-solved.
WindowPlan plan_window(const WorldContext& ctx, const WorldState& state,
                       std::span<const FlightRange> ranges, const PlannerOptions& options);

/// Flight range of drone at `depot` choosing action `action` (0 = stay, j = j-th nearest depot).
FlightRange action_range(const WorldContext& ctx, int depot, int action);

/// Whole-map range: every area eligible and every depot a legal end point.
FlightRange global_range(const WorldContext& ctx, int depot);

}  // namespace mdd
