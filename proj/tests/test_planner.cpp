#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mdd/planner.hpp"
#include "oracles.hpp"

#include <set>
#include <sstream>

using namespace mdd;

namespace {

Request req(RequestId id, double x, double y, double mass, int window) {
  Request r;
  r.id = id;
  r.location = {x, y};
  r.parcel_mass = mass;
  r.demand_window = window;
  return r;
}

WorldContext context(std::vector<Request> requests, std::vector<Point2D> depots, int drones, int k = 1) {
  ScenarioConfig c;
  c.num_depots = static_cast<int>(depots.size());
  c.num_drones = drones;
  c.action_neighbors = k;
  ServiceMap map(MapKind::kmeans, c.map_bounds, std::move(depots), k);
  return make_context(c, DroneSpec{}, EnvironmentConstants{}, std::move(requests), map);
}

WorldState everything_pending(const WorldContext& ctx, int window) {
  WorldState s = initial_state(ctx);
  s.window = window;
  s.pending.clear();
  for (std::size_t i = 0; i < ctx.requests.size(); ++i) {
    s.pending.push_back(i);
    s.status[i] = RequestStatus::pending;
  }
  s.next_arrival = ctx.requests.size();
  return s;
}

Plan plan(std::vector<std::size_t> customers, double energy) {
  Plan p;
  p.customers = std::move(customers);
  p.energy = energy;
  return p;
}

}  // namespace

TEST_CASE("top delayed candidates") {
  std::vector<CandidateKey> keys{{0, 0.0, 10, 0}, {1, 2.0, 30, 1}, {2, 3.0, 50, 2}, {3, 1.0, 5, 3}, {4, 2.0, 20, 4}};
  CHECK(top_delayed_candidates(keys, 3) == std::vector<std::size_t>{2, 4, 1});
  CHECK(top_delayed_candidates({}, 3).empty());
  std::vector<CandidateKey> tied{{0, 1.0, 10, 9}, {1, 1.0, 10, 4}};
  CHECK(top_delayed_candidates(tied, 1) == std::vector<std::size_t>{1});

  const auto ctx = context({req(1, 100, 0, 0.5, 1), req(2, 200, 0, 0.5, 2), req(3, 9000, 0, 0.5, 1)},
                           {{0, 0}, {9000, 100}}, 1);
  auto s = everything_pending(ctx, 3);
  const auto stay = action_range(ctx, 0, 0);
  // Context order is (window, id): index 1 is the far request.
  CHECK(top_delayed_candidates(ctx, s, stay, 4) == std::vector<std::size_t>{0, 2});
  s.pending = {1};
  CHECK(top_delayed_candidates(ctx, s, stay, 4).empty());
}

TEST_CASE("enumerate combinations") {
  const std::size_t c3[] = {5, 6, 7};
  const double ones[] = {1.0, 1.0, 1.0};
  const auto all = enumerate_combinations(c3, ones, 2.5, 4);
  REQUIRE(all.size() == 7);
  CHECK(all.front().empty());
  for (std::size_t i = 1; i < all.size(); ++i) CHECK((all[i].size() == 1 || all[i].size() == 2));

  const double heavy[] = {1.0, 3.0, 1.0};
  for (const auto& s : enumerate_combinations(c3, heavy, 2.5, 4)) {
    CHECK(std::find(s.begin(), s.end(), std::size_t{6}) == s.end());
  }
  CHECK(enumerate_combinations({}, {}, 2.5, 4).size() == 1);

  oracle::Gen g(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = oracle::uniform_int(g, 0, 6);
    std::vector<std::size_t> cand;
    std::vector<double> mass;
    for (int i = 0; i < n; ++i) {
      cand.push_back(static_cast<std::size_t>(i));
      mass.push_back(oracle::uniform(g, 0.1, 2.0));
    }
    const int cap = oracle::uniform_int(g, 1, 4);
    std::size_t expected = 0;
    for (int m = 0; m < (1 << n); ++m) {
      double w = 0.0;
      for (int i = 0; i < n; ++i) w += (m >> i & 1) ? mass[static_cast<std::size_t>(i)] : 0.0;
      if (std::popcount(static_cast<unsigned>(m)) <= cap && w <= 2.5) ++expected;
    }
    CHECK(enumerate_combinations(cand, mass, 2.5, cap).size() == expected);
  }
}

TEST_CASE("greedy route") {
  const Point2D depot(0, 0), end(4, 0);
  const std::vector<Point2D> one{{3, 4}};
  const auto r1 = greedy_route(depot, one, Point2D(6, 0));
  CHECK(r1.order == std::vector<std::size_t>{0});
  CHECK(r1.length == doctest::Approx(5.0 + 5.0));

  const std::vector<Point2D> line{{3, 0}, {1, 0}, {2, 0}};
  const auto r = greedy_route(depot, line, end);
  CHECK(r.order == std::vector<std::size_t>{1, 2, 0});
  CHECK(r.length == doctest::Approx(4.0));

  oracle::Gen g(23);
  int optimal = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Point2D> pts;
    for (int i = 0; i < 4; ++i) pts.emplace_back(oracle::uniform(g, 0, 1e4), oracle::uniform(g, 0, 1e4));
    const Point2D s(oracle::uniform(g, 0, 1e4), oracle::uniform(g, 0, 1e4));
    const Point2D e(oracle::uniform(g, 0, 1e4), oracle::uniform(g, 0, 1e4));
    const auto route = greedy_route(s, pts, e);
    const double best = oracle::best_path_length(s, pts, e);
    CHECK(route.length >= best - 1e-9);
    CHECK(route.length == doctest::Approx(oracle::path_length(s, pts, route.order, e)).epsilon(1e-12));
    // Nearest-neighbour: every step goes to the closest customer not yet visited.
    std::set<std::size_t> left{0, 1, 2, 3};
    Point2D at = s;
    for (auto i : route.order) {
      for (auto j : left) CHECK(euclidean_distance(at, pts[i]) <= euclidean_distance(at, pts[j]));
      left.erase(i);
      at = pts[i];
    }
    if (route.length <= best + 1e-9) ++optimal;
  }
  CHECK(optimal > 0);
}

TEST_CASE("cost plan") {
  const auto ctx = context({req(1, 500, 0, 0.5, 1), req(2, 1000, 0, 0.7, 1), req(3, 9000, 0, 0.5, 1)},
                           {{0, 0}, {1500, 0}}, 1);
  const auto idle = cost_plan(ctx, 0, 0, {}, 0, ctx.range_cap);
  CHECK(idle.feasible);
  CHECK(idle.energy == 0.0);

  const std::size_t two[] = {0, 1};
  const auto p = cost_plan(ctx, 0, 0, two, 1, ctx.range_cap);
  CHECK(p.feasible);
  CHECK(p.path_length == doctest::Approx(1500.0));
  CHECK(p.parcel_mass == doctest::Approx(1.2));
  const double expect = oracle::leg_energy(ctx.drone, ctx.constants, 1.2, 500) +
                        oracle::leg_energy(ctx.drone, ctx.constants, 0.7, 500) +
                        oracle::leg_energy(ctx.drone, ctx.constants, 0.0, 500);
  CHECK(oracle::rel_err(p.energy, expect) < 1e-8);
  const auto back = cost_plan(ctx, 0, 0, two, 0, ctx.range_cap);
  CHECK(back.energy != p.energy);

  const std::size_t far[] = {2};
  CHECK_FALSE(cost_plan(ctx, 0, 0, far, 0, ctx.range_cap).feasible);
}

TEST_CASE("select plans: small examples") {
  PartitionInstance a;
  a.universe = {0};
  a.plans = {{plan({0}, 10.0), plan({0}, 7.0)}};
  auto s = select_plans(a);
  REQUIRE(s.feasible);
  CHECK(s.choice == std::vector<int>{1});
  CHECK(s.cost == 7.0);

  PartitionInstance b;
  b.universe = {0, 1};
  b.plans = {{plan({0}, 3.0), plan({1}, 5.0)}, {plan({0}, 4.0), plan({1}, 9.0)}};
  s = select_plans(b);
  REQUIRE(s.feasible);
  CHECK(s.cost == oracle::exhaustive_partition(b).cost);
  CHECK(s.choice == std::vector<int>{1, 0});

  PartitionInstance c;
  c.universe = {0, 1};
  c.plans = {{plan({}, 0.0), plan({0}, 3.0)}};
  s = select_plans(c);
  CHECK_FALSE(s.feasible);
  CHECK(s.uncoverable == std::vector<std::size_t>{1});
}

TEST_CASE("select plans equals exhaustive enumeration") {
  oracle::Gen g(2024);
  int feasible = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto inst = oracle::random_partition_instance(g);
    const auto sol = select_plans(inst);
    const auto ref = oracle::exhaustive_partition(inst);
    REQUIRE(sol.feasible == ref.feasible);
    if (!ref.feasible) continue;
    ++feasible;
    CHECK(solution_cost(inst, sol.choice) == ref.cost);
    CHECK(sol.cost == ref.cost);
    CHECK(select_plans(inst).choice == sol.choice);
  }
  CHECK(feasible > 100);
}

TEST_CASE("instance text format round trips") {
  oracle::Gen g(31);
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = oracle::random_partition_instance(g);
    std::stringstream ss;
    write_instance(ss, inst);
    const auto back = read_instance(ss);
    CHECK(back.universe == inst.universe);
    REQUIRE(back.plans.size() == inst.plans.size());
    for (std::size_t u = 0; u < inst.plans.size(); ++u) {
      REQUIRE(back.plans[u].size() == inst.plans[u].size());
      for (std::size_t k = 0; k < inst.plans[u].size(); ++k) {
        CHECK(back.plans[u][k].customers == inst.plans[u][k].customers);
        CHECK(back.plans[u][k].energy == inst.plans[u][k].energy);
      }
    }
  }
}

TEST_CASE("plan window: idle world") {
  const auto ctx = context({}, {{1000, 1000}, {5000, 5000}}, 2);
  const auto s = initial_state(ctx);
  std::vector<FlightRange> ranges{action_range(ctx, s.drones[0].depot, 0), action_range(ctx, s.drones[1].depot, 1)};
  const auto w = plan_window(ctx, s, ranges, PlannerOptions{});
  for (const auto& p : w.routes) {
    CHECK(p.customers.empty());
    CHECK(p.energy == 0.0);
  }
}

TEST_CASE("plan window: one drone over its payload keeps the most delayed it can carry") {
  const auto ctx = context({req(1, 100, 100, 1.0, 1), req(2, 200, 0, 1.0, 2), req(3, 0, 300, 1.0, 3),
                            req(4, 300, 300, 1.0, 4)},
                           {{0, 0}, {6000, 6000}}, 1);
  const auto s = everything_pending(ctx, 5);
  const FlightRange r[] = {action_range(ctx, 0, 0)};
  const auto w = plan_window(ctx, s, r, PlannerOptions{});
  auto served = w.routes[0].customers;
  std::sort(served.begin(), served.end());
  CHECK(served == std::vector<std::size_t>{0, 1});
  CHECK(w.universe == served);
  // Among every payload-feasible subset covering that universe, the chosen plan is cheapest.
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order{0, 1};
  do {
    best = std::min(best, cost_plan(ctx, 0, 0, order, 0, ctx.range_cap).energy);
  } while (std::next_permutation(order.begin(), order.end()));
  CHECK(w.routes[0].energy <= best + 1e-9);
}

TEST_CASE("plan window: overlapping candidates are served once") {
  oracle::Gen g(77);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Request> rs;
    for (int i = 0; i < 12; ++i) {
      rs.push_back(req(i, oracle::uniform(g, 0, 2000), oracle::uniform(g, 0, 2000), oracle::uniform(g, 0.2, 1.0),
                       oracle::uniform_int(g, 1, 3)));
    }
    const auto ctx = context(rs, {{500, 500}, {1500, 1500}, {500, 1500}}, 3, 2);
    const auto s = everything_pending(ctx, 4);
    std::vector<FlightRange> ranges;
    for (int u = 0; u < 3; ++u) ranges.push_back(action_range(ctx, s.drones[static_cast<std::size_t>(u)].depot, oracle::uniform_int(g, 0, 2)));
    const auto w = plan_window(ctx, s, ranges, PlannerOptions{});
    REQUIRE(w.routes.size() == 3);
    std::vector<std::size_t> all;
    for (std::size_t u = 0; u < 3; ++u) {
      const auto& p = w.routes[u];
      CHECK(p.feasible);
      CHECK(p.start_depot == ranges[u].start_depot);
      CHECK(p.path_length <= ctx.range_cap + 1e-9);
      CHECK(p.parcel_mass <= ctx.drone.max_payload + 1e-12);
      all.insert(all.end(), p.customers.begin(), p.customers.end());
    }
    std::sort(all.begin(), all.end());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
    CHECK(all == w.universe);
  }
}

TEST_CASE("global range is a superset of every action range") {
  oracle::Gen g(5);
  std::vector<Point2D> pts;
  for (int i = 0; i < 200; ++i) pts.emplace_back(oracle::uniform(g, 0, 1e4), oracle::uniform(g, 0, 1e4));
  const auto map = kmeans_segment(pts, 16, 1, Bounds{}, 3);
  const auto ctx = make_context(ScenarioConfig{}, DroneSpec{}, EnvironmentConstants{}, {}, map);
  for (int d = 0; d < map.size(); ++d) {
    const auto global = global_range(ctx, d);
    for (int a = 0; a < 4; ++a) {
      const auto r = action_range(ctx, d, a);
      for (int area : r.areas) CHECK(std::find(global.areas.begin(), global.areas.end(), area) != global.areas.end());
      for (int e : r.end_depots) CHECK(std::find(global.end_depots.begin(), global.end_depots.end(), e) != global.end_depots.end());
    }
  }
}
