#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mdd/environment.hpp"
#include "mdd/dataset.hpp"
#include "mdd/metrics.hpp"
#include "oracles.hpp"

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

WorldContext small_world(std::vector<Request> rs, std::vector<Point2D> depots, int drones, int windows,
                         int k = 1) {
  ScenarioConfig c;
  c.num_depots = static_cast<int>(depots.size());
  c.num_drones = drones;
  c.num_windows = windows;
  c.action_neighbors = k;
  ServiceMap map(MapKind::kmeans, c.map_bounds, std::move(depots), k);
  return make_context(c, DroneSpec{}, EnvironmentConstants{}, std::move(rs), map);
}

// Random scenario: a few depots by k-means over random demand, random fleet and horizon.
}  // namespace

TEST_CASE("delay") {
  CHECK(delay(3, 1, true, 0.5) == 1.0);
  CHECK(delay(2, 5, true, 0.5) == 0.0);
  CHECK(delay(9, 1, false, 0.5) == 0.0);
  CHECK(delay(4, 4, true, 0.5) == 0.0);
}

TEST_CASE("advance window") {
  const auto ctx = small_world({req(1, 100, 0, 0.5, 1), req(2, 200, 0, 0.5, 1), req(3, 300, 0, 0.5, 2),
                                req(4, 400, 0, 0.5, 1)},
                               {{0, 0}, {5000, 5000}}, 1, 4);
  const auto s0 = initial_state(ctx);
  CHECK(s0.window == 1);
  CHECK(s0.pending == std::vector<std::size_t>{0, 1, 2});  // sorted by window: ids 1, 2, 4 due at 1

  Plan idle;
  idle.drone = 0;
  const auto s1 = advance_window(ctx, s0, std::vector<Plan>{idle});
  CHECK(s1.window == 2);
  CHECK(s1.pending == std::vector<std::size_t>{0, 1, 2, 3});

  Plan serve = idle;
  serve.customers = {0, 1};
  const auto s2 = advance_window(ctx, s1, std::vector<Plan>{serve});
  CHECK(s2.pending == std::vector<std::size_t>{2, 3});
  CHECK(s2.status[0] == RequestStatus::delivered);
  CHECK(s2.delivered_window[0] == 2);

  CHECK_THROWS_AS(advance_window(ctx, s2, std::vector<Plan>{serve}), std::logic_error);
  const auto ctx2 = small_world(ctx.requests, {{0, 0}, {5000, 5000}}, 2, 4);
  auto a = serve, b = serve;
  b.drone = 1;
  CHECK_THROWS_AS(advance_window(ctx2, initial_state(ctx2), std::vector<Plan>{a, b}), std::logic_error);
}

TEST_CASE("advance window moves drones and swaps batteries") {
  const auto ctx = small_world({req(1, 100, 0, 0.5, 1)}, {{0, 0}, {3000, 0}}, 1, 2);
  auto s = initial_state(ctx);
  s.drones[0].battery = 0.3;
  Plan p;
  p.drone = 0;
  p.start_depot = 0;
  p.end_depot = 1;
  const auto next = advance_window(ctx, s, std::vector<Plan>{p});
  CHECK(next.drones[0].depot == 1);
  CHECK(next.drones[0].battery == 1.0);
}

TEST_CASE("observe") {
  const auto empty = small_world({}, {{0, 0}, {5000, 0}, {0, 5000}}, 2, 3, 2);
  const auto s = initial_state(empty);
  const auto o = observe(empty, s, 0);
  CHECK(o.battery == 1.0);
  CHECK(o.own.sum == 0.0);
  CHECK(o.own.count == 0);
  for (const auto& n : o.neighbors) CHECK(n.count == 0);
  const auto enc = o.encode(3);
  CHECK(enc.size() == observation_size(3, 2));
  CHECK((enc == observe(empty, s, 0).encode(3)));

  const auto ctx = small_world({req(1, 100, 0, 0.5, 1), req(2, 4900, 0, 0.5, 1), req(3, 4800, 0, 0.5, 1)},
                               {{0, 0}, {5000, 0}}, 1, 4);
  auto st = initial_state(ctx);
  st.window = 3;
  const auto obs = observe(ctx, st, 0);
  CHECK(obs.own.count == 1);
  CHECK(obs.own.sum == doctest::Approx(1.0));
  REQUIRE(obs.neighbors.size() == 1);
  CHECK(obs.neighbors[0].count == 2);
  CHECK(obs.neighbors[0].max == doctest::Approx(1.0));
  CHECK(obs.visible.size() == 3);
}

TEST_CASE("reward") {
  const RewardNormalizers n{2.0, 1000.0, 0.0, 0.0};
  CHECK(reward(0.3, 0.0, 0.0, n) == doctest::Approx(-0.5));
  CHECK(reward(0.0, 1.0, 0.0, n) == reward(0.0, 1.0, 5e4, n));
  CHECK(reward(1.0, 0.0, 300.0, n) == reward(1.0, 9.0, 300.0, n));
  oracle::Gen g(1);
  for (int i = 0; i < 1000; ++i) {
    const double r = reward(oracle::uniform(g, 0, 1), oracle::uniform(g, 0, 50), oracle::uniform(g, 0, 1e5), n);
    CHECK(r < 0.0);
    CHECK(r > -1.0);
  }
}

TEST_CASE("run episode: forced optimum and empty fleet") {
  const auto one = small_world({req(1, 1000, 1000, 0.5, 1)}, {{1000, 1000}, {6000, 6000}}, 1, 3);
  RangeController ctl(std::make_shared<FixedSelector>(0), PlannerOptions{});
  Rng rng(1);
  const auto r = run_episode(one, ctl, rng, EpisodeOptions{});
  CHECK(r.metrics.delivered == 1);
  CHECK(r.trace.delivered_window[0] == 1);
  CHECK(r.metrics.avg_delay == 0.0);

  const auto none = small_world({req(1, 1000, 1000, 0.5, 1), req(2, 2000, 1000, 0.5, 2)}, {{0, 0}, {6000, 6000}}, 0, 4);
  RangeController idle(std::make_shared<UniformSelector>(), PlannerOptions{});
  const auto z = run_episode(none, idle, rng, EpisodeOptions{});
  CHECK(z.metrics.total_energy == 0.0);
  CHECK(z.metrics.delivered == 0);
  // Pending from t_i to T: (0 + 0.5 + 1 + 1.5) + (0 + 0.5 + 1) hours.
  CHECK(z.metrics.delay_sum == doctest::Approx(4.5));
}

TEST_CASE("run episode is deterministic for a fixed seed") {
  oracle::Gen g(99);
  const auto ctx = oracle::random_world(g);
  auto run = [&] {
    RangeController ctl(std::make_shared<UniformSelector>(), PlannerOptions{ctx.config.max_parcels_per_drone});
    Rng rng(5);
    EpisodeOptions o;
    o.record_transitions = true;
    return run_episode(ctx, ctl, rng, o);
  };
  const auto a = run(), b = run();
  CHECK(a.metrics.total_energy == b.metrics.total_energy);
  CHECK(a.metrics.delay_sum == b.metrics.delay_sum);
  CHECK(a.trace.delivered_window == b.trace.delivered_window);
  REQUIRE(a.transitions.size() == b.transitions.size());
  for (std::size_t i = 0; i < a.transitions.size(); ++i) {
    CHECK(a.transitions[i].action == b.transitions[i].action);
    CHECK(a.transitions[i].reward == b.transitions[i].reward);
  }
}

TEST_CASE("episode invariants over random worlds and controllers") {
  oracle::Gen g(7);
  for (int trial = 0; trial < 40; ++trial) {
    const auto ctx = oracle::random_world(g);
    const PlannerOptions opt{ctx.config.max_parcels_per_drone};
    std::unique_ptr<Controller> ctl;
    switch (trial % 3) {
      case 0: ctl = std::make_unique<RangeController>(std::make_shared<UniformSelector>(), opt); break;
      case 1: ctl = std::make_unique<GlobalController>(opt); break;
      default: ctl = std::make_unique<PlanChoiceController>(std::make_shared<UniformSelector>(), opt.max_parcels);
    }
    Rng rng(g());
    EpisodeOptions o;
    o.record_transitions = true;
    EpisodeResult r;
    REQUIRE_NOTHROW(r = run_episode(ctx, *ctl, rng, o));

    std::vector<int> served(ctx.requests.size(), 0);
    std::vector<int> at(static_cast<std::size_t>(ctx.config.num_drones));
    for (int u = 0; u < ctx.config.num_drones; ++u) at[static_cast<std::size_t>(u)] = u % ctx.map.size();
    for (const auto& row : r.trace.rows) {
      CHECK(row.plan.start_depot == at[static_cast<std::size_t>(row.drone)]);
      at[static_cast<std::size_t>(row.drone)] = row.plan.end_depot;
      CHECK(row.plan.path_length <= ctx.range_cap * (1 + 1e-12));
      CHECK(row.plan.parcel_mass <= ctx.drone.max_payload + 1e-12);
      CHECK(row.battery_after >= 0.0);
      CHECK(row.reward < 0.0);
      CHECK(row.reward >= -1.0);
      for (auto i : row.plan.customers) {
        ++served[i];
        CHECK(ctx.requests[i].demand_window <= row.window);
      }
    }
    for (std::size_t i = 0; i < served.size(); ++i) {
      CHECK(served[i] <= 1);
      CHECK((served[i] == 1) == (r.trace.delivered_window[i] > 0));
    }
    for (const auto& w : r.trace.windows) CHECK(w.delivered + w.pending + w.not_arrived == ctx.requests.size());
    CHECK(r.metrics.avg_delay == doctest::Approx(r.metrics.delay_sum / std::max<std::size_t>(1, ctx.requests.size())));
    for (const auto& t : r.transitions) {
      REQUIRE(t.action >= 0);
      CHECK(t.mask[static_cast<std::size_t>(t.action)]);
    }
  }
}

TEST_CASE("delay of a request grows until it is delivered") {
  oracle::Gen g(13);
  const auto ctx = oracle::random_world(g);
  RangeController ctl(std::make_shared<UniformSelector>(), PlannerOptions{ctx.config.max_parcels_per_drone});
  Rng rng(3);
  const auto r = run_episode(ctx, ctl, rng, EpisodeOptions{});
  const double wh = ctx.config.window_hours();
  for (std::size_t i = 0; i < ctx.requests.size(); ++i) {
    const int dw = r.trace.delivered_window[i];
    double last = 0.0;
    for (int t = 1; t <= ctx.config.num_windows; ++t) {
      const bool pending = t >= ctx.requests[i].demand_window && (dw == 0 || t <= dw);
      const double d = delay(t, ctx.requests[i].demand_window, pending, wh);
      if (pending) CHECK(d >= last);
      last = d;
    }
  }
}

TEST_CASE("fleet and observed reward scopes") {
  const auto base = small_world({req(1, 100, 0, 0.5, 1), req(2, 9000, 9000, 0.5, 1)}, {{0, 0}, {9000, 9000}}, 2, 2);
  auto observed_ctx = base;
  observed_ctx.config.reward_scope = RewardScope::observed;
  auto run = [&](const WorldContext& ctx) {
    RangeController ctl(std::make_shared<FixedSelector>(0), PlannerOptions{});
    Rng rng(1);
    return run_episode(ctx, ctl, rng, EpisodeOptions{});
  };
  // Both drones clear their own request in window 1, so nothing is carried into window 2 either way.
  const auto f = run(base);
  const auto o = run(observed_ctx);
  for (const auto& row : f.trace.rows) CHECK(row.observed_delay == 0.0);
  for (const auto& row : o.trace.rows) CHECK(row.observed_delay == 0.0);

  // Drone 1 sees only areas 1 and 2: the left-over request is shared by the fleet but not seen by it.
  const auto lopsided = small_world({req(1, 100, 0, 0.5, 1), req(2, 200, 0, 0.5, 1), req(3, 300, 0, 0.5, 1),
                                     req(4, 400, 0, 0.5, 1), req(5, 500, 0, 0.5, 1)},
                                    {{0, 0}, {9000, 9000}, {9500, 9500}}, 2, 2);
  auto lopsided_obs = lopsided;
  lopsided_obs.config.reward_scope = RewardScope::observed;
  const auto lf = run(lopsided);
  const auto lo = run(lopsided_obs);
  // Window 1: drone 0 carries four of five parcels; one 0.5 h delay remains for window 2.
  CHECK(lf.trace.rows[0].observed_delay == doctest::Approx(0.25));
  CHECK(lf.trace.rows[1].observed_delay == doctest::Approx(0.25));
  CHECK(lo.trace.rows[0].observed_delay == doctest::Approx(0.5));
  CHECK(lo.trace.rows[1].observed_delay == 0.0);
}

TEST_CASE("trace csv has a header and one row per drone and window") {
  const auto ctx = small_world({req(1, 100, 0, 0.5, 1)}, {{0, 0}, {3000, 0}}, 2, 3);
  RangeController ctl(std::make_shared<UniformSelector>(), PlannerOptions{});
  Rng rng(1);
  const auto r = run_episode(ctx, ctl, rng, EpisodeOptions{});
  std::ostringstream out;
  write_trace_csv(out, ctx, r.trace);
  const auto text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 2 * 3);
  CHECK(text.rfind("window,drone,action", 0) == 0);
}

TEST_CASE("calibrated normalizers are positive and reproducible") {
  oracle::Gen g(41);
  const auto ctx = oracle::random_world(g);
  const auto a = calibrated_normalizers(ctx, 3, PlannerOptions{ctx.config.max_parcels_per_drone});
  const auto b = calibrated_normalizers(ctx, 3, PlannerOptions{ctx.config.max_parcels_per_drone});
  CHECK(a.delay_scale > 0.0);
  CHECK(a.delay_scale == b.delay_scale);
  CHECK(a.energy_scale == ctx.battery_capacity);
}
