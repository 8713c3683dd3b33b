#pragma once

// Episode loop: each window every drone picks a flight range (or a plan), the planner produces
// routes, rewards are computed and the world advances.

#include "mdd/planner.hpp"
#include "mdd/world.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace mdd {

/// Chooses an action index from a legal-action mask. `input` holds one encoded observation per
/// column, oldest first, `history()` columns in total.
class ActionSelector {
 public:
  virtual ~ActionSelector() = default;
  virtual int history() const { return 1; }
  virtual int select(const Eigen::MatrixXd& input, std::span<const char> mask, Rng& rng) = 0;
};

/// Uniform over the legal actions.
class UniformSelector final : public ActionSelector {
 public:
  int select(const Eigen::MatrixXd& input, std::span<const char> mask, Rng& rng) override;
};

/// Always the same action when legal, otherwise the first legal action.
class FixedSelector final : public ActionSelector {
 public:
  explicit FixedSelector(int action) : action_(action) {}
  int select(const Eigen::MatrixXd& input, std::span<const char> mask, Rng& rng) override;

 private:
  int action_;
};

/// What one agent saw and did in a window.
struct AgentStep {
  Eigen::MatrixXd input;  // observation features x history
  std::vector<char> mask;
  int action = -1;
};

struct WindowDecision {
  std::vector<Plan> routes;                       // one per drone
  std::vector<std::vector<std::size_t>> visible;  // requests each drone observed
  std::vector<AgentStep> agents;                  // empty for controllers without agents
  std::size_t dropped = 0;                        // universe reductions this window
};

/// Produces every drone's route for the current window.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset(const WorldContext& ctx) { (void)ctx; }
  virtual WindowDecision decide(const WorldContext& ctx, const WorldState& state, Rng& rng) = 0;
};

/// Stacks the last `length` encoded observations of each drone, zero padded before the first.
class ObservationHistory {
 public:
  void reset(int drones, int features, int length);
  Eigen::MatrixXd push(int drone, const Eigen::VectorXd& features);

 private:
  int features_ = 0;
  int length_ = 1;
  std::vector<Eigen::MatrixXd> stacks_;
};

/// Flight-range selection followed by optimized plan selection. With a uniform selector this is
/// random range selection; with a trained actor it is the learned method.
class RangeController final : public Controller {
 public:
  RangeController(std::shared_ptr<ActionSelector> selector, PlannerOptions options);
  void reset(const WorldContext& ctx) override;
  WindowDecision decide(const WorldContext& ctx, const WorldState& state, Rng& rng) override;

 private:
  std::shared_ptr<ActionSelector> selector_;
  PlannerOptions options_;
  ObservationHistory history_;
};

/// Optimized plan selection over the whole map with every depot as a legal end point.
class GlobalController final : public Controller {
 public:
  explicit GlobalController(PlannerOptions options) : options_(options) {}
  WindowDecision decide(const WorldContext& ctx, const WorldState& state, Rng& rng) override;

 private:
  PlannerOptions options_;
};

/// Each drone picks one of its own candidate plans directly; no joint optimization. Slot 0 is
/// staying idle at the current depot, slot j >= 1 is the j-th non-empty payload-feasible
/// combination of the drone's most delayed candidates (own and neighbouring areas), routed to
/// whichever of those areas' depots costs least. Requests claimed by an earlier drone are not
/// offered to later ones.
class PlanChoiceController final : public Controller {
 public:
  PlanChoiceController(std::shared_ptr<ActionSelector> selector, int max_parcels);
  void reset(const WorldContext& ctx) override;
  WindowDecision decide(const WorldContext& ctx, const WorldState& state, Rng& rng) override;

  static int slot_count(int max_parcels) { return 1 << max_parcels; }
  static constexpr int kFeaturesPerSlot = 4;
  static int input_size(int num_areas, int k, int max_parcels) {
    return observation_size(num_areas, k) + kFeaturesPerSlot * slot_count(max_parcels);
  }

 private:
  std::shared_ptr<ActionSelector> selector_;
  int max_parcels_;
  ObservationHistory history_;
};

/// One agent transition. The next step is the same drone's step in the following window.
struct Transition {
  int drone = 0;
  int window = 0;
  Eigen::MatrixXd observation;
  std::vector<char> mask;
  int action = 0;
  double reward = 0.0;
  Eigen::MatrixXd next_observation;
  std::vector<char> next_mask;
  int next_action = 0;
  bool terminal = false;
};

struct TraceRow {
  int window = 0;
  int drone = 0;
  int action = -1;
  Plan plan;
  double battery_after = 1.0;
  double reward = 0.0;
  double observed_delay = 0.0;        // hours, delay term fed to the reward
  std::vector<double> served_delays;  // hours, per customer in visiting order
};

struct WindowCounts {
  int window = 0;
  std::size_t delivered = 0;
  std::size_t pending = 0;
  std::size_t not_arrived = 0;
  double delay_sum = 0.0;  // hours, pending requests after this window's deliveries
  double seconds = 0.0;    // controller wall time
};

struct EpisodeTrace {
  std::vector<TraceRow> rows;
  std::vector<WindowCounts> windows;
  std::vector<int> delivered_window;  // per request, 0 if never delivered
};

struct EpisodeMetrics {
  double total_energy = 0.0;     // joules over all drones
  double mean_energy_kj = 0.0;   // per drone
  double delay_sum = 0.0;        // hours
  double avg_delay = 0.0;        // hours per request
  double delay_unfairness = 0.0;
  double avg_running_time = 0.0;  // seconds per window
  double avg_early_arrival = 0.0;
  std::vector<double> depot_load;  // kg
  std::vector<double> area_delay;  // hours
  std::size_t delivered = 0;
  std::size_t requests = 0;
  double mean_reward = 0.0;
};

struct EpisodeOptions {
  RewardNormalizers normalizers;
  bool record_transitions = false;
  bool check_invariants = true;
};

struct EpisodeResult {
  EpisodeMetrics metrics;
  EpisodeTrace trace;
  std::vector<Transition> transitions;
};

/// Runs T windows. Invariants (conservation, single service, depot endpoints, payload and range
/// caps, battery) are checked every window when enabled and raise std::logic_error.
EpisodeResult run_episode(const WorldContext& ctx, Controller& controller, Rng& rng,
                          const EpisodeOptions& options);

/// Normalizers whose delay scale is the mean per-drone observed delay of one episode under
/// uniform flight-range selection (seeded by `seed`); energy is scaled by the battery capacity.
RewardNormalizers calibrated_normalizers(const WorldContext& ctx, std::uint64_t seed,
                                         const PlannerOptions& options);

/// Per-window, per-drone CSV: window, drone, action, start, end, route ids, path, energy, mass,
/// battery after, reward, served delays.
void write_trace_csv(std::ostream& out, const WorldContext& ctx, const EpisodeTrace& trace);

}  // namespace mdd
