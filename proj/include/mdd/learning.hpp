#pragma once

// Shared-parameter actor-critic PPO for the per-drone action choice. Small tanh networks with
// hand-written backpropagation over a flat parameter vector.

#include "mdd/environment.hpp"

#include <Eigen/Core>

#include "json.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mdd {

/// Input is a features x history matrix. Feed-forward nets flatten it column by column; the
/// recurrent variant runs an Elman cell over the columns and feeds its last state onward.
struct NetworkShape {
  int input = 1;
  int history = 1;
  int hidden = 64;
  int output = 1;
  bool recurrent = false;

  bool operator==(const NetworkShape&) const = default;
};

/// Two tanh hidden layers and a linear output.
class Network {
 public:
  struct Tape {
    Eigen::MatrixXd input;
    std::vector<Eigen::VectorXd> first;  // first hidden layer, one state per unrolled step
    Eigen::VectorXd second;
  };

  explicit Network(NetworkShape shape);

  const NetworkShape& shape() const { return shape_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, output layer scaled by 0.1.
  void initialize(Rng& rng);

  Eigen::VectorXd forward(const Eigen::MatrixXd& input) const;
  Eigen::VectorXd forward(const Eigen::MatrixXd& input, Tape& tape) const;
  /// Adds d(out . grad_out)/d(params) to `grad`.
  void backward(const Tape& tape, const Eigen::VectorXd& grad_out, Eigen::VectorXd& grad) const;

 private:
  struct Layout {
    Eigen::Index w1, u1, b1, w2, b2, w3, b3, total;
  };
  Layout layout() const;
  int first_input() const;

  NetworkShape shape_;
  Eigen::VectorXd params_;
};

/// Softmax over the legal entries; illegal entries get probability 0.
Eigen::VectorXd masked_softmax(const Eigen::VectorXd& logits, std::span<const char> mask);

class PolicyNetwork {
 public:
  PolicyNetwork(int features, int history, int actions, int hidden, bool recurrent);
  explicit PolicyNetwork(Network net) : net_(std::move(net)) {}

  int actions() const { return net_.shape().output; }
  Network& network() { return net_; }
  const Network& network() const { return net_; }

  Eigen::VectorXd probabilities(const Eigen::MatrixXd& input, std::span<const char> mask) const;

 private:
  Network net_;
};

enum class CriticKind { q, v };

/// Q(o, a) takes the action one-hot appended to every input column; V(o) ignores the action.
class ValueNetwork {
 public:
  ValueNetwork(CriticKind kind, int features, int history, int actions, int hidden, bool recurrent);
  ValueNetwork(CriticKind kind, int actions, Network net);

  CriticKind kind() const { return kind_; }
  int actions() const { return actions_; }
  Network& network() { return net_; }
  const Network& network() const { return net_; }

  Eigen::MatrixXd critic_input(const Eigen::MatrixXd& observation, int action) const;
  double value(const Eigen::MatrixXd& observation, int action) const;

 private:
  CriticKind kind_;
  int actions_;
  Network net_;
};

/// Samples from (or, when greedy, takes the argmax of) a policy network.
class PolicySelector final : public ActionSelector {
 public:
  PolicySelector(std::shared_ptr<const PolicyNetwork> policy, bool greedy)
      : policy_(std::move(policy)), greedy_(greedy) {}
  int history() const override { return policy_->network().shape().history; }
  int select(const Eigen::MatrixXd& input, std::span<const char> mask, Rng& rng) override;

 private:
  std::shared_ptr<const PolicyNetwork> policy_;
  bool greedy_;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void add(Transition t);
  void add(std::vector<Transition> ts);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }
  void clear() { items_.clear(); }
  /// `count` distinct indices, uniformly without replacement.
  std::vector<std::size_t> sample(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;  // oldest dropped first when full
};

struct LearningConfig {
  double gamma = 0.95;
  double clip = 0.2;
  double actor_lr = 1.0;
  double critic_lr = 0.1;
  int episodes = 2000;
  int batch_size = 64;         // H
  int epochs_per_update = 4;   // minibatches drawn per update
  int hidden = 64;
  int history = 1;             // observation columns given to the networks
  bool recurrent = false;
  double grad_clip = 5.0;
  CriticKind critic = CriticKind::v;
  std::size_t buffer_capacity = 4096;
  bool clear_buffer_after_update = true;
  // The last window is a time limit rather than an absorbing state: bootstrap through it.
  bool bootstrap_horizon = true;
  bool normalize_advantages = false;  // per minibatch, zero mean and unit std
  std::uint64_t seed = 1;
};

void validate(const LearningConfig& config);

double advantage(double r, double q_next, double q_now, double gamma);
double policy_ratio(double p_new, double p_old);
double clipped_surrogate(double ratio, double adv, double clip);

using Batch = std::vector<const Transition*>;

/// r + gamma * Q(o', a'), with Q(o', a') = 0 on terminal transitions.
std::vector<double> critic_targets(const ValueNetwork& critic, const Batch& batch, double gamma);

struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

/// Mean of (target - Q(o, a))^2 with targets held fixed.
LossGradient critic_loss(const ValueNetwork& critic, const Batch& batch,
                         std::span<const double> targets);

/// Negated mean clipped surrogate. Samples whose old probability is zero are skipped and counted
/// in `skipped`.
LossGradient actor_loss(const PolicyNetwork& actor, const PolicyNetwork& old_actor,
                        const Batch& batch, std::span<const double> advantages, double clip,
                        std::size_t* skipped = nullptr);

struct UpdateReport {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double mean_advantage = 0.0;
  double mean_ratio = 0.0;
  std::size_t samples = 0;
  std::size_t skipped = 0;
  int minibatches = 0;
};

/// One PPO update: per minibatch, advantages from the current critic, a critic step on the mean
/// squared advantage and an actor step on the negated clipped surrogate. Ratios are taken against
/// `old_actor`, which is synced to the actor afterwards. Throws std::runtime_error on a
/// non-finite loss.
UpdateReport ppo_update(PolicyNetwork& actor, PolicyNetwork& old_actor, ValueNetwork& critic,
                        const ReplayBuffer& buffer, const LearningConfig& config, Rng& rng);

struct CurvePoint {
  int episode = 0;
  double mean_reward = 0.0;
  double avg_delay = 0.0;
  double mean_energy_kj = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
};

struct TrainedAgent {
  std::shared_ptr<PolicyNetwork> actor;
  std::shared_ptr<ValueNetwork> critic;
  std::vector<CurvePoint> curves;
};

/// What kind of decision the agents make.
enum class AgentKind { flight_range, plan_choice };

/// Builds the controller driven by `selector` for the given agent kind.
std::unique_ptr<Controller> make_agent_controller(AgentKind kind,
                                                  std::shared_ptr<ActionSelector> selector,
                                                  const PlannerOptions& options);

/// Input features and action count of the agents for a context.
int agent_features(AgentKind kind, const WorldContext& ctx, int max_parcels);
int agent_actions(AgentKind kind, const WorldContext& ctx, int max_parcels);

/// Context for one training episode; called with the 0-based episode number.
using EpisodeSource = std::function<const WorldContext&(int episode)>;

/// Runs `config.episodes` episodes sampling actions from the shared actor, buffering every
/// drone's transitions and updating once per episode when the buffer holds at least H samples.
TrainedAgent train(AgentKind kind, const EpisodeSource& episodes, const PlannerOptions& options,
                   const LearningConfig& config, const RewardNormalizers& normalizers);

void write_curves_csv(std::ostream& out, std::span<const CurvePoint> curves);

/// Versioned JSON checkpoint holding both networks' shapes and flat parameters.
nlohmann::json checkpoint_json(AgentKind kind, const TrainedAgent& agent);
TrainedAgent load_checkpoint(const nlohmann::json& j, AgentKind* kind = nullptr);

}  // namespace mdd
