#include "mdd/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace mdd {

using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
using MatrixMap = Eigen::Map<Eigen::MatrixXd>;

Network::Network(NetworkShape shape) : shape_(shape) {
  if (shape.input < 1 || shape.history < 1 || shape.hidden < 1 || shape.output < 1) {
    throw std::invalid_argument("network dimensions must be >= 1");
  }
  params_ = Eigen::VectorXd::Zero(layout().total);
}

int Network::first_input() const {
  return shape_.recurrent ? shape_.input : shape_.input * shape_.history;
}

Network::Layout Network::layout() const {
  const Eigen::Index h = shape_.hidden;
  Layout l{};
  l.w1 = 0;
  l.u1 = l.w1 + h * first_input();
  l.b1 = l.u1 + (shape_.recurrent ? h * h : 0);
  l.w2 = l.b1 + h;
  l.b2 = l.w2 + h * h;
  l.w3 = l.b2 + h;
  l.b3 = l.w3 + shape_.output * h;
  l.total = l.b3 + shape_.output;
  return l;
}

void Network::initialize(Rng& rng) {
  const auto l = layout();
  const int h = shape_.hidden;
  params_.setZero();
  auto fill = [&](Eigen::Index at, Eigen::Index count, int fan_in, double scale) {
    const double bound = scale / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < count; ++i) params_(at + i) = dist(rng);
  };
  fill(l.w1, l.u1 - l.w1, first_input(), 1.0);
  if (shape_.recurrent) fill(l.u1, l.b1 - l.u1, h, 1.0);
  fill(l.w2, l.b2 - l.w2, h, 1.0);
  fill(l.w3, l.b3 - l.w3, h, 0.1);
}

Eigen::VectorXd Network::forward(const Eigen::MatrixXd& input) const {
  Tape tape;
  return forward(input, tape);
}

Eigen::VectorXd Network::forward(const Eigen::MatrixXd& input, Tape& tape) const {
  if (input.rows() != shape_.input || input.cols() != shape_.history) {
    std::ostringstream msg;
    msg << "network input is " << input.rows() << "x" << input.cols() << ", expected "
        << shape_.input << "x" << shape_.history;
    throw std::invalid_argument(msg.str());
  }
  const auto l = layout();
  const int h = shape_.hidden;
  const ConstMatrixMap w1(params_.data() + l.w1, h, first_input());
  const auto b1 = params_.segment(l.b1, h);
  const ConstMatrixMap w2(params_.data() + l.w2, h, h);
  const auto b2 = params_.segment(l.b2, h);
  const ConstMatrixMap w3(params_.data() + l.w3, shape_.output, h);
  const auto b3 = params_.segment(l.b3, shape_.output);

  tape.input = input;
  tape.first.clear();
  if (shape_.recurrent) {
    const ConstMatrixMap u1(params_.data() + l.u1, h, h);
    Eigen::VectorXd state = Eigen::VectorXd::Zero(h);
    for (int c = 0; c < shape_.history; ++c) {
      state = (w1 * input.col(c) + u1 * state + b1).array().tanh().matrix();
      tape.first.push_back(state);
    }
  } else {
    const Eigen::Map<const Eigen::VectorXd> x(input.data(), input.size());
    tape.first.push_back((w1 * x + b1).array().tanh().matrix());
  }
  tape.second = (w2 * tape.first.back() + b2).array().tanh().matrix();
  return w3 * tape.second + b3;
}

void Network::backward(const Tape& tape, const Eigen::VectorXd& grad_out,
                       Eigen::VectorXd& grad) const {
  const auto l = layout();
  const int h = shape_.hidden;
  if (grad.size() != params_.size()) grad = Eigen::VectorXd::Zero(params_.size());
  const ConstMatrixMap w2(params_.data() + l.w2, h, h);
  const ConstMatrixMap w3(params_.data() + l.w3, shape_.output, h);

  MatrixMap(grad.data() + l.w3, shape_.output, h).noalias() += grad_out * tape.second.transpose();
  grad.segment(l.b3, shape_.output) += grad_out;
  const Eigen::VectorXd g_z2 =
      ((w3.transpose() * grad_out).array() * (1.0 - tape.second.array().square())).matrix();
  MatrixMap(grad.data() + l.w2, h, h).noalias() += g_z2 * tape.first.back().transpose();
  grad.segment(l.b2, h) += g_z2;
  Eigen::VectorXd g_h = w2.transpose() * g_z2;

  MatrixMap g_w1(grad.data() + l.w1, h, first_input());
  if (!shape_.recurrent) {
    const Eigen::VectorXd g_z1 = (g_h.array() * (1.0 - tape.first[0].array().square())).matrix();
    const Eigen::Map<const Eigen::VectorXd> x(tape.input.data(), tape.input.size());
    g_w1.noalias() += g_z1 * x.transpose();
    grad.segment(l.b1, h) += g_z1;
    return;
  }
  const ConstMatrixMap u1(params_.data() + l.u1, h, h);
  MatrixMap g_u1(grad.data() + l.u1, h, h);
  for (int c = shape_.history - 1; c >= 0; --c) {
    const auto& state = tape.first[static_cast<std::size_t>(c)];
    const Eigen::VectorXd g_z = (g_h.array() * (1.0 - state.array().square())).matrix();
    g_w1.noalias() += g_z * tape.input.col(c).transpose();
    grad.segment(l.b1, h) += g_z;
    if (c > 0) g_u1.noalias() += g_z * tape.first[static_cast<std::size_t>(c - 1)].transpose();
    g_h = u1.transpose() * g_z;
  }
}

Eigen::VectorXd masked_softmax(const Eigen::VectorXd& logits, std::span<const char> mask) {
  if (static_cast<Eigen::Index>(mask.size()) != logits.size()) {
    throw std::invalid_argument("mask size differs from action count");
  }
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < logits.size(); ++a) {
    if (mask[static_cast<std::size_t>(a)]) top = std::max(top, logits(a));
  }
  if (!std::isfinite(top)) throw std::invalid_argument("no legal action in mask");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(logits.size());
  double total = 0.0;
  for (Eigen::Index a = 0; a < logits.size(); ++a) {
    if (!mask[static_cast<std::size_t>(a)]) continue;
    p(a) = std::exp(logits(a) - top);
    total += p(a);
  }
  return p / total;
}

PolicyNetwork::PolicyNetwork(int features, int history, int actions, int hidden, bool recurrent)
    : net_({features, history, hidden, actions, recurrent}) {}

Eigen::VectorXd PolicyNetwork::probabilities(const Eigen::MatrixXd& input,
                                             std::span<const char> mask) const {
  return masked_softmax(net_.forward(input), mask);
}

ValueNetwork::ValueNetwork(CriticKind kind, int features, int history, int actions, int hidden,
                           bool recurrent)
    : kind_(kind),
      actions_(actions),
      net_({kind == CriticKind::q ? features + actions : features, history, hidden, 1, recurrent}) {}

ValueNetwork::ValueNetwork(CriticKind kind, int actions, Network net)
    : kind_(kind), actions_(actions), net_(std::move(net)) {
  if (net_.shape().output != 1) throw std::invalid_argument("value network needs one output");
}

Eigen::MatrixXd ValueNetwork::critic_input(const Eigen::MatrixXd& observation, int action) const {
  if (kind_ == CriticKind::v) return observation;
  if (action < 0 || action >= actions_) throw std::out_of_range("critic action out of range");
  Eigen::MatrixXd in = Eigen::MatrixXd::Zero(observation.rows() + actions_, observation.cols());
  in.topRows(observation.rows()) = observation;
  in.row(observation.rows() + action).setOnes();
  return in;
}

double ValueNetwork::value(const Eigen::MatrixXd& observation, int action) const {
  return net_.forward(critic_input(observation, action))(0);
}

int PolicySelector::select(const Eigen::MatrixXd& input, std::span<const char> mask, Rng& rng) {
  const Eigen::VectorXd p = policy_->probabilities(input, mask);
  if (greedy_) {
    Eigen::Index best = 0;
    p.maxCoeff(&best);
    return static_cast<int>(best);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  int last = -1;
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    if (!mask[static_cast<std::size_t>(a)]) continue;
    last = static_cast<int>(a);
    acc += p(a);
    if (x < acc) return last;
  }
  return last;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("buffer capacity must be > 0");
}

void ReplayBuffer::add(Transition t) {
  if (items_.size() == capacity_) items_.erase(items_.begin());
  items_.push_back(std::move(t));
}

void ReplayBuffer::add(std::vector<Transition> ts) {
  for (auto& t : ts) add(std::move(t));
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  if (count > items_.size()) throw std::invalid_argument("sample larger than buffer");
  std::vector<std::size_t> idx(items_.size());
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

void validate(const LearningConfig& c) {
  const auto fail = [](const char* what) { throw std::invalid_argument(what); };
  if (!(c.gamma >= 0.0 && c.gamma < 1.0)) fail("gamma must be in [0, 1)");
  if (!(c.clip > 0.0 && c.clip < 1.0)) fail("clip must be in (0, 1)");
  if (!(c.actor_lr >= 0.0) || !(c.critic_lr >= 0.0)) fail("learning rates must be >= 0");
  if (c.episodes < 0) fail("episodes must be >= 0");
  if (c.batch_size < 1) fail("batch_size must be >= 1");
  if (c.epochs_per_update < 1) fail("epochs_per_update must be >= 1");
  if (c.hidden < 1) fail("hidden must be >= 1");
  if (c.history < 1) fail("history must be >= 1");
  if (!(c.grad_clip > 0.0)) fail("grad_clip must be > 0");
  if (c.buffer_capacity < static_cast<std::size_t>(c.batch_size)) {
    fail("buffer_capacity must hold at least one batch");
  }
}

double advantage(double r, double q_next, double q_now, double gamma) {
  return r + gamma * q_next - q_now;
}

double policy_ratio(double p_new, double p_old) {
  if (!(p_old > 0.0)) throw std::domain_error("old action probability is zero");
  return p_new / p_old;
}

double clipped_surrogate(double ratio, double adv, double clip) {
  return std::min(ratio * adv, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv);
}

std::vector<double> critic_targets(const ValueNetwork& critic, const Batch& batch, double gamma) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const Transition* t : batch) {
    const double q_next = t->terminal ? 0.0 : critic.value(t->next_observation, t->next_action);
    out.push_back(t->reward + gamma * q_next);
  }
  return out;
}

LossGradient critic_loss(const ValueNetwork& critic, const Batch& batch,
                         std::span<const double> targets) {
  LossGradient lg;
  lg.gradient = Eigen::VectorXd::Zero(critic.network().parameters().size());
  if (batch.empty()) return lg;
  const double n = static_cast<double>(batch.size());
  Network::Tape tape;
  Eigen::VectorXd g(1);
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const Transition& t = *batch[s];
    const double q = critic.network().forward(critic.critic_input(t.observation, t.action), tape)(0);
    const double a = targets[s] - q;
    lg.loss += a * a / n;
    g(0) = -2.0 * a / n;
    critic.network().backward(tape, g, lg.gradient);
  }
  return lg;
}

LossGradient actor_loss(const PolicyNetwork& actor, const PolicyNetwork& old_actor,
                        const Batch& batch, std::span<const double> advantages, double clip,
                        std::size_t* skipped) {
  LossGradient lg;
  lg.gradient = Eigen::VectorXd::Zero(actor.network().parameters().size());
  std::vector<std::size_t> used;
  std::vector<double> p_old(batch.size(), 0.0);
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const Transition& t = *batch[s];
    p_old[s] = old_actor.probabilities(t.observation, t.mask)(t.action);
    if (p_old[s] > 0.0) used.push_back(s);
  }
  if (skipped) *skipped = batch.size() - used.size();
  if (used.empty()) return lg;
  const double n = static_cast<double>(used.size());
  Network::Tape tape;
  for (std::size_t s : used) {
    const Transition& t = *batch[s];
    const Eigen::VectorXd p = masked_softmax(actor.network().forward(t.observation, tape), t.mask);
    const double ratio = policy_ratio(p(t.action), p_old[s]);
    const double adv = advantages[s];
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
    lg.loss -= std::min(unclipped, clipped) / n;
    if (unclipped > clipped) continue;  // clipped branch: flat in the parameters
    // d ratio / d logits = ratio * (onehot(a) - p), restricted to legal actions.
    Eigen::VectorXd g = -p;
    g(t.action) += 1.0;
    g *= -adv * ratio / n;
    actor.network().backward(tape, g, lg.gradient);
  }
  return lg;
}

namespace {

void clip_norm(Eigen::VectorXd& g, double max_norm) {
  const double norm = g.norm();
  if (norm > max_norm) g *= max_norm / norm;
}

void require_finite(double loss, const char* which, const std::vector<std::size_t>& idx) {
  if (std::isfinite(loss)) return;
  std::ostringstream msg;
  msg << which << " loss is not finite on batch [";
  for (std::size_t k = 0; k < idx.size(); ++k) msg << (k ? " " : "") << idx[k];
  msg << "]";
  throw std::runtime_error(msg.str());
}

}  // namespace

UpdateReport ppo_update(PolicyNetwork& actor, PolicyNetwork& old_actor, ValueNetwork& critic,
                        const ReplayBuffer& buffer, const LearningConfig& config, Rng& rng) {
  UpdateReport report;
  const std::size_t h = std::min(buffer.size(), static_cast<std::size_t>(config.batch_size));
  if (h == 0) return report;
  double ratio_sum = 0.0;
  for (int epoch = 0; epoch < config.epochs_per_update; ++epoch) {
    const auto idx = buffer.sample(h, rng);
    Batch batch;
    for (std::size_t i : idx) batch.push_back(&buffer[i]);

    const auto targets = critic_targets(critic, batch, config.gamma);
    std::vector<double> adv(batch.size());
    for (std::size_t s = 0; s < batch.size(); ++s) {
      adv[s] = targets[s] - critic.value(batch[s]->observation, batch[s]->action);
      report.mean_advantage += adv[s];
      ratio_sum += actor.probabilities(batch[s]->observation, batch[s]->mask)(batch[s]->action) /
                   old_actor.probabilities(batch[s]->observation, batch[s]->mask)(batch[s]->action);
    }
    if (config.normalize_advantages && adv.size() > 1) {
      const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(adv.size());
      double var = 0.0;
      for (double x : adv) var += (x - mean) * (x - mean);
      const double sd = std::sqrt(var / static_cast<double>(adv.size()));
      for (auto& x : adv) x = (x - mean) / (sd + 1e-8);
    }

    auto c = critic_loss(critic, batch, targets);
    require_finite(c.loss, "critic", idx);
    std::size_t skipped = 0;
    auto a = actor_loss(actor, old_actor, batch, adv, config.clip, &skipped);
    require_finite(a.loss, "actor", idx);

    clip_norm(c.gradient, config.grad_clip);
    clip_norm(a.gradient, config.grad_clip);
    critic.network().parameters() -= config.critic_lr * c.gradient;
    actor.network().parameters() -= config.actor_lr * a.gradient;

    report.critic_loss += c.loss;
    report.actor_loss += a.loss;
    report.samples += batch.size();
    report.skipped += skipped;
    ++report.minibatches;
  }
  const double mb = report.minibatches;
  report.critic_loss /= mb;
  report.actor_loss /= mb;
  report.mean_advantage /= static_cast<double>(report.samples);
  report.mean_ratio = ratio_sum / static_cast<double>(report.samples);
  old_actor.network().parameters() = actor.network().parameters();
  return report;
}

std::unique_ptr<Controller> make_agent_controller(AgentKind kind,
                                                  std::shared_ptr<ActionSelector> selector,
                                                  const PlannerOptions& options) {
  if (kind == AgentKind::flight_range) {
    return std::make_unique<RangeController>(std::move(selector), options);
  }
  return std::make_unique<PlanChoiceController>(std::move(selector), options.max_parcels);
}

int agent_features(AgentKind kind, const WorldContext& ctx, int max_parcels) {
  const int n = ctx.map.size();
  const int k = ctx.map.neighbor_count();
  return kind == AgentKind::flight_range ? observation_size(n, k)
                                         : PlanChoiceController::input_size(n, k, max_parcels);
}

int agent_actions(AgentKind kind, const WorldContext& ctx, int max_parcels) {
  return kind == AgentKind::flight_range ? ctx.map.neighbor_count() + 1
                                         : PlanChoiceController::slot_count(max_parcels);
}

TrainedAgent train(AgentKind kind, const EpisodeSource& episodes, const PlannerOptions& options,
                   const LearningConfig& config, const RewardNormalizers& normalizers) {
  validate(config);
  Rng rng(config.seed);
  const WorldContext& first = episodes(0);
  const int features = agent_features(kind, first, options.max_parcels);
  const int actions = agent_actions(kind, first, options.max_parcels);

  TrainedAgent agent;
  agent.actor = std::make_shared<PolicyNetwork>(features, config.history, actions, config.hidden,
                                                config.recurrent);
  agent.critic = std::make_shared<ValueNetwork>(config.critic, features, config.history, actions,
                                                config.hidden, config.recurrent);
  agent.actor->network().initialize(rng);
  agent.critic->network().initialize(rng);
  PolicyNetwork old_actor = *agent.actor;

  ReplayBuffer buffer(config.buffer_capacity);
  auto selector = std::make_shared<PolicySelector>(agent.actor, false);
  auto controller = make_agent_controller(kind, selector, options);

  for (int ep = 0; ep < config.episodes; ++ep) {
    const WorldContext& ctx = ep == 0 ? first : episodes(ep);
    if (agent_features(kind, ctx, options.max_parcels) != features ||
        agent_actions(kind, ctx, options.max_parcels) != actions) {
      throw std::invalid_argument("training episodes must share observation and action sizes");
    }
    EpisodeOptions eo;
    eo.normalizers = normalizers;
    eo.record_transitions = true;
    auto result = run_episode(ctx, *controller, rng, eo);
    if (config.bootstrap_horizon) {
      for (auto& t : result.transitions) t.terminal = false;
    }
    buffer.add(std::move(result.transitions));

    CurvePoint point;
    point.episode = ep + 1;
    point.mean_reward = result.metrics.mean_reward;
    point.avg_delay = result.metrics.avg_delay;
    point.mean_energy_kj = result.metrics.mean_energy_kj;
    if (buffer.size() >= static_cast<std::size_t>(config.batch_size)) {
      const auto report = ppo_update(*agent.actor, old_actor, *agent.critic, buffer, config, rng);
      point.critic_loss = report.critic_loss;
      point.actor_loss = report.actor_loss;
      if (config.clear_buffer_after_update) buffer.clear();
    }
    agent.curves.push_back(point);
  }
  return agent;
}

void write_curves_csv(std::ostream& out, std::span<const CurvePoint> curves) {
  const auto old_precision = out.precision(10);
  out << "episode,mean_reward,avg_delay_h,mean_energy_kj,critic_loss,actor_loss\n";
  for (const auto& c : curves) {
    out << c.episode << ',' << c.mean_reward << ',' << c.avg_delay << ',' << c.mean_energy_kj << ','
        << c.critic_loss << ',' << c.actor_loss << '\n';
  }
  out.precision(old_precision);
}

namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::json network_json(const Network& net) {
  const auto& s = net.shape();
  const auto& p = net.parameters();
  return {{"input", s.input},
          {"history", s.history},
          {"hidden", s.hidden},
          {"output", s.output},
          {"recurrent", s.recurrent},
          {"parameters", std::vector<double>(p.data(), p.data() + p.size())}};
}

Network network_from_json(const nlohmann::json& j) {
  NetworkShape s{j.at("input").get<int>(), j.at("history").get<int>(), j.at("hidden").get<int>(),
                 j.at("output").get<int>(), j.at("recurrent").get<bool>()};
  Network net(s);
  const auto values = j.at("parameters").get<std::vector<double>>();
  if (values.size() != net.parameter_count()) {
    throw std::runtime_error("checkpoint parameter count does not match the layer shapes");
  }
  net.parameters() = Eigen::Map<const Eigen::VectorXd>(values.data(), net.parameters().size());
  return net;
}

}  // namespace

nlohmann::json checkpoint_json(AgentKind kind, const TrainedAgent& agent) {
  nlohmann::json j;
  j["format"] = "mdd-checkpoint";
  j["version"] = kCheckpointVersion;
  j["agent"] = kind == AgentKind::flight_range ? "flight_range" : "plan_choice";
  j["actor"] = network_json(agent.actor->network());
  j["critic"] = network_json(agent.critic->network());
  j["critic"]["kind"] = agent.critic->kind() == CriticKind::q ? "q" : "v";
  j["critic"]["actions"] = agent.critic->actions();
  return j;
}

TrainedAgent load_checkpoint(const nlohmann::json& j, AgentKind* kind) {
  if (j.value("format", "") != "mdd-checkpoint") throw std::runtime_error("not a checkpoint file");
  if (j.value("version", 0) != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version");
  }
  const std::string agent_kind = j.at("agent").get<std::string>();
  if (agent_kind != "flight_range" && agent_kind != "plan_choice") {
    throw std::runtime_error("unknown agent kind " + agent_kind);
  }
  if (kind) *kind = agent_kind == "flight_range" ? AgentKind::flight_range : AgentKind::plan_choice;
  TrainedAgent agent;
  agent.actor = std::make_shared<PolicyNetwork>(network_from_json(j.at("actor")));
  const auto& c = j.at("critic");
  agent.critic = std::make_shared<ValueNetwork>(c.at("kind").get<std::string>() == "v" ? CriticKind::v
                                                                                        : CriticKind::q,
                                                c.at("actions").get<int>(), network_from_json(c));
  return agent;
}

}  // namespace mdd
