#include "convsim/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "convsim/errors.hpp"

namespace convsim {

namespace {

// Distinct observations of a buffer as matrix columns. Market buffers repeat
// the same few identity codes thousands of times, so forward and backward
// passes run once per distinct input and per-sample gradients are summed
// onto their column.
struct UniqueBatch {
  Eigen::MatrixXd inputs;
  std::vector<int> column;
};

UniqueBatch dedupe(const RolloutBuffer& buffer) {
  const int d = buffer.obs_size();
  const std::size_t n = buffer.size();
  std::unordered_map<std::string, int> seen;
  UniqueBatch out;
  out.column.resize(n);
  std::vector<std::size_t> first;
  for (std::size_t i = 0; i < n; ++i) {
    auto obs = buffer.observation(i);
    std::string key(reinterpret_cast<const char*>(obs.data()),
                    obs.size() * sizeof(double));
    auto [it, inserted] = seen.emplace(std::move(key), static_cast<int>(first.size()));
    if (inserted) first.push_back(i);
    out.column[i] = it->second;
  }
  out.inputs.resize(d, static_cast<Eigen::Index>(first.size()));
  for (std::size_t c = 0; c < first.size(); ++c) {
    auto obs = buffer.observation(first[c]);
    for (int r = 0; r < d; ++r) out.inputs(r, static_cast<Eigen::Index>(c)) = obs[r];
  }
  return out;
}

PpoGradients evaluate(const PolicyModel& model, const RolloutBuffer& buffer,
                      const AdvantageSet& adv, const TrainerConfig& config,
                      const UniqueBatch& batch, bool with_grads) {
  const std::size_t n = buffer.size();
  if (n == 0) throw std::invalid_argument("ppo loss on empty buffer");
  if (adv.advantages.size() != n || adv.returns.size() != n)
    throw std::invalid_argument("advantages not aligned with buffer");

  const auto actor_trace = forward_batch(model.actor, batch.inputs);
  const auto critic_trace = forward_batch(model.critic, batch.inputs);
  const Eigen::MatrixXd& logits = actor_trace.output();
  const Eigen::MatrixXd& values = critic_trace.output();
  const Eigen::Index k = logits.rows();
  const Eigen::Index nu = logits.cols();

  // log-softmax, probabilities and entropy per distinct input
  Eigen::MatrixXd logp(k, nu);
  Eigen::MatrixXd prob(k, nu);
  Eigen::VectorXd entropy(nu);
  for (Eigen::Index c = 0; c < nu; ++c) {
    const double mx = logits.col(c).maxCoeff();
    const double lse =
        mx + std::log((logits.col(c).array() - mx).exp().sum());
    logp.col(c) = logits.col(c).array() - lse;
    prob.col(c) = logp.col(c).array().exp();
    entropy[c] = -(prob.col(c).array() * logp.col(c).array()).sum();
  }

  Eigen::MatrixXd up_actor = Eigen::MatrixXd::Zero(k, nu);
  Eigen::MatrixXd up_critic = Eigen::MatrixXd::Zero(1, nu);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(nu);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double eps = config.clip_epsilon;

  double clip_sum = 0.0, value_sum = 0.0, entropy_sum = 0.0, ratio_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int c = batch.column[i];
    const int a = buffer.actions()[i];
    if (a < 0 || a >= k) throw std::out_of_range("stored action out of range");
    const double ratio = std::exp(logp(a, c) - buffer.log_probs()[i]);
    const double A = adv.advantages[i];
    const double unclipped = ratio * A;
    const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * A;
    clip_sum += std::min(unclipped, clipped);
    ratio_sum += ratio;
    entropy_sum += entropy[c];
    const double diff = values(0, c) - adv.returns[i];
    value_sum += diff * diff;
    count[c] += 1.0;
    if (!with_grads) continue;
    if (unclipped <= clipped) {
      // d(-r*A/n)/dlogits = -(A*r/n) * (onehot(a) - p)
      const double g = -A * ratio * inv_n;
      up_actor.col(c) -= g * prob.col(c);
      up_actor(a, c) += g;
    }
    up_critic(0, c) += config.value_coef * 2.0 * diff * inv_n;
  }

  PpoGradients out;
  auto& loss = out.loss;
  loss.clip = clip_sum * inv_n;
  loss.value = value_sum * inv_n;
  loss.entropy = entropy_sum * inv_n;
  loss.mean_ratio = ratio_sum * inv_n;
  loss.total = -(loss.clip - config.value_coef * loss.value +
                 config.entropy_coef * loss.entropy);
  if (!std::isfinite(loss.total))
    throw TrainingError("non-finite PPO loss");
  if (!with_grads) return out;

  if (config.entropy_coef != 0.0) {
    // dH/dlogits_j = -p_j * (log p_j + H)
    for (Eigen::Index c = 0; c < nu; ++c) {
      if (count[c] == 0.0) continue;
      Eigen::VectorXd dh =
          -(prob.col(c).array() * (logp.col(c).array() + entropy[c])).matrix();
      up_actor.col(c) -= config.entropy_coef * count[c] * inv_n * dh;
    }
  }
  out.actor = backward_batch(model.actor, actor_trace, up_actor);
  out.critic = backward_batch(model.critic, critic_trace, up_critic);
  return out;
}

}  // namespace

void TrainerConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("gamma must lie in [0, 1)");
  if (!(clip_epsilon > 0.0))
    throw std::invalid_argument("clip epsilon must be positive");
  if (update_passes < 1)
    throw std::invalid_argument("update passes must be >= 1");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0))
    throw std::invalid_argument("learning rates must be positive");
  if (value_coef < 0.0 || entropy_coef < 0.0)
    throw std::invalid_argument("loss coefficients must be non-negative");
}

void RolloutBuffer::store(std::span<const double> obs, int action,
                          double log_prob, double reward, double value) {
  if (obs_size_ == 0) obs_size_ = static_cast<int>(obs.size());
  if (static_cast<int>(obs.size()) != obs_size_)
    throw std::invalid_argument("observation size mismatch in rollout buffer");
  for (double x : obs)
    if (!std::isfinite(x)) throw TrainingError("non-finite observation");
  if (!std::isfinite(log_prob) || !std::isfinite(reward) ||
      !std::isfinite(value))
    throw TrainingError("non-finite transition");
  obs_.insert(obs_.end(), obs.begin(), obs.end());
  actions_.push_back(action);
  log_probs_.push_back(log_prob);
  rewards_.push_back(reward);
  values_.push_back(value);
  terminals_.push_back(0);
}

void RolloutBuffer::mark_terminal() {
  if (!terminals_.empty()) terminals_.back() = 1;
}

void RolloutBuffer::clear() {
  obs_.clear();
  actions_.clear();
  log_probs_.clear();
  rewards_.clear();
  values_.clear();
  terminals_.clear();
}

void RolloutBuffer::write(BinaryWriter& out) const {
  out.put<std::int32_t>(obs_size_);
  out.put_doubles(obs_.data(), obs_.size());
  out.put<std::uint64_t>(actions_.size());
  for (std::size_t i = 0; i < actions_.size(); ++i) {
    out.put<std::int32_t>(actions_[i]);
    out.put<std::uint8_t>(terminals_[i]);
  }
  out.put_doubles(log_probs_.data(), log_probs_.size());
  out.put_doubles(rewards_.data(), rewards_.size());
  out.put_doubles(values_.data(), values_.size());
}

RolloutBuffer RolloutBuffer::read(BinaryReader& in) {
  RolloutBuffer b;
  b.obs_size_ = in.get<std::int32_t>();
  b.obs_ = in.get_doubles();
  const auto n = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    b.actions_.push_back(in.get<std::int32_t>());
    b.terminals_.push_back(in.get<std::uint8_t>());
  }
  b.log_probs_ = in.get_doubles();
  b.rewards_ = in.get_doubles();
  b.values_ = in.get_doubles();
  if (b.log_probs_.size() != n || b.rewards_.size() != n ||
      b.values_.size() != n || b.obs_.size() != n * std::max(b.obs_size_, 0))
    throw FormatError("rollout buffer sequences differ in length");
  return b;
}

AdvantageSet compute_returns_advantages(const RolloutBuffer& buffer,
                                        const TrainerConfig& config) {
  const std::size_t n = buffer.size();
  if (n == 0) throw std::invalid_argument("cannot compute returns of an empty buffer");
  if (!buffer.terminals().back())
    throw std::logic_error("rollout buffer is not terminal-marked");
  AdvantageSet out;
  out.returns.resize(n);
  out.advantages.resize(n);
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    if (buffer.terminals()[i]) running = 0.0;
    running = buffer.rewards()[i] + config.gamma * running;
    out.returns[i] = running;
    out.advantages[i] = running - buffer.values()[i];
  }
  if (config.normalize_advantages && n > 1) {
    double mean = 0.0;
    for (double a : out.advantages) mean += a;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double a : out.advantages) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& a : out.advantages) a = (a - mean) / (sd + 1e-8);
  }
  return out;
}

PolicyModel PolicyModel::create(int obs_size, int num_actions,
                                RandomStream& rng) {
  PolicyModel m;
  m.actor = init_params(obs_size, num_actions, rng);
  m.critic = init_params(obs_size, 1, rng);
  m.actor_opt = AdamState::for_params(m.actor);
  m.critic_opt = AdamState::for_params(m.critic);
  return m;
}

PolicyModel::Decision PolicyModel::act(std::span<const double> obs,
                                       RandomStream& rng) const {
  const auto dist = forward_actor(actor, obs);
  const auto s = sample_action(dist, rng);
  return {s.index, s.log_prob, forward_critic(critic, obs)};
}

void PolicyModel::write(BinaryWriter& out) const {
  write_params(out, actor);
  write_params(out, critic);
  write_adam(out, actor_opt);
  write_adam(out, critic_opt);
}

PolicyModel PolicyModel::read(BinaryReader& in) {
  PolicyModel m;
  m.actor = read_params(in);
  m.critic = read_params(in);
  m.actor_opt = read_adam(in);
  m.critic_opt = read_adam(in);
  if (!m.actor.same_shape(m.actor_opt.m) || !m.critic.same_shape(m.critic_opt.m))
    throw FormatError("optimizer state does not match network shape");
  return m;
}

double clipped_surrogate(double ratio, double advantage, double epsilon) {
  return std::min(ratio * advantage,
                  std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage);
}

LossBreakdown ppo_loss(const PolicyModel& model, const RolloutBuffer& buffer,
                       const AdvantageSet& advantages,
                       const TrainerConfig& config) {
  return evaluate(model, buffer, advantages, config, dedupe(buffer), false).loss;
}

PpoGradients ppo_gradients(const PolicyModel& model,
                           const RolloutBuffer& buffer,
                           const AdvantageSet& advantages,
                           const TrainerConfig& config) {
  return evaluate(model, buffer, advantages, config, dedupe(buffer), true);
}

TrainStats train_on_epoch(PolicyModel& model, RolloutBuffer& buffer,
                          const TrainerConfig& config) {
  TrainStats stats;
  if (buffer.empty()) return stats;
  config.validate();
  buffer.mark_terminal();
  const auto adv = compute_returns_advantages(buffer, config);
  const auto batch = dedupe(buffer);
  for (int pass = 0; pass < config.update_passes; ++pass) {
    auto g = evaluate(model, buffer, adv, config, batch, true);
    adam_step(model.actor, g.actor, model.actor_opt, config.actor_lr);
    adam_step(model.critic, g.critic, model.critic_opt, config.critic_lr);
    stats.loss = g.loss;
  }
  stats.steps = buffer.size();
  buffer.clear();
  return stats;
}

}  // namespace convsim
