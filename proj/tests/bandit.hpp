// Two-armed deterministic bandit driven through the PPO trainer.
#pragma once

#include "convsim/ppo.hpp"

namespace bandit {

using namespace convsim;

// Arm 0 pays 1, arm 1 pays 0. Each epoch collects `pulls` one-step episodes.
// Returns the first epoch after which P(arm 0) > threshold, or -1.
inline int epochs_to_learn(std::uint64_t seed, int max_epochs = 200, int pulls = 20,
                           double threshold = 0.95) {
  auto init = RandomStream::derive(seed, "bandit-init");
  auto policy = RandomStream::derive(seed, "bandit-policy");
  auto model = PolicyModel::create(1, 2, init);
  RolloutBuffer buffer(1);
  const TrainerConfig cfg;
  const std::vector<double> obs{1.0};
  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    for (int i = 0; i < pulls; ++i) {
      const auto d = model.act(obs, policy);
      buffer.store(obs, d.action, d.log_prob, d.action == 0 ? 1.0 : 0.0, d.value);
      buffer.mark_terminal();
    }
    train_on_epoch(model, buffer, cfg);
    if (forward_actor(model.actor, obs).prob(0) > threshold) return epoch;
  }
  return -1;
}

}  // namespace bandit
