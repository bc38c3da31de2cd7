// Independent reference computations shared by the unit tests and the
// acceptance binary. Nothing here calls the code path it checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "convsim/economy.hpp"
#include "convsim/ppo.hpp"
#include "convsim/rng.hpp"
#include "convsim/tinynet.hpp"
#include "convsim/world.hpp"

namespace oracle {

using namespace convsim;

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / scale;
}

// Direct O(T^2) discounted reward-to-go, restarting after terminal steps.
inline std::vector<double> brute_force_returns(const std::vector<double>& rewards,
                                               const std::vector<std::uint8_t>& terminal,
                                               double gamma) {
  const std::size_t n = rewards.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double g = 0.0;
    double discount = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      g += discount * rewards[k];
      discount *= gamma;
      if (terminal[k]) break;
    }
    out[t] = g;
  }
  return out;
}

// Softmax through direct exponentiation in long double.
inline std::vector<double> naive_softmax(const std::vector<double>& logits) {
  long double sum = 0.0L;
  for (double z : logits) sum += std::exp(static_cast<long double>(z));
  std::vector<double> p;
  for (double z : logits)
    p.push_back(static_cast<double>(std::exp(static_cast<long double>(z)) / sum));
  return p;
}

// A buffer of random observations whose stored log-probs are offset from the
// current policy so ratios land both inside and outside the clip range.
struct RandomBatch {
  PolicyModel model;
  RolloutBuffer buffer;
  AdvantageSet advantages;
};

inline RandomBatch random_batch(std::uint64_t seed, int obs_size, int actions,
                                int steps, double log_prob_jitter) {
  auto rng = RandomStream::derive(seed, "oracle-batch");
  RandomBatch b;
  b.model = PolicyModel::create(obs_size, actions, rng);
  b.buffer = RolloutBuffer(obs_size);
  std::vector<double> obs(obs_size);
  for (int t = 0; t < steps; ++t) {
    for (auto& x : obs) x = 2.0 * rng.uniform() - 1.0;
    const auto dist = forward_actor(b.model.actor, obs);
    const int a = static_cast<int>(rng.below(actions));
    const double jitter = log_prob_jitter * (2.0 * rng.uniform() - 1.0);
    b.buffer.store(obs, a, dist.log_prob(a) + jitter, 4.0 * rng.uniform() - 2.0,
                   forward_critic(b.model.critic, obs));
  }
  b.buffer.mark_terminal();
  b.advantages.returns.resize(steps);
  b.advantages.advantages.resize(steps);
  for (int t = 0; t < steps; ++t) {
    b.advantages.returns[t] = 3.0 * rng.uniform() - 1.5;
    b.advantages.advantages[t] = 2.0 * rng.uniform() - 1.0;
  }
  return b;
}

inline void axpy(MlpParams& p, const MlpParams& dir, double h) {
  for (std::size_t i = 0; i < p.parameter_count(); ++i) p.flat(i) += h * dir.flat(i);
}

inline MlpParams random_direction(const MlpParams& like, RandomStream& rng) {
  auto d = MlpParams::zeros_like(like);
  for (std::size_t i = 0; i < d.parameter_count(); ++i) d.flat(i) = 2.0 * rng.uniform() - 1.0;
  return d;
}

inline double dot(const MlpParams& a, const MlpParams& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.parameter_count(); ++i) s += a.flat(i) * b.flat(i);
  return s;
}

// Relative error between the analytic directional derivative of the PPO loss
// along a random direction (actor and critic together) and its central
// finite difference.
inline double ppo_directional_error(std::uint64_t seed, int obs_size, int actions) {
  auto b = random_batch(seed, obs_size, actions, 24, 0.4);
  TrainerConfig cfg;
  const auto grads = ppo_gradients(b.model, b.buffer, b.advantages, cfg);
  auto rng = RandomStream::derive(seed, "oracle-direction");
  const auto da = random_direction(b.model.actor, rng);
  const auto dc = random_direction(b.model.critic, rng);
  const double analytic = dot(grads.actor, da) + dot(grads.critic, dc);
  const double h = 1e-6;
  auto shifted = [&](double s) {
    PolicyModel m = b.model;
    axpy(m.actor, da, s);
    axpy(m.critic, dc, s);
    return ppo_loss(m, b.buffer, b.advantages, cfg).total;
  };
  const double numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
  return relative_error(analytic, numeric);
}

// Relative error of one MLP parameter's gradient for the scalar
// sum(upstream * output) against a central difference. Entries whose
// gradients are numerically zero are reported as 0.
inline double mlp_entry_error(const MlpParams& params, const std::vector<double>& input,
                              const std::vector<double>& upstream, std::size_t index) {
  const auto g = backward(params, input, upstream);
  auto f = [&](double s) {
    MlpParams p = params;
    p.flat(index) += s;
    const auto out = forward(p, input);
    double v = 0.0;
    for (int i = 0; i < out.size(); ++i) v += out[i] * upstream[i];
    return v;
  };
  const double h = 1e-6;
  const double numeric = (f(h) - f(-h)) / (2.0 * h);
  const double analytic = g.flat(index);
  if (std::abs(analytic) < 1e-7 && std::abs(numeric) < 1e-7) return 0.0;
  return relative_error(analytic, numeric);
}

// Replays an epoch's event log against the economy rules from an empty
// inventory. Returns an empty string when every transfer and total agrees,
// otherwise a description of the first disagreement.
inline std::string replay_accounting(const EpochLog& log, const EconomyRules& rules) {
  struct Ledger {
    long wood = 0, stone = 0;
    double coins = 0.0;
  };
  std::map<std::uint32_t, Ledger> ledgers;
  double market = 0.0;
  for (const auto& e : log.events) {
    auto& l = ledgers[e.agent_id];
    long dw = 0, ds = 0;
    double dc = 0.0;
    switch (e.kind) {
      case ActionKind::ChopWood: dw = e.success ? 1 : 0; break;
      case ActionKind::MineStone: ds = e.success ? 1 : 0; break;
      case ActionKind::Build:
        if (e.success) {
          if (l.wood < 1 || l.stone < 1) return "build succeeded without ingredients";
          dw = -1;
          ds = -1;
          dc = rules.build_reward;
        } else if (rules.failed_build_consumes && l.wood >= 1 && l.stone >= 1) {
          dw = -1;
          ds = -1;
        }
        break;
      case ActionKind::BuyWood: dw = 1; dc = -rules.buy_cost; break;
      case ActionKind::BuyStone: ds = 1; dc = -rules.buy_cost; break;
      case ActionKind::SellWood:
      case ActionKind::SellStone: {
        const bool wood = e.kind == ActionKind::SellWood;
        if (e.agent_reward != 0.0) {
          if ((wood ? l.wood : l.stone) < rules.sale_units) return "sale without units";
          (wood ? dw : ds) = -rules.sale_units;
          dc = rules.sale_reward;
        }
        const double m = e.market_reward;
        if (m != rules.market_match_reward && m != rules.market_miss_reward &&
            m != rules.market_insufficient_reward)
          return "unexpected market reward";
        if ((m == rules.market_match_reward) != (e.agent_reward != 0.0))
          return "market match without a completed sale";
        market += m;
        break;
      }
    }
    if (dw != e.wood_delta || ds != e.stone_delta) return "resource delta mismatch";
    if (dc != e.agent_reward) return "agent reward mismatch";
    l.wood += dw;
    l.stone += ds;
    l.coins += dc;
    if (l.wood < 0 || l.stone < 0) return "negative inventory";
  }
  for (const auto& s : log.agents) {
    if (ledgers[s.agent_id].coins != s.coins) return "epoch coins disagree with replay";
  }
  if (market != log.market_reward) return "market reward disagrees with replay";
  return {};
}

}  // namespace oracle
