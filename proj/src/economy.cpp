#include "convsim/economy.hpp"

#include <stdexcept>

namespace convsim {

std::string_view to_string(Specialization s) {
  switch (s) {
    case Specialization::Chopper: return "chopper";
    case Specialization::Miner: return "miner";
    case Specialization::Builder: return "builder";
  }
  return "unknown";
}

std::string_view to_string(Resource r) {
  return r == Resource::Wood ? "wood" : "stone";
}

std::string_view to_string(ActionKind a) {
  switch (a) {
    case ActionKind::ChopWood: return "chop_wood";
    case ActionKind::MineStone: return "mine_stone";
    case ActionKind::Build: return "build";
    case ActionKind::SellWood: return "sell_wood";
    case ActionKind::SellStone: return "sell_stone";
    case ActionKind::BuyWood: return "buy_wood";
    case ActionKind::BuyStone: return "buy_stone";
  }
  return "unknown";
}

std::optional<Specialization> parse_specialization(std::string_view s) {
  for (auto v : {Specialization::Chopper, Specialization::Miner,
                 Specialization::Builder})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

std::optional<Resource> resource_of(ActionKind a) {
  switch (a) {
    case ActionKind::ChopWood:
    case ActionKind::SellWood:
    case ActionKind::BuyWood: return Resource::Wood;
    case ActionKind::MineStone:
    case ActionKind::SellStone:
    case ActionKind::BuyStone: return Resource::Stone;
    case ActionKind::Build: return std::nullopt;
  }
  return std::nullopt;
}

Skill Skill::of(Specialization s) {
  switch (s) {
    case Specialization::Chopper: return {s, 0.75, 0.25, 0.05};
    case Specialization::Miner: return {s, 0.25, 0.75, 0.05};
    case Specialization::Builder: return {s, 0.1, 0.1, 0.95};
  }
  throw std::invalid_argument("unknown specialization");
}

double Skill::success(ActionKind a) const {
  switch (a) {
    case ActionKind::ChopWood: return chop;
    case ActionKind::MineStone: return mine;
    case ActionKind::Build: return build;
    default:
      throw std::invalid_argument("skill table only covers independent actions");
  }
}

std::optional<Resource> Skill::skilled_resource() const {
  switch (specialization) {
    case Specialization::Chopper: return Resource::Wood;
    case Specialization::Miner: return Resource::Stone;
    case Specialization::Builder: return std::nullopt;
  }
  return std::nullopt;
}

Observation observe_agent(const AgentState& agent, const EconomyRules& rules) {
  const double t = rules.flag_threshold;
  return {static_cast<double>(agent.wood),
          static_cast<double>(agent.stone),
          agent.coins,
          agent.wood > t ? 1.0 : 0.0,
          agent.stone > t ? 1.0 : 0.0,
          agent.coins > t ? 1.0 : 0.0};
}

bool attempt_extract(AgentState& agent, Resource resource, RandomStream& rng) {
  const auto kind = resource == Resource::Wood ? ActionKind::ChopWood
                                               : ActionKind::MineStone;
  if (!rng.bernoulli(agent.skill.success(kind))) return false;
  ++agent.count(resource);
  return true;
}

bool attempt_build(AgentState& agent, RandomStream& rng,
                   const EconomyRules& rules) {
  if (agent.wood < 1 || agent.stone < 1) return false;
  const bool ok = rng.bernoulli(agent.skill.build);
  if (ok || rules.failed_build_consumes) {
    --agent.wood;
    --agent.stone;
  }
  if (ok) agent.coins += rules.build_reward;
  return ok;
}

void attempt_buy(AgentState& agent, Resource resource,
                 const EconomyRules& rules) {
  agent.coins -= rules.buy_cost;
  ++agent.count(resource);
}

TransactionOutcome resolve_sale(AgentState& agent, Resource offered,
                                MarketPrediction prediction,
                                const EconomyRules& rules) {
  TransactionOutcome out;
  if (predicted_resource(prediction) != offered) {
    out.market_reward = rules.market_miss_reward;
    return out;
  }
  out.coordinated = true;
  if (agent.count(offered) < rules.sale_units) {
    out.insufficient = true;
    out.market_reward = rules.market_insufficient_reward;
    return out;
  }
  agent.count(offered) -= rules.sale_units;
  agent.coins += rules.sale_reward;
  out.agent_reward = rules.sale_reward;
  out.market_reward = rules.market_match_reward;
  (offered == Resource::Wood ? out.wood_delta : out.stone_delta) =
      -rules.sale_units;
  return out;
}

ActionOutcome apply_action(AgentState& agent, ActionKind kind,
                           RandomStream& rng, const EconomyRules& rules,
                           std::optional<MarketPrediction> prediction) {
  ActionOutcome out;
  const int wood0 = agent.wood;
  const int stone0 = agent.stone;
  const double coins0 = agent.coins;
  switch (kind) {
    case ActionKind::ChopWood:
    case ActionKind::MineStone:
      out.success = attempt_extract(agent, *resource_of(kind), rng);
      break;
    case ActionKind::Build:
      out.success = attempt_build(agent, rng, rules);
      break;
    case ActionKind::BuyWood:
    case ActionKind::BuyStone:
      attempt_buy(agent, *resource_of(kind), rules);
      out.success = true;
      break;
    case ActionKind::SellWood:
    case ActionKind::SellStone: {
      if (!prediction)
        throw std::logic_error("sale resolved without a market prediction");
      auto t = resolve_sale(agent, *resource_of(kind), *prediction, rules);
      out.success = t.coordinated && !t.insufficient;
      out.market_reward = t.market_reward;
      out.prediction = prediction;
      out.coordinated = t.coordinated;
      out.insufficient = t.insufficient;
      break;
    }
  }
  out.agent_reward = agent.coins - coins0;
  out.wood_delta = agent.wood - wood0;
  out.stone_delta = agent.stone - stone0;
  return out;
}

}  // namespace convsim
