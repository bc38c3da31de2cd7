#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "convsim/identity.hpp"
#include "convsim/rng.hpp"

namespace convsim {

enum class Specialization : std::uint8_t { Chopper = 0, Miner = 1, Builder = 2 };
enum class Resource : std::uint8_t { Wood = 0, Stone = 1 };

enum class ActionKind : std::uint8_t {
  ChopWood = 0,
  MineStone = 1,
  Build = 2,
  SellWood = 3,
  SellStone = 4,
  BuyWood = 5,
  BuyStone = 6,
};
inline constexpr int kNumActions = 7;

enum class MarketPrediction : std::uint8_t { PredictWood = 0, PredictStone = 1 };
inline constexpr int kNumPredictions = 2;

inline constexpr int kObservationSize = 6;
using Observation = std::array<double, kObservationSize>;

std::string_view to_string(Specialization s);
std::string_view to_string(Resource r);
std::string_view to_string(ActionKind a);
std::optional<Specialization> parse_specialization(std::string_view s);

inline bool is_social(ActionKind a) {
  return a == ActionKind::SellWood || a == ActionKind::SellStone ||
         a == ActionKind::BuyWood || a == ActionKind::BuyStone;
}
inline bool is_sale(ActionKind a) {
  return a == ActionKind::SellWood || a == ActionKind::SellStone;
}
inline bool is_extraction(ActionKind a) {
  return a == ActionKind::ChopWood || a == ActionKind::MineStone;
}
// Resource touched by an extract/sell/buy action; nullopt for Build.
std::optional<Resource> resource_of(ActionKind a);
inline Resource predicted_resource(MarketPrediction p) {
  return p == MarketPrediction::PredictWood ? Resource::Wood : Resource::Stone;
}
inline MarketPrediction prediction_for(Resource r) {
  return r == Resource::Wood ? MarketPrediction::PredictWood
                             : MarketPrediction::PredictStone;
}
inline Resource other(Resource r) {
  return r == Resource::Wood ? Resource::Stone : Resource::Wood;
}

// Success probabilities of the three independent actions.
struct Skill {
  Specialization specialization = Specialization::Chopper;
  double chop = 0.0;
  double mine = 0.0;
  double build = 0.0;

  static Skill of(Specialization s);
  // Only defined for ChopWood, MineStone and Build.
  double success(ActionKind a) const;
  // Resource the specialization is good at extracting; nullopt for builders.
  std::optional<Resource> skilled_resource() const;
};

// Reward and transfer constants of the economy. The defaults are the values
// the webgame mirrors; tests/fixtures/economy_constants.json pins them.
struct EconomyRules {
  double build_reward = 15.0;
  double sale_reward = 1.0;
  double buy_cost = 2.0;
  int sale_units = 2;
  double market_match_reward = 1.0;
  double market_miss_reward = -1.0;
  double market_insufficient_reward = -0.3;
  // Observation flag is 1 iff the count is strictly greater than this.
  int flag_threshold = 1;
  // A failed build roll still uses up one wood and one stone.
  bool failed_build_consumes = true;
};

struct AgentState {
  std::uint32_t id = 0;
  IdentityCode identity;
  Skill skill;
  int wood = 0;
  int stone = 0;
  double coins = 0.0;

  int& count(Resource r) { return r == Resource::Wood ? wood : stone; }
  int count(Resource r) const { return r == Resource::Wood ? wood : stone; }
};

struct TransactionOutcome {
  double agent_reward = 0.0;
  double market_reward = 0.0;
  int wood_delta = 0;
  int stone_delta = 0;
  bool coordinated = false;
  bool insufficient = false;
};

// Result of one agent action, as recorded in the event log.
struct ActionOutcome {
  bool success = false;
  double agent_reward = 0.0;
  double market_reward = 0.0;
  int wood_delta = 0;
  int stone_delta = 0;
  std::optional<MarketPrediction> prediction;
  bool coordinated = false;
  bool insufficient = false;
};

struct EventRecord {
  int epoch = 0;
  int step = 0;
  std::uint32_t agent_id = 0;
  ActionKind kind = ActionKind::ChopWood;
  bool success = false;
  double agent_reward = 0.0;
  double market_reward = 0.0;
  int wood_delta = 0;
  int stone_delta = 0;
};

Observation observe_agent(const AgentState& agent,
                          const EconomyRules& rules = {});

// ChopWood / MineStone. Returns whether the skill roll succeeded.
bool attempt_extract(AgentState& agent, Resource resource, RandomStream& rng);

// Needs one wood and one stone; without them no roll is made.
bool attempt_build(AgentState& agent, RandomStream& rng,
                   const EconomyRules& rules = {});

void attempt_buy(AgentState& agent, Resource resource,
                 const EconomyRules& rules = {});

// Deterministic given its arguments.
TransactionOutcome resolve_sale(AgentState& agent, Resource offered,
                                MarketPrediction prediction,
                                const EconomyRules& rules = {});

// Dispatches one action. Sale actions require the market's prediction.
ActionOutcome apply_action(AgentState& agent, ActionKind kind,
                           RandomStream& rng, const EconomyRules& rules,
                           std::optional<MarketPrediction> prediction = {});

}  // namespace convsim
