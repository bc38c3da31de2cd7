#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "convsim/config.hpp"
#include "convsim/economy.hpp"
#include "convsim/population.hpp"
#include "convsim/ppo.hpp"
#include "convsim/rng.hpp"

namespace convsim {

struct AgentSlot {
  AgentRecord record;
  PolicyModel model;
  RolloutBuffer buffer;
};

// One agent's tallies over one epoch.
struct AgentEpochSummary {
  std::uint32_t agent_id = 0;
  std::array<int, kNumActions> attempts{};
  std::array<int, kNumActions> successes{};
  int predicted_wood = 0;     // market predictions of wood on this agent's sales
  int predicted_skilled = 0;  // predictions of the agent's skilled resource
  double coins = 0.0;         // reward accumulated over the epoch
  // Market policy probability of predicting wood for this agent's code,
  // fixed for the epoch.
  double market_wood_prob = 0.0;

  int attempts_of(ActionKind a) const { return attempts[static_cast<int>(a)]; }
  int successes_of(ActionKind a) const { return successes[static_cast<int>(a)]; }
  int sales() const {
    return attempts_of(ActionKind::SellWood) + attempts_of(ActionKind::SellStone);
  }
  friend bool operator==(const AgentEpochSummary&,
                         const AgentEpochSummary&) = default;
};

struct SaleRecord {
  std::uint32_t agent_id = 0;
  Resource offered = Resource::Wood;
  MarketPrediction prediction = MarketPrediction::PredictWood;
  bool coordinated = false;
  bool insufficient = false;
  double agent_reward = 0.0;
  double market_reward = 0.0;
};

struct EpochLog {
  int epoch = 0;
  int phase = 0;
  std::vector<AgentEpochSummary> agents;  // live agents in slot order
  std::vector<SaleRecord> sales;
  std::vector<EventRecord> events;
  double market_reward = 0.0;
  std::size_t market_steps = 0;  // market buffer length before training
  std::vector<TrainStats> agent_stats;  // slot order
  TrainStats market_stats;
};

struct Phase {
  std::string label;
  int first_epoch = 0;
  int last_epoch = -1;  // inclusive; < first_epoch while empty
  friend bool operator==(const Phase&, const Phase&) = default;
};

// Compact per-epoch record kept for trajectory exports.
struct EpochHistory {
  int epoch = 0;
  int phase = 0;
  std::vector<AgentEpochSummary> agents;
  friend bool operator==(const EpochHistory&, const EpochHistory&) = default;
};

// Held-out identity codes. Each probe carries a hypothetical resource,
// balanced within the set, used to score accuracy on unobserved agents.
struct ProbeSet {
  std::optional<GroupLabel> group;
  std::vector<IdentityCode> codes;
  std::vector<Resource> truth;
  friend bool operator==(const ProbeSet&, const ProbeSet&) = default;
};

Observation agent_network_input(const Observation& obs, InputScaling scaling);

class World {
 public:
  // Fresh population, untrained models, probes drawn.
  static World create(const StudyConfig& config, std::uint64_t seed);
  static World restore(std::string_view bytes);
  std::string checkpoint() const;

  // One epoch of simultaneous acting, then every model trains on its buffer.
  EpochLog run_epoch();
  // Replaces 1/waves of each group's original agents. Waves run in order.
  void apply_replacement(int wave);
  // Swaps in a fresh, untrained market decider.
  void replace_market();
  void begin_phase(std::string label);

  // Switches an Individuation/Regularity world to a new study config while
  // keeping all learned state (used to continue Regularity as Generational).
  void adopt_config(const StudyConfig& config);

  const StudyConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  int epoch() const { return epoch_; }
  int wave() const { return wave_; }
  const std::vector<AgentSlot>& agents() const { return agents_; }
  const PolicyModel& market() const { return market_; }
  const RolloutBuffer& market_buffer() const { return market_buffer_; }
  const std::vector<ProbeSet>& probes() const { return probes_; }
  const std::vector<Phase>& phases() const { return phases_; }
  const std::vector<EpochHistory>& history() const { return history_; }
  // Every agent ever introduced, including replaced ones.
  const std::vector<AgentRecord>& manifest() const { return manifest_; }
  const CodeRegistry& registry() const { return registry_; }
  const AgentRecord* find_record(std::uint32_t id) const;

  friend bool operator==(const World&, const World&);

 private:
  StudyConfig config_;
  std::uint64_t seed_ = 0;
  int epoch_ = 0;
  int wave_ = 0;
  std::uint32_t next_id_ = 0;
  std::vector<AgentSlot> agents_;
  PolicyModel market_;
  RolloutBuffer market_buffer_;
  CodeRegistry registry_;
  std::vector<AgentRecord> manifest_;
  std::vector<ProbeSet> probes_;
  std::array<int, kNumGroups> original_group_size_{};
  std::vector<Phase> phases_;
  std::vector<EpochHistory> history_;

  RandomStream population_rng_;
  RandomStream init_rng_;
  RandomStream order_rng_;
  RandomStream env_rng_;
  RandomStream agent_policy_rng_;
  RandomStream market_policy_rng_;
};

}  // namespace convsim
