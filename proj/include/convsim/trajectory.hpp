#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "convsim/world.hpp"

namespace convsim {

inline constexpr int kTrajectorySchemaVersion = 1;

enum class Timepoint : std::uint8_t { Initial, Wave2, Wave5 };
std::string_view to_string(Timepoint t);
std::optional<Timepoint> parse_timepoint(std::string_view s);

// Last epoch of the phase a timepoint refers to: the phase before the first
// replacement wave, the end of wave 2, or the end of wave 5 (before the
// market is replaced). Throws FormatError when the world never reached it.
int timepoint_epoch(const World& world, Timepoint t);

struct MarketGameAgent {
  std::string id12;  // unique 12-digit nametag shown in place of the code tail
  GroupLabel color = GroupLabel::Purple;
  double approach_weight = 0.0;  // normalized share of sell attempts
  double wood_prob = 0.5;        // share of the agent's offers that were wood
};

struct MarketGameExport {
  Timepoint timepoint = Timepoint::Initial;
  int window = 10;
  std::vector<MarketGameAgent> agents;
};

struct AgentGameEpoch {
  int epoch = 0;  // 1-based within the exported window
  double wood = 0.5;
  double stone = 0.5;
};

struct AgentGameExport {
  Timepoint timepoint = Timepoint::Initial;
  std::vector<AgentGameEpoch> epochs;
};

// Needs a Generational world with at least `window` epochs before the
// timepoint.
MarketGameExport export_market_game(const World& world, Timepoint t,
                                    int window = 10);
// Per-epoch probability that the market predicted the skilled resource of a
// minority agent, one series per skill, over the `length` epochs that end at
// the timepoint. Epochs without minority sales fall back to the market's
// cached policy probability for those agents.
AgentGameExport export_agent_game(const World& world, Timepoint t,
                                  int length = 200);

nlohmann::json to_json(const MarketGameExport& e);
nlohmann::json to_json(const AgentGameExport& e);

// Empty when the document is a valid market- or agent-game export.
std::vector<std::string> validate_trajectory(const nlohmann::json& doc);

}  // namespace convsim
