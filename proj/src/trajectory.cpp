#include "convsim/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "convsim/errors.hpp"
#include "convsim/metrics.hpp"

namespace convsim {

std::string_view to_string(Timepoint t) {
  switch (t) {
    case Timepoint::Initial: return "initial";
    case Timepoint::Wave2: return "wave2";
    case Timepoint::Wave5: return "wave5";
  }
  return "?";
}

std::optional<Timepoint> parse_timepoint(std::string_view s) {
  for (auto t : {Timepoint::Initial, Timepoint::Wave2, Timepoint::Wave5}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

int timepoint_epoch(const World& world, Timepoint t) {
  const auto& phases = world.phases();
  auto find = [&](std::string_view label) -> std::ptrdiff_t {
    for (std::size_t i = 0; i < phases.size(); ++i) {
      if (phases[i].label == label) return static_cast<std::ptrdiff_t>(i);
    }
    return -1;
  };
  std::ptrdiff_t idx = -1;
  switch (t) {
    case Timepoint::Initial: {
      const auto first_wave = find("wave1");
      idx = first_wave > 0 ? first_wave - 1 : -1;
      break;
    }
    case Timepoint::Wave2: idx = find("wave2"); break;
    case Timepoint::Wave5: idx = find("wave5"); break;
  }
  if (idx < 0 || phases[idx].last_epoch < phases[idx].first_epoch) {
    throw FormatError("timepoint '" + std::string(to_string(t)) +
                      "' not reached by this run");
  }
  return phases[idx].last_epoch;
}

namespace {

const EpochHistory& history_at(const World& world, int epoch) {
  const auto& h = world.history();
  auto it = std::lower_bound(
      h.begin(), h.end(), epoch,
      [](const EpochHistory& e, int v) { return e.epoch < v; });
  if (it == h.end() || it->epoch != epoch) {
    throw FormatError("no recorded history for epoch " + std::to_string(epoch));
  }
  return *it;
}

std::string nametag(std::uint64_t value) {
  std::string s(12, '0');
  for (int i = 11; i >= 0; --i) {
    s[i] = static_cast<char>('0' + (value & 1u));
    value >>= 1;
  }
  return s;
}

}  // namespace

MarketGameExport export_market_game(const World& world, Timepoint t,
                                    int window) {
  if (window < 1) throw ConfigError("market-game window must be positive");
  const int end = timepoint_epoch(world, t);
  if (end - window + 1 < 1) {
    throw FormatError("timepoint '" + std::string(to_string(t)) +
                      "' has fewer than " + std::to_string(window) +
                      " epochs of history");
  }
  const EpochHistory& last = history_at(world, end);
  struct Tally {
    int wood = 0;
    int stone = 0;
  };
  std::vector<Tally> tallies(last.agents.size());
  for (int e = end - window + 1; e <= end; ++e) {
    const EpochHistory& h = history_at(world, e);
    for (std::size_t i = 0; i < last.agents.size(); ++i) {
      const auto id = last.agents[i].agent_id;
      for (const auto& s : h.agents) {
        if (s.agent_id != id) continue;
        tallies[i].wood += s.attempts_of(ActionKind::SellWood);
        tallies[i].stone += s.attempts_of(ActionKind::SellStone);
      }
    }
  }
  double total = 0.0;
  for (const auto& tl : tallies) total += tl.wood + tl.stone;

  auto tag_rng = RandomStream::derive(
      world.seed(), "nametags/" + std::string(to_string(t)));
  std::set<std::uint64_t> used;

  MarketGameExport out;
  out.timepoint = t;
  out.window = window;
  for (std::size_t i = 0; i < last.agents.size(); ++i) {
    const AgentRecord* rec = world.find_record(last.agents[i].agent_id);
    if (!rec || !rec->group) {
      throw FormatError("market-game export needs group-labelled agents");
    }
    MarketGameAgent a;
    std::uint64_t tag = 0;
    do {
      tag = tag_rng.below(4096);
    } while (!used.insert(tag).second);
    a.id12 = nametag(tag);
    a.color = *rec->group;
    const int offers = tallies[i].wood + tallies[i].stone;
    a.approach_weight = total > 0.0 ? offers / total : 0.0;
    a.wood_prob = offers > 0 ? static_cast<double>(tallies[i].wood) / offers : 0.5;
    out.agents.push_back(std::move(a));
  }
  return out;
}

AgentGameExport export_agent_game(const World& world, Timepoint t, int length) {
  if (length < 1) throw ConfigError("agent-game length must be positive");
  const int end = timepoint_epoch(world, t);
  const int begin = end - length + 1;
  if (begin < 1) {
    throw FormatError("timepoint '" + std::string(to_string(t)) +
                      "' has fewer than " + std::to_string(length) +
                      " epochs of history");
  }
  AgentGameExport out;
  out.timepoint = t;
  for (int e = begin; e <= end; ++e) {
    const EpochHistory& h = history_at(world, e);
    double value[2] = {0.5, 0.5};
    for (Resource skill : {Resource::Wood, Resource::Stone}) {
      int predicted = 0;
      int sales = 0;
      double policy = 0.0;
      int agents = 0;
      for (const auto& s : h.agents) {
        const AgentRecord* rec = world.find_record(s.agent_id);
        if (!rec || !rec->group) continue;
        const RoleClass role = role_of(*rec);
        if (role != RoleClass::Minority && role != RoleClass::ReplacementMinority) {
          continue;
        }
        if (!majority_resource(*rec->group)) continue;
        if (rec->state.skill.skilled_resource() != skill) continue;
        ++agents;
        predicted += s.predicted_skilled;
        sales += s.sales();
        policy += skill == Resource::Wood ? s.market_wood_prob
                                          : 1.0 - s.market_wood_prob;
      }
      if (agents == 0) {
        throw FormatError("no minority agents skilled in " +
                          std::string(to_string(skill)) + " at epoch " +
                          std::to_string(e));
      }
      value[static_cast<int>(skill)] =
          sales > 0 ? static_cast<double>(predicted) / sales : policy / agents;
    }
    out.epochs.push_back({e - begin + 1, value[0], value[1]});
  }
  return out;
}

nlohmann::json to_json(const MarketGameExport& e) {
  nlohmann::json agents = nlohmann::json::array();
  for (const auto& a : e.agents) {
    agents.push_back({{"id12", a.id12},
                      {"color", color_name(a.color)},
                      {"approach_weight", a.approach_weight},
                      {"wood_prob", a.wood_prob}});
  }
  return {{"schema_version", kTrajectorySchemaVersion},
          {"timepoint", to_string(e.timepoint)},
          {"agents", std::move(agents)}};
}

nlohmann::json to_json(const AgentGameExport& e) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& p : e.epochs) {
    epochs.push_back(
        {{"epoch", p.epoch},
         {"skill_consistent_prob", {{"wood", p.wood}, {"stone", p.stone}}}});
  }
  return {{"schema_version", kTrajectorySchemaVersion},
          {"timepoint", to_string(e.timepoint)},
          {"epochs", std::move(epochs)}};
}

namespace {

bool is_probability(const nlohmann::json& v) {
  return v.is_number() && std::isfinite(v.get<double>()) &&
         v.get<double>() >= 0.0 && v.get<double>() <= 1.0;
}

}  // namespace

std::vector<std::string> validate_trajectory(const nlohmann::json& doc) {
  std::vector<std::string> errors;
  if (!doc.is_object()) return {"document is not an object"};
  if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer() ||
      doc["schema_version"].get<int>() != kTrajectorySchemaVersion) {
    errors.push_back("schema_version must be " +
                     std::to_string(kTrajectorySchemaVersion));
  }
  if (!doc.contains("timepoint") || !doc["timepoint"].is_string() ||
      !parse_timepoint(doc["timepoint"].get<std::string>())) {
    errors.push_back("timepoint must be one of initial, wave2, wave5");
  }
  const bool market = doc.contains("agents");
  const bool agent = doc.contains("epochs");
  if (market == agent) {
    errors.push_back("exactly one of 'agents' or 'epochs' is required");
    return errors;
  }
  if (market) {
    const auto& agents = doc["agents"];
    if (!agents.is_array() || agents.empty()) {
      errors.push_back("agents must be a non-empty array");
      return errors;
    }
    std::set<std::string> tags;
    double total = 0.0;
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const auto& a = agents[i];
      const std::string at = "agents[" + std::to_string(i) + "]";
      if (!a.is_object() || a.size() != 4) {
        errors.push_back(at + " must have exactly id12, color, approach_weight, wood_prob");
        continue;
      }
      if (!a.contains("id12") || !a["id12"].is_string() ||
          a["id12"].get<std::string>().size() != 12 ||
          a["id12"].get<std::string>().find_first_not_of("01") != std::string::npos) {
        errors.push_back(at + ".id12 must be a 12-digit binary string");
      } else if (!tags.insert(a["id12"].get<std::string>()).second) {
        errors.push_back(at + ".id12 is not unique");
      }
      if (!a.contains("color") || !a["color"].is_string() ||
          !group_from_color(a["color"].get<std::string>())) {
        errors.push_back(at + ".color must be purple, yellow or cyan");
      }
      if (!a.contains("approach_weight") || !is_probability(a["approach_weight"])) {
        errors.push_back(at + ".approach_weight must lie in [0, 1]");
      } else {
        total += a["approach_weight"].get<double>();
      }
      if (!a.contains("wood_prob") || !is_probability(a["wood_prob"])) {
        errors.push_back(at + ".wood_prob must lie in [0, 1]");
      }
    }
    if (errors.empty() && total > 0.0 && std::abs(total - 1.0) > 1e-9) {
      errors.push_back("approach weights must sum to 1");
    }
  } else {
    const auto& epochs = doc["epochs"];
    if (!epochs.is_array() || epochs.empty()) {
      errors.push_back("epochs must be a non-empty array");
      return errors;
    }
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      const auto& p = epochs[i];
      const std::string at = "epochs[" + std::to_string(i) + "]";
      if (!p.is_object() || !p.contains("epoch") || !p["epoch"].is_number_integer() ||
          p["epoch"].get<int>() != static_cast<int>(i) + 1) {
        errors.push_back(at + ".epoch must equal " + std::to_string(i + 1));
      }
      if (!p.is_object() || !p.contains("skill_consistent_prob") ||
          !p["skill_consistent_prob"].is_object()) {
        errors.push_back(at + ".skill_consistent_prob must be an object");
        continue;
      }
      const auto& s = p["skill_consistent_prob"];
      for (const char* key : {"wood", "stone"}) {
        if (!s.contains(key) || !is_probability(s[key])) {
          errors.push_back(at + ".skill_consistent_prob." + key +
                           " must lie in [0, 1]");
        }
      }
    }
  }
  return errors;
}

}  // namespace convsim
