#include "convsim/config.hpp"

#include <charconv>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "convsim/binary_io.hpp"
#include "convsim/errors.hpp"

namespace convsim {

using nlohmann::json;

namespace {

// Reads known keys out of an object and rejects anything else.
class FieldReader {
 public:
  FieldReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where("") + "expected an object");
  }
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!used_.contains(it.key()))
        throw ConfigError(where(it.key()) + "unknown field");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    used_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("expected a number");
      } else {
        if (!it->is_string()) throw ConfigError("expected a string");
      }
      out = it->get<T>();
    } catch (const ConfigError& e) {
      throw ConfigError(where(key) + e.what());
    }
  }

  const json* child(const std::string& key) {
    used_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  std::string where(const std::string& key) const {
    return "config field '" + path(key) + "': ";
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace

std::string_view to_string(StudyKind s) {
  switch (s) {
    case StudyKind::Individuation: return "individuation";
    case StudyKind::Regularity: return "regularity";
    case StudyKind::Generational: return "generational";
  }
  return "unknown";
}

std::optional<StudyKind> parse_study(std::string_view s) {
  for (auto k : {StudyKind::Individuation, StudyKind::Regularity,
                 StudyKind::Generational})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

PopulationScheme scheme_for(StudyKind s) {
  switch (s) {
    case StudyKind::Individuation: return PopulationScheme::Random;
    case StudyKind::Regularity: return PopulationScheme::Correlated;
    case StudyKind::Generational: return PopulationScheme::ReplacementCohort;
  }
  return PopulationScheme::Random;
}

std::string_view to_string(InputScaling s) {
  return s == InputScaling::Raw ? "raw" : "signed_log";
}

std::optional<InputScaling> parse_input_scaling(std::string_view s) {
  if (s == "raw") return InputScaling::Raw;
  if (s == "signed_log") return InputScaling::SignedLog;
  return std::nullopt;
}

PopulationSpec StudyConfig::population_spec() const {
  return {population_size, scheme_for(study), replacement.waves};
}

int StudyConfig::total_epochs() const {
  if (study != StudyKind::Generational) return epochs;
  return epochs + replacement.waves * replacement.inter_wave_epochs +
         (replacement.replace_market ? replacement.post_market_epochs : 0);
}

void StudyConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) {
    throw ConfigError("config field '" + field + "': " + msg);
  };
  try {
    population_spec().validate();
  } catch (const ConfigError& e) {
    fail("population_size", e.what());
  }
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (steps_per_epoch < 1) fail("steps_per_epoch", "must be >= 1");
  if (runs < 1) fail("runs", "must be >= 1");
  if (probes_per_group < 1) fail("probes_per_group", "must be >= 1");
  if (checkpoint_every < 0) fail("checkpoint_every", "must be >= 0");
  if (replacement.waves < 1) fail("replacement.waves", "must be >= 1");
  if (replacement.inter_wave_epochs < 1)
    fail("replacement.inter_wave_epochs", "must be >= 1");
  if (replacement.post_market_epochs < 0)
    fail("replacement.post_market_epochs", "must be >= 0");
  if (economy.sale_units < 1) fail("economy.sale_units", "must be >= 1");
  try {
    trainer.validate();
  } catch (const std::invalid_argument& e) {
    fail("trainer", e.what());
  }
}

std::string to_json(const StudyConfig& c) {
  json j;
  j["study"] = std::string(to_string(c.study));
  j["population_size"] = c.population_size;
  j["epochs"] = c.epochs;
  j["steps_per_epoch"] = c.steps_per_epoch;
  j["runs"] = c.runs;
  j["trainer"] = {{"gamma", c.trainer.gamma},
                  {"clip_epsilon", c.trainer.clip_epsilon},
                  {"value_coef", c.trainer.value_coef},
                  {"entropy_coef", c.trainer.entropy_coef},
                  {"actor_lr", c.trainer.actor_lr},
                  {"critic_lr", c.trainer.critic_lr},
                  {"update_passes", c.trainer.update_passes},
                  {"normalize_advantages", c.trainer.normalize_advantages}};
  j["economy"] = {{"build_reward", c.economy.build_reward},
                  {"sale_reward", c.economy.sale_reward},
                  {"buy_cost", c.economy.buy_cost},
                  {"sale_units", c.economy.sale_units},
                  {"market_match_reward", c.economy.market_match_reward},
                  {"market_miss_reward", c.economy.market_miss_reward},
                  {"market_insufficient_reward",
                   c.economy.market_insufficient_reward},
                  {"flag_threshold", c.economy.flag_threshold},
                  {"failed_build_consumes", c.economy.failed_build_consumes}};
  j["replacement"] = {{"waves", c.replacement.waves},
                      {"inter_wave_epochs", c.replacement.inter_wave_epochs},
                      {"post_market_epochs", c.replacement.post_market_epochs},
                      {"replace_market", c.replacement.replace_market}};
  j["agent_input"] = std::string(to_string(c.agent_input));
  j["probes_per_group"] = c.probes_per_group;
  j["checkpoint_every"] = c.checkpoint_every;
  j["base_checkpoint"] = c.base_checkpoint;
  return j.dump(2);
}

StudyConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  StudyConfig c;
  {
    FieldReader r(j, "");
    std::string study = std::string(to_string(c.study));
    r.read("study", study);
    auto kind = parse_study(study);
    if (!kind)
      throw ConfigError(r.where("study") +
                        "expected individuation, regularity or generational");
    c.study = *kind;
    r.read("population_size", c.population_size);
    r.read("epochs", c.epochs);
    r.read("steps_per_epoch", c.steps_per_epoch);
    r.read("runs", c.runs);
    if (const json* t = r.child("trainer")) {
      FieldReader tr(*t, "trainer");
      tr.read("gamma", c.trainer.gamma);
      tr.read("clip_epsilon", c.trainer.clip_epsilon);
      tr.read("value_coef", c.trainer.value_coef);
      tr.read("entropy_coef", c.trainer.entropy_coef);
      tr.read("actor_lr", c.trainer.actor_lr);
      tr.read("critic_lr", c.trainer.critic_lr);
      tr.read("update_passes", c.trainer.update_passes);
      tr.read("normalize_advantages", c.trainer.normalize_advantages);
      tr.finish();
    }
    if (const json* e = r.child("economy")) {
      FieldReader er(*e, "economy");
      er.read("build_reward", c.economy.build_reward);
      er.read("sale_reward", c.economy.sale_reward);
      er.read("buy_cost", c.economy.buy_cost);
      er.read("sale_units", c.economy.sale_units);
      er.read("market_match_reward", c.economy.market_match_reward);
      er.read("market_miss_reward", c.economy.market_miss_reward);
      er.read("market_insufficient_reward", c.economy.market_insufficient_reward);
      er.read("flag_threshold", c.economy.flag_threshold);
      er.read("failed_build_consumes", c.economy.failed_build_consumes);
      er.finish();
    }
    if (const json* p = r.child("replacement")) {
      FieldReader pr(*p, "replacement");
      pr.read("waves", c.replacement.waves);
      pr.read("inter_wave_epochs", c.replacement.inter_wave_epochs);
      pr.read("post_market_epochs", c.replacement.post_market_epochs);
      pr.read("replace_market", c.replacement.replace_market);
      pr.finish();
    }
    std::string input = std::string(to_string(c.agent_input));
    r.read("agent_input", input);
    auto scaling = parse_input_scaling(input);
    if (!scaling)
      throw ConfigError(r.where("agent_input") + "expected raw or signed_log");
    c.agent_input = *scaling;
    r.read("probes_per_group", c.probes_per_group);
    r.read("checkpoint_every", c.checkpoint_every);
    r.read("base_checkpoint", c.base_checkpoint);
    r.finish();
  }
  c.validate();
  return c;
}

void apply_overrides(std::string& json_text,
                     const std::vector<std::string>& overrides) {
  json j = json_text.empty() ? json::object() : json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override '" + ov + "' is not of the form key=value");
    const std::string key = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    json* node = &j;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
      node = &(*node)[parts[i]];
      if (!node->is_object())
        throw ConfigError("override '" + ov + "': '" + parts[i] +
                          "' is not an object");
    }
    (*node)[parts.back()] = value;
  }
  json_text = j.dump(2);
}

StudyConfig load_config(const std::string& path,
                        const std::vector<std::string>& overrides) {
  std::string text;
  if (!path.empty()) {
    try {
      text = read_file(path);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  apply_overrides(text, overrides);
  return config_from_json(text);
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> out;
  auto parse_num = [&](std::string_view s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
      throw ConfigError("invalid seed '" + std::string(s) + "'");
    return v;
  };
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    auto item = text.substr(start, comma == std::string_view::npos
                                       ? std::string_view::npos
                                       : comma - start);
    auto dots = item.find("..");
    if (dots != std::string_view::npos) {
      auto lo = parse_num(item.substr(0, dots));
      auto hi = parse_num(item.substr(dots + 2));
      if (hi < lo) throw ConfigError("empty seed range '" + std::string(item) + "'");
      if (hi - lo > 100000) throw ConfigError("seed range too large");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(parse_num(item));
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  std::set<std::uint64_t> uniq(out.begin(), out.end());
  if (uniq.size() != out.size())
    throw ConfigError("seed list repeats a seed; runs would collide");
  return out;
}

}  // namespace convsim
