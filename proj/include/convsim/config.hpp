#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "convsim/economy.hpp"
#include "convsim/population.hpp"
#include "convsim/ppo.hpp"

namespace convsim {

enum class StudyKind : std::uint8_t { Individuation, Regularity, Generational };

std::string_view to_string(StudyKind s);
std::optional<StudyKind> parse_study(std::string_view s);
PopulationScheme scheme_for(StudyKind s);

// How agent observations are presented to the agent networks.
enum class InputScaling : std::uint8_t {
  Raw,         // counts as observed
  SignedLog,   // sign(x) * log(1 + |x|) on counts, flags unchanged
};
std::string_view to_string(InputScaling s);
std::optional<InputScaling> parse_input_scaling(std::string_view s);

struct ReplacementSchedule {
  int waves = 5;
  int inter_wave_epochs = 100;
  int post_market_epochs = 200;
  bool replace_market = true;
};

struct StudyConfig {
  StudyKind study = StudyKind::Individuation;
  int population_size = 300;
  // Individuation / Regularity training length; for Generational, the
  // Regularity phase trained before the first wave.
  int epochs = 200;
  int steps_per_epoch = 200;
  int runs = 20;
  TrainerConfig trainer;
  EconomyRules economy;
  ReplacementSchedule replacement;
  InputScaling agent_input = InputScaling::SignedLog;
  int probes_per_group = 10;
  int checkpoint_every = 0;  // 0: final checkpoint only
  // Generational only: checkpoint of the Regularity run to continue from.
  std::string base_checkpoint;

  PopulationSpec population_spec() const;
  // Throws ConfigError with the offending field in the message.
  void validate() const;
  // Epochs this study trains once started.
  int total_epochs() const;
};

std::string to_json(const StudyConfig& config);
// Throws ConfigError with line/field diagnostics.
StudyConfig config_from_json(std::string_view text);
// "dotted.key=value"; value parsed as JSON when possible, else as a string.
void apply_overrides(std::string& json_text,
                     const std::vector<std::string>& overrides);
StudyConfig load_config(const std::string& path,
                        const std::vector<std::string>& overrides = {});

// "1..5" -> {1,2,3,4,5}; "3,7" -> {3,7}. Throws ConfigError on duplicates.
std::vector<std::uint64_t> parse_seed_list(std::string_view text);

}  // namespace convsim
