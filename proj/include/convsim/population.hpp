#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string_view>
#include <vector>

#include "convsim/economy.hpp"
#include "convsim/identity.hpp"
#include "convsim/rng.hpp"

namespace convsim {

enum class PopulationScheme : std::uint8_t {
  Random,             // independent codes, balanced skills
  Correlated,         // group label correlated with skill (50/25/25)
  ReplacementCohort,  // Correlated start, then uncorrelated replacements
};

std::string_view to_string(PopulationScheme scheme);

struct SkillMix {
  int chopper = 0;
  int miner = 0;
  int builder = 0;

  int total() const { return chopper + miner + builder; }
  int count(Specialization s) const;
  friend bool operator==(const SkillMix&, const SkillMix&) = default;
};

// Each group is named after, and dominated by, one specialization.
Specialization majority_specialization(GroupLabel group);
// Wood for the chopper group, stone for the miner group, none for builders.
std::optional<Resource> majority_resource(GroupLabel group);

// Sizes used in the original experiments whose group/skill cells do not
// divide evenly; these are apportioned by largest remainder.
inline constexpr int kApportionedSizes[] = {30, 100};

struct PopulationSpec {
  int size = 300;
  PopulationScheme scheme = PopulationScheme::Correlated;
  // Replacement waves per group (ReplacementCohort only).
  int waves = 5;

  // Throws ConfigError naming the violated constraint.
  void validate() const;
  // Random: one entry for the whole population. Otherwise one per group.
  std::vector<SkillMix> composition() const;
};

// Codes issued so far in a simulation, including replaced agents and probes.
class CodeRegistry {
 public:
  bool contains(IdentityCode code) const { return issued_.contains(code); }
  std::size_t size() const { return issued_.size(); }
  // Throws if the code was already issued.
  void issue(IdentityCode code);
  // Fresh individual segment under the group label.
  IdentityCode draw(GroupLabel group, RandomStream& rng);
  // Fresh code over all 16 digits.
  IdentityCode draw_any(RandomStream& rng);

  const std::set<IdentityCode>& issued() const { return issued_; }

 private:
  std::set<IdentityCode> issued_;
};

struct AgentRecord {
  AgentState state;
  std::optional<GroupLabel> group;
  int wave_introduced = 0;

  Specialization specialization() const { return state.skill.specialization; }
};

// Agent ids are assigned consecutively from next_id, which is advanced.
std::vector<AgentRecord> generate_population(const PopulationSpec& spec,
                                             RandomStream& rng,
                                             CodeRegistry& registry,
                                             std::uint32_t& next_id);

// count/2 choppers and count/2 miners under the group's label.
std::vector<AgentRecord> generate_replacement_cohort(GroupLabel group,
                                                     int count, int wave,
                                                     RandomStream& rng,
                                                     CodeRegistry& registry,
                                                     std::uint32_t& next_id);

// Codes under the group label that no agent has or will ever hold.
std::vector<IdentityCode> generate_heldout_probes(GroupLabel group, int count,
                                                  RandomStream& rng,
                                                  CodeRegistry& registry);
// Group-free probes for the Random scheme.
std::vector<IdentityCode> generate_heldout_probes(int count, RandomStream& rng,
                                                  CodeRegistry& registry);

// agent_id,code,group,specialization,wave_introduced
void write_manifest(std::ostream& out, const std::vector<AgentRecord>& agents);
std::vector<AgentRecord> read_manifest(std::istream& in);

}  // namespace convsim
