#include "convsim/population.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "convsim/errors.hpp"

namespace convsim {

namespace {

bool is_apportioned(int size) {
  return std::find(std::begin(kApportionedSizes), std::end(kApportionedSizes),
                   size) != std::end(kApportionedSizes);
}

// Largest-remainder split of n by weights; ties go to the earlier index.
std::vector<int> apportion(int n, const std::vector<double>& weights) {
  std::vector<int> counts(weights.size());
  std::vector<double> rem(weights.size());
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = n * weights[i];
    counts[i] = static_cast<int>(exact + 1e-9);
    rem[i] = exact - counts[i];
    assigned += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return rem[a] > rem[b] + 1e-12;
  });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned)
    ++counts[order[k % order.size()]];
  return counts;
}

std::vector<Specialization> minority_order(GroupLabel group) {
  switch (majority_specialization(group)) {
    case Specialization::Chopper:
      return {Specialization::Miner, Specialization::Builder};
    case Specialization::Miner:
      return {Specialization::Chopper, Specialization::Builder};
    case Specialization::Builder:
      return {Specialization::Chopper, Specialization::Miner};
  }
  return {};
}

void set_count(SkillMix& mix, Specialization s, int n) {
  switch (s) {
    case Specialization::Chopper: mix.chopper = n; break;
    case Specialization::Miner: mix.miner = n; break;
    case Specialization::Builder: mix.builder = n; break;
  }
}

AgentRecord make_agent(std::uint32_t id, IdentityCode code, Specialization s,
                       std::optional<GroupLabel> group, int wave) {
  AgentRecord rec;
  rec.state.id = id;
  rec.state.identity = code;
  rec.state.skill = Skill::of(s);
  rec.group = group;
  rec.wave_introduced = wave;
  return rec;
}

std::vector<Specialization> expand(const SkillMix& mix) {
  std::vector<Specialization> out;
  out.insert(out.end(), mix.chopper, Specialization::Chopper);
  out.insert(out.end(), mix.miner, Specialization::Miner);
  out.insert(out.end(), mix.builder, Specialization::Builder);
  return out;
}

}  // namespace

std::string_view to_string(PopulationScheme scheme) {
  switch (scheme) {
    case PopulationScheme::Random: return "random";
    case PopulationScheme::Correlated: return "correlated";
    case PopulationScheme::ReplacementCohort: return "replacement_cohort";
  }
  return "unknown";
}

int SkillMix::count(Specialization s) const {
  switch (s) {
    case Specialization::Chopper: return chopper;
    case Specialization::Miner: return miner;
    case Specialization::Builder: return builder;
  }
  return 0;
}

Specialization majority_specialization(GroupLabel group) {
  switch (group) {
    case GroupLabel::Purple: return Specialization::Chopper;
    case GroupLabel::Yellow: return Specialization::Miner;
    case GroupLabel::Cyan: return Specialization::Builder;
  }
  return Specialization::Builder;
}

std::optional<Resource> majority_resource(GroupLabel group) {
  return Skill::of(majority_specialization(group)).skilled_resource();
}

void PopulationSpec::validate() const {
  std::ostringstream msg;
  if (size < kNumGroups * 4) {
    msg << "population size " << size << " is below the minimum of "
        << kNumGroups * 4;
    throw ConfigError(msg.str());
  }
  if (scheme == PopulationScheme::Random) {
    if (size % 3 != 0 && !is_apportioned(size)) {
      msg << "population size " << size
          << " is not divisible by 3 (the random scheme splits skills into "
             "equal thirds)";
      throw ConfigError(msg.str());
    }
    return;
  }
  if (size % 12 != 0 && !is_apportioned(size)) {
    msg << "population size " << size
        << " is not divisible by 12 (3 equal groups, each split 50/25/25 by "
           "skill)";
    throw ConfigError(msg.str());
  }
  if (scheme == PopulationScheme::ReplacementCohort) {
    if (waves < 1) throw ConfigError("replacement waves must be >= 1");
    const int group_size = size / kNumGroups;
    if (size % kNumGroups != 0 || group_size % waves != 0 ||
        (group_size / waves) % 2 != 0) {
      msg << "population size " << size << " is not divisible into "
          << kNumGroups << " groups x " << waves
          << " waves of an even number of agents (replacement cohorts are "
             "half choppers, half miners)";
      throw ConfigError(msg.str());
    }
  }
}

std::vector<SkillMix> PopulationSpec::composition() const {
  validate();
  if (scheme == PopulationScheme::Random) {
    auto thirds = apportion(size, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    return {SkillMix{thirds[0], thirds[1], thirds[2]}};
  }
  auto group_sizes = apportion(size, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  std::vector<SkillMix> out;
  for (auto group : kAllGroups) {
    const int g = group_sizes[static_cast<int>(group)];
    auto cells = apportion(g, {0.5, 0.25, 0.25});
    auto minorities = minority_order(group);
    SkillMix mix;
    set_count(mix, majority_specialization(group), cells[0]);
    set_count(mix, minorities[0], cells[1]);
    set_count(mix, minorities[1], cells[2]);
    out.push_back(mix);
  }
  return out;
}

void CodeRegistry::issue(IdentityCode code) {
  if (!issued_.insert(code).second)
    throw std::logic_error("identity code issued twice: " + code.to_string());
}

IdentityCode CodeRegistry::draw(GroupLabel group, RandomStream& rng) {
  const auto lo = IdentityCode::from_parts(group, 0);
  const auto hi = IdentityCode::from_parts(group, kIndividualSpace - 1);
  const auto used = std::distance(issued_.lower_bound(lo),
                                  issued_.upper_bound(hi));
  if (used >= static_cast<std::ptrdiff_t>(kIndividualSpace))
    throw std::runtime_error("identity code space exhausted for group " +
                             std::string(color_name(group)));
  while (true) {
    auto code = IdentityCode::from_parts(
        group, static_cast<std::uint32_t>(rng.below(kIndividualSpace)));
    if (issued_.insert(code).second) return code;
  }
}

IdentityCode CodeRegistry::draw_any(RandomStream& rng) {
  if (issued_.size() >= (1u << kCodeDigits))
    throw std::runtime_error("identity code space exhausted");
  while (true) {
    IdentityCode code(static_cast<std::uint16_t>(rng.below(1u << kCodeDigits)));
    if (issued_.insert(code).second) return code;
  }
}

std::vector<AgentRecord> generate_population(const PopulationSpec& spec,
                                             RandomStream& rng,
                                             CodeRegistry& registry,
                                             std::uint32_t& next_id) {
  const auto mixes = spec.composition();
  std::vector<AgentRecord> out;
  out.reserve(spec.size);
  if (spec.scheme == PopulationScheme::Random) {
    for (auto s : expand(mixes.front()))
      out.push_back(make_agent(next_id++, registry.draw_any(rng), s,
                               std::nullopt, 0));
    return out;
  }
  for (auto group : kAllGroups)
    for (auto s : expand(mixes[static_cast<int>(group)]))
      out.push_back(
          make_agent(next_id++, registry.draw(group, rng), s, group, 0));
  return out;
}

std::vector<AgentRecord> generate_replacement_cohort(GroupLabel group,
                                                     int count, int wave,
                                                     RandomStream& rng,
                                                     CodeRegistry& registry,
                                                     std::uint32_t& next_id) {
  if (count < 0 || count % 2 != 0)
    throw ConfigError("replacement cohort size must be even, got " +
                      std::to_string(count));
  std::vector<AgentRecord> out;
  for (auto s : expand(SkillMix{count / 2, count / 2, 0}))
    out.push_back(
        make_agent(next_id++, registry.draw(group, rng), s, group, wave));
  return out;
}

std::vector<IdentityCode> generate_heldout_probes(GroupLabel group, int count,
                                                  RandomStream& rng,
                                                  CodeRegistry& registry) {
  if (count < 1) throw ConfigError("probe count must be >= 1");
  std::vector<IdentityCode> out;
  for (int i = 0; i < count; ++i) out.push_back(registry.draw(group, rng));
  return out;
}

std::vector<IdentityCode> generate_heldout_probes(int count, RandomStream& rng,
                                                  CodeRegistry& registry) {
  if (count < 1) throw ConfigError("probe count must be >= 1");
  std::vector<IdentityCode> out;
  for (int i = 0; i < count; ++i) out.push_back(registry.draw_any(rng));
  return out;
}

void write_manifest(std::ostream& out, const std::vector<AgentRecord>& agents) {
  out << "agent_id,code,group,specialization,wave_introduced\n";
  for (const auto& a : agents) {
    out << a.state.id << ',' << a.state.identity.to_string() << ','
        << (a.group ? color_name(*a.group) : "none") << ','
        << to_string(a.specialization()) << ',' << a.wave_introduced << '\n';
  }
}

std::vector<AgentRecord> read_manifest(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "agent_id,code,group,specialization,wave_introduced")
    throw std::runtime_error("manifest: unexpected header");
  std::vector<AgentRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    auto fail = [&] {
      return std::runtime_error("manifest: malformed line " +
                                std::to_string(lineno));
    };
    if (f.size() != 5) throw fail();
    auto code = IdentityCode::parse(f[1]);
    auto spec = parse_specialization(f[3]);
    if (!code || !spec) throw fail();
    std::optional<GroupLabel> group;
    if (f[2] != "none") {
      group = group_from_color(f[2]);
      if (!group) throw fail();
    }
    out.push_back(make_agent(static_cast<std::uint32_t>(std::stoul(f[0])),
                             *code, *spec, group, std::stoi(f[4])));
  }
  return out;
}

}  // namespace convsim
