#include <doctest.h>

#include <set>
#include <sstream>

#include "convsim/errors.hpp"
#include "convsim/population.hpp"

using namespace convsim;

namespace {

std::vector<AgentRecord> make(int size, PopulationScheme scheme, CodeRegistry& reg,
                              std::uint64_t seed = 1) {
  auto rng = RandomStream::derive(seed, "population");
  std::uint32_t next = 0;
  return generate_population({size, scheme, 5}, rng, reg, next);
}

int count(const std::vector<AgentRecord>& v, std::optional<GroupLabel> g, Specialization s) {
  int n = 0;
  for (const auto& r : v) n += r.group == g && r.specialization() == s;
  return n;
}

}  // namespace

TEST_SUITE("population") {
  TEST_CASE("correlated 300 splits 50/25/25 per group") {
    CodeRegistry reg;
    const auto pop = make(300, PopulationScheme::Correlated, reg);
    REQUIRE(pop.size() == 300);
    CHECK(count(pop, GroupLabel::Purple, Specialization::Chopper) == 50);
    CHECK(count(pop, GroupLabel::Purple, Specialization::Miner) == 25);
    CHECK(count(pop, GroupLabel::Purple, Specialization::Builder) == 25);
    CHECK(count(pop, GroupLabel::Yellow, Specialization::Miner) == 50);
    CHECK(count(pop, GroupLabel::Yellow, Specialization::Chopper) == 25);
    CHECK(count(pop, GroupLabel::Cyan, Specialization::Builder) == 50);
    for (const auto& r : pop) CHECK(r.state.identity.group() == r.group);
  }

  TEST_CASE("random 30 is balanced with distinct codes") {
    CodeRegistry reg;
    const auto pop = make(30, PopulationScheme::Random, reg);
    CHECK(count(pop, std::nullopt, Specialization::Chopper) == 10);
    CHECK(count(pop, std::nullopt, Specialization::Miner) == 10);
    CHECK(count(pop, std::nullopt, Specialization::Builder) == 10);
    std::set<IdentityCode> codes;
    for (const auto& r : pop) codes.insert(r.state.identity);
    CHECK(codes.size() == 30);
    CHECK(reg.size() == 30);
  }

  TEST_CASE("apportioned desk sizes keep the majority and a 2:1-ish minority") {
    for (int size : {30, 100}) {
      CodeRegistry reg;
      const auto pop = make(size, PopulationScheme::Correlated, reg);
      CHECK(static_cast<int>(pop.size()) == size);
      for (auto g : kAllGroups) {
        const auto maj = majority_specialization(g);
        int group_size = 0;
        for (const auto& r : pop) group_size += r.group == g;
        const int m = count(pop, g, maj);
        CHECK(std::abs(m - group_size / 2.0) <= 1.0);
        for (auto s : {Specialization::Chopper, Specialization::Miner, Specialization::Builder})
          if (s != maj) CHECK(std::abs(count(pop, g, s) - group_size / 4.0) <= 1.0);
      }
    }
  }

  TEST_CASE("indivisible sizes name the constraint") {
    PopulationSpec spec{50, PopulationScheme::Correlated, 5};
    try {
      spec.validate();
      FAIL("size 50 accepted");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("divisible by 12") != std::string::npos);
    }
    CHECK_THROWS_AS((PopulationSpec{31, PopulationScheme::Random, 5}.validate()), ConfigError);
    CHECK_NOTHROW((PopulationSpec{600, PopulationScheme::ReplacementCohort, 5}.validate()));
    CHECK_THROWS_AS((PopulationSpec{300, PopulationScheme::ReplacementCohort, 3}.validate()),
                    ConfigError);
  }

  TEST_CASE("replacement cohorts are half choppers, half miners, with fresh codes") {
    CodeRegistry reg;
    auto pop = make(300, PopulationScheme::Correlated, reg);
    auto rng = RandomStream::derive(2, "population");
    std::uint32_t next = 300;
    const auto cohort = generate_replacement_cohort(GroupLabel::Purple, 20, 1, rng, reg, next);
    CHECK(count(cohort, GroupLabel::Purple, Specialization::Chopper) == 10);
    CHECK(count(cohort, GroupLabel::Purple, Specialization::Miner) == 10);
    std::set<IdentityCode> old;
    for (const auto& r : pop) old.insert(r.state.identity);
    for (const auto& r : cohort) {
      CHECK_FALSE(old.contains(r.state.identity));
      CHECK(r.wave_introduced == 1);
      CHECK(r.state.id >= 300u);
    }
    CHECK_THROWS_AS(generate_replacement_cohort(GroupLabel::Purple, 7, 2, rng, reg, next),
                    ConfigError);
  }

  TEST_CASE("held-out probes are labelled and never issued to agents") {
    CodeRegistry reg;
    const auto pop = make(300, PopulationScheme::Correlated, reg);
    auto rng = RandomStream::derive(3, "population");
    const auto probes = generate_heldout_probes(GroupLabel::Yellow, 50, rng, reg);
    std::set<IdentityCode> agents;
    for (const auto& r : pop) agents.insert(r.state.identity);
    std::set<IdentityCode> seen;
    for (auto p : probes) {
      CHECK(p.group() == GroupLabel::Yellow);
      CHECK_FALSE(agents.contains(p));
      CHECK(seen.insert(p).second);
    }
    std::uint32_t next = 1000;
    const auto cohort = generate_replacement_cohort(GroupLabel::Yellow, 20, 1, rng, reg, next);
    for (const auto& r : cohort) CHECK_FALSE(seen.contains(r.state.identity));
  }

  TEST_CASE("registry detects exhaustion") {
    CodeRegistry reg;
    auto rng = RandomStream::derive(4, "population");
    for (std::uint32_t i = 0; i < kIndividualSpace; ++i)
      reg.issue(IdentityCode::from_parts(GroupLabel::Cyan, i));
    CHECK_THROWS(reg.draw(GroupLabel::Cyan, rng));
    CHECK_NOTHROW(reg.draw(GroupLabel::Purple, rng));
    CHECK_THROWS(reg.issue(IdentityCode::from_parts(GroupLabel::Cyan, 3)));
  }

  TEST_CASE("manifest round trip") {
    CodeRegistry reg;
    const auto pop = make(30, PopulationScheme::Correlated, reg);
    std::stringstream ss;
    write_manifest(ss, pop);
    CHECK(ss.str().rfind("agent_id,code,group,specialization,wave_introduced\n", 0) == 0);
    const auto back = read_manifest(ss);
    REQUIRE(back.size() == pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) {
      CHECK(back[i].state.id == pop[i].state.id);
      CHECK(back[i].state.identity == pop[i].state.identity);
      CHECK(back[i].group == pop[i].group);
      CHECK(back[i].specialization() == pop[i].specialization());
    }
  }

  TEST_CASE("same seed, same population") {
    CodeRegistry a, b;
    const auto p = make(100, PopulationScheme::Correlated, a, 9);
    const auto q = make(100, PopulationScheme::Correlated, b, 9);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i].state.identity == q[i].state.identity);
  }
}
