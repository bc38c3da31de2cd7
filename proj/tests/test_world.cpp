#include <doctest.h>

#include <map>

#include "convsim/errors.hpp"
#include "convsim/world.hpp"
#include "oracles.hpp"

using namespace convsim;

namespace {

StudyConfig small(StudyKind study, int size = 30, int steps = 40) {
  StudyConfig c;
  c.study = study;
  c.population_size = size;
  c.steps_per_epoch = steps;
  c.epochs = 10;
  return c;
}

}  // namespace

TEST_SUITE("world") {
  TEST_CASE("creation") {
    const auto w = World::create(small(StudyKind::Regularity), 1);
    CHECK(w.agents().size() == 30);
    CHECK(w.epoch() == 0);
    std::map<int, int> per_group;
    for (const auto& a : w.agents()) {
      REQUIRE(a.record.group);
      ++per_group[static_cast<int>(*a.record.group)];
      CHECK(a.record.state.wood == 0);
      CHECK(a.record.state.coins == 0.0);
    }
    for (auto& [g, n] : per_group) CHECK(n == 10);
    CHECK(w == World::create(small(StudyKind::Regularity), 1));
    CHECK_FALSE(w == World::create(small(StudyKind::Regularity), 2));
  }

  TEST_CASE("every epoch's accounting replays exactly") {
    for (auto rules_fb : {false, true}) {
      auto c = small(StudyKind::Individuation);
      c.economy.failed_build_consumes = rules_fb;
      auto w = World::create(c, 7);
      for (int e = 0; e < 4; ++e) {
        const auto log = w.run_epoch();
        CHECK(log.epoch == e + 1);
        CHECK(log.events.size() == static_cast<std::size_t>(30 * 40));
        const auto err = oracle::replay_accounting(log, c.economy);
        CHECK_MESSAGE(err.empty(), err);
        std::size_t sales = 0;
        for (const auto& s : log.agents) sales += s.sales();
        CHECK(sales == log.sales.size());
        CHECK(log.market_steps == log.sales.size());
      }
    }
  }

  TEST_CASE("agent steps are shuffled across the population") {
    auto w = World::create(small(StudyKind::Individuation), 3);
    const auto log = w.run_epoch();
    // Each step gives every agent exactly one action.
    for (int step = 0; step < 40; ++step) {
      std::map<std::uint32_t, int> seen;
      for (const auto& e : log.events)
        if (e.step == step) ++seen[e.agent_id];
      REQUIRE(seen.size() == 30);
      for (auto& [id, n] : seen) REQUIRE(n == 1);
    }
    std::vector<std::uint32_t> first, second;
    for (const auto& e : log.events) {
      if (e.step == 0) first.push_back(e.agent_id);
      if (e.step == 1) second.push_back(e.agent_id);
    }
    CHECK(first != second);
  }

  TEST_CASE("checkpoint round trip and resume determinism") {
    auto c = small(StudyKind::Regularity);
    auto straight = World::create(c, 11);
    for (int e = 0; e < 10; ++e) straight.run_epoch();

    auto half = World::create(c, 11);
    for (int e = 0; e < 5; ++e) half.run_epoch();
    const auto bytes = half.checkpoint();
    auto resumed = World::restore(bytes);
    CHECK(resumed == half);
    CHECK(resumed.checkpoint() == bytes);
    for (int e = 0; e < 5; ++e) resumed.run_epoch();
    CHECK(resumed == straight);
    CHECK(resumed.checkpoint() == straight.checkpoint());
  }

  TEST_CASE("corrupted checkpoints are rejected") {
    const auto bytes = World::create(small(StudyKind::Regularity), 1).checkpoint();
    auto flipped = bytes;
    flipped[flipped.size() / 2] ^= 0x40;
    CHECK_THROWS(World::restore(flipped));
    CHECK_THROWS(World::restore(bytes.substr(0, bytes.size() / 2)));
    CHECK_THROWS(World::restore(""));
  }

  TEST_CASE("all models learn in the same epoch") {
    auto c = small(StudyKind::Regularity);
    const auto before = World::create(c, 5);
    auto w = before;
    w.run_epoch();
    CHECK_FALSE(w.market().actor == before.market().actor);
    for (std::size_t i = 0; i < w.agents().size(); ++i) {
      CHECK_FALSE(w.agents()[i].model.actor == before.agents()[i].model.actor);
      CHECK(w.agents()[i].buffer.empty());
    }
    CHECK(w.market_buffer().empty());
  }

  TEST_CASE("replacement waves") {
    auto c = small(StudyKind::Regularity, 60, 20);
    auto w = World::create(c, 9);
    w.run_epoch();
    auto g = c;
    g.study = StudyKind::Generational;
    w.adopt_config(g);
    std::map<std::uint32_t, bool> original;
    for (const auto& a : w.agents()) original[a.record.state.id] = true;
    const auto market_before = w.market();
    for (int wave = 1; wave <= 5; ++wave) {
      w.apply_replacement(wave);
      w.begin_phase("wave" + std::to_string(wave));
      w.run_epoch();
      std::map<int, int> per_group, originals_left, newcomers;
      for (const auto& a : w.agents()) {
        const int grp = static_cast<int>(*a.record.group);
        ++per_group[grp];
        if (original.count(a.record.state.id)) {
          ++originals_left[grp];
        } else {
          ++newcomers[grp];
          CHECK(a.record.wave_introduced >= 1);
          CHECK(a.record.specialization() != Specialization::Builder);
        }
      }
      for (int grp = 0; grp < 3; ++grp) {
        CHECK(per_group[grp] == 20);
        CHECK(originals_left[grp] == 20 - 4 * wave);
      }
    }
    CHECK(w.manifest().size() == 60 + 60);
    CHECK_THROWS(w.apply_replacement(6));
    w.replace_market();
    CHECK_FALSE(w.market() == market_before);
  }

  TEST_CASE("identity codes stay unique across replacements") {
    auto c = small(StudyKind::Regularity, 60, 5);
    auto w = World::create(c, 2);
    auto g = c;
    g.study = StudyKind::Generational;
    w.adopt_config(g);
    for (int wave = 1; wave <= 5; ++wave) w.apply_replacement(wave);
    std::map<std::string, int> seen;
    for (const auto& r : w.manifest()) ++seen[r.state.identity.to_string()];
    for (const auto& p : w.probes())
      for (const auto& code : p.codes) ++seen[code.to_string()];
    for (auto& [code, n] : seen) CHECK_MESSAGE(n == 1, code);
  }
}
