#include <doctest.h>

#include <cmath>

#include "convsim/economy.hpp"

using namespace convsim;

namespace {

AgentState agent(Specialization s, int wood, int stone, double coins) {
  AgentState a;
  a.skill = Skill::of(s);
  a.wood = wood;
  a.stone = stone;
  a.coins = coins;
  return a;
}

double frequency(Specialization s, ActionKind kind, int trials, std::uint64_t seed) {
  RandomStream rng(seed);
  EconomyRules rules;
  int hits = 0;
  for (int i = 0; i < trials; ++i) {
    auto a = agent(s, 1, 1, 0.0);
    if (kind == ActionKind::Build) {
      hits += attempt_build(a, rng, rules);
    } else {
      hits += attempt_extract(a, *resource_of(kind), rng);
    }
  }
  return static_cast<double>(hits) / trials;
}

}  // namespace

TEST_SUITE("economy") {
  TEST_CASE("skill table") {
    const auto c = Skill::of(Specialization::Chopper);
    const auto m = Skill::of(Specialization::Miner);
    const auto b = Skill::of(Specialization::Builder);
    CHECK(c.chop == 0.75);
    CHECK(c.mine == 0.25);
    CHECK(c.build == 0.05);
    CHECK(m.chop == 0.25);
    CHECK(m.mine == 0.75);
    CHECK(m.build == 0.05);
    CHECK(b.chop == 0.1);
    CHECK(b.mine == 0.1);
    CHECK(b.build == 0.95);
    CHECK(c.skilled_resource() == Resource::Wood);
    CHECK(m.skilled_resource() == Resource::Stone);
    CHECK_FALSE(b.skilled_resource());
  }

  TEST_CASE("action space") {
    CHECK(kNumActions == 7);
    CHECK(kNumPredictions == 2);
    int social = 0;
    for (int i = 0; i < kNumActions; ++i) social += is_social(static_cast<ActionKind>(i));
    CHECK(social == 4);
  }

  TEST_CASE("observation flags use the > 1 rule") {
    EconomyRules rules;
    using O = Observation;
    CHECK(observe_agent(agent(Specialization::Chopper, 0, 0, 0), rules) == O{0, 0, 0, 0, 0, 0});
    CHECK(observe_agent(agent(Specialization::Chopper, 3, 0, 2), rules) == O{3, 0, 2, 1, 0, 1});
    CHECK(observe_agent(agent(Specialization::Chopper, 1, 1, 1), rules) == O{1, 1, 1, 0, 0, 0});
    rules.flag_threshold = 0;
    CHECK(observe_agent(agent(Specialization::Chopper, 1, 1, 1), rules) == O{1, 1, 1, 1, 1, 1});
  }

  TEST_CASE("extraction frequencies match the skill table") {
    // Three standard errors of a 10,000-trial frequency.
    auto tol = [](double p) { return 3.0 * std::sqrt(p * (1 - p) / 10000); };
    CHECK(std::abs(frequency(Specialization::Chopper, ActionKind::ChopWood, 10000, 1) - 0.75) < tol(0.75));
    CHECK(std::abs(frequency(Specialization::Chopper, ActionKind::MineStone, 10000, 2) - 0.25) < tol(0.25));
    CHECK(std::abs(frequency(Specialization::Builder, ActionKind::MineStone, 10000, 3) - 0.1) < tol(0.1));
    CHECK(std::abs(frequency(Specialization::Miner, ActionKind::MineStone, 10000, 4) - 0.75) < tol(0.75));
    CHECK(std::abs(frequency(Specialization::Chopper, ActionKind::Build, 10000, 5) - 0.05) < 0.01);
    CHECK(std::abs(frequency(Specialization::Builder, ActionKind::Build, 10000, 6) - 0.95) < tol(0.95));
  }

  TEST_CASE("build") {
    EconomyRules rules;
    RandomStream rng(9);
    SUBCASE("success consumes one of each and pays 15") {
      auto a = agent(Specialization::Builder, 1, 1, 0);
      bool ok = false;
      while (!ok) {
        a = agent(Specialization::Builder, 1, 1, 0);
        ok = attempt_build(a, rng, rules);
      }
      CHECK(a.wood == 0);
      CHECK(a.stone == 0);
      CHECK(a.coins == 15.0);
    }
    SUBCASE("missing ingredient changes nothing") {
      auto a = agent(Specialization::Builder, 0, 5, 3);
      CHECK_FALSE(attempt_build(a, rng, rules));
      CHECK(a.wood == 0);
      CHECK(a.stone == 5);
      CHECK(a.coins == 3.0);
    }
    SUBCASE("failed roll keeps the ingredients when configured") {
      rules.failed_build_consumes = false;
      for (int i = 0; i < 200; ++i) {
        auto a = agent(Specialization::Chopper, 1, 1, 0);
        if (!attempt_build(a, rng, rules)) {
          CHECK(a.wood == 1);
          CHECK(a.stone == 1);
        }
      }
    }
    SUBCASE("failed roll consumes the ingredients by default") {
      for (int i = 0; i < 200; ++i) {
        auto a = agent(Specialization::Chopper, 1, 1, 0);
        const bool ok = attempt_build(a, rng, rules);
        CHECK(a.wood == 0);
        CHECK(a.coins == (ok ? 15.0 : 0.0));
      }
    }
  }

  TEST_CASE("buy has no coin floor") {
    EconomyRules rules;
    auto a = agent(Specialization::Chopper, 0, 0, 10);
    attempt_buy(a, Resource::Wood, rules);
    CHECK(a.wood == 1);
    CHECK(a.coins == 8.0);
    auto b = agent(Specialization::Chopper, 0, 0, 0);
    attempt_buy(b, Resource::Stone, rules);
    CHECK(b.stone == 1);
    CHECK(b.coins == -2.0);
    auto c = agent(Specialization::Chopper, 0, 0, 4);
    attempt_buy(c, Resource::Wood, rules);
    attempt_buy(c, Resource::Wood, rules);
    CHECK(c.wood == 2);
    CHECK(c.coins == 0.0);
  }

  TEST_CASE("sale resolution") {
    EconomyRules rules;
    SUBCASE("match with units") {
      auto a = agent(Specialization::Chopper, 5, 0, 0);
      auto t = resolve_sale(a, Resource::Wood, MarketPrediction::PredictWood, rules);
      CHECK(a.wood == 3);
      CHECK(a.coins == 1.0);
      CHECK(t.agent_reward == 1.0);
      CHECK(t.market_reward == 1.0);
      CHECK(t.wood_delta == -2);
      CHECK(t.coordinated);
      CHECK_FALSE(t.insufficient);
    }
    SUBCASE("mismatch") {
      auto a = agent(Specialization::Chopper, 5, 0, 0);
      auto t = resolve_sale(a, Resource::Wood, MarketPrediction::PredictStone, rules);
      CHECK(a.wood == 5);
      CHECK(t.agent_reward == 0.0);
      CHECK(t.market_reward == -1.0);
      CHECK_FALSE(t.coordinated);
    }
    SUBCASE("match without units") {
      auto a = agent(Specialization::Chopper, 1, 0, 0);
      auto t = resolve_sale(a, Resource::Wood, MarketPrediction::PredictWood, rules);
      CHECK(a.wood == 1);
      CHECK(t.agent_reward == 0.0);
      CHECK(t.market_reward == doctest::Approx(-0.3));
      CHECK(t.insufficient);
    }
    SUBCASE("a market that always predicts wood never buys stone") {
      auto a = agent(Specialization::Miner, 0, 100, 0);
      for (int i = 0; i < 20; ++i)
        resolve_sale(a, Resource::Stone, MarketPrediction::PredictWood, rules);
      CHECK(a.coins == 0.0);
      CHECK(a.stone == 100);
    }
  }

  TEST_CASE("apply_action reports deltas and refuses unpriced sales") {
    EconomyRules rules;
    RandomStream rng(11);
    auto a = agent(Specialization::Chopper, 4, 0, 0);
    auto out = apply_action(a, ActionKind::SellWood, rng, rules, MarketPrediction::PredictWood);
    CHECK(out.success);
    CHECK(out.wood_delta == -2);
    CHECK(out.agent_reward == 1.0);
    CHECK(out.prediction == MarketPrediction::PredictWood);
    CHECK_THROWS(apply_action(a, ActionKind::SellStone, rng, rules, std::nullopt));
  }

  TEST_CASE("random action sequences never go negative and reconcile") {
    EconomyRules rules;
    RandomStream rng(12);
    for (int s = 0; s < 3; ++s) {
      auto a = agent(static_cast<Specialization>(s), 0, 0, 0);
      int builds = 0, sales = 0, buys = 0;
      for (int i = 0; i < 5000; ++i) {
        const auto kind = static_cast<ActionKind>(rng.below(kNumActions));
        std::optional<MarketPrediction> p;
        if (is_sale(kind)) p = static_cast<MarketPrediction>(rng.below(2));
        const auto out = apply_action(a, kind, rng, rules, p);
        REQUIRE(a.wood >= 0);
        REQUIRE(a.stone >= 0);
        builds += kind == ActionKind::Build && out.success;
        sales += is_sale(kind) && out.success;
        buys += kind == ActionKind::BuyWood || kind == ActionKind::BuyStone;
      }
      CHECK(a.coins == 15.0 * builds + 1.0 * sales - 2.0 * buys);
    }
  }
}
