#include <doctest.h>

#include <cmath>
#include <numeric>

#include "convsim/errors.hpp"
#include "convsim/tinynet.hpp"
#include "oracles.hpp"

using namespace convsim;

namespace {

std::vector<double> random_vector(RandomStream& rng, int n, double scale) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
  return v;
}

}  // namespace

TEST_SUITE("tinynet") {
  TEST_CASE("layer shapes for agents and the market") {
    RandomStream rng(1);
    CHECK(init_params(6, 7, rng).layer_sizes() == std::vector<int>{6, 64, 128, 64, 7});
    CHECK(init_params(16, 2, rng).layer_sizes() == std::vector<int>{16, 64, 128, 64, 2});
  }

  TEST_CASE("initialization is fan-in scaled, zero-bias and seeded") {
    RandomStream a(5), b(5);
    const auto p = init_params(6, 7, a);
    CHECK(p == init_params(6, 7, b));
    for (const auto& l : p.layers) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(l.weight.cols()));
      CHECK(l.weight.cwiseAbs().maxCoeff() <= bound);
      CHECK(l.weight.cwiseAbs().maxCoeff() > 0.5 * bound);
      CHECK(l.bias.isZero());
    }
  }

  TEST_CASE("zero weights give a uniform policy and a zero value") {
    const std::vector<int> actor_sizes{6, 64, 128, 64, 7};
    const std::vector<int> critic_sizes{6, 64, 128, 64, 1};
    const auto actor = MlpParams::zeros(actor_sizes);
    const auto critic = MlpParams::zeros(critic_sizes);
    const std::vector<double> obs{3, 1, 20, 1, 0, 1};
    const auto d = forward_actor(actor, obs);
    for (int a = 0; a < 7; ++a) CHECK(d.prob(a) == doctest::Approx(1.0 / 7).epsilon(1e-12));
    CHECK(forward_critic(critic, obs) == 0.0);
  }

  TEST_CASE("softmax normalization and shift invariance") {
    RandomStream rng(2);
    for (int trial = 0; trial < 200; ++trial) {
      const auto logits = random_vector(rng, 7, 30.0);
      const auto d = ActionDistribution::from_logits(logits);
      const double sum = std::accumulate(d.probs().begin(), d.probs().end(), 0.0);
      CHECK(std::abs(sum - 1.0) < 1e-9);
      auto shifted = logits;
      for (auto& z : shifted) z += 123.25;
      const auto e = ActionDistribution::from_logits(shifted);
      const auto naive = oracle::naive_softmax(logits);
      for (int a = 0; a < 7; ++a) {
        CHECK(std::abs(d.prob(a) - e.prob(a)) < 1e-9);
        CHECK(std::abs(d.prob(a) - naive[a]) < 1e-9);
        if (d.prob(a) > 0) CHECK(std::abs(d.log_prob(a) - std::log(d.prob(a))) < 1e-9);
      }
    }
    const auto big = ActionDistribution::from_logits(std::vector<double>{1000.0, 0.0});
    CHECK(big.prob(0) == 1.0);
    CHECK(std::isfinite(big.log_prob(1)));
  }

  TEST_CASE("hidden activations match std::tanh") {
    RandomStream rng(3);
    const std::vector<int> sizes{3, 64, 128, 64, 1};
    auto p = MlpParams::zeros(sizes);
    // Identity-like first layer exposes the activation directly.
    for (int i = 0; i < 3; ++i) p.layers[0].weight(i, i) = 1.0;
    for (double x : {-800.0, -20.0, -1.0, -1e-9, 0.0, 1e-9, 0.3, 5.0, 700.0}) {
      const auto trace = forward_batch(p, Eigen::MatrixXd::Constant(3, 1, x));
      CHECK(std::abs(trace.activations[1](0, 0) - std::tanh(x)) < 1e-15);
    }
  }

  TEST_CASE("critic stays finite for large inputs") {
    RandomStream rng(4);
    const auto critic = init_params(6, 1, rng);
    for (int i = 0; i < 50; ++i) {
      const auto obs = random_vector(rng, 6, 1e3);
      CHECK(std::isfinite(forward_critic(critic, obs)));
    }
  }

  TEST_CASE("backward matches central differences") {
    RandomStream rng(5);
    double worst = 0.0;
    int cases = 0;
    for (int trial = 0; trial < 6; ++trial) {
      const int in = trial % 2 ? 16 : 6;
      const int out = trial % 2 ? 2 : 7;
      const auto p = init_params(in, out, rng);
      const auto x = random_vector(rng, in, 2.0);
      const auto up = random_vector(rng, out, 1.0);
      for (int k = 0; k < 25; ++k) {
        const auto idx = rng.below(p.parameter_count());
        worst = std::max(worst, oracle::mlp_entry_error(p, x, up, idx));
        ++cases;
      }
    }
    CHECK(cases >= 100);
    CHECK(worst < 1e-4);
  }

  TEST_CASE("backward is linear in the upstream gradient") {
    RandomStream rng(6);
    const auto p = init_params(6, 7, rng);
    const auto x = random_vector(rng, 6, 1.0);
    const auto u = random_vector(rng, 7, 1.0);
    const auto v = random_vector(rng, 7, 1.0);
    std::vector<double> w(7);
    for (int i = 0; i < 7; ++i) w[i] = u[i] + v[i];
    auto sum = backward(p, x, u);
    sum += backward(p, x, v);
    const auto joint = backward(p, x, w);
    for (std::size_t i = 0; i < joint.parameter_count(); ++i)
      CHECK(std::abs(joint.flat(i) - sum.flat(i)) < 1e-12);
    const auto zero = backward(p, x, std::vector<double>(7, 0.0));
    for (std::size_t i = 0; i < zero.parameter_count(); ++i) CHECK(zero.flat(i) == 0.0);
  }

  TEST_CASE("batched and single-sample passes agree") {
    RandomStream rng(7);
    const auto p = init_params(6, 7, rng);
    Eigen::MatrixXd xs(6, 5);
    for (int c = 0; c < 5; ++c)
      for (int r = 0; r < 6; ++r) xs(r, c) = rng.uniform();
    const auto trace = forward_batch(p, xs);
    for (int c = 0; c < 5; ++c) {
      std::vector<double> x(xs.col(c).data(), xs.col(c).data() + 6);
      const auto y = forward(p, x);
      CHECK((trace.output().col(c) - y).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("Adam") {
    RandomStream rng(8);
    auto p = init_params(6, 7, rng);
    const auto before = p;
    auto state = AdamState::for_params(p);
    SUBCASE("zero gradient is a fixed point") {
      adam_step(p, MlpParams::zeros_like(p), state, 1e-3);
      CHECK(p == before);
      CHECK(state.step == 1);
    }
    SUBCASE("first step with unit gradient moves every parameter by lr") {
      auto g = MlpParams::zeros_like(p);
      for (std::size_t i = 0; i < g.parameter_count(); ++i) g.flat(i) = 1.0;
      adam_step(p, g, state, 1e-3);
      for (std::size_t i = 0; i < p.parameter_count(); ++i)
        CHECK(before.flat(i) - p.flat(i) == doctest::Approx(1e-3).epsilon(1e-6));
    }
    SUBCASE("non-finite gradients are refused") {
      auto g = MlpParams::zeros_like(p);
      g.flat(3) = std::nan("");
      CHECK_THROWS_AS(adam_step(p, g, state, 1e-3), TrainingError);
    }
  }

  TEST_CASE("sampling") {
    RandomStream rng(9);
    const auto certain = ActionDistribution::from_logits(std::vector<double>{0.0, -1e4, -1e4});
    for (int i = 0; i < 100; ++i) CHECK(sample_action(certain, rng).index == 0);
    const auto d = ActionDistribution::from_logits(std::vector<double>{std::log(0.75), std::log(0.25)});
    int zeros = 0;
    for (int i = 0; i < 10000; ++i) {
      const auto s = sample_action(d, rng);
      zeros += s.index == 0;
      CHECK(s.log_prob == d.log_prob(s.index));
    }
    CHECK(std::abs(zeros / 10000.0 - 0.75) < 0.02);
    const auto bad = ActionDistribution::from_logits(std::vector<double>{std::nan(""), 0.0});
    CHECK_THROWS(sample_action(bad, rng));
  }

  TEST_CASE("dimension mismatches are rejected") {
    RandomStream rng(10);
    const auto p = init_params(6, 7, rng);
    CHECK_THROWS(forward(p, std::vector<double>(5, 0.0)));
    CHECK_THROWS(backward(p, std::vector<double>(6, 0.0), std::vector<double>(3, 0.0)));
    CHECK_THROWS(forward_critic(p, std::vector<double>(6, 0.0)));
  }

  TEST_CASE("parameter serialization is bit-exact") {
    RandomStream rng(11);
    const auto p = init_params(16, 2, rng);
    auto s = AdamState::for_params(p);
    auto g = MlpParams::zeros_like(p);
    for (std::size_t i = 0; i < g.parameter_count(); ++i) g.flat(i) = rng.uniform() - 0.5;
    auto q = p;
    adam_step(q, g, s, 1e-3);
    BinaryWriter w;
    write_params(w, q);
    write_adam(w, s);
    BinaryReader r(w.bytes());
    CHECK(read_params(r) == q);
    CHECK(read_adam(r) == s);
  }
}
