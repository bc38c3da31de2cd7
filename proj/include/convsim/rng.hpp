#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>

namespace convsim {

// Seeded random stream. Every stochastic subsystem owns one; nothing reads
// wall-clock entropy. Integer and real draws are implemented here rather than
// through <random> distributions so sequences are identical across standard
// libraries.
class RandomStream {
 public:
  RandomStream() : engine_(0) {}
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for (seed, subsystem tag).
  static RandomStream derive(std::uint64_t seed, std::string_view tag);

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  bool bernoulli(double p) { return uniform() < p; }
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  std::uint64_t next() { return engine_(); }

  template <typename It>
  void shuffle(It first, It last) {
    auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      auto j = below(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

  std::string serialize() const;
  static RandomStream deserialize(const std::string& text);

  friend bool operator==(const RandomStream& a, const RandomStream& b) {
    return a.engine_ == b.engine_;
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag);

}  // namespace convsim
