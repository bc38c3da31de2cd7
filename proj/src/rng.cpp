#include "convsim/rng.hpp"

#include <limits>
#include <sstream>
#include <stdexcept>

namespace convsim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) {
  return splitmix64(splitmix64(seed) ^ fnv1a(tag));
}

RandomStream RandomStream::derive(std::uint64_t seed, std::string_view tag) {
  return RandomStream(mix_seed(seed, tag));
}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("RandomStream::below: n must be > 0");
  // rejection sampling to avoid modulo bias
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

std::string RandomStream::serialize() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

RandomStream RandomStream::deserialize(const std::string& text) {
  RandomStream stream;
  std::istringstream in(text);
  in >> stream.engine_;
  if (in.fail()) throw std::runtime_error("corrupt random stream state");
  return stream;
}

}  // namespace convsim
