#include "garchrank/rng.hpp"

#include <array>

namespace garchrank {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::mt19937_64 keyed_engine(std::uint64_t seed, std::uint64_t stream,
                             std::uint64_t substream) {
  const std::uint64_t k0 = splitmix64(seed);
  const std::uint64_t k1 = splitmix64(k0 ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
  const std::uint64_t k2 = splitmix64(k1 ^ splitmix64(substream + 0x85157af5ULL));
  std::array<std::uint32_t, 8> words{};
  std::uint64_t s = k2;
  for (std::size_t i = 0; i < words.size(); i += 2) {
    s = splitmix64(s);
    words[i] = static_cast<std::uint32_t>(s);
    words[i + 1] = static_cast<std::uint32_t>(s >> 32);
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream)
    : seed_(seed),
      stream_(stream),
      substream_(substream),
      engine_(keyed_engine(seed, stream, substream)) {}

double RngStream::normal() { return normal_(engine_); }

double RngStream::uniform() { return uniform_(engine_); }

}  // namespace garchrank
