#pragma once

#include <cstdint>
#include <random>

namespace garchrank {

// Reproducible random stream keyed by (seed, stream, substream).
//
// Every Monte Carlo task derives its own stream from the master seed and its
// logical coordinates (sample index, replicate index, ...), so results do not
// depend on how tasks are scheduled across threads.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0,
                     std::uint64_t substream = 0);

  double normal();
  double uniform();
  std::mt19937_64& engine() { return engine_; }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t substream() const { return substream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t substream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace garchrank
