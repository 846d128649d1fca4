#pragma once

#include <cstdint>
#include <random>

namespace crowdbp {

using Seed = std::uint64_t;
using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to turn structured seed material (master seed,
// stream tags, replication indices) into well-mixed engine seeds.
constexpr Seed splitmix64(Seed x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of substream `tag` of `master`. Chain calls for nested streams,
// e.g. derive_seed(derive_seed(master, replication), kAnswerStream).
constexpr Seed derive_seed(Seed master, Seed tag) {
  return splitmix64(master ^ splitmix64(tag ^ 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(Seed seed) { return Rng(splitmix64(seed)); }

// Stream tags for the stochastic operations, so that every draw in an
// experiment has a reproducible, documented origin.
namespace stream {
constexpr Seed kAssignment = 1;
constexpr Seed kReliability = 2;
constexpr Seed kTruth = 3;
constexpr Seed kAnswers = 4;
constexpr Seed kInitWeights = 5;
constexpr Seed kReplication = 6;
constexpr Seed kCarry = 7;
}  // namespace stream

}  // namespace crowdbp
