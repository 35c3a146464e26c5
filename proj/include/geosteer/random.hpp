#pragma once

#include <cstdint>
#include <random>

namespace geosteer {

using Rng = std::mt19937_64;

// Independent stream for (seed, purpose, index). Every unit of work that needs
// randomness derives its own stream so results do not depend on scheduling.
Rng make_rng(std::uint64_t seed, std::uint64_t purpose = 0,
             std::uint64_t index = 0);

// Stream purposes.
namespace stream {
inline constexpr std::uint64_t kTrainRealization = 1;
inline constexpr std::uint64_t kTrainAgent = 2;
inline constexpr std::uint64_t kNetworkInit = 3;
inline constexpr std::uint64_t kEvalRealization = 4;
inline constexpr std::uint64_t kEvalAgent = 5;
inline constexpr std::uint64_t kDsdp = 6;
inline constexpr std::uint64_t kScenario = 7;
}  // namespace stream

double normal(Rng& rng, double mean, double sd);
double uniform(Rng& rng, double lo, double hi);
// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

}  // namespace geosteer
