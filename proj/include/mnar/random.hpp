#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace mnar {

using Rng = std::mt19937_64;

/// Independent generator keyed by (seed, stream ids...). Used wherever work is
/// split across subproblems or replicas so results do not depend on scheduling.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * ids.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (std::uint64_t id : ids) push(id);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

}  // namespace mnar
