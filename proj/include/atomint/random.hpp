#pragma once

#include <cstdint>
#include <random>

namespace atomint {

using Rng = std::mt19937_64;

/// Independent generator for stream `index` of a run seeded with `seed`.
///
/// Per-atom and per-bin substreams make Monte Carlo results independent of
/// the number of worker threads and of evaluation order.
inline Rng make_substream(std::uint64_t seed, std::uint64_t index, std::uint64_t salt = 0)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32),
                      static_cast<std::uint32_t>(salt),
                      static_cast<std::uint32_t>(salt >> 32)};
    return Rng(seq);
}

}  // namespace atomint
