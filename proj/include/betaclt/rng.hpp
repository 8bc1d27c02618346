#pragma once

#include <cstdint>
#include <random>

namespace betaclt {

using Engine = std::mt19937_64;

/// One step of splitmix64; advances `state`.
[[nodiscard]] inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed for stream `index` of a master seed. Depends only on the pair, never on scheduling.
[[nodiscard]] inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master;
    (void)splitmix64(s);
    s ^= index * 0xD1B54A32D192ED03ULL;
    return splitmix64(s);
}

[[nodiscard]] inline Engine make_engine(std::uint64_t master, std::uint64_t index = 0) {
    return Engine{derive_seed(master, index)};
}

}  // namespace betaclt
