#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "ragforge/util.hpp"

namespace ragforge {

// splitmix64 finalizer. Scrambles a seed so that related inputs (master ^ role,
// consecutive indices) land far apart in state space.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Child-seed derivation: seed_for(master, role, i) hashes the role label into
// the master seed and then mixes in the index. Every (role, index) pair gets an
// independent stream, so adding draws to one consumer never shifts another's.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view role, std::uint64_t index = 0) {
    std::uint64_t h = util::fnv1a64(role, master ^ 0x9e3779b97f4a7c15ULL);
    return splitmix64(splitmix64(h) ^ splitmix64(index + 0x51ed2701a9e5c33bULL));
}

// mt19937_64 wrapper whose [0,1) draw uses the top 53 bits directly instead of
// std::uniform_real_distribution, which the standard leaves implementation
// defined. Identical draw sequences on every platform.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    std::uint64_t next_u64() { return engine_(); }

    // Unbiased integer in [0, n) by rejection sampling.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
};

}  // namespace ragforge
