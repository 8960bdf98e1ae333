#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gwm {

// Cross-platform deterministic hashing. Everything reproducibility-sensitive
// (mock services, file digests, seeded fixtures) derives from these two
// primitives, never from std::hash or ambient randomness.

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffset) {
    for (unsigned char c : bytes) {
        state ^= c;
        state *= kFnvPrime;
    }
    return state;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Maps a 64-bit word to [-1, 1) using the top 53 bits.
constexpr double signed_unit(std::uint64_t u) {
    return static_cast<double>(u >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

// Deterministic stream of 64-bit words / doubles from a seed.
class SplitMix {
public:
    explicit SplitMix(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [-1, 1)
    double next_signed_unit() { return signed_unit(next_u64()); }

    // uniform in [0, 1)
    double next_unit() { return (next_signed_unit() + 1.0) * 0.5; }

    // uniform integer in [0, bound), bound > 0
    std::uint64_t next_below(std::uint64_t bound) { return next_u64() % bound; }

private:
    std::uint64_t state_;
};

// Digest of a node ordering; embedded in embedding-store headers so a matrix
// can be checked against the snapshot it was computed from.
inline std::uint64_t node_order_digest(const std::vector<std::string>& ids) {
    std::uint64_t h = kFnvOffset;
    for (const auto& id : ids) {
        h = fnv1a64(id, h);
        h = fnv1a64(std::string_view("\n"), h);
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

} // namespace gwm
