#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace kanmerge {

// All randomness goes through these generators so that results are identical
// across compilers and standard libraries (std::uniform_*_distribution and
// std::shuffle are implementation-defined).
//
//   SplitMix64     Steele, Lea, Flood (2014); used for seeding and stream mixing.
//   Xoshiro256ss   Blackman, Vigna xoshiro256** 1.0.
//   uniform01      top 53 bits / 2^53, in [0, 1).
//   bounded(n)     Lemire's multiply-shift with rejection, exact uniform on [0, n).

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed and a tag tuple.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) noexcept {
    std::uint64_t s = seed;
    std::uint64_t h = splitmix64(s);
    for (std::uint64_t tag : {a, b, c}) {
        s = h ^ (tag + 0x632BE59BD9B4E019ULL);
        h = splitmix64(s);
    }
    return h;
}

class Xoshiro256ss {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256ss(std::uint64_t seed) noexcept {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

    std::uint64_t bounded(std::uint64_t n) noexcept {
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
};

/// Forward Fisher-Yates over 0..n-1 stopped after `prefix` swaps. The first
/// `prefix` entries are exactly those of the full permutation from the same
/// stream, so a sample of k indices is a prefix of the epoch shuffle.
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t stream_seed,
                                                   std::size_t prefix) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Xoshiro256ss rng(stream_seed);
    const std::size_t stop = prefix < n ? prefix : n;
    for (std::size_t i = 0; i + 1 < n && i < stop; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.bounded(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(stop);
    return idx;
}

/// Stream tag for record shuffles, shared by sequential epochs and parallel rounds.
inline constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;

inline std::vector<std::size_t> record_order(std::size_t n, std::uint64_t seed, std::uint64_t pass,
                                             std::size_t prefix) {
    return seeded_permutation(n, derive_seed(seed, kShuffleStream, pass), prefix);
}

} // namespace kanmerge
