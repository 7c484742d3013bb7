#pragma once

#include <array>
#include <boost/random/normal_distribution.hpp>
#include <cstdint>
#include <string_view>

namespace pathweight {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Stateless:
// the output is a pure function of (counter, key).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter generate(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

    // Four blocks with consecutive low counter words, rounds interleaved.
    static constexpr void generate4(std::uint64_t first, std::uint32_t c2, std::uint32_t c3, Key key,
                                    std::uint32_t* out) noexcept {
        std::uint32_t x0[4], x1[4], x2[4], x3[4];
        for (int b = 0; b < 4; ++b) {
            const std::uint64_t c = first + static_cast<std::uint64_t>(b);
            x0[b] = static_cast<std::uint32_t>(c);
            x1[b] = static_cast<std::uint32_t>(c >> 32);
            x2[b] = c2;
            x3[b] = c3;
        }
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            for (int b = 0; b < 4; ++b) {
                const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * x0[b];
                const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * x2[b];
                const auto y0 = static_cast<std::uint32_t>(p1 >> 32) ^ x1[b] ^ key[0];
                const auto y2 = static_cast<std::uint32_t>(p0 >> 32) ^ x3[b] ^ key[1];
                x1[b] = static_cast<std::uint32_t>(p1);
                x3[b] = static_cast<std::uint32_t>(p0);
                x0[b] = y0;
                x2[b] = y2;
            }
        }
        for (int b = 0; b < 4; ++b) {
            out[4 * b] = x0[b];
            out[4 * b + 1] = x1[b];
            out[4 * b + 2] = x2[b];
            out[4 * b + 3] = x3[b];
        }
    }
};

// SplitMix64 finalizer; used to derive sub-seeds from a root seed.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag) noexcept {
    return mix64(root ^ mix64(tag + 0x632be59bd9b4e019ull));
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return derive_seed(root, h);
}

// One independent stream per (seed, stream index). Path i of a batch always
// draws from stream i, so results do not depend on how paths are scheduled.
class Substream {
public:
    Substream(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_lo_(static_cast<std::uint32_t>(stream)),
          stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

    std::uint64_t next_u64() noexcept {
        if (lane_ == kLanes) refill();
        const std::uint64_t v = (std::uint64_t{buffer_[2 * lane_ + 1]} << 32) | buffer_[2 * lane_];
        ++lane_;
        return v;
    }

    // Uniform on the open interval (0, 1).
    double uniform() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Uniform integer in [0, n) by multiply-shift; bias is below 2^-40 for
    // any n used here.
    std::uint64_t below(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal by the ziggurat method.
    double normal() noexcept { return boost::random::normal_distribution<double>{}(*this); }

    // UniformRandomBitGenerator interface.
    using result_type = std::uint64_t;
    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }
    result_type operator()() noexcept { return next_u64(); }

private:
    // Four consecutive counters at once; the independent chains overlap in the
    // pipeline. The output order is the same as one block at a time.
    void refill() noexcept {
        Philox4x32::generate4(counter_, stream_lo_, stream_hi_, key_, buffer_.data());
        counter_ += kBlocks;
        lane_ = 0;
    }

    static constexpr int kBlocks = 4;
    static constexpr int kLanes = 2 * kBlocks;

    Philox4x32::Key key_;
    std::uint32_t stream_lo_;
    std::uint32_t stream_hi_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4 * kBlocks> buffer_{};
    int lane_ = kLanes;
};

}  // namespace pathweight
