#pragma once
// Counter-based random numbers (Philox4x32-10, Salmon et al. 2011).
//
// A stream is identified by a 64-bit key and a 64-bit stream id; the n-th
// block of the stream is a pure function of (key, stream, n). Samples keyed
// by their index therefore come out identical whatever order or thread they
// are generated on. Distributions are implemented here rather than taken from
// <random>, whose distribution algorithms are implementation-defined.

#include <array>
#include <cstddef>
#include <cstdint>

namespace ccvol {

using PhiloxBlock = std::array<std::uint32_t, 4>;

// One Philox4x32-10 bijection of `counter` under `key`.
inline PhiloxBlock philox4x32(PhiloxBlock c, std::array<std::uint32_t, 2> k) noexcept {
    constexpr std::uint32_t kMul0 = 0xD2511F53u, kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u, kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
        k[0] += kWeyl0;
        k[1] += kWeyl1;
    }
    return c;
}

// Mix two 64-bit values into a derived seed (SplitMix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

class CounterRng {
public:
    CounterRng(std::uint64_t key, std::uint64_t stream) noexcept;

    std::uint32_t next_u32() noexcept {
        if (buffered_ == 0) refill();
        return buffer_[static_cast<std::size_t>(4 - buffered_--)];
    }
    std::uint64_t next_u64() noexcept {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    // Uniform on (0, 1) with 32 random bits; used where log() needs a nonzero argument.
    double uniform_open32() noexcept { return (static_cast<double>(next_u32()) + 0.5) * 0x1.0p-32; }
    // Standard normal by the polar method; the second variate of each pair is cached.
    double normal() noexcept;
    // Poisson by sequential inversion. Requires 0 <= mean <= 700.
    std::uint64_t poisson(double mean) noexcept;
    // Uniform integer in [0, bound) by rejection; bound must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept;

private:
    void refill() noexcept {
        const PhiloxBlock ctr{static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                              static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
        buffer_ = philox4x32(ctr, key_);
        ++counter_;
        buffered_ = 4;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    PhiloxBlock buffer_{};
    int buffered_ = 0;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

}  // namespace ccvol
