#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace privmech {

// Philox 4x32-10 counter-based generator (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3", SC 2011).
//
// A stream is addressed by (seed, stream index): the seed is the cipher key
// and the stream index occupies the high 64 bits of the 128-bit counter, so
// distinct indices yield statistically independent streams and the same
// (seed, index) always replays the same draws. Draws within a stream walk
// the low 64 bits of the counter.
class Philox4x32 {
public:
    Philox4x32(std::uint64_t seed, std::uint64_t stream) noexcept
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)) {
        counter_[0] = 0;
        counter_[1] = 0;
        counter_[2] = static_cast<std::uint32_t>(stream);
        counter_[3] = static_cast<std::uint32_t>(stream >> 32);
    }

    std::uint64_t next_u64() noexcept {
        if (pos_ == 2) refill();
        const std::uint32_t lo = block_[2 * pos_];
        const std::uint32_t hi = block_[2 * pos_ + 1];
        ++pos_;
        return (static_cast<std::uint64_t>(hi) << 32) | lo;
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_unit() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) noexcept {
        return lo + (hi - lo) * next_unit();
    }

    double exponential(double rate) noexcept {
        return -std::log1p(-next_unit()) / rate;
    }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t next_below(std::uint64_t n) noexcept {
        const std::uint64_t limit =
            std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

private:
    static void mul_hilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) noexcept {
        const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
        lo = static_cast<std::uint32_t>(p);
        hi = static_cast<std::uint32_t>(p >> 32);
    }

    static void round_once(std::uint32_t s[4], std::uint32_t k0, std::uint32_t k1) noexcept {
        std::uint32_t lo0, hi0, lo1, hi1;
        mul_hilo(0xD2511F53u, s[0], lo0, hi0);
        mul_hilo(0xCD9E8D57u, s[2], lo1, hi1);
        const std::uint32_t r0 = hi1 ^ s[1] ^ k0;
        const std::uint32_t r1 = lo1;
        const std::uint32_t r2 = hi0 ^ s[3] ^ k1;
        const std::uint32_t r3 = lo0;
        s[0] = r0;
        s[1] = r1;
        s[2] = r2;
        s[3] = r3;
    }

    void refill() noexcept {
        block_[0] = counter_[0];
        block_[1] = counter_[1];
        block_[2] = counter_[2];
        block_[3] = counter_[3];
        std::uint32_t k0 = key0_;
        std::uint32_t k1 = key1_;
        for (int r = 0; r < 10; ++r) {
            round_once(block_, k0, k1);
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        if (++counter_[0] == 0 && ++counter_[1] == 0) {
            if (++counter_[2] == 0) ++counter_[3];
        }
        pos_ = 0;
    }

    std::uint32_t key0_, key1_;
    std::uint32_t counter_[4];
    std::uint32_t block_[4] = {0, 0, 0, 0};
    int pos_ = 2;
};

// Independent deterministic substream for a (seed, index) pair.
inline Philox4x32 derive_substream(std::uint64_t seed, std::uint64_t index) noexcept {
    return Philox4x32(seed, index);
}

}  // namespace privmech
