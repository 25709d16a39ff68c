#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace wcopt {

// Portable generators; std distributions differ across standard libraries,
// so every sampler used for experiments is written out here.

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        return mix(z);
    }

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t key) {
        SplitMix64 sm(key);
        for (auto& w : s_) w = sm.next();
    }

    std::uint64_t next() {
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

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::array<std::uint64_t, 4> s_{};
};

// One independent stream per (seed, stream_index) pair.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_index)
        : seed_(seed), index_(stream_index), gen_(key(seed, stream_index)) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_index() const { return index_; }

    std::uint64_t next_u64() { return gen_.next(); }

    // [0, 1)
    double uniform() { return static_cast<double>(gen_.next() >> 11) * 0x1.0p-53; }
    // (0, 1]
    double uniform_pos() { return static_cast<double>((gen_.next() >> 11) + 1) * 0x1.0p-53; }

    int sign() { return (gen_.next() >> 63) ? 1 : -1; }

    // Marsaglia polar method, spare value cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    double exponential() { return -std::log(uniform_pos()); }

private:
    static std::uint64_t key(std::uint64_t seed, std::uint64_t index) {
        return SplitMix64::mix(seed + 0x632BE59BD9B4E019ULL) ^
               SplitMix64::mix(SplitMix64::mix(index) + 0xD1B54A32D192ED03ULL);
    }

    std::uint64_t seed_;
    std::uint64_t index_;
    Xoshiro256 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace wcopt
