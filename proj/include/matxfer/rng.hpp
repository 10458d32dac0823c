#pragma once

#include <cstdint>

namespace matxfer {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// PCG32. Self-contained so that streams are bit-identical on every platform
// (std:: distributions are not specified tightly enough for that).
//
// fork(k) derives an independent stream from the *base* seed and k only, so
// stream k is the same no matter how many values the parent has consumed.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : base_seed_(seed) {
        inc_ = (splitmix64(stream ^ 0xda3e39cb94b95bdbULL) << 1u) | 1u;
        state_ = 0u;
        next_u32();
        state_ += splitmix64(seed);
        next_u32();
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // [0,1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // [0,n)
    int uniform_int(int n) {
        return static_cast<int>((static_cast<std::uint64_t>(next_u32()) *
                                 static_cast<std::uint64_t>(n)) >> 32);
    }

    bool chance(double p) { return uniform() < p; }

    Rng fork(std::uint64_t key) const { return Rng(base_seed_, splitmix64(key + 1)); }

    std::uint64_t base_seed() const { return base_seed_; }

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 1;
    std::uint64_t base_seed_ = 0;
};

} // namespace matxfer
