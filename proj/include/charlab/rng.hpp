#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace charlab {

// Deterministic, platform-independent RNG (xoshiro256** seeded via splitmix64).
// std::mt19937 + libstdc++ distributions would tie results to the standard
// library implementation; everything here is pinned down to the bit.
class Rng {
public:
    explicit Rng(uint64_t seed) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : state_) {
            word = splitmix64(x);
        }
        have_gauss_ = false;
        gauss_spare_ = 0.0;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform in [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n), n > 0; rejection sampling keeps it unbiased
    uint64_t below(uint64_t n) {
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            const uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal(double mean = 0.0, double stddev = 1.0) {
        if (have_gauss_) {
            have_gauss_ = false;
            return mean + stddev * gauss_spare_;
        }
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        gauss_spare_ = r * std::sin(theta);
        have_gauss_ = true;
        return mean + stddev * r * std::cos(theta);
    }

    // geometric on {1, 2, ...} with success probability p, via inversion
    uint64_t geometric(double p) {
        const double u = uniform();
        const double g = std::floor(std::log1p(-u) / std::log1p(-p));
        return static_cast<uint64_t>(g) + 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent child stream. All randomness in a run flows from
    // one root seed split hierarchically: child(tag) or child(tag, step).
    Rng child(uint64_t tag) const {
        uint64_t x = state_[0] ^ (0x9e3779b97f4a7c15ULL + tag);
        uint64_t mixed = splitmix64(x);
        return Rng(mixed ^ state_[3]);
    }

    Rng child(std::string_view label) const { return child(fnv1a(label)); }

    Rng child(std::string_view label, uint64_t step) const {
        return child(fnv1a(label) ^ (step * 0xbf58476d1ce4e5b9ULL + 0x94d049bb133111ebULL));
    }

    // 4 words of raw state, for checkpointing
    std::vector<uint64_t> save_state() const { return {state_[0], state_[1], state_[2], state_[3]}; }
    void restore_state(const std::vector<uint64_t>& s) {
        for (int i = 0; i < 4; ++i) state_[i] = s[static_cast<size_t>(i)];
        have_gauss_ = false;
    }

    static uint64_t fnv1a(std::string_view s) {
        uint64_t h = 1469598103934665603ULL;
        for (const char c : s) {
            h ^= static_cast<uint8_t>(c);
            h *= 1099511628211ULL;
        }
        return h;
    }

private:
    static uint64_t splitmix64(uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4] = {};
    bool have_gauss_ = false;
    double gauss_spare_ = 0.0;
};

}  // namespace charlab
