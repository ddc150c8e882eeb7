#pragma once

#include <cmath>
#include <cstdint>
#include <array>
#include <string_view>

namespace otfm {

// splitmix64, used for seeding and for hashing stream labels.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ with deterministic, labeled sub-stream derivation.
//
// All randomness in the project flows from one master seed. Sub-streams are
// derived as Rng(seed).stream(label, index...): the label and indices are
// hashed into the seeding sequence, so streams for distinct (label, index)
// tuples are independent and reproducible regardless of thread count or
// call order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : state_) w = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller. Implemented here (not via
    // std::normal_distribution) so results are identical across platforms.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t next_below(std::uint64_t n) {
        // Unbiased bounded draw by rejection.
        const std::uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Derive an independent labeled sub-stream.
    Rng stream(std::string_view label, std::uint64_t a = 0, std::uint64_t b = 0) const {
        std::uint64_t h = 0x8f1bbcdcbbe5dbafULL;
        for (char c : label) {
            h ^= static_cast<unsigned char>(c);
            splitmix64(h);
        }
        h ^= a * 0xd1342543de82ef95ULL;
        splitmix64(h);
        h ^= b * 0xaf251af3b0f025b5ULL;
        Rng child(0);
        std::uint64_t sm = h;
        for (std::size_t i = 0; i < 4; ++i) child.state_[i] = state_[i] ^ splitmix64(sm);
        // One warm-up round decorrelates the derived state.
        child.next_u64();
        return child;
    }

    std::array<std::uint64_t, 4> state() const { return state_; }
    void set_state(const std::array<std::uint64_t, 4>& s) {
        state_ = s;
        have_spare_ = false;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace otfm
