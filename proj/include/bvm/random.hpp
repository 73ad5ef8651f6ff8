#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace bvm {

/// SplitMix64 output function. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive a stream key from a master seed and a path of integer ids.
///
/// The key depends only on (master, path), never on how many other streams
/// were drawn before, so a replica or a Poisson process can be regenerated in
/// isolation. Distinct paths of equal length give unrelated keys.
constexpr std::uint64_t stream_key(std::uint64_t master,
                                   std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t h = mix64(master ^ 0x6a09e667f3bcc909ULL);
    std::uint64_t pos = 1;
    for (std::uint64_t id : path) {
        h = mix64(h ^ mix64(id * 0xd1342543de82ef95ULL + pos));
        ++pos;
    }
    return h;
}

/// xoshiro256** generator with a few sampling helpers.
///
/// Meets UniformRandomBitGenerator so it can drive <random> distributions.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

    /// Generator for the substream named by `path` under `master`.
    static Rng stream(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept {
        return Rng(stream_key(master, path));
    }

    void reseed(std::uint64_t seed) noexcept {
        std::uint64_t x = seed;
        for (auto& word : state_) {
            word = mix64(x);
            x += 0x9e3779b97f4a7c15ULL;
        }
        normal_.reset();
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1]; safe as a log argument.
    double uniform_open() noexcept { return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53; }

    /// Uniform integer in [0, n) by Lemire's multiply-shift (bias < 2^-64 * n).
    std::uint64_t below(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    double exponential(double rate) noexcept { return -std::log(uniform_open()) / rate; }

    double normal() { return normal_(*this); }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
    std::normal_distribution<double> normal_;
};

}  // namespace bvm
