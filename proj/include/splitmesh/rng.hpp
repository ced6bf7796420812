#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace splitmesh {

// splitmix64. Every random draw in the framework flows through this generator so
// that any two runs with equal seeds produce byte-identical results.
class SplitMix64 {
  public:
    static constexpr std::uint64_t GAMMA = 0x9E3779B97F4A7C15ull;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    static constexpr std::uint64_t finalize(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() {
        state_ += GAMMA;
        return finalize(state_);
    }

    // Uniform double in [0,1): top 53 bits of the next output.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [0, n) by modulo. Biased for huge n; fine for index shuffling.
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  private:
    std::uint64_t state_;
};

// k-th (1-based) raw output of a stream seeded at `seed`, keyed by a purpose tag.
// Distinct tags give independent streams for weights, shuffles, partitions, data.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return SplitMix64::finalize(seed + (tag + 1) * SplitMix64::GAMMA);
}

namespace seed_tag {
inline constexpr std::uint64_t client_params(std::uint32_t c) { return (1ull << 32) | c; }
inline constexpr std::uint64_t server_params() { return 2ull << 32; }
inline constexpr std::uint64_t client_shuffle(std::uint32_t c) { return (3ull << 32) | c; }
inline constexpr std::uint64_t partition() { return 4ull << 32; }
inline constexpr std::uint64_t synth() { return 5ull << 32; }
inline constexpr std::uint64_t eval_split(std::uint32_t c) { return (6ull << 32) | c; }
}  // namespace seed_tag

// In-place Fisher-Yates, descending index, j = next() % (i+1).
template <typename T>
void fisher_yates_shuffle(std::vector<T>& v, SplitMix64& rng) {
    for (std::size_t i = v.size(); i-- > 1;) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i + 1));
        T tmp = v[i];
        v[i] = v[j];
        v[j] = tmp;
    }
}

// Identity permutation [0, n) shuffled with a fresh stream.
inline std::vector<std::uint64_t> shuffled_indices(std::uint64_t n, std::uint64_t seed) {
    std::vector<std::uint64_t> idx(n);
    for (std::uint64_t i = 0; i < n; ++i) idx[i] = i;
    SplitMix64 rng(seed);
    fisher_yates_shuffle(idx, rng);
    return idx;
}

// Standard normal via Box-Muller, cosine branch. Draws exactly two uniforms per
// call; the sine mate is discarded so the stream position stays predictable.
inline double next_gaussian(SplitMix64& rng) {
    double u1 = rng.next_double();
    double u2 = rng.next_double();
    while (u1 <= 0.0) {  // log(0) guard; astronomically rare
        u1 = rng.next_double();
    }
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace splitmesh
