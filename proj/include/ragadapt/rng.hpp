#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

// Counter-based substream RNG. Every consumer derives its stream from
// (master_seed, purpose-tag, index), so any stage of the pipeline can be
// re-run in isolation, in any order, on any thread, with identical output.
//
// The generator is the splitmix64 counter scheme: output_i = mix(key + i*phi).
// Uniform/normal variates are built by hand because the std::*_distribution
// classes are implementation-defined and would break the byte-identical
// output contract across standard libraries.
namespace ragadapt::rng {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x00000100000001B3ull;
    }
    return h;
}

}  // namespace detail

// Derives a fresh 64-bit seed for a named substream; also usable directly
// wherever a module API takes a plain seed.
constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view tag,
                                    std::uint64_t index = 0) {
    std::uint64_t k = detail::mix64(master_seed + detail::kGolden);
    k = detail::mix64(k ^ detail::fnv1a(tag));
    return detail::mix64(k ^ (index * detail::kGolden + 1));
}

class Substream {
public:
    explicit Substream(std::uint64_t seed) : key_(seed), counter_(0) {}
    Substream(std::uint64_t master_seed, std::string_view tag, std::uint64_t index = 0)
        : Substream(derive_seed(master_seed, tag, index)) {}

    std::uint64_t next_u64() { return detail::mix64(key_ + (++counter_) * detail::kGolden); }

    // [0, 1), 53-bit resolution
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // (0, 1]; safe as a log() argument
    double uniform01_open_low() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // unbiased integer in [0, n) via rejection
    std::uint64_t uniform_below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // Box-Muller without a cached spare: two uniforms per normal, fully
    // deterministic consumption order.
    double normal() {
        const double u1 = uniform01_open_low();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace ragadapt::rng
