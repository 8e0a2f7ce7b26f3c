#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace prescale::rng {

/// splitmix64 scrambler. Used both as the generator behind all seeded
/// randomness in the library and as the mixing function for deriving
/// sub-stream seeds. Chosen over std::mt19937_64 + <random> distributions
/// because its output is bit-identical on every platform and toolchain.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in (0, 1]. The open lower bound keeps log() finite.
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller. Hand-rolled because
    /// std::normal_distribution is not reproducible across stdlibs.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Derives an independent stream seed from (seed, salt). Two distinct salts
/// give streams that do not overlap in practice.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
    SplitMix64 mix(seed ^ (salt * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL));
    return mix.next_u64();
}

/// FNV-1a, for hashing stage names into salts.
inline std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed for a named pipeline stage. One master seed fans out to per-stage
/// seeds so stages can be rerun independently yet reproducibly.
inline std::uint64_t stage_seed(std::uint64_t master_seed, std::string_view stage) {
    return derive(master_seed, fnv1a(stage));
}

} // namespace prescale::rng
