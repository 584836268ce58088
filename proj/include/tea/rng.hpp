#pragma once

// Deterministic random primitives. std::mt19937_64 is bit-stable across
// platforms but the standard distributions are not, so every mapping from
// raw 64-bit draws to a usable value is done by hand here.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace tea {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform in [0, bound) via 128-bit multiply; bound must be > 0
    std::uint64_t uniform_index(std::uint64_t bound) {
        const unsigned __int128 wide =
            static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(bound);
        return static_cast<std::uint64_t>(wide >> 64);
    }

    // uniform in [0, 1) with 53 bits of precision
    double uniform_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // standard normal via Box-Muller; one value per call, no caching
    double normal() {
        double u1 = uniform_double();
        while (u1 <= 0.0) u1 = uniform_double();
        const double u2 = uniform_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Fisher-Yates, back to front
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

// Independent stream seed derived from a master seed, splitmix64 finalizer.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace tea
