#ifndef MOC_RANDOM_HPP
#define MOC_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace moc {

// The single generator behind every stochastic step. The helpers below
// are written out instead of using <random> distributions so a seed gives
// the same stream on every standard library.
using Rng = std::mt19937_64;

// Uniform in [0, 1).
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Uniform in [0, n); n > 0.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

inline bool bernoulli(Rng& rng, double p) {
    return uniform01(rng) < p;
}

// Box-Muller; consumes two draws per call.
inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[uniform_index(rng, i)]);
    }
}

} // namespace moc

#endif
