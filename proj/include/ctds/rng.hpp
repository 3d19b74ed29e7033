#ifndef CTDS_RNG_HPP
#define CTDS_RNG_HPP

#include <cstdint>
#include <random>

#include "ctds/common.hpp"

namespace ctds {

// splitmix64: used for seed mixing / stream derivation only.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic derived stream: mixes a base seed with an arbitrary tag chain.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    std::uint64_t s = base ^ (0xa076'1d64'78bd'642fULL + tag * 0xe703'7ed1'a0b4'28dbULL);
    return splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag1, std::uint64_t tag2) {
    return derive_seed(derive_seed(base, tag1), tag2);
}

// Counter-free RNG wrapper. Gaussians come from Box-Muller without caching, so
// every call consumes a fixed number of engine draws; matched streams across
// integration schemes stay aligned.
class Rng {
   public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // uniform on (0, 1); never returns 0
    double uniform() {
        const double u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }

    std::uint64_t raw() { return eng_(); }

    // one Box-Muller pair per call
    void gaussian_pair(double& z0, double& z1) {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        z0 = r * std::cos(a);
        z1 = r * std::sin(a);
    }

    double gaussian() {
        double z0, z1;
        gaussian_pair(z0, z1);
        return z0;
    }

    void fill_gaussian(Vec& v) {
        const Index n = v.size();
        Index i = 0;
        for (; i + 1 < n; i += 2) gaussian_pair(v[i], v[i + 1]);
        if (i < n) v[i] = gaussian();
    }

    Vec gaussian_vec(Index n) {
        Vec v(n);
        fill_gaussian(v);
        return v;
    }

    // uniform integer in [0, n)
    std::uint64_t uniform_index(std::uint64_t n) {
        // rejection-free modulo is fine here; n is tiny vs 2^64
        return eng_() % n;
    }

   private:
    std::mt19937_64 eng_;
};

}  // namespace ctds

#endif  // CTDS_RNG_HPP
