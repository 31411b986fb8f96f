#ifndef TAILPROB_RNG_HPP
#define TAILPROB_RNG_HPP

#include <cstdint>
#include <random>

#include "tailprob/special.hpp"

namespace tailprob {

namespace detail {

// splitmix64, used to decorrelate seeds for derived streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace detail

// Seeded random stream. All draws are made through explicit methods so a
// given (seed, call sequence) reproduces bit-identically; the standard
// library distributions are avoided because their draw sequences are
// implementation-defined.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on the open interval (0,1); never returns an exact 0 or 1,
    // so log(u) and normal_quantile(u) are always finite.
    double uniform01() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via inverse-CDF; one uniform per draw.
    double normal() { return normal_quantile(uniform01()); }

    // Independent stream derived from a master seed and a stream index.
    static Rng derived(std::uint64_t master, std::uint64_t stream) {
        std::uint64_t s = master ^ (0x2545f4914f6cdd1dull * (stream + 1));
        return Rng(detail::splitmix64(s));
    }

  private:
    static std::uint64_t mix_seed(std::uint64_t seed) {
        std::uint64_t s = seed;
        return detail::splitmix64(s);
    }

    std::mt19937_64 engine_;
};

}  // namespace tailprob

#endif
