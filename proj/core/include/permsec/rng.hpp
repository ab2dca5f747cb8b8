#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace permsec {

// Deterministic random source. The engine is std::mt19937_64 (fully
// specified by the standard); the uniform/gaussian transforms are pinned
// here rather than taken from <random> distributions, whose algorithms are
// implementation-defined. Fixed seed => bit-identical streams.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1), 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [0, n). Rejection sampling, exact for any n >= 1.
    std::uint64_t below(std::uint64_t n);

    // Standard normal via the Marsaglia polar method (no trig calls); a
    // spare deviate is cached between calls.
    double gaussian();

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    std::uint64_t seed() const { return seed_; }

    // Independent stream derived from this rng's seed and a label. Streams
    // with distinct labels never share state, so consuming one does not
    // perturb another.
    Rng substream(std::string_view label) const {
        return Rng(derive_seed(seed_, label));
    }

    static std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

private:
    std::uint64_t seed_ = 0;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace permsec
