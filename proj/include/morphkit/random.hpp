#pragma once

// Reproducible sampling streams.
//
// Stream (seed, index) is a std::mt19937_64 seeded with splitmix64(seed ^ splitmix64(index)).
// Both algorithms are fully specified, and doubles are built from the top 53 bits rather than
// through std::uniform_real_distribution (whose algorithm is implementation-defined), so
// sampled data is identical across standard libraries and independent of thread scheduling.

#include <cstdint>
#include <random>

namespace morphkit {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

class SampleStream {
public:
    SampleStream(std::uint64_t seed, std::uint64_t index) : engine_(splitmix64(seed ^ splitmix64(index))) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// +1 or -1 with equal probability.
    int sign() { return (engine_() >> 63) ? 1 : -1; }

private:
    std::mt19937_64 engine_;
};

}  // namespace morphkit
