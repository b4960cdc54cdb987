#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace isa {

/// Deterministic random source. All randomness in the project flows from a
/// single run seed through named sub-streams, so that e.g. changing the
/// negative-sampling policy does not perturb data generation.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    /// Sub-stream keyed by name: stream(seed, "data") and stream(seed, "init")
    /// are independent for any fixed seed.
    static Rng stream(uint64_t seed, std::string_view name);

    uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal();

    /// Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// FNV-1a, also used for artifact fingerprints.
uint64_t fnv1a(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace isa
