#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace dann {

/// Seeded generator with distribution helpers that do not depend on the
/// standard library's implementation-defined distributions, so the same seed
/// yields the same stream on every toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Generator for a named sub-stream of `seed`. Streams with different names
    /// are independent, so consuming draws in one stage leaves the others unchanged.
    static Rng stream(std::uint64_t seed, std::string_view name);

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). n must be positive.
    std::size_t index(std::size_t n);
    /// Standard normal (Box-Muller).
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

} // namespace dann
