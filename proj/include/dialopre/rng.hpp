#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace dialopre {

// splitmix64 finalizer; the basis of all seed derivation.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Named substream derivation: every stage of the pipeline draws from its own
// stream so adding a stage never perturbs another stage's draws.
std::uint64_t substream_seed(std::uint64_t root, std::string_view name);
std::uint64_t substream_seed(std::uint64_t root, std::string_view name, std::uint64_t index);

// Deterministic generator with implementation-independent distributions.
// (std::uniform_int_distribution is not portable across standard libraries;
// the rejection sampling here is.)
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix64(seed)) {}

    // splitmix64: full 2^64 period
    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [lo, hi] inclusive
    int uniform_int(int lo, int hi);

    // uniform double in [0, 1)
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double normal(double mean = 0.0, double stddev = 1.0);

    bool bernoulli(double p) { return uniform01() < p; }

    // k distinct values from [0, n), order of selection
    std::vector<int> sample_without_replacement(int n, int k);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            int j = uniform_int(0, i);
            std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
        }
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dialopre
