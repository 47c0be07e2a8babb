#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mufu {

// All sampling in this project goes through this generator so that results
// are reproducible across platforms. std::mt19937_64 has a fully specified
// output sequence; bounded draws use rejection sampling (never
// std::uniform_int_distribution, whose mapping is implementation-defined).
class DeterministicRng {
public:
    static constexpr const char* kAlgorithm = "mt19937_64/rejection";

    explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Unbiased draw from [0, bound). bound must be > 0.
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t limit = bound * (UINT64_MAX / bound);
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % bound;
    }

private:
    std::mt19937_64 engine_;
};

// Fisher-Yates, ascending form: for i in [0, n), swap v[i] with
// v[i + draw(n - i)]. Stopping the loop after k steps leaves an unbiased
// sample without replacement in v[0..k).
template <typename T>
void partial_fisher_yates(std::vector<T>& v, std::size_t k, DeterministicRng& rng) {
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
        std::swap(v[i], v[j]);
    }
}

template <typename T>
void fisher_yates_shuffle(std::vector<T>& v, DeterministicRng& rng) {
    partial_fisher_yates(v, v.size(), rng);
}

template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t k,
                                          DeterministicRng& rng) {
    partial_fisher_yates(pool, k, rng);
    pool.resize(k);
    return pool;
}

} // namespace mufu
