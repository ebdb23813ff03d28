#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace tfcl {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Reproducible random stream identified by (seed, stream_id).
///
/// Child streams are derived by hashing, never by drawing from the parent, so
/// `split(k)` is independent of how many values the parent has produced. This
/// is what keeps per-sample and per-view augmentation independent of batch
/// scheduling.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : seed_(seed), stream_id_(stream_id), engine_(mix(seed, stream_id)) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    RngStream split(std::uint64_t child) const { return RngStream(mix(seed_, stream_id_), child); }

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return uniform() < p;
    }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        // Fisher-Yates with our own index() so the result does not depend on
        // the library's std::shuffle implementation.
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[index(i)]);
        return order;
    }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        return detail::splitmix64(detail::splitmix64(seed) ^ detail::splitmix64(stream + 0x632BE59BD9B4E019ULL));
    }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
};

}  // namespace tfcl
