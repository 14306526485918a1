#include "mdn/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace mdn {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) {
    // Scramble (seed, stream) so nearby seeds and stream ids give
    // unrelated engine states.
    std::uint64_t state = seed;
    std::uint64_t a = splitmix64(state);
    state ^= 0xD1B54A32D192ED03ULL * (stream_id + 1);
    std::uint64_t b = splitmix64(state);
    engine_.seed(a ^ (b << 1));
}

std::uint64_t RngStream::next_u64() {
    return engine_();
}

std::uint64_t RngStream::below(std::uint64_t n) {
    // Classic rejection sampling to remove modulo bias.
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t x;
    std::uint64_t r;
    do {
        x = next_u64();
        r = x % n;
    } while (x - r > max - (n - 1));
    return r;
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    // 1 - u1 lies in (0, 1], so the logarithm is finite.
    const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

void RngStream::fill_normal(std::span<double> out) {
    for (double& v : out) {
        v = normal();
    }
}

void shuffle_indices(std::span<std::size_t> indices, RngStream& rng) {
    for (std::size_t i = indices.size(); i > 1; --i) {
        const std::size_t j = rng.below(i);
        std::swap(indices[i - 1], indices[j]);
    }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, RngStream& rng) {
    std::vector<std::size_t> indices(n);
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    shuffle_indices(indices, rng);
    return indices;
}

}  // namespace mdn
