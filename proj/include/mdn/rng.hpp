#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mdn {

// Stream ids reserved by the library. Independent concerns draw from
// independent streams so changing one (say, sampling) never perturbs
// another (say, epoch shuffling).
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kComponent = 3;
inline constexpr std::uint64_t kNoise = 4;
inline constexpr std::uint64_t kData = 5;
}  // namespace stream

/// Deterministic random stream derived from (seed, stream id).
///
/// All conversions from raw engine output to uniform/normal/bounded draws
/// are implemented here rather than via std::*_distribution, whose output
/// sequences differ between standard library implementations.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

    std::uint64_t next_u64();

    /// Unbiased draw from [0, n). n must be >= 1.
    std::uint64_t below(std::uint64_t n);

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform();

    /// Standard normal draw (Box-Muller, pairs cached).
    double normal();

    void fill_normal(std::span<double> out);

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// In-place Fisher-Yates shuffle with our own bounded draws.
void shuffle_indices(std::span<std::size_t> indices, RngStream& rng);

std::vector<std::size_t> shuffled_indices(std::size_t n, RngStream& rng);

}  // namespace mdn
