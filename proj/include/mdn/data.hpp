#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mdn/errors.hpp"

namespace mdn::data {

/// Paired samples (x, y): x are the modelled targets, y the conditions.
struct ConditionedBatch {
    int data_dim = 0;  // N
    int cond_dim = 0;  // M
    std::vector<double> x;  // B*N row-major
    std::vector<double> y;  // B*M row-major

    int size() const { return data_dim > 0 ? static_cast<int>(x.size()) / data_dim : 0; }
    std::span<const double> sample_x(int b) const {
        return {x.data() + static_cast<std::size_t>(b) * data_dim,
                static_cast<std::size_t>(data_dim)};
    }
    std::span<const double> sample_y(int b) const {
        return {y.data() + static_cast<std::size_t>(b) * cond_dim,
                static_cast<std::size_t>(cond_dim)};
    }
    void validate() const;
};

/// y ~ Uniform[0, pi); x in R^2 drawn from N(0, R(y) diag(1, aspect) R(y)^T).
/// Near y = pi/4 the two coordinates are strongly correlated, which a
/// diagonal-covariance conditional model cannot represent.
ConditionedBatch gen_rotating_gaussian(int count, std::uint64_t seed, double aspect = 0.01);

/// y ~ Uniform[0, 2 pi) is a phase offset; x comes from one of `modes`
/// equally weighted isotropic Gaussians on a circle rotated by y.
ConditionedBatch gen_mixture_ring(int count, std::uint64_t seed, int modes = 4,
                                  double radius = 3.0, double noise = 0.1);

/// y in {0, 1} selects one of two interleaved unit arcs; x is the arc point
/// plus isotropic noise.
ConditionedBatch gen_two_moons_conditional(int count, std::uint64_t seed, double noise = 0.05);

// CSV dataset format: one comment header line
//   # mdn-dataset v1 N=<n> M=<m>
// then one row per sample with columns y_1..y_M, x_1..x_N at full round-trip
// precision. A path of "-" reads stdin / writes stdout.

void write_dataset(const ConditionedBatch& batch, std::ostream& out);
ConditionedBatch read_dataset(std::istream& in);

void save_dataset(const ConditionedBatch& batch, const std::string& path);
ConditionedBatch load_dataset(const std::string& path);

}  // namespace mdn::data
