#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mdn/linalg.hpp"
#include "mdn/rng.hpp"

namespace mdn::gmm {

inline const double kLog2Pi = 1.8378770664093454836;

/// Weight vectors whose sum deviates from 1 by more than this are rejected;
/// smaller deviations are renormalized away.
inline constexpr double kWeightSumTolerance = 1e-9;

/// Full-covariance Gaussian mixture: simplex weights, one mean and one raw
/// upper-triangular precision factor per component.
struct MixtureParams {
    int components = 0;  // K
    int dim = 0;         // N
    std::vector<double> weights;                          // K
    std::vector<double> means;                            // K*N row-major
    std::vector<linalg::UpperTriangularRaw> factors_raw;  // K factors of dim N

    std::span<const double> mean(int i) const {
        return {means.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
    }
    void validate() const;
};

/// Diagonal-covariance mixture: log inverse scales sigma per component, with
/// per-entry inverse scale exp(sigma).
struct DiagParams {
    int components = 0;
    int dim = 0;
    std::vector<double> weights;         // K
    std::vector<double> means;           // K*N
    std::vector<double> log_inv_scales;  // K*N

    std::span<const double> mean(int i) const {
        return {means.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
    }
    std::span<const double> sigmas(int i) const {
        return {log_inv_scales.data() + static_cast<std::size_t>(i) * dim,
                static_cast<std::size_t>(dim)};
    }
    void validate() const;
};

/// Latent code of a sample: x = mu_i + U_i^-1 eta with eta ~ N(0, I).
struct LatentVector {
    std::vector<double> values;
};

/// Renormalizes weights whose sum is within kWeightSumTolerance of 1,
/// throws InvalidInputError otherwise (or on negative/non-finite weights).
void normalize_weights(std::vector<double>& weights);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

// Network head layout shared with the loss gradients and the parameter
// network: [K weight logits | K*N means | per-component factor blocks].
// Full factors are packed row-major triangles of N(N+1)/2 entries each;
// the diagonal head carries K*N log inverse scales instead.
std::size_t full_head_size(int components, int dim);
std::size_t diag_head_size(int components, int dim);
MixtureParams mixture_from_head(std::span<const double> head, int components, int dim);
DiagParams diag_from_head(std::span<const double> head, int components, int dim);

/// Log density of one full-covariance component:
///   -1/2 ||U(x - mu)||^2 + sum_j diag(u)_j  [- (N/2) log(2 pi) if normalized]
double component_log_density_full(std::span<const double> x, std::span<const double> mean,
                                  const linalg::UpperTriangularRaw& u, bool normalized = true);

/// Diagonal analogue: -1/2 ||(x - mu) .* exp(sigma)||^2 + sum_j sigma_j.
double component_log_density_diag(std::span<const double> x, std::span<const double> mean,
                                  std::span<const double> log_inv_scales, bool normalized = true);

/// log sum_i w_i exp(log p_i(x)), computed with the log-sum-exp trick.
double mixture_log_density(std::span<const double> x, const MixtureParams& params,
                           bool normalized = true);
double mixture_log_density(std::span<const double> x, const DiagParams& params,
                           bool normalized = true);

/// Inverse-CDF scan: the smallest index whose cumulative weight reaches u.
/// A draw exactly on a cumulative boundary picks the lower index.
int component_index_from_uniform(std::span<const double> weights, double u);

/// Inverse-CDF draw over the component weights using one uniform.
int sample_component_index(std::span<const double> weights, RngStream& rng);

struct Sample {
    std::vector<double> x;
    int component = 0;
    LatentVector eta;
};

/// Draws x = mu_i + U_i^-1 eta with eta ~ N(0, I_N). The component index is
/// sampled unless forced; K == 1 consumes no index draw.
Sample sample_full(const MixtureParams& params, RngStream& rng,
                   std::optional<int> forced_index = std::nullopt);

/// Diagonal analogue: x = mu_i + eta ./ exp(sigma_i).
Sample sample_diag(const DiagParams& params, RngStream& rng,
                   std::optional<int> forced_index = std::nullopt);

/// eta = U_i (x - mu_i). Inverse of latent_to_x for every component index.
LatentVector x_to_latent(std::span<const double> x, const MixtureParams& params, int component);

/// x = mu_i + U_i^-1 eta.
std::vector<double> latent_to_x(const LatentVector& eta, const MixtureParams& params,
                                int component);

}  // namespace mdn::gmm
