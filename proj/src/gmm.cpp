#include "mdn/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mdn::gmm {

namespace {

void check_weights(const std::vector<double>& weights, int components) {
    if (static_cast<int>(weights.size()) != components) {
        throw ShapeError("expected " + std::to_string(components) + " weights, got " +
                         std::to_string(weights.size()));
    }
    double sum = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) {
            throw InvalidInputError("mixture weights must be finite and non-negative");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > kWeightSumTolerance) {
        throw InvalidInputError("mixture weights sum to " + std::to_string(sum) +
                                ", outside the simplex tolerance");
    }
}

void check_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw InvalidInputError(std::string("non-finite entry in ") + what);
        }
    }
}

double normalization_constant(int dim) {
    return 0.5 * dim * kLog2Pi;
}

int resolve_index(int components, RngStream& rng, const std::vector<double>& weights,
                  std::optional<int> forced_index) {
    if (forced_index) {
        if (*forced_index < 0 || *forced_index >= components) {
            throw ShapeError("component index " + std::to_string(*forced_index) +
                             " out of range for K=" + std::to_string(components));
        }
        return *forced_index;
    }
    if (components == 1) {
        return 0;
    }
    return sample_component_index(weights, rng);
}

}  // namespace

void MixtureParams::validate() const {
    if (components < 1 || dim < 1) {
        throw InvalidInputError("mixture needs K >= 1 and N >= 1");
    }
    check_weights(weights, components);
    if (static_cast<int>(means.size()) != components * dim) {
        throw ShapeError("mixture means must hold K*N entries");
    }
    check_finite(means, "mixture means");
    if (static_cast<int>(factors_raw.size()) != components) {
        throw ShapeError("mixture needs one factor per component");
    }
    for (const auto& u : factors_raw) {
        if (u.dim != dim) {
            throw ShapeError("factor dimension does not match mixture dimension");
        }
        u.validate();
    }
}

void DiagParams::validate() const {
    if (components < 1 || dim < 1) {
        throw InvalidInputError("mixture needs K >= 1 and N >= 1");
    }
    check_weights(weights, components);
    if (static_cast<int>(means.size()) != components * dim ||
        static_cast<int>(log_inv_scales.size()) != components * dim) {
        throw ShapeError("diagonal mixture means and scales must hold K*N entries");
    }
    check_finite(means, "mixture means");
    check_finite(log_inv_scales, "log inverse scales");
}

void normalize_weights(std::vector<double>& weights) {
    if (weights.empty()) {
        throw InvalidInputError("empty weight vector");
    }
    double sum = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) {
            throw InvalidInputError("mixture weights must be finite and non-negative");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > kWeightSumTolerance) {
        throw InvalidInputError("mixture weights sum to " + std::to_string(sum) +
                                ", outside the simplex tolerance");
    }
    for (double& w : weights) {
        w /= sum;
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(log_softmax(logits));
    for (double& v : out) {
        v = std::exp(v);
    }
    return out;
}

std::vector<double> log_softmax(std::span<const double> logits) {
    if (logits.empty()) {
        throw ShapeError("log_softmax of empty vector");
    }
    double max = -std::numeric_limits<double>::infinity();
    for (double l : logits) {
        max = std::max(max, l);
    }
    if (!std::isfinite(max)) {
        throw InvalidInputError("log_softmax requires at least one finite logit");
    }
    double sum = 0.0;
    for (double l : logits) {
        sum += std::exp(l - max);
    }
    const double lse = max + std::log(sum);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = logits[i] - lse;
    }
    return out;
}

std::size_t full_head_size(int components, int dim) {
    return static_cast<std::size_t>(components) * (1 + dim) + components * linalg::tri_size(dim);
}

std::size_t diag_head_size(int components, int dim) {
    return static_cast<std::size_t>(components) * (1 + 2 * dim);
}

MixtureParams mixture_from_head(std::span<const double> head, int components, int dim) {
    if (head.size() != full_head_size(components, dim)) {
        throw ShapeError("full head needs " + std::to_string(full_head_size(components, dim)) +
                         " entries, got " + std::to_string(head.size()));
    }
    const std::size_t tri = linalg::tri_size(dim);
    MixtureParams p;
    p.components = components;
    p.dim = dim;
    p.weights = softmax(head.subspan(0, components));
    const auto means = head.subspan(components, static_cast<std::size_t>(components) * dim);
    p.means.assign(means.begin(), means.end());
    const auto factors = head.subspan(components + static_cast<std::size_t>(components) * dim);
    p.factors_raw.resize(components);
    for (int i = 0; i < components; ++i) {
        auto& u = p.factors_raw[i];
        u.dim = dim;
        const auto block = factors.subspan(static_cast<std::size_t>(i) * tri, tri);
        u.entries.assign(block.begin(), block.end());
    }
    return p;
}

DiagParams diag_from_head(std::span<const double> head, int components, int dim) {
    if (head.size() != diag_head_size(components, dim)) {
        throw ShapeError("diagonal head needs " +
                         std::to_string(diag_head_size(components, dim)) + " entries, got " +
                         std::to_string(head.size()));
    }
    DiagParams p;
    p.components = components;
    p.dim = dim;
    p.weights = softmax(head.subspan(0, components));
    const auto means = head.subspan(components, static_cast<std::size_t>(components) * dim);
    p.means.assign(means.begin(), means.end());
    const auto sigmas = head.subspan(components + static_cast<std::size_t>(components) * dim);
    p.log_inv_scales.assign(sigmas.begin(), sigmas.end());
    return p;
}

double component_log_density_full(std::span<const double> x, std::span<const double> mean,
                                  const linalg::UpperTriangularRaw& u, bool normalized) {
    if (x.size() != mean.size() || static_cast<int>(x.size()) != u.dim) {
        throw ShapeError("component_log_density_full: x, mean and factor dims disagree");
    }
    const linalg::CholeskyFactor c = linalg::exp_diag(u);
    std::vector<double> diff(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        diff[j] = x[j] - mean[j];
    }
    const std::vector<double> q = linalg::tri_matvec(c, diff);
    double quad = 0.0;
    for (double v : q) {
        quad += v * v;
    }
    double log_density = -0.5 * quad + linalg::log_det_half_precision(u);
    if (normalized) {
        log_density -= normalization_constant(u.dim);
    }
    return log_density;
}

double component_log_density_diag(std::span<const double> x, std::span<const double> mean,
                                  std::span<const double> log_inv_scales, bool normalized) {
    if (x.size() != mean.size() || x.size() != log_inv_scales.size()) {
        throw ShapeError("component_log_density_diag: shapes disagree");
    }
    double quad = 0.0;
    double sum_sigma = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double sigma = linalg::clamp_diag(log_inv_scales[j]);
        const double q = std::exp(sigma) * (x[j] - mean[j]);
        quad += q * q;
        sum_sigma += sigma;
    }
    double log_density = -0.5 * quad + sum_sigma;
    if (normalized) {
        log_density -= normalization_constant(static_cast<int>(x.size()));
    }
    return log_density;
}

namespace {

/// Shared log-sum-exp over terms a_i = log w_i + log p_i(x). Zero-weight
/// components are skipped; all-zero weights are rejected.
template <typename LogDensityFn>
double mixture_lse(const std::vector<double>& weights, LogDensityFn&& component_log_density) {
    const int k = static_cast<int>(weights.size());
    std::vector<double> terms(k, -std::numeric_limits<double>::infinity());
    double max = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (int i = 0; i < k; ++i) {
        if (weights[i] <= 0.0) {
            continue;
        }
        any = true;
        terms[i] = std::log(weights[i]) + component_log_density(i);
        max = std::max(max, terms[i]);
    }
    if (!any) {
        throw InvalidInputError("all mixture weights are zero");
    }
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        if (std::isfinite(terms[i])) {
            sum += std::exp(terms[i] - max);
        }
    }
    return max + std::log(sum);
}

}  // namespace

double mixture_log_density(std::span<const double> x, const MixtureParams& params,
                           bool normalized) {
    params.validate();
    if (static_cast<int>(x.size()) != params.dim) {
        throw ShapeError("mixture_log_density: x length does not match mixture dim");
    }
    return mixture_lse(params.weights, [&](int i) {
        return component_log_density_full(x, params.mean(i), params.factors_raw[i], normalized);
    });
}

double mixture_log_density(std::span<const double> x, const DiagParams& params, bool normalized) {
    params.validate();
    if (static_cast<int>(x.size()) != params.dim) {
        throw ShapeError("mixture_log_density: x length does not match mixture dim");
    }
    return mixture_lse(params.weights, [&](int i) {
        return component_log_density_diag(x, params.mean(i), params.sigmas(i), normalized);
    });
}

int component_index_from_uniform(std::span<const double> weights, double u) {
    double cumulative = 0.0;
    const int k = static_cast<int>(weights.size());
    for (int i = 0; i < k; ++i) {
        cumulative += weights[i];
        // Advance only while the cumulative sum is strictly below the draw,
        // so a draw exactly on a boundary picks the lower index.
        if (!(cumulative < u)) {
            return i;
        }
    }
    return k - 1;
}

int sample_component_index(std::span<const double> weights, RngStream& rng) {
    return component_index_from_uniform(weights, rng.uniform());
}

Sample sample_full(const MixtureParams& params, RngStream& rng,
                   std::optional<int> forced_index) {
    params.validate();
    Sample s;
    s.component = resolve_index(params.components, rng, params.weights, forced_index);
    s.eta.values.resize(params.dim);
    rng.fill_normal(s.eta.values);
    s.x = latent_to_x(s.eta, params, s.component);
    return s;
}

Sample sample_diag(const DiagParams& params, RngStream& rng, std::optional<int> forced_index) {
    params.validate();
    Sample s;
    s.component = resolve_index(params.components, rng, params.weights, forced_index);
    s.eta.values.resize(params.dim);
    rng.fill_normal(s.eta.values);
    s.x.resize(params.dim);
    const auto mean = params.mean(s.component);
    const auto sigmas = params.sigmas(s.component);
    for (int j = 0; j < params.dim; ++j) {
        s.x[j] = mean[j] + s.eta.values[j] / std::exp(linalg::clamp_diag(sigmas[j]));
    }
    return s;
}

LatentVector x_to_latent(std::span<const double> x, const MixtureParams& params, int component) {
    if (component < 0 || component >= params.components) {
        throw ShapeError("component index out of range");
    }
    if (static_cast<int>(x.size()) != params.dim) {
        throw ShapeError("x_to_latent: x length does not match mixture dim");
    }
    const linalg::CholeskyFactor c = linalg::exp_diag(params.factors_raw[component]);
    const auto mean = params.mean(component);
    std::vector<double> diff(params.dim);
    for (int j = 0; j < params.dim; ++j) {
        diff[j] = x[j] - mean[j];
    }
    return LatentVector{linalg::tri_matvec(c, diff)};
}

std::vector<double> latent_to_x(const LatentVector& eta, const MixtureParams& params,
                                int component) {
    if (component < 0 || component >= params.components) {
        throw ShapeError("component index out of range");
    }
    if (static_cast<int>(eta.values.size()) != params.dim) {
        throw ShapeError("latent_to_x: eta length does not match mixture dim");
    }
    const linalg::CholeskyFactor c = linalg::exp_diag(params.factors_raw[component]);
    std::vector<double> x = linalg::solve_upper(c, eta.values);
    const auto mean = params.mean(component);
    for (int j = 0; j < params.dim; ++j) {
        x[j] += mean[j];
    }
    return x;
}

}  // namespace mdn::gmm
