#include "mdn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mdn::loss {

namespace {

using linalg::clamp_diag;
using linalg::clamp_diag_derivative;
using linalg::tri_index;
using linalg::tri_size;

double check_positive_weight(double w) {
    if (!(w > 0.0)) {
        throw InvalidInputError("surrogate bounds require strictly positive weights");
    }
    return w;
}

/// Per-kind reduction of the component terms t_i = log w_i + c_i into the
/// loss value and, when grads are requested, the coefficients
/// d loss / d c_i plus the gradient with respect to the weight logits.
struct KindReduction {
    double value = 0.0;
    std::vector<double> d_component;  // d loss / d c_i
    std::vector<double> d_logits;
};

KindReduction reduce_kind(LossKind kind, const std::vector<double>& log_weights,
                          const std::vector<double>& weights,
                          const std::vector<double>& component_logs, bool want_grad) {
    const int k = static_cast<int>(weights.size());
    KindReduction out;
    if (want_grad) {
        out.d_component.assign(k, 0.0);
        out.d_logits.assign(k, 0.0);
    }
    switch (kind) {
        case LossKind::ExactNLL: {
            double max = -std::numeric_limits<double>::infinity();
            std::vector<double> terms(k);
            for (int i = 0; i < k; ++i) {
                terms[i] = log_weights[i] + component_logs[i];
                max = std::max(max, terms[i]);
            }
            double sum = 0.0;
            for (int i = 0; i < k; ++i) {
                sum += std::exp(terms[i] - max);
            }
            const double lse = max + std::log(sum);
            out.value = -lse;
            if (want_grad) {
                for (int i = 0; i < k; ++i) {
                    const double resp = std::exp(terms[i] - lse);
                    out.d_component[i] = -resp;
                    out.d_logits[i] = weights[i] - resp;
                }
            }
            break;
        }
        case LossKind::UnweightedJensen: {
            double acc = 0.0;
            for (int i = 0; i < k; ++i) {
                acc += log_weights[i] + component_logs[i];
            }
            out.value = -acc;
            if (want_grad) {
                for (int i = 0; i < k; ++i) {
                    out.d_component[i] = -1.0;
                    out.d_logits[i] = k * weights[i] - 1.0;
                }
            }
            break;
        }
        case LossKind::WeightedJensen: {
            // value = -S with S = sum_i w_i t_i; d value / d logit_k works out
            // to w_k (S - t_k) once the softmax Jacobian is applied.
            double weighted_sum = 0.0;
            for (int i = 0; i < k; ++i) {
                weighted_sum += weights[i] * (log_weights[i] + component_logs[i]);
            }
            out.value = -weighted_sum;
            if (want_grad) {
                for (int i = 0; i < k; ++i) {
                    const double t = log_weights[i] + component_logs[i];
                    out.d_component[i] = -weights[i];
                    out.d_logits[i] = weights[i] * (weighted_sum - t);
                }
            }
            break;
        }
    }
    return out;
}

struct FullScratch {
    std::vector<double> diff;     // K*N
    std::vector<double> q;        // K*N, q = U (x - mu)
    std::vector<double> ubar;     // K*tri, factor after exp_diag
    std::vector<double> c;        // K component log densities
};

double head_loss_full_impl(std::span<const double> x, int components, int dim,
                           std::span<const double> head, LossKind kind, bool normalized,
                           std::span<double>* head_grad) {
    if (head.size() != gmm::full_head_size(components, dim)) {
        throw ShapeError("full head size mismatch");
    }
    if (static_cast<int>(x.size()) != dim) {
        throw ShapeError("head_loss_full: x length does not match dim");
    }
    const std::size_t tri = tri_size(dim);
    const std::size_t means_off = static_cast<std::size_t>(components);
    const std::size_t factors_off = means_off + static_cast<std::size_t>(components) * dim;

    const std::vector<double> log_weights = gmm::log_softmax(head.subspan(0, components));
    std::vector<double> weights(components);
    for (int i = 0; i < components; ++i) {
        weights[i] = std::exp(log_weights[i]);
    }

    FullScratch s;
    s.diff.resize(static_cast<std::size_t>(components) * dim);
    s.q.resize(static_cast<std::size_t>(components) * dim);
    s.ubar.resize(static_cast<std::size_t>(components) * tri);
    s.c.resize(components);

    const double norm_const = normalized ? 0.5 * dim * gmm::kLog2Pi : 0.0;

    for (int i = 0; i < components; ++i) {
        const double* mean = head.data() + means_off + static_cast<std::size_t>(i) * dim;
        const double* factor = head.data() + factors_off + static_cast<std::size_t>(i) * tri;
        double* diff = s.diff.data() + static_cast<std::size_t>(i) * dim;
        double* q = s.q.data() + static_cast<std::size_t>(i) * dim;
        double* ubar = s.ubar.data() + static_cast<std::size_t>(i) * tri;

        for (int j = 0; j < dim; ++j) {
            diff[j] = x[j] - mean[j];
        }
        double sum_diag = 0.0;
        for (int r = 0; r < dim; ++r) {
            sum_diag += clamp_diag(factor[tri_index(dim, r, r)]);
        }
        for (int r = 0; r < dim; ++r) {
            double acc = 0.0;
            for (int c = r; c < dim; ++c) {
                const std::size_t idx = tri_index(dim, r, c);
                ubar[idx] = (r == c) ? std::exp(clamp_diag(factor[idx])) : factor[idx];
                acc += ubar[idx] * diff[c];
            }
            q[r] = acc;
        }
        double quad = 0.0;
        for (int r = 0; r < dim; ++r) {
            quad += q[r] * q[r];
        }
        s.c[i] = -0.5 * quad + sum_diag - norm_const;
    }

    const KindReduction red =
        reduce_kind(kind, log_weights, weights, s.c, head_grad != nullptr);

    if (head_grad != nullptr) {
        std::span<double>& g = *head_grad;
        if (g.size() != head.size()) {
            throw ShapeError("head gradient size mismatch");
        }
        std::fill(g.begin(), g.end(), 0.0);
        for (int i = 0; i < components; ++i) {
            g[i] = red.d_logits[i];
        }
        for (int i = 0; i < components; ++i) {
            const double coef = red.d_component[i];
            const double* factor = head.data() + factors_off + static_cast<std::size_t>(i) * tri;
            const double* diff = s.diff.data() + static_cast<std::size_t>(i) * dim;
            const double* q = s.q.data() + static_cast<std::size_t>(i) * dim;
            const double* ubar = s.ubar.data() + static_cast<std::size_t>(i) * tri;
            double* gmean = g.data() + means_off + static_cast<std::size_t>(i) * dim;
            double* gfac = g.data() + factors_off + static_cast<std::size_t>(i) * tri;

            // d c / d mu = U^T q, column by column.
            for (int c = 0; c < dim; ++c) {
                double acc = 0.0;
                for (int r = 0; r <= c; ++r) {
                    acc += ubar[tri_index(dim, r, c)] * q[r];
                }
                gmean[c] += coef * acc;
            }
            // d c / d U_rc = -q_r diff_c; diagonal entries chain through the
            // clamped exponential and pick up the log-det term.
            for (int r = 0; r < dim; ++r) {
                for (int c = r; c < dim; ++c) {
                    const std::size_t idx = tri_index(dim, r, c);
                    const double d_ubar = coef * (-q[r] * diff[c]);
                    if (r == c) {
                        const double dclamp = clamp_diag_derivative(factor[idx]);
                        gfac[idx] += (d_ubar * ubar[idx] + coef) * dclamp;
                    } else {
                        gfac[idx] += d_ubar;
                    }
                }
            }
        }
    }
    return red.value;
}

double head_loss_diag_impl(std::span<const double> x, int components, int dim,
                           std::span<const double> head, LossKind kind, bool normalized,
                           std::span<double>* head_grad) {
    if (head.size() != gmm::diag_head_size(components, dim)) {
        throw ShapeError("diagonal head size mismatch");
    }
    if (static_cast<int>(x.size()) != dim) {
        throw ShapeError("head_loss_diag: x length does not match dim");
    }
    const std::size_t means_off = static_cast<std::size_t>(components);
    const std::size_t sigmas_off = means_off + static_cast<std::size_t>(components) * dim;

    const std::vector<double> log_weights = gmm::log_softmax(head.subspan(0, components));
    std::vector<double> weights(components);
    for (int i = 0; i < components; ++i) {
        weights[i] = std::exp(log_weights[i]);
    }

    std::vector<double> q(static_cast<std::size_t>(components) * dim);
    std::vector<double> inv_scale(static_cast<std::size_t>(components) * dim);
    std::vector<double> component_logs(components);
    const double norm_const = normalized ? 0.5 * dim * gmm::kLog2Pi : 0.0;

    for (int i = 0; i < components; ++i) {
        const double* mean = head.data() + means_off + static_cast<std::size_t>(i) * dim;
        const double* sigma = head.data() + sigmas_off + static_cast<std::size_t>(i) * dim;
        double quad = 0.0;
        double sum_sigma = 0.0;
        for (int j = 0; j < dim; ++j) {
            const double s = clamp_diag(sigma[j]);
            const double sb = std::exp(s);
            const std::size_t idx = static_cast<std::size_t>(i) * dim + j;
            inv_scale[idx] = sb;
            q[idx] = sb * (x[j] - mean[j]);
            quad += q[idx] * q[idx];
            sum_sigma += s;
        }
        component_logs[i] = -0.5 * quad + sum_sigma - norm_const;
    }

    const KindReduction red =
        reduce_kind(kind, log_weights, weights, component_logs, head_grad != nullptr);

    if (head_grad != nullptr) {
        std::span<double>& g = *head_grad;
        if (g.size() != head.size()) {
            throw ShapeError("head gradient size mismatch");
        }
        std::fill(g.begin(), g.end(), 0.0);
        for (int i = 0; i < components; ++i) {
            g[i] = red.d_logits[i];
        }
        for (int i = 0; i < components; ++i) {
            const double coef = red.d_component[i];
            const double* sigma = head.data() + sigmas_off + static_cast<std::size_t>(i) * dim;
            double* gmean = g.data() + means_off + static_cast<std::size_t>(i) * dim;
            double* gsigma = g.data() + sigmas_off + static_cast<std::size_t>(i) * dim;
            for (int j = 0; j < dim; ++j) {
                const std::size_t idx = static_cast<std::size_t>(i) * dim + j;
                gmean[j] += coef * q[idx] * inv_scale[idx];
                gsigma[j] += coef * (1.0 - q[idx] * q[idx]) * clamp_diag_derivative(sigma[j]);
            }
        }
    }
    return red.value;
}

}  // namespace

const char* to_string(LossKind kind) {
    switch (kind) {
        case LossKind::ExactNLL:
            return "exact_nll";
        case LossKind::UnweightedJensen:
            return "unweighted_jensen";
        case LossKind::WeightedJensen:
            return "weighted_jensen";
    }
    return "unknown";
}

LossKind loss_kind_from_string(std::string_view name) {
    if (name == "exact_nll") {
        return LossKind::ExactNLL;
    }
    if (name == "unweighted_jensen") {
        return LossKind::UnweightedJensen;
    }
    if (name == "weighted_jensen") {
        return LossKind::WeightedJensen;
    }
    throw InvalidInputError("unknown loss kind: " + std::string(name));
}

double exact_nll_full(std::span<const double> x, const gmm::MixtureParams& params,
                      bool normalized) {
    return -gmm::mixture_log_density(x, params, normalized);
}

double surrogate_bound_full(std::span<const double> x, const gmm::MixtureParams& params,
                            bool normalized) {
    params.validate();
    double acc = 0.0;
    for (int i = 0; i < params.components; ++i) {
        acc += std::log(check_positive_weight(params.weights[i])) +
               gmm::component_log_density_full(x, params.mean(i), params.factors_raw[i],
                                               normalized);
    }
    return -acc;
}

double weighted_jensen_full(std::span<const double> x, const gmm::MixtureParams& params,
                            bool normalized) {
    params.validate();
    double acc = 0.0;
    for (int i = 0; i < params.components; ++i) {
        const double w = check_positive_weight(params.weights[i]);
        acc += w * (std::log(w) + gmm::component_log_density_full(x, params.mean(i),
                                                                  params.factors_raw[i],
                                                                  normalized));
    }
    return -acc;
}

double exact_nll_diag(std::span<const double> x, const gmm::DiagParams& params, bool normalized) {
    return -gmm::mixture_log_density(x, params, normalized);
}

double surrogate_bound_diag(std::span<const double> x, const gmm::DiagParams& params,
                            bool normalized) {
    params.validate();
    double acc = 0.0;
    for (int i = 0; i < params.components; ++i) {
        acc += std::log(check_positive_weight(params.weights[i])) +
               gmm::component_log_density_diag(x, params.mean(i), params.sigmas(i), normalized);
    }
    return -acc;
}

double weighted_jensen_diag(std::span<const double> x, const gmm::DiagParams& params,
                            bool normalized) {
    params.validate();
    double acc = 0.0;
    for (int i = 0; i < params.components; ++i) {
        const double w = check_positive_weight(params.weights[i]);
        acc += w * (std::log(w) + gmm::component_log_density_diag(x, params.mean(i),
                                                                  params.sigmas(i), normalized));
    }
    return -acc;
}

double loss_full(std::span<const double> x, const gmm::MixtureParams& params, LossKind kind,
                 bool normalized) {
    switch (kind) {
        case LossKind::ExactNLL:
            return exact_nll_full(x, params, normalized);
        case LossKind::UnweightedJensen:
            return surrogate_bound_full(x, params, normalized);
        case LossKind::WeightedJensen:
            return weighted_jensen_full(x, params, normalized);
    }
    throw InvalidInputError("unknown loss kind");
}

double loss_diag(std::span<const double> x, const gmm::DiagParams& params, LossKind kind,
                 bool normalized) {
    switch (kind) {
        case LossKind::ExactNLL:
            return exact_nll_diag(x, params, normalized);
        case LossKind::UnweightedJensen:
            return surrogate_bound_diag(x, params, normalized);
        case LossKind::WeightedJensen:
            return weighted_jensen_diag(x, params, normalized);
    }
    throw InvalidInputError("unknown loss kind");
}

namespace {

template <typename Params, typename Fn>
LossValue batch_loss_impl(const std::vector<std::vector<double>>& xs,
                          const std::vector<Params>& params, Fn&& per_sample_loss) {
    if (xs.empty()) {
        throw InvalidInputError("batch loss needs at least one sample");
    }
    if (xs.size() != params.size()) {
        throw ShapeError("batch loss: sample and parameter counts disagree");
    }
    LossValue out;
    out.per_sample.resize(xs.size());
    double sum = 0.0;
    for (std::size_t b = 0; b < xs.size(); ++b) {
        out.per_sample[b] = per_sample_loss(xs[b], params[b]);
        sum += out.per_sample[b];
    }
    out.total = sum / static_cast<double>(xs.size());
    return out;
}

}  // namespace

LossValue batch_loss_full(const std::vector<std::vector<double>>& xs,
                          const std::vector<gmm::MixtureParams>& params, LossKind kind,
                          bool normalized) {
    return batch_loss_impl(xs, params, [&](const std::vector<double>& x,
                                           const gmm::MixtureParams& p) {
        return loss_full(x, p, kind, normalized);
    });
}

LossValue batch_loss_diag(const std::vector<std::vector<double>>& xs,
                          const std::vector<gmm::DiagParams>& params, LossKind kind,
                          bool normalized) {
    return batch_loss_impl(xs, params, [&](const std::vector<double>& x,
                                           const gmm::DiagParams& p) {
        return loss_diag(x, p, kind, normalized);
    });
}

double head_loss_full(std::span<const double> x, int components, int dim,
                      std::span<const double> head, LossKind kind, bool normalized) {
    return head_loss_full_impl(x, components, dim, head, kind, normalized, nullptr);
}

double head_loss_diag(std::span<const double> x, int components, int dim,
                      std::span<const double> head, LossKind kind, bool normalized) {
    return head_loss_diag_impl(x, components, dim, head, kind, normalized, nullptr);
}

double head_loss_full_grad(std::span<const double> x, int components, int dim,
                           std::span<const double> head, LossKind kind, bool normalized,
                           std::span<double> head_grad) {
    return head_loss_full_impl(x, components, dim, head, kind, normalized, &head_grad);
}

double head_loss_diag_grad(std::span<const double> x, int components, int dim,
                           std::span<const double> head, LossKind kind, bool normalized,
                           std::span<double> head_grad) {
    return head_loss_diag_impl(x, components, dim, head, kind, normalized, &head_grad);
}

}  // namespace mdn::loss
