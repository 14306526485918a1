#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "mdn/gmm.hpp"

namespace mdn::loss {

enum class LossKind {
    ExactNLL,        // -log sum_i w_i p_i(x)
    UnweightedJensen,  // -sum_i (log w_i + log p_i(x)); a bound only when every term is <= 0
    WeightedJensen,  // -sum_i w_i (log w_i + log p_i(x)), valid bound for all params
};

const char* to_string(LossKind kind);
LossKind loss_kind_from_string(std::string_view name);

/// Mean-over-batch loss along with the per-sample terms it reduces.
struct LossValue {
    double total = 0.0;
    std::vector<double> per_sample;
};

// ---- objectives on constrained mixture parameters ----

double exact_nll_full(std::span<const double> x, const gmm::MixtureParams& params,
                      bool normalized = true);
double surrogate_bound_full(std::span<const double> x, const gmm::MixtureParams& params,
                            bool normalized = true);
double weighted_jensen_full(std::span<const double> x, const gmm::MixtureParams& params,
                            bool normalized = true);

double exact_nll_diag(std::span<const double> x, const gmm::DiagParams& params,
                      bool normalized = true);
double surrogate_bound_diag(std::span<const double> x, const gmm::DiagParams& params,
                            bool normalized = true);
double weighted_jensen_diag(std::span<const double> x, const gmm::DiagParams& params,
                            bool normalized = true);

double loss_full(std::span<const double> x, const gmm::MixtureParams& params, LossKind kind,
                 bool normalized = true);
double loss_diag(std::span<const double> x, const gmm::DiagParams& params, LossKind kind,
                 bool normalized = true);

LossValue batch_loss_full(const std::vector<std::vector<double>>& xs,
                          const std::vector<gmm::MixtureParams>& params, LossKind kind,
                          bool normalized = true);
LossValue batch_loss_diag(const std::vector<std::vector<double>>& xs,
                          const std::vector<gmm::DiagParams>& params, LossKind kind,
                          bool normalized = true);

// ---- objectives on unconstrained head vectors (the training path) ----
//
// The head layout is the one produced by the parameter network and consumed
// by gmm::mixture_from_head / gmm::diag_from_head: weight logits first, then
// means, then factor blocks (or log inverse scales). Gradients are taken
// with respect to the head entries themselves, so the weight gradient flows
// through the softmax rather than the simplex.

double head_loss_full(std::span<const double> x, int components, int dim,
                      std::span<const double> head, LossKind kind, bool normalized = true);
double head_loss_diag(std::span<const double> x, int components, int dim,
                      std::span<const double> head, LossKind kind, bool normalized = true);

/// Evaluates the loss and writes d loss / d head into head_grad
/// (head_grad.size() must equal head.size()). Returns the loss value.
double head_loss_full_grad(std::span<const double> x, int components, int dim,
                           std::span<const double> head, LossKind kind, bool normalized,
                           std::span<double> head_grad);
double head_loss_diag_grad(std::span<const double> x, int components, int dim,
                           std::span<const double> head, LossKind kind, bool normalized,
                           std::span<double> head_grad);

}  // namespace mdn::loss
