#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdn/autonet.hpp"
#include "mdn/data.hpp"
#include "mdn/loss.hpp"

namespace mdn::train {

struct AdamHyper {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    int epochs = 1;
    int batch_size = 128;
    AdamHyper adam;
    /// Epochs before ceil(warmup_fraction * epochs) train on warmup_loss,
    /// the rest on main_loss.
    double warmup_fraction = 0.2;
    loss::LossKind warmup_loss = loss::LossKind::WeightedJensen;
    loss::LossKind main_loss = loss::LossKind::ExactNLL;
    double clip_max_norm = 10.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// First and second moment estimates, one scalar per network parameter.
struct AdamState {
    net::NetworkParams m;
    net::NetworkParams v;
    long step = 0;
};

AdamState make_adam_state(const net::NetworkParams& shape);

/// One bias-corrected adaptive-moment update, in place. Throws NumericError
/// naming the layer if any gradient entry is non-finite.
void adam_step(net::NetworkParams& params, const net::NetworkParams& grads, AdamState& state,
               const AdamHyper& hyper);

double global_grad_norm(const net::NetworkParams& grads);

/// Scales all gradients by max_norm / norm when the global norm exceeds it.
void clip_global_norm(net::NetworkParams& grads, double max_norm);

struct TrainReport {
    std::vector<double> train_loss;     // per-epoch mean over samples
    std::vector<double> val_nll;        // exact NLL per epoch; empty without a val set
    std::vector<double> epoch_seconds;  // wall clock, not serialized
    net::NetworkParams final_params;
    std::uint64_t seed = 0;
    TrainConfig config;
    net::MdnConfig model;
};

/// Mini-batch maximum-likelihood training. Deterministic given the config
/// seed: init, shuffling and any sampling use separate derived rng streams,
/// and all reductions run in fixed ascending order.
TrainReport train(const TrainConfig& cfg, const net::MdnConfig& mdn_cfg,
                  const data::ConditionedBatch& dataset, const data::ConditionedBatch& val);

/// Exact NLL of the model on a batch (the validation metric).
double dataset_exact_nll(const net::NetworkParams& params, const net::MdnConfig& cfg,
                         const data::ConditionedBatch& batch);

/// Report JSON: arrays train_loss and val_nll, scalars seed and epochs, and
/// the nested config. Deterministic for identical reports.
std::string report_to_json(const TrainReport& report);

}  // namespace mdn::train
