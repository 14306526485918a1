#include "mdn/train.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include <json.hpp>

namespace mdn::train {

namespace {

using json = nlohmann::json;

void check_grads_finite(const net::NetworkParams& grads) {
    for (std::size_t l = 0; l < grads.layers.size(); ++l) {
        for (double g : grads.layers[l].weights) {
            if (!std::isfinite(g)) {
                throw NumericError("non-finite gradient in layer " + std::to_string(l) +
                                   " weights");
            }
        }
        for (double g : grads.layers[l].biases) {
            if (!std::isfinite(g)) {
                throw NumericError("non-finite gradient in layer " + std::to_string(l) +
                                   " biases");
            }
        }
    }
}

void scale_params(net::NetworkParams& p, double factor) {
    for (auto& layer : p.layers) {
        for (double& w : layer.weights) {
            w *= factor;
        }
        for (double& b : layer.biases) {
            b *= factor;
        }
    }
}

void zero_params(net::NetworkParams& p) {
    for (auto& layer : p.layers) {
        std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
        std::fill(layer.biases.begin(), layer.biases.end(), 0.0);
    }
}

void adam_update_block(std::vector<double>& params, const std::vector<double>& grads,
                       std::vector<double>& m, std::vector<double>& v, const AdamHyper& h,
                       double bias1, double bias2) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * grads[i];
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * grads[i] * grads[i];
        const double m_hat = m[i] / bias1;
        const double v_hat = v[i] / bias2;
        params[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) {
        throw InvalidInputError("training needs epochs >= 1");
    }
    if (batch_size < 1) {
        throw InvalidInputError("training needs batch_size >= 1");
    }
    if (!(adam.learning_rate >= 0.0) || !std::isfinite(adam.learning_rate)) {
        throw InvalidInputError("learning rate must be finite and >= 0");
    }
    if (warmup_fraction < 0.0 || warmup_fraction > 1.0) {
        throw InvalidInputError("warmup_fraction must lie in [0, 1]");
    }
    if (!(clip_max_norm > 0.0)) {
        throw InvalidInputError("clip_max_norm must be positive");
    }
}

AdamState make_adam_state(const net::NetworkParams& shape) {
    AdamState state;
    state.m = net::zeros_like(shape);
    state.v = net::zeros_like(shape);
    state.step = 0;
    return state;
}

void adam_step(net::NetworkParams& params, const net::NetworkParams& grads, AdamState& state,
               const AdamHyper& hyper) {
    if (grads.layers.size() != params.layers.size()) {
        throw ShapeError("adam_step: gradient layout does not match parameters");
    }
    check_grads_finite(grads);
    state.step += 1;
    const double bias1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& layer = params.layers[l];
        const auto& glayer = grads.layers[l];
        if (glayer.weights.size() != layer.weights.size() ||
            glayer.biases.size() != layer.biases.size()) {
            throw ShapeError("adam_step: layer " + std::to_string(l) + " shapes disagree");
        }
        adam_update_block(layer.weights, glayer.weights, state.m.layers[l].weights,
                          state.v.layers[l].weights, hyper, bias1, bias2);
        adam_update_block(layer.biases, glayer.biases, state.m.layers[l].biases,
                          state.v.layers[l].biases, hyper, bias1, bias2);
    }
}

double global_grad_norm(const net::NetworkParams& grads) {
    double sum = 0.0;
    for (const auto& layer : grads.layers) {
        for (double g : layer.weights) {
            sum += g * g;
        }
        for (double g : layer.biases) {
            sum += g * g;
        }
    }
    return std::sqrt(sum);
}

void clip_global_norm(net::NetworkParams& grads, double max_norm) {
    const double norm = global_grad_norm(grads);
    if (norm > max_norm) {
        scale_params(grads, max_norm / norm);
    }
}

double dataset_exact_nll(const net::NetworkParams& params, const net::MdnConfig& cfg,
                         const data::ConditionedBatch& batch) {
    const int count = batch.size();
    if (count == 0) {
        throw InvalidInputError("cannot evaluate NLL on an empty batch");
    }
    double sum = 0.0;
    for (int b = 0; b < count; ++b) {
        const std::vector<double> head = net::forward_head(batch.sample_y(b), params, cfg);
        if (cfg.covariance_mode == net::CovarianceMode::Full) {
            sum += loss::head_loss_full(batch.sample_x(b), cfg.components, cfg.data_dim, head,
                                        loss::LossKind::ExactNLL);
        } else {
            sum += loss::head_loss_diag(batch.sample_x(b), cfg.components, cfg.data_dim, head,
                                        loss::LossKind::ExactNLL);
        }
    }
    return sum / count;
}

TrainReport train(const TrainConfig& cfg, const net::MdnConfig& mdn_cfg,
                  const data::ConditionedBatch& dataset, const data::ConditionedBatch& val) {
    cfg.validate();
    mdn_cfg.validate();
    dataset.validate();
    const int count = dataset.size();
    if (count == 0) {
        throw InvalidInputError("training dataset is empty");
    }
    if (dataset.data_dim != mdn_cfg.data_dim || dataset.cond_dim != mdn_cfg.cond_dim) {
        throw ShapeError("dataset dims (N=" + std::to_string(dataset.data_dim) +
                         ", M=" + std::to_string(dataset.cond_dim) +
                         ") do not match the model config");
    }
    const bool has_val = val.size() > 0;
    if (has_val) {
        val.validate();
        if (val.data_dim != mdn_cfg.data_dim || val.cond_dim != mdn_cfg.cond_dim) {
            throw ShapeError("validation dims do not match the model config");
        }
    }

    const bool full = mdn_cfg.covariance_mode == net::CovarianceMode::Full;
    net::NetworkParams params = net::init(mdn_cfg, cfg.seed);
    AdamState adam = make_adam_state(params);
    net::NetworkParams grad = net::zeros_like(params);
    RngStream shuffle_rng(cfg.seed, stream::kShuffle);

    std::vector<std::size_t> order(count);
    for (int i = 0; i < count; ++i) {
        order[i] = static_cast<std::size_t>(i);
    }

    TrainReport report;
    report.seed = cfg.seed;
    report.config = cfg;
    report.model = mdn_cfg;
    report.train_loss.reserve(cfg.epochs);
    report.epoch_seconds.reserve(cfg.epochs);

    net::GradientTape tape;
    std::vector<double> head_adjoint;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffle_indices(order, shuffle_rng);
        const loss::LossKind kind = epoch < cfg.warmup_fraction * cfg.epochs
                                        ? cfg.warmup_loss
                                        : cfg.main_loss;
        double epoch_loss_sum = 0.0;
        int batch_index = 0;
        for (int start = 0; start < count; start += cfg.batch_size, ++batch_index) {
            const int batch_n = std::min(cfg.batch_size, count - start);
            zero_params(grad);
            double batch_sum = 0.0;
            for (int k = 0; k < batch_n; ++k) {
                const int b = static_cast<int>(order[start + k]);
                net::forward_head(dataset.sample_y(b), params, mdn_cfg, &tape);
                head_adjoint.resize(tape.head.size());
                double sample_loss;
                if (full) {
                    sample_loss = loss::head_loss_full_grad(dataset.sample_x(b),
                                                            mdn_cfg.components, mdn_cfg.data_dim,
                                                            tape.head, kind, true, head_adjoint);
                } else {
                    sample_loss = loss::head_loss_diag_grad(dataset.sample_x(b),
                                                            mdn_cfg.components, mdn_cfg.data_dim,
                                                            tape.head, kind, true, head_adjoint);
                }
                net::attach_head_adjoint(tape, head_adjoint);
                net::backward_accumulate(tape, params, mdn_cfg.activation, 1.0, grad);
                batch_sum += sample_loss;
            }
            if (!std::isfinite(batch_sum)) {
                throw DivergenceError(epoch, batch_index,
                                      "non-finite training loss at epoch " +
                                          std::to_string(epoch) + ", batch " +
                                          std::to_string(batch_index));
            }
            scale_params(grad, 1.0 / batch_n);
            clip_global_norm(grad, cfg.clip_max_norm);
            adam_step(params, grad, adam, cfg.adam);
            epoch_loss_sum += batch_sum;
        }
        report.train_loss.push_back(epoch_loss_sum / count);
        if (has_val) {
            report.val_nll.push_back(dataset_exact_nll(params, mdn_cfg, val));
        }
        const auto t1 = std::chrono::steady_clock::now();
        report.epoch_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    report.final_params = std::move(params);
    return report;
}

std::string report_to_json(const TrainReport& report) {
    json config;
    config["epochs"] = report.config.epochs;
    config["batch_size"] = report.config.batch_size;
    config["learning_rate"] = report.config.adam.learning_rate;
    config["beta1"] = report.config.adam.beta1;
    config["beta2"] = report.config.adam.beta2;
    config["epsilon"] = report.config.adam.epsilon;
    config["warmup_fraction"] = report.config.warmup_fraction;
    config["warmup_loss"] = loss::to_string(report.config.warmup_loss);
    config["main_loss"] = loss::to_string(report.config.main_loss);
    config["clip_max_norm"] = report.config.clip_max_norm;

    json model;
    model["components"] = report.model.components;
    model["data_dim"] = report.model.data_dim;
    model["cond_dim"] = report.model.cond_dim;
    model["hidden"] = report.model.hidden;
    model["activation"] = net::to_string(report.model.activation);
    model["covariance_mode"] = net::to_string(report.model.covariance_mode);
    config["model"] = model;

    json doc;
    doc["train_loss"] = report.train_loss;
    doc["val_nll"] = report.val_nll;
    doc["seed"] = report.seed;
    doc["epochs"] = report.config.epochs;
    doc["config"] = config;
    return doc.dump(2) + "\n";
}

}  // namespace mdn::train
