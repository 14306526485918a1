#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdn/train.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mdn::train;
using mdn::RngStream;
using mdn::data::ConditionedBatch;
using mdn::net::MdnConfig;
using mdn::net::NetworkParams;

namespace {

MdnConfig tiny_model(int k = 1, int n = 1, mdn::net::CovarianceMode mode =
                                               mdn::net::CovarianceMode::Full) {
    MdnConfig cfg;
    cfg.components = k;
    cfg.data_dim = n;
    cfg.cond_dim = 1;
    cfg.hidden = {8};
    cfg.covariance_mode = mode;
    return cfg;
}

ConditionedBatch constant_condition_gaussian(int count, double mean, double stddev,
                                             std::uint64_t seed) {
    RngStream rng(seed, mdn::stream::kData);
    ConditionedBatch b;
    b.data_dim = 1;
    b.cond_dim = 1;
    for (int i = 0; i < count; ++i) {
        b.y.push_back(0.0);
        b.x.push_back(mean + stddev * rng.normal());
    }
    return b;
}

bool params_equal(const NetworkParams& a, const NetworkParams& b) {
    if (a.layers.size() != b.layers.size()) {
        return false;
    }
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].weights != b.layers[l].weights ||
            a.layers[l].biases != b.layers[l].biases) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("adam leaves parameters alone under a zero gradient from rest") {
    const MdnConfig cfg = tiny_model();
    NetworkParams params = mdn::net::init(cfg, 1);
    const NetworkParams before = params;
    AdamState state = make_adam_state(params);
    const NetworkParams zero_grad = mdn::net::zeros_like(params);
    AdamHyper hyper;
    adam_step(params, zero_grad, state, hyper);
    adam_step(params, zero_grad, state, hyper);
    CHECK(params_equal(params, before));
    CHECK(state.step == 2);
}

TEST_CASE("adam decays existing moments under a zero gradient") {
    const MdnConfig cfg = tiny_model();
    NetworkParams params = mdn::net::init(cfg, 1);
    AdamState state = make_adam_state(params);
    state.m.layers[0].weights[0] = 1.0;
    state.v.layers[0].weights[0] = 1.0;
    AdamHyper hyper;
    adam_step(params, mdn::net::zeros_like(params), state, hyper);
    CHECK(state.m.layers[0].weights[0] == doctest::Approx(hyper.beta1).epsilon(1e-15));
    CHECK(state.v.layers[0].weights[0] == doctest::Approx(hyper.beta2).epsilon(1e-15));
}

TEST_CASE("the first adam step moves each coordinate by about lr times sign") {
    const MdnConfig cfg = tiny_model();
    NetworkParams params = mdn::net::init(cfg, 2);
    const NetworkParams before = params;
    AdamState state = make_adam_state(params);
    NetworkParams grad = mdn::net::zeros_like(params);
    RngStream rng(501);
    for (auto& layer : grad.layers) {
        for (double& g : layer.weights) {
            g = rng.normal();
        }
        for (double& g : layer.biases) {
            g = rng.normal();
        }
    }
    AdamHyper hyper;
    adam_step(params, grad, state, hyper);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        for (std::size_t i = 0; i < params.layers[l].weights.size(); ++i) {
            const double g = grad.layers[l].weights[i];
            if (std::fabs(g) < 1e-4) {
                continue;  // epsilon dominates for tiny gradients
            }
            const double delta = params.layers[l].weights[i] - before.layers[l].weights[i];
            // First bias-corrected step: -lr * g / (|g| + eps) ~ -lr * sign(g).
            CHECK(delta == doctest::Approx(-hyper.learning_rate * (g > 0 ? 1.0 : -1.0))
                               .epsilon(1e-3));
        }
    }
}

TEST_CASE("adam rejects non-finite gradients naming the layer") {
    const MdnConfig cfg = tiny_model();
    NetworkParams params = mdn::net::init(cfg, 3);
    AdamState state = make_adam_state(params);
    NetworkParams grad = mdn::net::zeros_like(params);
    grad.layers[1].weights[0] = std::nan("");
    try {
        adam_step(params, grad, state, AdamHyper{});
        FAIL("expected NumericError");
    } catch (const mdn::NumericError& e) {
        CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
    }
}

TEST_CASE("global norm clipping rescales only oversized gradients") {
    const MdnConfig cfg = tiny_model();
    NetworkParams grad = mdn::net::zeros_like(mdn::net::init(cfg, 4));
    grad.layers[0].weights[0] = 3.0;
    grad.layers[1].weights[0] = 4.0;
    CHECK(global_grad_norm(grad) == doctest::Approx(5.0).epsilon(1e-15));

    NetworkParams clipped = grad;
    clip_global_norm(clipped, 10.0);
    CHECK(clipped.layers[0].weights[0] == 3.0);

    clip_global_norm(clipped, 1.0);
    CHECK(global_grad_norm(clipped) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(clipped.layers[0].weights[0] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("zero learning rate trains to the initial parameters") {
    const MdnConfig cfg = tiny_model();
    const ConditionedBatch data = constant_condition_gaussian(64, 0.5, 1.0, 1);
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 16;
    tc.adam.learning_rate = 0.0;
    tc.seed = 9;
    const TrainReport report = train(tc, cfg, data, {});
    CHECK(report.train_loss.size() == 1);
    CHECK(report.val_nll.empty());
    CHECK(params_equal(report.final_params, mdn::net::init(cfg, 9)));
}

TEST_CASE("training is bit-deterministic given the seed") {
    const MdnConfig cfg = tiny_model(2, 1);
    const ConditionedBatch data = constant_condition_gaussian(200, -1.0, 0.5, 2);
    const ConditionedBatch val = constant_condition_gaussian(50, -1.0, 0.5, 3);
    TrainConfig tc;
    tc.epochs = 5;
    tc.batch_size = 32;
    tc.seed = 123;
    const TrainReport a = train(tc, cfg, data, val);
    const TrainReport b = train(tc, cfg, data, val);
    CHECK(a.train_loss == b.train_loss);
    CHECK(a.val_nll == b.val_nll);
    CHECK(params_equal(a.final_params, b.final_params));
    CHECK(report_to_json(a) == report_to_json(b));
    CHECK(a.val_nll.size() == 5);
}

TEST_CASE("the warmup switch lands exactly at ceil(fraction * epochs)") {
    // lr = 0 freezes the parameters, so each epoch's mean loss is the same
    // dataset mean under whichever objective is active that epoch.
    const MdnConfig cfg = tiny_model(2, 1);
    const ConditionedBatch data = constant_condition_gaussian(128, 1.5, 0.7, 4);
    TrainConfig tc;
    tc.epochs = 4;
    tc.batch_size = 32;
    tc.adam.learning_rate = 0.0;
    tc.warmup_fraction = 0.5;
    tc.warmup_loss = mdn::loss::LossKind::WeightedJensen;
    tc.seed = 31;
    const TrainReport report = train(tc, cfg, data, data);

    const NetworkParams params = mdn::net::init(cfg, 31);
    double warmup_sum = 0.0;
    double exact_sum = 0.0;
    for (int b = 0; b < data.size(); ++b) {
        const mdn::gmm::MixtureParams p =
            mdn::net::forward_full(data.sample_y(b), params, cfg);
        warmup_sum += mdn::loss::weighted_jensen_full(data.sample_x(b), p);
        exact_sum += mdn::loss::exact_nll_full(data.sample_x(b), p);
    }
    const double warmup_mean = warmup_sum / data.size();
    const double exact_mean = exact_sum / data.size();
    CHECK(std::fabs(warmup_mean - exact_mean) > 1e-3);  // phases distinguishable

    CHECK(report.train_loss[0] == doctest::Approx(warmup_mean).epsilon(1e-12));
    CHECK(report.train_loss[1] == doctest::Approx(warmup_mean).epsilon(1e-12));
    CHECK(report.train_loss[2] == doctest::Approx(exact_mean).epsilon(1e-12));
    CHECK(report.train_loss[3] == doctest::Approx(exact_mean).epsilon(1e-12));

    // The validation series stays exact NLL through the warmup phase.
    for (double v : report.val_nll) {
        CHECK(v == doctest::Approx(exact_mean).epsilon(1e-12));
    }
}

TEST_CASE("a one-component model learns the moments of a fixed Gaussian") {
    const MdnConfig cfg = tiny_model(1, 1);
    const ConditionedBatch data = constant_condition_gaussian(2000, 3.0, 2.0, 5);
    TrainConfig tc;
    tc.epochs = 200;
    tc.batch_size = 128;
    tc.adam.learning_rate = 0.01;
    tc.seed = 17;
    const TrainReport report = train(tc, cfg, data, {});

    const mdn::gmm::MixtureParams p =
        mdn::net::forward_full(std::vector<double>{0.0}, report.final_params, cfg);
    const double learned_mean = p.mean(0)[0];
    const double learned_var =
        mdn::linalg::covariance_from_factor(mdn::linalg::exp_diag(p.factors_raw[0])).at(0, 0);
    CHECK(std::fabs(learned_mean - 3.0) < 0.1);
    CHECK(learned_var == doctest::Approx(4.0).epsilon(0.2));

    // The loss history should have improved substantially from the unit
    // covariance start.
    CHECK(report.train_loss.back() < report.train_loss.front() - 0.5);
}

TEST_CASE("non-finite training loss aborts with epoch and batch recorded") {
    const MdnConfig cfg = tiny_model();
    ConditionedBatch data;
    data.data_dim = 1;
    data.cond_dim = 1;
    for (int i = 0; i < 8; ++i) {
        data.y.push_back(0.0);
        data.x.push_back(1e160);  // quadratic term overflows to infinity
    }
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 8;
    try {
        (void)train(tc, cfg, data, {});
        FAIL("expected DivergenceError");
    } catch (const mdn::DivergenceError& e) {
        CHECK(e.epoch == 0);
        CHECK(e.batch == 0);
    }
}

TEST_CASE("training validates dataset dimensions against the model") {
    const MdnConfig cfg = tiny_model(1, 2);
    const ConditionedBatch data = constant_condition_gaussian(16, 0.0, 1.0, 6);  // N=1
    TrainConfig tc;
    CHECK_THROWS_AS(train(tc, cfg, data, {}), mdn::ShapeError);
}

TEST_CASE("report JSON carries the documented schema") {
    const MdnConfig cfg = tiny_model(2, 1, mdn::net::CovarianceMode::Diagonal);
    const ConditionedBatch data = constant_condition_gaussian(64, 0.0, 1.0, 7);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 32;
    tc.seed = 99;
    const TrainReport report = train(tc, cfg, data, data);
    const nlohmann::json doc = nlohmann::json::parse(report_to_json(report));
    CHECK(doc.at("train_loss").size() == 3);
    CHECK(doc.at("val_nll").size() == 3);
    CHECK(doc.at("seed").get<std::uint64_t>() == 99);
    CHECK(doc.at("epochs").get<int>() == 3);
    CHECK(doc.at("config").at("model").at("covariance_mode").get<std::string>() == "diagonal");
    CHECK(doc.at("config").at("warmup_loss").get<std::string>() == "weighted_jensen");
}
