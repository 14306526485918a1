#include "mdn/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mdn/autonet.hpp"
#include "mdn/data.hpp"
#include "mdn/gmm.hpp"
#include "mdn/loss.hpp"
#include "mdn/train.hpp"

namespace mdn::cli {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<double> parse_double_list(const std::string& spec) {
    std::vector<double> values;
    std::istringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(part, &used));
            if (used != part.size()) {
                throw std::invalid_argument(part);
            }
        } catch (const std::exception&) {
            throw InvalidInputError("bad number in list: '" + part + "'");
        }
    }
    if (values.empty()) {
        throw InvalidInputError("expected a comma-separated list of numbers");
    }
    return values;
}

std::vector<int> parse_int_list(const std::string& spec) {
    std::vector<int> values;
    std::istringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stoi(part, &used));
            if (used != part.size()) {
                throw std::invalid_argument(part);
            }
        } catch (const std::exception&) {
            throw InvalidInputError("bad integer in list: '" + part + "'");
        }
    }
    if (values.empty()) {
        throw InvalidInputError("expected a comma-separated list of integers");
    }
    return values;
}

struct OutStream {
    explicit OutStream(const std::string& path) {
        if (path != "-") {
            file.open(path);
            if (!file) {
                throw ParseError("cannot open output file: " + path);
            }
        }
    }
    std::ostream& get() { return file.is_open() ? file : std::cout; }
    std::ofstream file;
};

struct GenerateArgs {
    std::string generator;
    int count = 1000;
    std::uint64_t seed = 0;
    double aspect = 0.01;
    int modes = 4;
    double radius = 3.0;
    double noise = 0.1;
    std::string out = "-";
};

void cmd_generate(const GenerateArgs& args) {
    data::ConditionedBatch batch;
    if (args.generator == "rotating_gaussian") {
        batch = data::gen_rotating_gaussian(args.count, args.seed, args.aspect);
    } else if (args.generator == "mixture_ring") {
        batch = data::gen_mixture_ring(args.count, args.seed, args.modes, args.radius,
                                       args.noise);
    } else {
        batch = data::gen_two_moons_conditional(args.count, args.seed, args.noise);
    }
    data::save_dataset(batch, args.out);
    std::cerr << "B=" << batch.size() << " N=" << batch.data_dim << " M=" << batch.cond_dim
              << " seed=" << args.seed << "\n";
}

struct TrainArgs {
    std::string data_path;
    std::string val_path;
    int components = 1;
    std::string mode = "full";
    std::string hidden = "128,128";
    std::string activation = "tanh";
    int epochs = 100;
    int batch_size = 128;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double warmup_fraction = 0.2;
    std::string warmup_loss = "weighted_jensen";
    double clip = 10.0;
    std::uint64_t seed = 0;
    std::string checkpoint_path = "mdn.ckpt";
    std::string report_path = "mdn_report.json";
    bool quiet = false;
};

void cmd_train(const TrainArgs& args) {
    const data::ConditionedBatch dataset = data::load_dataset(args.data_path);
    data::ConditionedBatch val;
    if (!args.val_path.empty()) {
        val = data::load_dataset(args.val_path);
    }

    net::MdnConfig mdn_cfg;
    mdn_cfg.components = args.components;
    mdn_cfg.data_dim = dataset.data_dim;
    mdn_cfg.cond_dim = dataset.cond_dim;
    mdn_cfg.hidden = parse_int_list(args.hidden);
    mdn_cfg.activation = net::activation_from_string(args.activation);
    mdn_cfg.covariance_mode = net::covariance_mode_from_string(args.mode);

    train::TrainConfig cfg;
    cfg.epochs = args.epochs;
    cfg.batch_size = args.batch_size;
    cfg.adam.learning_rate = args.learning_rate;
    cfg.adam.beta1 = args.beta1;
    cfg.adam.beta2 = args.beta2;
    cfg.adam.epsilon = args.epsilon;
    cfg.warmup_fraction = args.warmup_fraction;
    cfg.warmup_loss = loss::loss_kind_from_string(args.warmup_loss);
    cfg.main_loss = loss::LossKind::ExactNLL;
    cfg.clip_max_norm = args.clip;
    cfg.seed = args.seed;

    const train::TrainReport report = train::train(cfg, mdn_cfg, dataset, val);
    if (!args.quiet) {
        for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
            std::cerr << "epoch " << e << " loss=" << report.train_loss[e];
            if (e < report.val_nll.size()) {
                std::cerr << " val_nll=" << report.val_nll[e];
            }
            std::cerr << "\n";
        }
    }

    net::save_checkpoint({mdn_cfg, cfg.seed, report.final_params}, args.checkpoint_path);
    std::ofstream report_file(args.report_path);
    if (!report_file) {
        throw ParseError("cannot open report file for writing: " + args.report_path);
    }
    report_file << train::report_to_json(report);

    // Without a validation split, report the exact NLL on the training data.
    const double final_nll = report.val_nll.empty()
                                 ? train::dataset_exact_nll(report.final_params, mdn_cfg, dataset)
                                 : report.val_nll.back();
    std::cout << "val_nll=" << fmt(final_nll) << "\n";
}

struct SampleArgs {
    std::string checkpoint_path;
    std::string y_spec;
    int count = 1;
    std::uint64_t seed = 0;
    int component = -1;  // -1: sample per row
    std::string out = "-";
};

void cmd_sample(const SampleArgs& args) {
    const net::Checkpoint ckpt = net::load_checkpoint(args.checkpoint_path);
    const std::vector<double> y = parse_double_list(args.y_spec);
    if (static_cast<int>(y.size()) != ckpt.config.cond_dim) {
        throw ShapeError("condition has " + std::to_string(y.size()) + " entries, model needs " +
                         std::to_string(ckpt.config.cond_dim));
    }
    if (args.count < 0) {
        throw InvalidInputError("sample count must be >= 0");
    }
    std::optional<int> forced;
    if (args.component >= 0) {
        if (args.component >= ckpt.config.components) {
            throw ShapeError("component " + std::to_string(args.component) +
                             " out of range for K=" + std::to_string(ckpt.config.components));
        }
        forced = args.component;
    }

    const bool full = ckpt.config.covariance_mode == net::CovarianceMode::Full;
    gmm::MixtureParams mixture;
    gmm::DiagParams diag;
    const double* weights = nullptr;
    if (full) {
        mixture = net::forward_full(y, ckpt.params, ckpt.config);
        weights = mixture.weights.data();
    } else {
        diag = net::forward_diag(y, ckpt.params, ckpt.config);
        weights = diag.weights.data();
    }
    const std::span<const double> weight_span{weights,
                                              static_cast<std::size_t>(ckpt.config.components)};

    // Component choices and noise draw from separate streams, so forcing a
    // component leaves the noise sequence untouched.
    RngStream index_rng(args.seed, stream::kComponent);
    RngStream noise_rng(args.seed, stream::kNoise);

    OutStream out(args.out);
    out.get() << "# mdn-samples v1 N=" << ckpt.config.data_dim << " M=" << ckpt.config.cond_dim
              << "\n";
    for (int row = 0; row < args.count; ++row) {
        const int index = forced ? *forced : gmm::sample_component_index(weight_span, index_rng);
        const gmm::Sample s = full ? gmm::sample_full(mixture, noise_rng, index)
                                   : gmm::sample_diag(diag, noise_rng, index);
        std::ostream& o = out.get();
        for (double v : y) {
            o << fmt(v) << ',';
        }
        for (double v : s.x) {
            o << fmt(v) << ',';
        }
        o << s.component;
        for (double v : s.eta.values) {
            o << ',' << fmt(v);
        }
        o << "\n";
    }
    if (!out.get()) {
        throw ParseError("failed while writing samples");
    }
}

struct DensityArgs {
    std::string checkpoint_path;
    std::string y_spec;
    double grid_min = -12.0;
    double grid_max = 12.0;
    double grid_step = 0.02;
    std::string out = "-";
};

void cmd_density(const DensityArgs& args) {
    const net::Checkpoint ckpt = net::load_checkpoint(args.checkpoint_path);
    if (ckpt.config.data_dim != 2) {
        throw ShapeError("density export requires a 2-dimensional model (grid output), got N=" +
                         std::to_string(ckpt.config.data_dim));
    }
    if (!(args.grid_step > 0.0) || !(args.grid_max > args.grid_min)) {
        throw InvalidInputError("density grid needs step > 0 and max > min");
    }
    const std::vector<double> y = parse_double_list(args.y_spec);
    if (static_cast<int>(y.size()) != ckpt.config.cond_dim) {
        throw ShapeError("condition has " + std::to_string(y.size()) + " entries, model needs " +
                         std::to_string(ckpt.config.cond_dim));
    }
    const bool full = ckpt.config.covariance_mode == net::CovarianceMode::Full;
    gmm::MixtureParams mixture;
    gmm::DiagParams diag;
    if (full) {
        mixture = net::forward_full(y, ckpt.params, ckpt.config);
    } else {
        diag = net::forward_diag(y, ckpt.params, ckpt.config);
    }

    const int steps =
        static_cast<int>(std::floor((args.grid_max - args.grid_min) / args.grid_step)) + 1;
    OutStream out(args.out);
    out.get() << "# mdn-density v1 N=2\n";
    double mass = 0.0;
    double point[2];
    for (int i = 0; i < steps; ++i) {
        point[0] = args.grid_min + i * args.grid_step;
        for (int j = 0; j < steps; ++j) {
            point[1] = args.grid_min + j * args.grid_step;
            const double log_density = full ? gmm::mixture_log_density(point, mixture)
                                            : gmm::mixture_log_density(point, diag);
            mass += std::exp(log_density);
            out.get() << fmt(point[0]) << ',' << fmt(point[1]) << ',' << fmt(log_density)
                      << "\n";
        }
    }
    mass *= args.grid_step * args.grid_step;
    std::cerr << "mass=" << fmt(mass) << "\n";
    if (!out.get()) {
        throw ParseError("failed while writing the density grid");
    }
}

struct EvalArgs {
    std::string checkpoint_path;
    std::string data_path;
};

void cmd_eval(const EvalArgs& args) {
    const net::Checkpoint ckpt = net::load_checkpoint(args.checkpoint_path);
    const data::ConditionedBatch batch = data::load_dataset(args.data_path);
    if (batch.data_dim != ckpt.config.data_dim || batch.cond_dim != ckpt.config.cond_dim) {
        throw ShapeError("dataset dims (N=" + std::to_string(batch.data_dim) +
                         ", M=" + std::to_string(batch.cond_dim) + ") do not match the model");
    }
    const double nll = train::dataset_exact_nll(ckpt.params, ckpt.config, batch);
    std::cout << "nll=" << fmt(nll) << "\n";
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Mixture density networks with full covariance matrices"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Config file (key=value, [subcommand] sections); flags win");

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Write a synthetic dataset CSV");
    generate->add_option("--gen", gen.generator, "Generator name")
        ->required()
        ->check(CLI::IsMember({"rotating_gaussian", "mixture_ring", "two_moons_conditional"}));
    generate->add_option("--n", gen.count, "Number of samples");
    generate->add_option("--seed", gen.seed, "Random seed");
    generate->add_option("--aspect", gen.aspect, "Rotating Gaussian minor variance");
    generate->add_option("--modes", gen.modes, "Mixture ring mode count");
    generate->add_option("--radius", gen.radius, "Mixture ring radius");
    generate->add_option("--noise", gen.noise, "Noise scale (ring / moons)");
    generate->add_option("--out", gen.out, "Output path, '-' for stdout");
    generate->callback([&] { cmd_generate(gen); });

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train an MDN on a dataset CSV");
    train_cmd->add_option("--data", tr.data_path, "Training dataset CSV")->required();
    train_cmd->add_option("--val", tr.val_path, "Validation dataset CSV");
    train_cmd->add_option("--k", tr.components, "Mixture components");
    train_cmd->add_option("--mode", tr.mode, "Covariance mode")
        ->check(CLI::IsMember({"full", "diagonal"}));
    train_cmd->add_option("--hidden", tr.hidden, "Hidden layer widths, e.g. 128,128");
    train_cmd->add_option("--activation", tr.activation, "Hidden activation")
        ->check(CLI::IsMember({"tanh", "relu"}));
    train_cmd->add_option("--epochs", tr.epochs, "Training epochs");
    train_cmd->add_option("--batch", tr.batch_size, "Mini-batch size");
    train_cmd->add_option("--lr", tr.learning_rate, "Learning rate");
    train_cmd->add_option("--beta1", tr.beta1, "Adam beta1");
    train_cmd->add_option("--beta2", tr.beta2, "Adam beta2");
    train_cmd->add_option("--eps", tr.epsilon, "Adam epsilon");
    train_cmd->add_option("--warmup-fraction", tr.warmup_fraction,
                          "Fraction of epochs trained on the warmup loss");
    train_cmd->add_option("--warmup-loss", tr.warmup_loss, "Warmup objective")
        ->check(CLI::IsMember({"weighted_jensen", "unweighted_jensen", "exact_nll"}));
    train_cmd->add_option("--clip", tr.clip, "Global gradient-norm clip");
    train_cmd->add_option("--seed", tr.seed, "Random seed");
    train_cmd->add_option("--checkpoint", tr.checkpoint_path, "Checkpoint output path");
    train_cmd->add_option("--report", tr.report_path, "Report JSON output path");
    train_cmd->add_flag("--quiet", tr.quiet, "Suppress per-epoch progress on stderr");
    train_cmd->callback([&] { cmd_train(tr); });

    SampleArgs sa;
    auto* sample = app.add_subcommand("sample", "Draw samples at a fixed condition");
    sample->add_option("--checkpoint", sa.checkpoint_path, "Model checkpoint")->required();
    sample->add_option("--y", sa.y_spec, "Condition value(s), comma-separated")->required();
    sample->add_option("--count", sa.count, "Number of samples");
    sample->add_option("--seed", sa.seed, "Random seed");
    sample->add_option("--component", sa.component, "Force this component index");
    sample->add_option("--out", sa.out, "Output path, '-' for stdout");
    sample->callback([&] { cmd_sample(sa); });

    DensityArgs de;
    auto* density = app.add_subcommand("density", "Export a log-density grid (N=2 models)");
    density->add_option("--checkpoint", de.checkpoint_path, "Model checkpoint")->required();
    density->add_option("--y", de.y_spec, "Condition value(s), comma-separated")->required();
    density->add_option("--grid-min", de.grid_min, "Grid lower bound (both axes)");
    density->add_option("--grid-max", de.grid_max, "Grid upper bound (both axes)");
    density->add_option("--grid-step", de.grid_step, "Grid step");
    density->add_option("--out", de.out, "Output path, '-' for stdout");
    density->callback([&] { cmd_density(de); });

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Exact NLL of a checkpoint on a dataset");
    eval->add_option("--checkpoint", ev.checkpoint_path, "Model checkpoint")->required();
    eval->add_option("--data", ev.data_path, "Dataset CSV")->required();
    eval->callback([&] { cmd_eval(ev); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const InvalidInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitSuccess;
}

}  // namespace mdn::cli
