#include "mdn/autonet.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace mdn::net {

namespace {

void affine(std::span<double> out, const NetworkParams::Layer& layer,
            std::span<const double> in) {
    for (int r = 0; r < layer.out; ++r) {
        double acc = layer.biases[r];
        const double* row = layer.weights.data() + static_cast<std::size_t>(r) * layer.in;
        for (int c = 0; c < layer.in; ++c) {
            acc += row[c] * in[c];
        }
        out[r] = acc;
    }
}

void check_layer_finite(std::span<const double> values, std::size_t layer_index) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError("layer " + std::to_string(layer_index) +
                               " produced a non-finite value");
        }
    }
}

void check_network_shape(const NetworkParams& params, const MdnConfig& cfg) {
    const std::size_t expected_layers = cfg.hidden.size() + 1;
    if (params.layers.size() != expected_layers) {
        throw ShapeError("network has " + std::to_string(params.layers.size()) +
                         " layers, config expects " + std::to_string(expected_layers));
    }
    int in = cfg.cond_dim;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        const int out = l < cfg.hidden.size() ? cfg.hidden[l]
                                              : static_cast<int>(cfg.head_dim());
        if (layer.in != in || layer.out != out) {
            throw ShapeError("layer " + std::to_string(l) + " has shape " +
                             std::to_string(layer.out) + "x" + std::to_string(layer.in) +
                             ", config expects " + std::to_string(out) + "x" +
                             std::to_string(in));
        }
        if (layer.weights.size() != static_cast<std::size_t>(out) * in ||
            layer.biases.size() != static_cast<std::size_t>(out)) {
            throw ShapeError("layer " + std::to_string(l) + " storage does not match its shape");
        }
        in = out;
    }
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

const char* to_string(Activation a) {
    return a == Activation::Tanh ? "tanh" : "relu";
}

const char* to_string(CovarianceMode m) {
    return m == CovarianceMode::Full ? "full" : "diagonal";
}

Activation activation_from_string(std::string_view name) {
    if (name == "tanh") {
        return Activation::Tanh;
    }
    if (name == "relu") {
        return Activation::Relu;
    }
    throw InvalidInputError("unknown activation: " + std::string(name));
}

CovarianceMode covariance_mode_from_string(std::string_view name) {
    if (name == "full") {
        return CovarianceMode::Full;
    }
    if (name == "diagonal") {
        return CovarianceMode::Diagonal;
    }
    throw InvalidInputError("unknown covariance mode: " + std::string(name));
}

std::size_t MdnConfig::head_dim() const {
    return covariance_mode == CovarianceMode::Full
               ? gmm::full_head_size(components, data_dim)
               : gmm::diag_head_size(components, data_dim);
}

void MdnConfig::validate() const {
    if (components < 1 || data_dim < 1 || cond_dim < 1) {
        throw InvalidInputError("MDN config needs K, N, M >= 1");
    }
    if (hidden.empty()) {
        throw InvalidInputError("MDN config needs at least one hidden layer");
    }
    for (int h : hidden) {
        if (h < 1) {
            throw InvalidInputError("hidden layer widths must be positive");
        }
    }
}

std::size_t NetworkParams::scalar_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) {
        n += layer.weights.size() + layer.biases.size();
    }
    return n;
}

void NetworkParams::validate() const {
    if (layers.empty()) {
        throw InvalidInputError("network has no layers");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.in < 1 || layer.out < 1 ||
            layer.weights.size() != static_cast<std::size_t>(layer.in) * layer.out ||
            layer.biases.size() != static_cast<std::size_t>(layer.out)) {
            throw ShapeError("layer " + std::to_string(l) + " has inconsistent storage");
        }
        if (l > 0 && layers[l - 1].out != layer.in) {
            throw ShapeError("layer " + std::to_string(l) + " input does not chain");
        }
        for (double w : layer.weights) {
            if (!std::isfinite(w)) {
                throw InvalidInputError("non-finite weight in layer " + std::to_string(l));
            }
        }
        for (double b : layer.biases) {
            if (!std::isfinite(b)) {
                throw InvalidInputError("non-finite bias in layer " + std::to_string(l));
            }
        }
    }
}

NetworkParams zeros_like(const NetworkParams& shape) {
    NetworkParams z;
    z.layers.resize(shape.layers.size());
    for (std::size_t l = 0; l < shape.layers.size(); ++l) {
        z.layers[l].in = shape.layers[l].in;
        z.layers[l].out = shape.layers[l].out;
        z.layers[l].weights.assign(shape.layers[l].weights.size(), 0.0);
        z.layers[l].biases.assign(shape.layers[l].biases.size(), 0.0);
    }
    return z;
}

void GradientTape::reset() {
    input.clear();
    head.clear();
    head_adjoint.clear();
    has_adjoint = false;
    consumed = false;
}

NetworkParams init(const MdnConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    RngStream rng(seed, stream::kInit);
    NetworkParams params;
    params.layers.resize(cfg.hidden.size() + 1);

    int in = cfg.cond_dim;
    for (std::size_t l = 0; l < cfg.hidden.size(); ++l) {
        auto& layer = params.layers[l];
        layer.in = in;
        layer.out = cfg.hidden[l];
        layer.weights.resize(static_cast<std::size_t>(layer.out) * layer.in);
        layer.biases.assign(layer.out, 0.0);
        const double scale = std::sqrt(2.0 / layer.in);
        for (double& w : layer.weights) {
            w = scale * rng.normal();
        }
        in = layer.out;
    }

    // Output head: logit and factor rows start at zero so the initial model
    // is a uniform mixture with identity precision; mean rows carry small
    // noise so components are not exactly coincident.
    auto& head = params.layers.back();
    head.in = in;
    head.out = static_cast<int>(cfg.head_dim());
    head.weights.assign(static_cast<std::size_t>(head.out) * head.in, 0.0);
    head.biases.assign(head.out, 0.0);
    const int mean_rows_begin = cfg.components;
    const int mean_rows_end = cfg.components + cfg.components * cfg.data_dim;
    for (int r = mean_rows_begin; r < mean_rows_end; ++r) {
        double* row = head.weights.data() + static_cast<std::size_t>(r) * head.in;
        for (int c = 0; c < head.in; ++c) {
            row[c] = 0.1 * rng.normal();
        }
    }
    return params;
}

std::vector<double> forward_head(std::span<const double> y, const NetworkParams& params,
                                 const MdnConfig& cfg, GradientTape* tape) {
    if (static_cast<int>(y.size()) != cfg.cond_dim) {
        throw ShapeError("condition vector length does not match config");
    }
    check_network_shape(params, cfg);

    const std::size_t n_hidden = cfg.hidden.size();
    std::vector<std::vector<double>> local;
    auto& store = tape != nullptr ? tape->hidden : local;
    store.resize(n_hidden);
    if (tape != nullptr) {
        tape->input.assign(y.begin(), y.end());
        tape->head_adjoint.clear();
        tape->has_adjoint = false;
        tape->consumed = false;
    }

    std::span<const double> a = y;
    for (std::size_t l = 0; l < n_hidden; ++l) {
        const auto& layer = params.layers[l];
        auto& out = store[l];
        out.resize(layer.out);
        affine(out, layer, a);
        if (cfg.activation == Activation::Tanh) {
            for (double& v : out) {
                v = std::tanh(v);
            }
        } else {
            for (double& v : out) {
                v = v > 0.0 ? v : 0.0;
            }
        }
        check_layer_finite(out, l);
        a = out;
    }

    const auto& head_layer = params.layers.back();
    std::vector<double> head(head_layer.out);
    affine(head, head_layer, a);
    check_layer_finite(head, params.layers.size() - 1);
    if (tape != nullptr) {
        tape->head = head;
    }
    return head;
}

gmm::MixtureParams forward_full(std::span<const double> y, const NetworkParams& params,
                                const MdnConfig& cfg) {
    if (cfg.covariance_mode != CovarianceMode::Full) {
        throw InvalidInputError("forward_full called on a diagonal-mode config");
    }
    const std::vector<double> head = forward_head(y, params, cfg);
    return gmm::mixture_from_head(head, cfg.components, cfg.data_dim);
}

gmm::DiagParams forward_diag(std::span<const double> y, const NetworkParams& params,
                             const MdnConfig& cfg) {
    if (cfg.covariance_mode != CovarianceMode::Diagonal) {
        throw InvalidInputError("forward_diag called on a full-mode config");
    }
    const std::vector<double> head = forward_head(y, params, cfg);
    return gmm::diag_from_head(head, cfg.components, cfg.data_dim);
}

void attach_head_adjoint(GradientTape& tape, std::span<const double> head_adjoint) {
    if (head_adjoint.size() != tape.head.size()) {
        throw ShapeError("head adjoint length does not match recorded head");
    }
    tape.head_adjoint.assign(head_adjoint.begin(), head_adjoint.end());
    tape.has_adjoint = true;
}

void backward_accumulate(GradientTape& tape, const NetworkParams& params, Activation activation,
                         double loss_adjoint, NetworkParams& grad_accum) {
    if (tape.consumed) {
        throw UsageError("gradient tape already consumed");
    }
    if (!tape.has_adjoint) {
        throw UsageError("no loss adjoint attached to the tape");
    }
    if (grad_accum.layers.size() != params.layers.size()) {
        throw ShapeError("gradient accumulator does not match network layout");
    }
    if (params.layers.empty() || tape.hidden.size() + 1 != params.layers.size()) {
        throw ShapeError("tape does not match network depth");
    }
    tape.consumed = true;

    std::vector<double> delta(tape.head_adjoint.size());
    for (std::size_t i = 0; i < delta.size(); ++i) {
        delta[i] = tape.head_adjoint[i] * loss_adjoint;
    }

    for (std::size_t l = params.layers.size(); l-- > 0;) {
        const auto& layer = params.layers[l];
        auto& grad = grad_accum.layers[l];
        const std::span<const double> a_prev =
            l == 0 ? std::span<const double>(tape.input) : std::span<const double>(tape.hidden[l - 1]);
        if (static_cast<int>(a_prev.size()) != layer.in ||
            static_cast<int>(delta.size()) != layer.out) {
            throw ShapeError("tape activations do not match layer " + std::to_string(l));
        }
        for (int r = 0; r < layer.out; ++r) {
            grad.biases[r] += delta[r];
            double* grow = grad.weights.data() + static_cast<std::size_t>(r) * layer.in;
            for (int c = 0; c < layer.in; ++c) {
                grow[c] += delta[r] * a_prev[c];
            }
        }
        if (l == 0) {
            break;
        }
        std::vector<double> prev_delta(layer.in, 0.0);
        for (int r = 0; r < layer.out; ++r) {
            const double* row = layer.weights.data() + static_cast<std::size_t>(r) * layer.in;
            const double d = delta[r];
            for (int c = 0; c < layer.in; ++c) {
                prev_delta[c] += row[c] * d;
            }
        }
        // a_prev holds post-activation values, which determine the local
        // derivative for both supported activations.
        if (activation == Activation::Tanh) {
            for (int c = 0; c < layer.in; ++c) {
                prev_delta[c] *= 1.0 - a_prev[c] * a_prev[c];
            }
        } else {
            for (int c = 0; c < layer.in; ++c) {
                prev_delta[c] *= a_prev[c] > 0.0 ? 1.0 : 0.0;
            }
        }
        delta = std::move(prev_delta);
    }
}

NetworkParams backward(GradientTape& tape, const NetworkParams& params, Activation activation,
                       double loss_adjoint) {
    NetworkParams grad = zeros_like(params);
    backward_accumulate(tape, params, activation, loss_adjoint, grad);
    return grad;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    ckpt.config.validate();
    ckpt.params.validate();
    std::ofstream out(path);
    if (!out) {
        throw ParseError("cannot open checkpoint file for writing: " + path);
    }
    out << "# mdn-checkpoint v1\n";
    out << "k=" << ckpt.config.components << " n=" << ckpt.config.data_dim
        << " m=" << ckpt.config.cond_dim << " hidden=";
    for (std::size_t i = 0; i < ckpt.config.hidden.size(); ++i) {
        out << (i ? "," : "") << ckpt.config.hidden[i];
    }
    out << " activation=" << to_string(ckpt.config.activation)
        << " mode=" << to_string(ckpt.config.covariance_mode) << " seed=" << ckpt.seed << "\n";
    for (std::size_t l = 0; l < ckpt.params.layers.size(); ++l) {
        const auto& layer = ckpt.params.layers[l];
        out << "layer " << l << " " << layer.in << " " << layer.out << "\n";
        for (int r = 0; r < layer.out; ++r) {
            for (int c = 0; c < layer.in; ++c) {
                out << (c ? " " : "")
                    << format_double(layer.weights[static_cast<std::size_t>(r) * layer.in + c]);
            }
            out << "\n";
        }
        for (int r = 0; r < layer.out; ++r) {
            out << (r ? " " : "") << format_double(layer.biases[r]);
        }
        out << "\n";
    }
    if (!out) {
        throw ParseError("failed while writing checkpoint: " + path);
    }
}

namespace {

double parse_double_token(const std::string& token, int line_no) {
    double v = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) {
        throw ParseError("line " + std::to_string(line_no) + ": expected a number, got '" +
                         token + "'");
    }
    return v;
}

std::vector<double> parse_double_line(const std::string& line, std::size_t expected,
                                      int line_no) {
    std::istringstream ss(line);
    std::vector<double> values;
    std::string token;
    while (ss >> token) {
        values.push_back(parse_double_token(token, line_no));
    }
    if (values.size() != expected) {
        throw ParseError("line " + std::to_string(line_no) + ": expected " +
                         std::to_string(expected) + " values, got " +
                         std::to_string(values.size()));
    }
    return values;
}

}  // namespace

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open checkpoint file: " + path);
    }
    std::string line;
    int line_no = 0;
    auto next_line = [&]() {
        if (!std::getline(in, line)) {
            throw ParseError("checkpoint truncated after line " + std::to_string(line_no));
        }
        ++line_no;
    };

    next_line();
    if (line != "# mdn-checkpoint v1") {
        throw ParseError("line 1: not an mdn checkpoint");
    }

    next_line();
    Checkpoint ckpt;
    std::string hidden_spec;
    std::string activation_name;
    std::string mode_name;
    {
        std::istringstream ss(line);
        std::string token;
        int fields = 0;
        while (ss >> token) {
            const auto eq = token.find('=');
            if (eq == std::string::npos) {
                throw ParseError("line 2: malformed field '" + token + "'");
            }
            const std::string key = token.substr(0, eq);
            const std::string value = token.substr(eq + 1);
            try {
                if (key == "k") {
                    ckpt.config.components = std::stoi(value);
                } else if (key == "n") {
                    ckpt.config.data_dim = std::stoi(value);
                } else if (key == "m") {
                    ckpt.config.cond_dim = std::stoi(value);
                } else if (key == "hidden") {
                    hidden_spec = value;
                } else if (key == "activation") {
                    activation_name = value;
                } else if (key == "mode") {
                    mode_name = value;
                } else if (key == "seed") {
                    ckpt.seed = std::stoull(value);
                } else {
                    throw ParseError("line 2: unknown field '" + key + "'");
                }
            } catch (const std::invalid_argument&) {
                throw ParseError("line 2: bad value for '" + key + "'");
            } catch (const std::out_of_range&) {
                throw ParseError("line 2: value out of range for '" + key + "'");
            }
            ++fields;
        }
        if (fields != 7) {
            throw ParseError("line 2: expected 7 header fields, got " + std::to_string(fields));
        }
    }
    ckpt.config.hidden.clear();
    {
        std::istringstream ss(hidden_spec);
        std::string part;
        while (std::getline(ss, part, ',')) {
            try {
                ckpt.config.hidden.push_back(std::stoi(part));
            } catch (const std::exception&) {
                throw ParseError("line 2: bad hidden layer width '" + part + "'");
            }
        }
    }
    ckpt.config.activation = activation_from_string(activation_name);
    ckpt.config.covariance_mode = covariance_mode_from_string(mode_name);
    ckpt.config.validate();

    const std::size_t n_layers = ckpt.config.hidden.size() + 1;
    ckpt.params.layers.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        next_line();
        std::istringstream ss(line);
        std::string tag;
        std::size_t idx = 0;
        int in = 0;
        int out = 0;
        if (!(ss >> tag >> idx >> in >> out) || tag != "layer" || idx != l) {
            throw ParseError("line " + std::to_string(line_no) + ": expected 'layer " +
                             std::to_string(l) + " <in> <out>'");
        }
        auto& layer = ckpt.params.layers[l];
        layer.in = in;
        layer.out = out;
        layer.weights.resize(static_cast<std::size_t>(in) * out);
        for (int r = 0; r < out; ++r) {
            next_line();
            const std::vector<double> row = parse_double_line(line, in, line_no);
            std::copy(row.begin(), row.end(),
                      layer.weights.begin() + static_cast<std::size_t>(r) * in);
        }
        next_line();
        layer.biases = parse_double_line(line, out, line_no);
    }
    ckpt.params.validate();
    check_network_shape(ckpt.params, ckpt.config);
    return ckpt;
}

}  // namespace mdn::net
