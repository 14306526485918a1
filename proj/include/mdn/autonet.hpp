#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdn/gmm.hpp"

namespace mdn::net {

enum class Activation { Tanh, Relu };
enum class CovarianceMode { Diagonal, Full };

const char* to_string(Activation a);
const char* to_string(CovarianceMode m);
Activation activation_from_string(std::string_view name);
CovarianceMode covariance_mode_from_string(std::string_view name);

/// Model shape: condition dim M in, mixture parameters for K components of
/// dim N out, through the given hidden layers.
struct MdnConfig {
    int components = 1;  // K
    int data_dim = 1;    // N
    int cond_dim = 1;    // M
    std::vector<int> hidden = {128, 128};
    Activation activation = Activation::Tanh;
    CovarianceMode covariance_mode = CovarianceMode::Full;

    /// Size of the output head: K logits + K*N means + the factor block.
    std::size_t head_dim() const;
    void validate() const;
};

/// All trainable weights. The last layer is the linear output head; every
/// earlier layer is followed by the activation. Gradients and optimizer
/// moments share this layout.
struct NetworkParams {
    struct Layer {
        int in = 0;
        int out = 0;
        std::vector<double> weights;  // out x in, row-major
        std::vector<double> biases;   // out
    };
    std::vector<Layer> layers;

    std::size_t scalar_count() const;
    void validate() const;
};

NetworkParams zeros_like(const NetworkParams& shape);

/// Records one forward evaluation: the input, every post-activation hidden
/// vector and the raw head output. A loss evaluation attaches the head
/// adjoint; backward then replays the layers once, in reverse.
struct GradientTape {
    std::vector<double> input;
    std::vector<std::vector<double>> hidden;  // post-activation per hidden layer
    std::vector<double> head;
    std::vector<double> head_adjoint;
    bool has_adjoint = false;
    bool consumed = false;

    void reset();
};

/// He-scaled hidden weights, zero biases. In the head, the factor and logit
/// rows start at zero (components begin with identity precision and uniform
/// weights) and the mean rows carry small noise.
NetworkParams init(const MdnConfig& cfg, std::uint64_t seed);

/// Runs the network, optionally recording onto a tape. Returns the raw head.
std::vector<double> forward_head(std::span<const double> y, const NetworkParams& params,
                                 const MdnConfig& cfg, GradientTape* tape = nullptr);

gmm::MixtureParams forward_full(std::span<const double> y, const NetworkParams& params,
                                const MdnConfig& cfg);
gmm::DiagParams forward_diag(std::span<const double> y, const NetworkParams& params,
                             const MdnConfig& cfg);

void attach_head_adjoint(GradientTape& tape, std::span<const double> head_adjoint);

/// Reverse pass over a recorded tape; returns d loss / d params. The tape is
/// consumed and cannot be replayed.
NetworkParams backward(GradientTape& tape, const NetworkParams& params, Activation activation,
                       double loss_adjoint = 1.0);

/// Same reverse pass, accumulating scaled gradients into an existing
/// gradient structure (used by the batch loop).
void backward_accumulate(GradientTape& tape, const NetworkParams& params, Activation activation,
                         double loss_adjoint, NetworkParams& grad_accum);

/// Trained model as stored on disk: config, creation seed and weights.
struct Checkpoint {
    MdnConfig config;
    std::uint64_t seed = 0;
    NetworkParams params;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mdn::net
