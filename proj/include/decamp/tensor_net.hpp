#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "decamp/matrix.hpp"

namespace decamp {

enum class Activation : std::uint8_t { kIdentity = 0, kRelu = 1 };

struct DenseLayer {
    Matrix weight;             // out x in
    std::vector<double> bias;  // out
    Activation activation = Activation::kIdentity;
    Matrix grad_weight;
    std::vector<double> grad_bias;

    std::size_t in_dim() const { return weight.cols(); }
    std::size_t out_dim() const { return weight.rows(); }
};

// View over one parameter tensor and its gradient buffer.
struct ParamView {
    std::span<double> value;
    std::span<const double> grad;
};

// Feed-forward stack of affine layers with elementwise activations.
// forward() is const and safe to call concurrently on a frozen net;
// forward_train()/backward() form the single-writer training path.
class DenseNet {
public:
    DenseNet() = default;
    explicit DenseNet(std::vector<DenseLayer> layers);

    // dims = {in, h1, ..., out}; ReLU on hidden layers, identity on the last.
    // Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
    static DenseNet make_mlp(std::span<const std::size_t> dims, std::uint64_t seed);

    Matrix forward(const Matrix& x) const;
    Matrix forward_train(const Matrix& x);
    // Gradients of a scalar loss: fills per-layer grad buffers (overwriting)
    // and returns the gradient w.r.t. the input batch. Requires a preceding
    // forward_train.
    Matrix backward(const Matrix& upstream);

    std::vector<ParamView> parameters();
    std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
    std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }

private:
    std::vector<DenseLayer> layers_;
    std::vector<Matrix> cached_inputs_;
    std::vector<Matrix> cached_preacts_;
    bool has_cache_ = false;
};

struct MseResult {
    double value = 0.0;
    Matrix grad;  // d value / d pred
};
// Mean over batch and dimensions of the squared difference.
MseResult mse_loss(const Matrix& pred, const Matrix& target);

// Classical momentum: v <- momentum*v - lr*grad; param <- param + v.
// A non-finite gradient entry rejects the whole step.
void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
              double learning_rate, double momentum);

struct SgdState {
    double learning_rate = 0.1;
    double momentum = 0.9;
    std::vector<std::vector<double>> velocity;  // one buffer per parameter tensor

    // Steps every tensor; allocates velocity buffers on first use. The whole
    // step is rejected if any gradient entry is non-finite.
    void step(const std::vector<ParamView>& params);
};

struct AutoencoderConfig {
    std::vector<std::size_t> hidden_dims = {500, 500, 2000};
    std::size_t latent_dim = 10;
    std::size_t epochs = 100;
    std::size_t batch_size = 256;
    double learning_rate = 0.1;
    double momentum = 0.9;
    std::uint64_t seed = 0;
};

struct AutoencoderResult {
    DenseNet encoder;
    DenseNet decoder;
    double initial_mse = 0.0;
    double final_mse = 0.0;
};

// Mini-batch SGD on reconstruction MSE. Deterministic given the seed.
AutoencoderResult pretrain_autoencoder(const Matrix& data, const AutoencoderConfig& cfg);

// Versioned little-endian checkpoint: encoder + decoder layer dims,
// activation tags, parameters, optional optimizer velocities.
void save_checkpoint(const std::string& path, const DenseNet& encoder, const DenseNet& decoder,
                     std::uint64_t config_hash, const SgdState* optimizer = nullptr);
struct Checkpoint {
    DenseNet encoder;
    DenseNet decoder;
    SgdState optimizer;
    bool has_optimizer = false;
    std::uint64_t config_hash = 0;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace decamp
