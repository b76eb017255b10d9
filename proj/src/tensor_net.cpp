#include "decamp/tensor_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "decamp/errors.hpp"

namespace decamp {

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l)
        if (layers_[l].out_dim() != layers_[l + 1].in_dim())
            throw DimensionError("DenseNet: consecutive layer dimensions do not chain");
    for (auto& layer : layers_) {
        layer.grad_weight = Matrix(layer.out_dim(), layer.in_dim());
        layer.grad_bias.assign(layer.out_dim(), 0.0);
    }
}

DenseNet DenseNet::make_mlp(std::span<const std::size_t> dims, std::uint64_t seed) {
    if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output dims");
    std::mt19937_64 rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer layer;
        layer.weight = Matrix(dims[l + 1], dims[l]);
        layer.bias.assign(dims[l + 1], 0.0);
        layer.activation = (l + 2 == dims.size()) ? Activation::kIdentity : Activation::kRelu;
        const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& w : layer.weight.storage()) w = dist(rng);
        layers.push_back(std::move(layer));
    }
    return DenseNet(std::move(layers));
}

namespace {

Matrix affine(const DenseLayer& layer, const Matrix& x) {
    if (x.cols() != layer.in_dim()) throw DimensionError("forward: input width does not match layer");
    Matrix pre = matmul_nt(x, layer.weight);
    for (std::size_t i = 0; i < pre.rows(); ++i) {
        double* row = pre.row(i);
        for (std::size_t j = 0; j < pre.cols(); ++j) row[j] += layer.bias[j];
    }
    return pre;
}

Matrix activate(const Matrix& pre, Activation act) {
    if (act == Activation::kIdentity) return pre;
    Matrix out = pre;
    for (double& v : out.storage()) v = v > 0.0 ? v : 0.0;
    return out;
}

}  // namespace

Matrix DenseNet::forward(const Matrix& x) const {
    Matrix current = x;
    for (const auto& layer : layers_) current = activate(affine(layer, current), layer.activation);
    return current;
}

Matrix DenseNet::forward_train(const Matrix& x) {
    cached_inputs_.clear();
    cached_preacts_.clear();
    Matrix current = x;
    for (const auto& layer : layers_) {
        cached_inputs_.push_back(current);
        Matrix pre = affine(layer, current);
        cached_preacts_.push_back(pre);
        current = activate(pre, layer.activation);
    }
    has_cache_ = true;
    return current;
}

Matrix DenseNet::backward(const Matrix& upstream) {
    if (!has_cache_) throw std::logic_error("backward: no cached forward state");
    Matrix grad = upstream;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        auto& layer = layers_[l];
        const Matrix& pre = cached_preacts_[l];
        check_same_shape(grad, pre, "backward");
        if (layer.activation == Activation::kRelu) {
            for (std::size_t idx = 0; idx < grad.size(); ++idx)
                if (pre.storage()[idx] <= 0.0) grad.storage()[idx] = 0.0;
        }
        layer.grad_weight = matmul_tn(grad, cached_inputs_[l]);
        layer.grad_bias.assign(layer.out_dim(), 0.0);
        for (std::size_t i = 0; i < grad.rows(); ++i) {
            const double* row = grad.row(i);
            for (std::size_t j = 0; j < grad.cols(); ++j) layer.grad_bias[j] += row[j];
        }
        grad = matmul(grad, layer.weight);
    }
    has_cache_ = false;
    return grad;
}

std::vector<ParamView> DenseNet::parameters() {
    std::vector<ParamView> views;
    views.reserve(layers_.size() * 2);
    for (auto& layer : layers_) {
        views.push_back({{layer.weight.data(), layer.weight.size()},
                         {layer.grad_weight.data(), layer.grad_weight.size()}});
        views.push_back({{layer.bias.data(), layer.bias.size()},
                         {layer.grad_bias.data(), layer.grad_bias.size()}});
    }
    return views;
}

MseResult mse_loss(const Matrix& pred, const Matrix& target) {
    check_same_shape(pred, target, "mse_loss");
    MseResult result;
    result.grad = Matrix(pred.rows(), pred.cols());
    const double scale = 1.0 / static_cast<double>(pred.size());
    for (std::size_t idx = 0; idx < pred.size(); ++idx) {
        const double diff = pred.storage()[idx] - target.storage()[idx];
        result.value += diff * diff * scale;
        result.grad.storage()[idx] = 2.0 * diff * scale;
    }
    return result;
}

void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
              double learning_rate, double momentum) {
    if (params.size() != grads.size() || params.size() != velocity.size())
        throw DimensionError("sgd_step: parameter/gradient/velocity sizes differ");
    for (double g : grads)
        if (!std::isfinite(g)) throw NumericError("sgd_step: non-finite gradient, step rejected");
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = momentum * velocity[i] - learning_rate * grads[i];
        params[i] += velocity[i];
    }
}

void SgdState::step(const std::vector<ParamView>& params) {
    if (velocity.empty()) {
        velocity.reserve(params.size());
        for (const auto& p : params) velocity.emplace_back(p.value.size(), 0.0);
    }
    if (velocity.size() != params.size())
        throw DimensionError("SgdState: parameter tensor count changed between steps");
    // Validate everything before mutating so a bad gradient rejects the whole step.
    for (std::size_t t = 0; t < params.size(); ++t) {
        if (velocity[t].size() != params[t].value.size())
            throw DimensionError("SgdState: velocity shape does not match parameters");
        for (double g : params[t].grad)
            if (!std::isfinite(g)) throw NumericError("sgd_step: non-finite gradient, step rejected");
    }
    for (std::size_t t = 0; t < params.size(); ++t)
        sgd_step(params[t].value, params[t].grad, velocity[t], learning_rate, momentum);
}

AutoencoderResult pretrain_autoencoder(const Matrix& data, const AutoencoderConfig& cfg) {
    if (data.rows() == 0) throw std::invalid_argument("pretrain_autoencoder: empty data");
    std::vector<std::size_t> enc_dims;
    enc_dims.push_back(data.cols());
    enc_dims.insert(enc_dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
    enc_dims.push_back(cfg.latent_dim);
    std::vector<std::size_t> dec_dims(enc_dims.rbegin(), enc_dims.rend());

    AutoencoderResult result;
    result.encoder = DenseNet::make_mlp(enc_dims, cfg.seed);
    result.decoder = DenseNet::make_mlp(dec_dims, cfg.seed + 1);

    auto full_mse = [&] {
        return mse_loss(result.decoder.forward(result.encoder.forward(data)), data).value;
    };
    result.initial_mse = full_mse();

    SgdState opt{cfg.learning_rate, cfg.momentum, {}};
    std::mt19937_64 rng(cfg.seed + 2);
    std::vector<std::size_t> order(data.rows());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            const Matrix x = data.gather_rows({order.data() + start, end - start});
            const Matrix z = result.encoder.forward_train(x);
            const Matrix recon = result.decoder.forward_train(z);
            const MseResult loss = mse_loss(recon, x);
            if (!std::isfinite(loss.value)) throw NumericError("pretrain_autoencoder: loss diverged");
            const Matrix dz = result.decoder.backward(loss.grad);
            result.encoder.backward(dz);
            auto params = result.encoder.parameters();
            auto dec_params = result.decoder.parameters();
            params.insert(params.end(), dec_params.begin(), dec_params.end());
            opt.step(params);
        }
    }
    result.final_mse = full_mse();
    return result;
}

// --- checkpoint I/O -----------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[4] = {'D', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
        throw FormatError("truncated checkpoint: " + path);
    return value;
}

void write_net(std::ostream& out, const DenseNet& net) {
    write_pod(out, static_cast<std::uint32_t>(net.layers().size()));
    for (const auto& layer : net.layers()) {
        write_pod(out, static_cast<std::uint64_t>(layer.in_dim()));
        write_pod(out, static_cast<std::uint64_t>(layer.out_dim()));
        write_pod(out, static_cast<std::uint8_t>(layer.activation));
        out.write(reinterpret_cast<const char*>(layer.weight.data()),
                  static_cast<std::streamsize>(layer.weight.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(layer.bias.data()),
                  static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
    }
}

DenseNet read_net(std::istream& in, const std::string& path) {
    const auto n_layers = read_pod<std::uint32_t>(in, path);
    std::vector<DenseLayer> layers;
    layers.reserve(n_layers);
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        const auto in_dim = read_pod<std::uint64_t>(in, path);
        const auto out_dim = read_pod<std::uint64_t>(in, path);
        const auto act = read_pod<std::uint8_t>(in, path);
        if (act > static_cast<std::uint8_t>(Activation::kRelu))
            throw FormatError("unknown activation tag in " + path);
        DenseLayer layer;
        layer.weight = Matrix(out_dim, in_dim);
        layer.bias.assign(out_dim, 0.0);
        layer.activation = static_cast<Activation>(act);
        if (!in.read(reinterpret_cast<char*>(layer.weight.data()),
                     static_cast<std::streamsize>(layer.weight.size() * sizeof(double))))
            throw FormatError("truncated checkpoint: " + path);
        if (!in.read(reinterpret_cast<char*>(layer.bias.data()),
                     static_cast<std::streamsize>(layer.bias.size() * sizeof(double))))
            throw FormatError("truncated checkpoint: " + path);
        layers.push_back(std::move(layer));
    }
    return DenseNet(std::move(layers));
}

}  // namespace

void save_checkpoint(const std::string& path, const DenseNet& encoder, const DenseNet& decoder,
                     std::uint64_t config_hash, const SgdState* optimizer) {
    std::ofstream out(path, std::ios_base::binary);
    if (!out) throw FileMissingError("cannot write file: " + path);
    out.write(kCheckpointMagic, 4);
    write_pod(out, kCheckpointVersion);
    write_pod(out, config_hash);
    write_net(out, encoder);
    write_net(out, decoder);
    write_pod(out, static_cast<std::uint8_t>(optimizer != nullptr));
    if (optimizer) {
        write_pod(out, optimizer->learning_rate);
        write_pod(out, optimizer->momentum);
        write_pod(out, static_cast<std::uint32_t>(optimizer->velocity.size()));
        for (const auto& buf : optimizer->velocity) {
            write_pod(out, static_cast<std::uint64_t>(buf.size()));
            out.write(reinterpret_cast<const char*>(buf.data()),
                      static_cast<std::streamsize>(buf.size() * sizeof(double)));
        }
    }
    if (!out) throw FormatError("short write: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios_base::binary);
    if (!in) throw FileMissingError("cannot open file: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw FormatError("not a checkpoint file: " + path);
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version in " + path);
    Checkpoint ckpt;
    ckpt.config_hash = read_pod<std::uint64_t>(in, path);
    ckpt.encoder = read_net(in, path);
    ckpt.decoder = read_net(in, path);
    ckpt.has_optimizer = read_pod<std::uint8_t>(in, path) != 0;
    if (ckpt.has_optimizer) {
        ckpt.optimizer.learning_rate = read_pod<double>(in, path);
        ckpt.optimizer.momentum = read_pod<double>(in, path);
        const auto n = read_pod<std::uint32_t>(in, path);
        ckpt.optimizer.velocity.resize(n);
        for (auto& buf : ckpt.optimizer.velocity) {
            buf.resize(read_pod<std::uint64_t>(in, path));
            if (!in.read(reinterpret_cast<char*>(buf.data()),
                         static_cast<std::streamsize>(buf.size() * sizeof(double))))
                throw FormatError("truncated checkpoint: " + path);
        }
    }
    return ckpt;
}

}  // namespace decamp
