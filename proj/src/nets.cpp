#include "koopman/nets.hpp"

#include "koopman/errors.hpp"
#include "koopman/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace koopman::nets {

Activation activation_from_string(const std::string& name) {
    if (name == "tanh") {
        return Activation::Tanh;
    }
    if (name == "relu") {
        return Activation::Relu;
    }
    if (name == "sigmoid") {
        return Activation::Sigmoid;
    }
    if (name == "identity") {
        return Activation::Identity;
    }
    throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
    switch (a) {
    case Activation::Tanh:
        return "tanh";
    case Activation::Relu:
        return "relu";
    case Activation::Sigmoid:
        return "sigmoid";
    case Activation::Identity:
        return "identity";
    }
    return "tanh";
}

std::uint64_t Rng::next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

std::int64_t Rng::below(std::int64_t n) {
    if (n <= 0) {
        throw InvalidParams("Rng::below: n must be positive");
    }
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
        x = next();
    } while (x >= limit);
    return static_cast<std::int64_t>(x % un);
}

std::uint64_t Rng::mix(std::uint64_t a, std::uint64_t b) {
    Rng r(a ^ (0x632BE59BD9B4E019ULL + (b << 1)));
    r.next();
    return r.next() ^ b;
}

MlpSpec mirror_spec(const MlpSpec& encoder) {
    MlpSpec dec;
    dec.input_size = encoder.output_size;
    dec.hidden_layers.assign(encoder.hidden_layers.rbegin(), encoder.hidden_layers.rend());
    dec.output_size = encoder.input_size;
    dec.activation = encoder.activation;
    dec.use_bias = encoder.use_bias;
    return dec;
}

namespace {

void validate_spec(const MlpSpec& spec) {
    if (spec.input_size < 1 || spec.output_size < 1) {
        throw SpecMismatch("MlpSpec: sizes must be >= 1");
    }
    for (int64_t h : spec.hidden_layers) {
        if (h < 1) {
            throw SpecMismatch("MlpSpec: hidden layer size must be >= 1");
        }
    }
}

Tensor xavier_uniform(int64_t out, int64_t in, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Tensor w(out, in);
    for (int64_t i = 0; i < w.size(); ++i) {
        w[i] = rng.uniform(-limit, limit);
    }
    return w;
}

} // namespace

MlpParams build_mlp(const MlpSpec& spec, Rng& rng) {
    validate_spec(spec);
    std::vector<int64_t> sizes;
    sizes.push_back(spec.input_size);
    sizes.insert(sizes.end(), spec.hidden_layers.begin(), spec.hidden_layers.end());
    sizes.push_back(spec.output_size);

    MlpParams p;
    p.spec = spec;
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        DenseLayer layer;
        layer.W = xavier_uniform(sizes[l + 1], sizes[l], rng);
        if (spec.use_bias) {
            layer.b = Tensor(sizes[l + 1], 1);
        }
        p.layers.push_back(std::move(layer));
    }
    return p;
}

AutoencoderParams build_autoencoder(const MlpSpec& encoder, const MlpSpec& decoder,
                                    std::uint64_t seed) {
    if (encoder.output_size != decoder.input_size) {
        throw SpecMismatch("build_autoencoder: encoder output " +
                           std::to_string(encoder.output_size) + " != decoder input " +
                           std::to_string(decoder.input_size));
    }
    if (encoder.input_size != decoder.output_size) {
        throw SpecMismatch("build_autoencoder: encoder input " +
                           std::to_string(encoder.input_size) + " != decoder output " +
                           std::to_string(decoder.output_size));
    }
    Rng rng(seed);
    AutoencoderParams ae;
    ae.encoder = build_mlp(encoder, rng);
    ae.decoder = build_mlp(decoder, rng);
    return ae;
}

Tensor koopman_layer_init(int64_t n, Rng& rng) {
    Tensor k = xavier_uniform(n, n, rng);
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            k.at(i, j) = (i == j ? 1.0 : 0.0) + 0.01 * k.at(i, j);
        }
    }
    return k;
}

MlpVars register_params(ad::Tape& tape, const MlpParams& params, bool requires_grad) {
    MlpVars vars;
    for (const DenseLayer& layer : params.layers) {
        ad::Var w = tape.leaf(layer.W, requires_grad);
        ad::Var b;
        if (params.spec.use_bias) {
            b = tape.leaf(layer.b, requires_grad);
        }
        vars.layers.emplace_back(w, b);
    }
    return vars;
}

ad::Var forward(const MlpParams& params, const MlpVars& vars, ad::Var x) {
    if (x.value().rows() != params.spec.input_size) {
        throw ShapeMismatch("mlp forward: input has " + std::to_string(x.value().rows()) +
                            " rows, spec expects " + std::to_string(params.spec.input_size));
    }
    ad::Var h = x;
    for (size_t l = 0; l < vars.layers.size(); ++l) {
        h = ad::matmul(vars.layers[l].first, h);
        if (params.spec.use_bias) {
            h = ad::add_col_broadcast(h, vars.layers[l].second);
        }
        if (l + 1 < vars.layers.size()) {
            h = ad::elementwise_activation(h, params.spec.activation);
        }
    }
    return h;
}

Tensor forward_plain(const MlpParams& params, const Tensor& x) {
    if (x.rows() != params.spec.input_size) {
        throw ShapeMismatch("mlp forward: input has " + std::to_string(x.rows()) +
                            " rows, spec expects " + std::to_string(params.spec.input_size));
    }
    Tensor h = x;
    for (size_t l = 0; l < params.layers.size(); ++l) {
        h = matmul(params.layers[l].W, h);
        if (params.spec.use_bias) {
            const Tensor& b = params.layers[l].b;
            for (int64_t i = 0; i < h.rows(); ++i) {
                for (int64_t j = 0; j < h.cols(); ++j) {
                    h.at(i, j) += b[i];
                }
            }
        }
        if (l + 1 < params.layers.size()) {
            switch (params.spec.activation) {
            case Activation::Tanh: {
                Tensor y(h.rows(), h.cols());
                kernels::tanh_f64(h.real_data(), y.real_data(), h.size());
                h = std::move(y);
                break;
            }
            case Activation::Relu:
                for (int64_t i = 0; i < h.size(); ++i) {
                    h[i] = h[i] > 0.0 ? h[i] : 0.0;
                }
                break;
            case Activation::Sigmoid:
                for (int64_t i = 0; i < h.size(); ++i) {
                    h[i] = 1.0 / (1.0 + std::exp(-h[i]));
                }
                break;
            case Activation::Identity:
                break;
            }
        }
    }
    return h;
}

std::vector<Tensor*> collect_parameters(MlpParams& params) {
    std::vector<Tensor*> out;
    for (DenseLayer& layer : params.layers) {
        out.push_back(&layer.W);
        if (params.spec.use_bias) {
            out.push_back(&layer.b);
        }
    }
    return out;
}

std::vector<Tensor*> collect_parameters(AutoencoderParams& params) {
    std::vector<Tensor*> out = collect_parameters(params.encoder);
    std::vector<Tensor*> dec = collect_parameters(params.decoder);
    out.insert(out.end(), dec.begin(), dec.end());
    return out;
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size()) {
        throw ShapeMismatch("Adam::step: " + std::to_string(params.size()) + " params vs " +
                            std::to_string(grads.size()) + " grads");
    }
    if (m_.empty()) {
        for (Tensor* p : params) {
            m_.emplace_back(p->rows(), p->cols());
            v_.emplace_back(p->rows(), p->cols());
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = grads[k];
        if (!p.same_shape(g) || !p.same_shape(m_[k])) {
            throw ShapeMismatch("Adam::step: parameter/gradient shape mismatch");
        }
        for (int64_t i = 0; i < p.size(); ++i) {
            const double gi = g[i];
            m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * gi;
            v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * gi * gi;
            const double mhat = m_[k][i] / bc1;
            const double vhat = v_[k][i] / bc2;
            p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

} // namespace koopman::nets
