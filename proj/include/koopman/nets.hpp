#pragma once

#include "koopman/autodiff.hpp"
#include "koopman/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace koopman::nets {

using ad::Activation;

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

/// Deterministic splitmix64 stream; all randomness in a run derives from one
/// seed through this type, so identical seeds give identical runs everywhere.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();
    double uniform(); // [0, 1)
    double uniform(double lo, double hi);
    std::int64_t below(std::int64_t n); // [0, n), rejection sampled

    /// Derived seed for an independent stream (hypsearch runs, per-epoch shuffles).
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b);

  private:
    std::uint64_t state_;
};

struct MlpSpec {
    int64_t input_size = 0;
    std::vector<int64_t> hidden_layers;
    int64_t output_size = 0;
    Activation activation = Activation::Tanh;
    bool use_bias = true;
};

/// Decoder spec defaulting to the mirror image of the encoder.
MlpSpec mirror_spec(const MlpSpec& encoder);

struct DenseLayer {
    Tensor W; // out x in
    Tensor b; // out x 1 (zero-sized when use_bias is false)
};

struct MlpParams {
    MlpSpec spec;
    std::vector<DenseLayer> layers;
};

struct AutoencoderParams {
    MlpParams encoder;
    MlpParams decoder;
};

/// Xavier-uniform weights, zero biases, drawn in layer order from `rng`.
MlpParams build_mlp(const MlpSpec& spec, Rng& rng);

/// pre: encoder.output == decoder.input (encoded size) and
///      encoder.input == decoder.output (state dimension).
AutoencoderParams build_autoencoder(const MlpSpec& encoder, const MlpSpec& decoder,
                                    std::uint64_t seed);

/// Square bias-free linear Koopman layer: identity plus 0.01-scaled Xavier noise.
Tensor koopman_layer_init(int64_t n, Rng& rng);

// Tape-side forward -----------------------------------------------------------

struct MlpVars {
    std::vector<std::pair<ad::Var, ad::Var>> layers; // (W, b) leaves
};

MlpVars register_params(ad::Tape& tape, const MlpParams& params, bool requires_grad);
ad::Var forward(const MlpParams& params, const MlpVars& vars, ad::Var x);

/// Plain (no-tape) forward pass for prediction and evaluation.
Tensor forward_plain(const MlpParams& params, const Tensor& x);

/// Pointers to every parameter tensor (weights then bias per layer), in a
/// stable order shared by the optimizer and the gradient collection.
std::vector<Tensor*> collect_parameters(MlpParams& params);
std::vector<Tensor*> collect_parameters(AutoencoderParams& params);

/// Adam with beta1=0.9, beta2=0.999, eps=1e-8; moments allocated lazily on the
/// first step.
class Adam {
  public:
    explicit Adam(double learning_rate) : lr_(learning_rate) {}

    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);
    std::int64_t steps_taken() const { return t_; }

  private:
    double lr_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::int64_t t_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

} // namespace koopman::nets
