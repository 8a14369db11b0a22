#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ners/kernels.hpp"
#include "ners/rng.hpp"

namespace ners {

enum class Activation { Identity, Relu, Tanh, Sigmoid, Softplus };

struct Layer {
    Matrix w;               // [in x out]
    std::vector<double> b;  // [out]
    Activation act = Activation::Identity;
};

// Dense feedforward net with explicit parameters. Rows of the input are
// evaluated independently (no cross-row mixing), which is what makes the
// set-scoring built on top of this permutation-equivariant.
struct Mlp {
    std::vector<Layer> layers;
    std::uint64_t version = 0;  // bumped on every parameter change

    int input_dim() const { return layers.front().w.rows; }
    int output_dim() const { return layers.back().w.cols; }

    // dims = {in, h1, ..., out}; acts has one entry per layer.
    // He-uniform init for relu layers, Xavier-uniform otherwise; zero biases.
    static Mlp create(const std::vector<int>& dims, const std::vector<Activation>& acts, Rng& rng);
};

struct ForwardCache {
    const Mlp* owner = nullptr;
    std::uint64_t version = 0;
    Matrix input;
    std::vector<Matrix> pre;   // pre-activation per layer
    std::vector<Matrix> post;  // activated output per layer
};

Matrix forward(const Mlp& net, const Matrix& input);
Matrix forward(const Mlp& net, const Matrix& input, ForwardCache& cache);

struct Gradients {
    std::vector<Matrix> w;
    std::vector<std::vector<double>> b;
};

// Reverse-mode gradients for the forward pass recorded in `cache`.
// grad_out is dLoss/d(output). Throws std::logic_error if the cache does not
// match the net's current parameters. If input_grad is non-null it receives
// dLoss/d(input).
Gradients backward(const Mlp& net, const ForwardCache& cache, const Matrix& grad_out,
                   Matrix* input_grad = nullptr);

Gradients zero_gradients_like(const Mlp& net);
void accumulate(Gradients& into, const Gradients& from);
void scale(Gradients& g, double factor);
double global_grad_norm(const Gradients& g);
void clip_global_norm(Gradients& g, double max_norm);

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    std::vector<Matrix> mw, vw;
    std::vector<std::vector<double>> mb, vb;

    static AdamState create(const Mlp& net, double lr);
};

// One Adam update with bias correction. Rejects non-finite gradients with
// std::runtime_error so a diverging run aborts instead of poisoning weights.
void adam_step(Mlp& net, const Gradients& grads, AdamState& state);

// Flat binary blob: shapes header followed by packed f64 parameters.
void save_params(const Mlp& net, const std::string& path);
Mlp load_params(const std::string& path);

double apply_activation(Activation act, double x);

}  // namespace ners
