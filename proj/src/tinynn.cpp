#include "ners/tinynn.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ners {

namespace {

double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// Derivative of the activation given pre-activation z and activated value a.
double act_grad(Activation act, double z, double a) {
    switch (act) {
        case Activation::Identity: return 1.0;
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: return 1.0 - a * a;
        case Activation::Sigmoid: return a * (1.0 - a);
        case Activation::Softplus: return sigmoid(z);
    }
    return 1.0;
}

void apply_act_matrix(Activation act, const Matrix& z, Matrix& out) {
    out = Matrix(z.rows, z.cols);
    const std::int64_t n = static_cast<std::int64_t>(z.size());
#pragma omp parallel for schedule(static) if (kernels::parallel_enabled() && n > 4096)
    for (std::int64_t i = 0; i < n; ++i) out.data[i] = apply_activation(act, z.data[i]);
}

void check_finite(const Gradients& g) {
    for (const auto& m : g.w)
        for (double v : m.data)
            if (!std::isfinite(v)) throw std::runtime_error("adam_step: non-finite weight gradient");
    for (const auto& b : g.b)
        for (double v : b)
            if (!std::isfinite(v)) throw std::runtime_error("adam_step: non-finite bias gradient");
}

}  // namespace

double apply_activation(Activation act, double x) {
    switch (act) {
        case Activation::Identity: return x;
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Tanh: return std::tanh(x);
        case Activation::Sigmoid: return sigmoid(x);
        case Activation::Softplus: return x > 30.0 ? x : std::log1p(std::exp(x));
    }
    return x;
}

Mlp Mlp::create(const std::vector<int>& dims, const std::vector<Activation>& acts, Rng& rng) {
    if (dims.size() < 2) throw std::invalid_argument("Mlp::create: need at least one layer");
    if (acts.size() != dims.size() - 1)
        throw std::invalid_argument("Mlp::create: one activation per layer required");
    Mlp net;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        if (fan_in <= 0 || fan_out <= 0) throw std::invalid_argument("Mlp::create: layer dims must be positive");
        Layer layer;
        layer.act = acts[l];
        layer.w = Matrix(fan_in, fan_out);
        layer.b.assign(fan_out, 0.0);
        const double limit = acts[l] == Activation::Relu
                                 ? std::sqrt(6.0 / fan_in)
                                 : std::sqrt(6.0 / (fan_in + fan_out));
        for (double& v : layer.w.data) v = rng.uniform(-limit, limit);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Matrix forward(const Mlp& net, const Matrix& input) {
    ForwardCache cache;
    return forward(net, input, cache);
}

Matrix forward(const Mlp& net, const Matrix& input, ForwardCache& cache) {
    if (input.cols != net.input_dim())
        throw std::invalid_argument("forward: input width does not match net input dim");
    cache.owner = &net;
    cache.version = net.version;
    cache.input = input;
    cache.pre.clear();
    cache.post.clear();
    const Matrix* current = &input;
    for (const Layer& layer : net.layers) {
        Matrix z;
        kernels::matmul(*current, layer.w, z);
        kernels::add_bias(z, layer.b);
        Matrix a;
        apply_act_matrix(layer.act, z, a);
        cache.pre.push_back(std::move(z));
        cache.post.push_back(std::move(a));
        current = &cache.post.back();
    }
    return cache.post.back();
}

Gradients backward(const Mlp& net, const ForwardCache& cache, const Matrix& grad_out,
                   Matrix* input_grad) {
    if (cache.owner != &net || cache.version != net.version)
        throw std::logic_error("backward: cache is stale for this net");
    if (grad_out.rows != cache.input.rows || grad_out.cols != net.output_dim())
        throw std::invalid_argument("backward: grad_out shape mismatch");

    Gradients grads = zero_gradients_like(net);
    Matrix grad_post = grad_out;
    for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
        const Layer& layer = net.layers[l];
        const Matrix& z = cache.pre[l];
        const Matrix& a = cache.post[l];
        Matrix dz(z.rows, z.cols);
        for (std::size_t i = 0; i < z.size(); ++i)
            dz.data[i] = grad_post.data[i] * act_grad(layer.act, z.data[i], a.data[i]);
        const Matrix& prev = (l == 0) ? cache.input : cache.post[l - 1];
        kernels::matmul_tn(prev, dz, grads.w[l]);
        kernels::col_sums(dz, grads.b[l]);
        if (l > 0 || input_grad != nullptr) {
            Matrix gprev;
            kernels::matmul_nt(dz, layer.w, gprev);
            if (l == 0) {
                *input_grad = std::move(gprev);
            } else {
                grad_post = std::move(gprev);
            }
        }
    }
    return grads;
}

Gradients zero_gradients_like(const Mlp& net) {
    Gradients g;
    for (const Layer& layer : net.layers) {
        g.w.emplace_back(layer.w.rows, layer.w.cols);
        g.b.emplace_back(layer.b.size(), 0.0);
    }
    return g;
}

void accumulate(Gradients& into, const Gradients& from) {
    for (std::size_t l = 0; l < into.w.size(); ++l) {
        for (std::size_t i = 0; i < into.w[l].size(); ++i) into.w[l].data[i] += from.w[l].data[i];
        for (std::size_t i = 0; i < into.b[l].size(); ++i) into.b[l][i] += from.b[l][i];
    }
}

void scale(Gradients& g, double factor) {
    for (auto& m : g.w)
        for (double& v : m.data) v *= factor;
    for (auto& b : g.b)
        for (double& v : b) v *= factor;
}

double global_grad_norm(const Gradients& g) {
    double sq = 0.0;
    for (const auto& m : g.w)
        for (double v : m.data) sq += v * v;
    for (const auto& b : g.b)
        for (double v : b) sq += v * v;
    return std::sqrt(sq);
}

void clip_global_norm(Gradients& g, double max_norm) {
    const double norm = global_grad_norm(g);
    if (norm > max_norm && norm > 0.0) scale(g, max_norm / norm);
}

AdamState AdamState::create(const Mlp& net, double lr) {
    AdamState s;
    s.lr = lr;
    for (const Layer& layer : net.layers) {
        s.mw.emplace_back(layer.w.rows, layer.w.cols);
        s.vw.emplace_back(layer.w.rows, layer.w.cols);
        s.mb.emplace_back(layer.b.size(), 0.0);
        s.vb.emplace_back(layer.b.size(), 0.0);
    }
    return s;
}

void adam_step(Mlp& net, const Gradients& grads, AdamState& state) {
    if (grads.w.size() != net.layers.size())
        throw std::invalid_argument("adam_step: gradient shape mismatch");
    check_finite(grads);
    state.step += 1;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Layer& layer = net.layers[l];
        for (std::size_t i = 0; i < layer.w.size(); ++i) {
            const double g = grads.w[l].data[i];
            double& m = state.mw[l].data[i];
            double& v = state.vw[l].data[i];
            m = state.beta1 * m + (1.0 - state.beta1) * g;
            v = state.beta2 * v + (1.0 - state.beta2) * g * g;
            layer.w.data[i] -= state.lr * (m / c1) / (std::sqrt(v / c2) + state.epsilon);
        }
        for (std::size_t i = 0; i < layer.b.size(); ++i) {
            const double g = grads.b[l][i];
            double& m = state.mb[l][i];
            double& v = state.vb[l][i];
            m = state.beta1 * m + (1.0 - state.beta1) * g;
            v = state.beta2 * v + (1.0 - state.beta2) * g * g;
            layer.b[i] -= state.lr * (m / c1) / (std::sqrt(v / c2) + state.epsilon);
        }
    }
    net.version += 1;
}

void save_params(const Mlp& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_params: cannot open " + path);
    const std::uint32_t magic = 0x5052534E;  // "NSRP"
    const std::uint32_t version = 1;
    const std::uint32_t n_layers = static_cast<std::uint32_t>(net.layers.size());
    out.write(reinterpret_cast<const char*>(&magic), 4);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&n_layers), 4);
    for (const Layer& layer : net.layers) {
        const std::uint32_t in = layer.w.rows, outd = layer.w.cols;
        const std::uint32_t act = static_cast<std::uint32_t>(layer.act);
        out.write(reinterpret_cast<const char*>(&in), 4);
        out.write(reinterpret_cast<const char*>(&outd), 4);
        out.write(reinterpret_cast<const char*>(&act), 4);
    }
    for (const Layer& layer : net.layers) {
        out.write(reinterpret_cast<const char*>(layer.w.data.data()),
                  static_cast<std::streamsize>(layer.w.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(layer.b.data()),
                  static_cast<std::streamsize>(layer.b.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("save_params: write failed for " + path);
}

Mlp load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_params: cannot open " + path);
    std::uint32_t magic = 0, version = 0, n_layers = 0;
    in.read(reinterpret_cast<char*>(&magic), 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&n_layers), 4);
    if (!in || magic != 0x5052534E || version != 1)
        throw std::runtime_error("load_params: bad header in " + path);
    Mlp net;
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        std::uint32_t ind = 0, outd = 0, act = 0;
        in.read(reinterpret_cast<char*>(&ind), 4);
        in.read(reinterpret_cast<char*>(&outd), 4);
        in.read(reinterpret_cast<char*>(&act), 4);
        if (!in || ind == 0 || outd == 0 || act > 4)
            throw std::runtime_error("load_params: bad layer header in " + path);
        Layer layer;
        layer.w = Matrix(static_cast<int>(ind), static_cast<int>(outd));
        layer.b.assign(outd, 0.0);
        layer.act = static_cast<Activation>(act);
        net.layers.push_back(std::move(layer));
    }
    for (Layer& layer : net.layers) {
        in.read(reinterpret_cast<char*>(layer.w.data.data()),
                static_cast<std::streamsize>(layer.w.size() * sizeof(double)));
        in.read(reinterpret_cast<char*>(layer.b.data()),
                static_cast<std::streamsize>(layer.b.size() * sizeof(double)));
    }
    if (!in) throw std::runtime_error("load_params: truncated file " + path);
    return net;
}

}  // namespace ners
