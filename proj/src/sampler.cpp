#include "ners/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ners {

namespace {

Matrix rows_to_matrix(const std::vector<FeatureRow>& rows, bool restricted) {
    const Vec first = rows[0].flatten(restricted);
    Matrix x(static_cast<int>(rows.size()), static_cast<int>(first.size()));
    std::copy(first.begin(), first.end(), x.row(0));
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const Vec v = rows[i].flatten(restricted);
        if (v.size() != first.size())
            throw std::invalid_argument("sampler: inconsistent feature row widths");
        std::copy(v.begin(), v.end(), x.row(static_cast<int>(i)));
    }
    return x;
}

Matrix ero_rows_to_matrix(const std::vector<FeatureRow>& rows) {
    Matrix x(static_cast<int>(rows.size()), 3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Vec v = ero_input_row(rows[i]);
        std::copy(v.begin(), v.end(), x.row(static_cast<int>(i)));
    }
    return x;
}

double clamp_unit_open(double p) { return std::clamp(p, 1e-12, 1.0 - 1e-12); }

}  // namespace

double compute_replay_reward(double curr_eval_return, std::optional<double> prev_eval_return) {
    if (!prev_eval_return.has_value()) return 0.0;
    return curr_eval_return - *prev_eval_return;
}

std::vector<double> random_score(const std::vector<FeatureRow>& rows) {
    return std::vector<double>(rows.size(), 1.0);
}

std::vector<double> per_score(const std::vector<FeatureRow>& rows, double epsilon) {
    std::vector<double> scores(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double squashed = std::clamp(rows[i].td_error_norm, -(1.0 - 1e-12), 1.0 - 1e-12);
        scores[i] = std::abs(std::atanh(squashed)) + epsilon;
    }
    return scores;
}

int sampler_input_dim(int state_dim, int action_dim, bool restricted) {
    // state + action + reward + next_state + timestep + td + target value
    return restricted ? 3 : 2 * state_dim + action_dim + 4;
}

// ---------------------------------------------------------------------------
// NERS

NersNets NersNets::create(int input_dim, const NersConfig& cfg, Rng& rng) {
    if (cfg.local_widths.empty()) throw std::invalid_argument("NersNets: local widths empty");
    if (input_dim <= 0) throw std::invalid_argument("NersNets: input_dim must be positive");
    NersNets nets;
    nets.cfg = cfg;
    nets.input_dim = input_dim;

    // Context nets: relu hidden layers, identity context output.
    std::vector<int> ctx_dims{input_dim};
    ctx_dims.insert(ctx_dims.end(), cfg.local_widths.begin(), cfg.local_widths.end());
    std::vector<Activation> ctx_acts(cfg.local_widths.size(), Activation::Relu);
    ctx_acts.back() = Activation::Identity;
    nets.local_net = Mlp::create(ctx_dims, ctx_acts, rng);
    nets.global_net = Mlp::create(ctx_dims, ctx_acts, rng);

    const int context_dim = cfg.local_widths.back();
    const int score_in = cfg.use_global ? 2 * context_dim : context_dim;
    std::vector<int> score_dims{score_in};
    score_dims.insert(score_dims.end(), cfg.score_hidden.begin(), cfg.score_hidden.end());
    score_dims.push_back(1);
    std::vector<Activation> score_acts(cfg.score_hidden.size(), Activation::Relu);
    score_acts.push_back(Activation::Softplus);
    nets.score_net = Mlp::create(score_dims, score_acts, rng);

    nets.local_adam = AdamState::create(nets.local_net, cfg.lr);
    nets.global_adam = AdamState::create(nets.global_net, cfg.lr);
    nets.score_adam = AdamState::create(nets.score_net, cfg.lr);
    return nets;
}

namespace {

// Shared forward pass: local rows, optional pooled global context, score head.
struct NersForward {
    ForwardCache local_cache, global_cache, score_cache;
    Matrix score_in;
    std::vector<double> scores;
};

NersForward ners_forward(const NersNets& nets, const std::vector<FeatureRow>& rows) {
    if (rows.empty()) throw std::invalid_argument("ners_score: empty feature list");
    const Matrix x = rows_to_matrix(rows, nets.cfg.restricted_features);
    if (x.cols != nets.input_dim)
        throw std::invalid_argument("ners_score: feature width does not match net input dim");

    NersForward f;
    const Matrix local = forward(nets.local_net, x, f.local_cache);
    const int m = x.rows;
    const int d_local = local.cols;
    if (nets.cfg.use_global) {
        const Matrix global = forward(nets.global_net, x, f.global_cache);
        const std::vector<double> pooled = kernels::permutation_invariant_col_mean(global);
        f.score_in = Matrix(m, d_local + global.cols);
        for (int i = 0; i < m; ++i) {
            std::copy(local.row(i), local.row(i) + d_local, f.score_in.row(i));
            std::copy(pooled.begin(), pooled.end(), f.score_in.row(i) + d_local);
        }
    } else {
        f.score_in = local;
    }
    const Matrix s = forward(nets.score_net, f.score_in, f.score_cache);
    f.scores.resize(m);
    for (int i = 0; i < m; ++i) f.scores[i] = s(i, 0);
    return f;
}

}  // namespace

std::vector<double> ners_score(const NersNets& nets, const std::vector<FeatureRow>& rows) {
    return ners_forward(nets, rows).scores;
}

NersGradients ners_objective_gradients(const NersNets& nets, const std::vector<FeatureRow>& rows,
                                       double replay_reward) {
    NersForward f = ners_forward(nets, rows);
    const int m = static_cast<int>(rows.size());
    const double alpha = nets.cfg.alpha;

    double sum_alpha = 0.0;
    double sum_log = 0.0;
    for (double s : f.scores) {
        sum_alpha += std::pow(s, alpha);
        sum_log += std::log(s);
    }

    NersGradients out;
    out.objective = replay_reward * (alpha * sum_log - m * std::log(sum_alpha));

    // d/d sigma_j of sum_i log p_i = (alpha / sigma_j) * (1 - m * p_j).
    Matrix grad_scores(m, 1);
    for (int j = 0; j < m; ++j) {
        const double p_j = std::pow(f.scores[j], alpha) / sum_alpha;
        grad_scores(j, 0) = replay_reward * (alpha / f.scores[j]) * (1.0 - m * p_j);
    }

    Matrix score_in_grad;
    out.score = backward(nets.score_net, f.score_cache, grad_scores, &score_in_grad);

    const int d_local = nets.cfg.local_widths.back();
    Matrix local_grad(m, d_local);
    for (int i = 0; i < m; ++i)
        std::copy(score_in_grad.row(i), score_in_grad.row(i) + d_local, local_grad.row(i));
    out.local = backward(nets.local_net, f.local_cache, local_grad);

    if (nets.cfg.use_global) {
        const int d_global = score_in_grad.cols - d_local;
        // Mean pooling spreads each pooled-coordinate gradient evenly.
        std::vector<double> pooled_grad(d_global, 0.0);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < d_global; ++j) pooled_grad[j] += score_in_grad(i, d_local + j);
        Matrix global_grad(m, d_global);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < d_global; ++j) global_grad(i, j) = pooled_grad[j] / m;
        out.global_ctx = backward(nets.global_net, f.global_cache, global_grad);
    } else {
        out.global_ctx = zero_gradients_like(nets.global_net);
    }
    return out;
}

bool ners_update(NersNets& nets, ReplayBuffer& buffer, EpisodeRecord& episode,
                 const ValueOracle& oracle, Rng& rng) {
    if (episode.sampled_indices.empty()) {
        std::fprintf(stderr, "ners_update: no sampled indices this episode, skipping update\n");
        return false;
    }
    const double replay_reward =
        compute_replay_reward(episode.curr_eval_return, episode.prev_eval_return);
    if (replay_reward == 0.0) {
        episode.sampled_indices.clear();
        return true;
    }

    const std::size_t n = std::min<std::size_t>(nets.cfg.train_size,
                                                episode.sampled_indices.size());
    const std::vector<std::size_t> positions =
        rng.sample_without_replacement(episode.sampled_indices.size(), n);
    std::vector<std::size_t> train_indices;
    train_indices.reserve(n);
    for (std::size_t pos : positions) train_indices.push_back(episode.sampled_indices[pos]);

    const std::vector<FeatureRow> rows = buffer.features_for(train_indices, oracle);
    NersGradients g = ners_objective_gradients(nets, rows, replay_reward);

    // Adam minimizes, the objective is ascended.
    scale(g.local, -1.0);
    scale(g.global_ctx, -1.0);
    scale(g.score, -1.0);

    const double n_local = global_grad_norm(g.local);
    const double n_global = global_grad_norm(g.global_ctx);
    const double n_score = global_grad_norm(g.score);
    const double norm = std::sqrt(n_local * n_local + n_global * n_global + n_score * n_score);
    if (norm > nets.cfg.grad_clip && norm > 0.0) {
        const double factor = nets.cfg.grad_clip / norm;
        scale(g.local, factor);
        scale(g.global_ctx, factor);
        scale(g.score, factor);
    }

    adam_step(nets.local_net, g.local, nets.local_adam);
    if (nets.cfg.use_global) adam_step(nets.global_net, g.global_ctx, nets.global_adam);
    adam_step(nets.score_net, g.score, nets.score_adam);

    episode.sampled_indices.clear();
    return true;
}

// ---------------------------------------------------------------------------
// ERO

EroNets EroNets::create(const EroConfig& cfg, Rng& rng) {
    EroNets nets;
    nets.cfg = cfg;
    std::vector<int> dims{3};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(1);
    std::vector<Activation> acts(cfg.hidden.size(), Activation::Relu);
    acts.push_back(Activation::Sigmoid);
    nets.net = Mlp::create(dims, acts, rng);
    nets.adam = AdamState::create(nets.net, cfg.lr);
    return nets;
}

Vec ero_input_row(const FeatureRow& row) {
    return {row.td_error_norm, row.reward, row.timestep_norm};
}

SampledBatch ero_sample(const EroNets& nets, const ReplayBuffer& buffer, std::size_t batch_size,
                        const ValueOracle& oracle, Rng& rng) {
    const std::size_t n = buffer.size();
    if (n == 0) throw std::runtime_error("ero_sample: buffer is empty");

    // Stage one: Bernoulli keep per slot, scored from cached features.
    const std::vector<double> rows3 = buffer.cached_rows3();
    Matrix x(static_cast<int>(n), 3);
    std::copy(rows3.begin(), rows3.end(), x.data.begin());
    const Matrix keep_probs = forward(nets.net, x);
    std::vector<std::size_t> survivors;
    survivors.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (rng.uniform01() < keep_probs(static_cast<int>(i), 0)) survivors.push_back(i);

    // Stage two: uniform draw from the survivors (whole buffer if too few).
    std::vector<std::size_t> pool;
    if (survivors.size() >= batch_size) {
        pool = std::move(survivors);
    } else {
        pool.resize(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    }
    std::vector<std::size_t> chosen;
    chosen.reserve(batch_size);
    if (pool.size() >= batch_size) {
        const std::vector<std::size_t> picks =
            rng.sample_without_replacement(pool.size(), batch_size);
        for (std::size_t p : picks) chosen.push_back(pool[p]);
    } else {
        for (std::size_t i = 0; i < batch_size; ++i)
            chosen.push_back(pool[rng.uniform_index(pool.size())]);
    }

    SampledBatch batch = buffer.batch_for(chosen, /*beta=*/0.0, oracle);
    // No importance correction: uniform nominal probabilities, unit weights.
    std::fill(batch.probabilities.begin(), batch.probabilities.end(),
              1.0 / static_cast<double>(n));
    std::fill(batch.weights.begin(), batch.weights.end(), 1.0);
    return batch;
}

EroGradients ero_objective_gradients(const Mlp& net, const std::vector<FeatureRow>& rows,
                                     const std::vector<std::uint8_t>& keep,
                                     double replay_reward) {
    if (rows.size() != keep.size())
        throw std::invalid_argument("ero_objective_gradients: one keep flag per row required");
    const Matrix x = ero_rows_to_matrix(rows);
    ForwardCache cache;
    const Matrix probs = forward(net, x, cache);
    const int m = static_cast<int>(rows.size());

    EroGradients out;
    Matrix grad_out(m, 1);
    for (int i = 0; i < m; ++i) {
        const double s = clamp_unit_open(probs(i, 0));
        if (keep[i]) {
            out.objective += std::log(s);
            grad_out(i, 0) = replay_reward / s;
        } else {
            out.objective += std::log(1.0 - s);
            grad_out(i, 0) = -replay_reward / (1.0 - s);
        }
    }
    out.objective *= replay_reward;
    out.net = backward(net, cache, grad_out);
    return out;
}

void ero_update(EroNets& nets, double replay_reward, const std::vector<FeatureRow>& update_batch,
                Rng& rng) {
    if (replay_reward == 0.0 || update_batch.empty()) return;
    const Matrix x = ero_rows_to_matrix(update_batch);
    const Matrix probs = forward(nets.net, x);
    std::vector<std::uint8_t> keep(update_batch.size());
    for (std::size_t i = 0; i < update_batch.size(); ++i)
        keep[i] = rng.bernoulli(clamp_unit_open(probs(static_cast<int>(i), 0))) ? 1 : 0;

    EroGradients g = ero_objective_gradients(nets.net, update_batch, keep, replay_reward);
    scale(g.net, -1.0);  // ascend
    adam_step(nets.net, g.net, nets.adam);
}

// ---------------------------------------------------------------------------
// Polymorphic wrappers

SampledBatch Sampler::draw(ReplayBuffer& buffer, std::size_t batch_size, double alpha,
                           double beta, const ValueOracle& oracle, Rng& rng) {
    return buffer.sample(batch_size, alpha, beta, oracle, rng);
}

std::vector<double> RandomSampler::score(const std::vector<FeatureRow>& rows) {
    return random_score(rows);
}

std::vector<double> PerSampler::score(const std::vector<FeatureRow>& rows) {
    return per_score(rows, epsilon_);
}

NersSampler::NersSampler(int input_dim, const NersConfig& cfg, Rng& rng)
    : nets_(NersNets::create(input_dim, cfg, rng)) {}

std::vector<double> NersSampler::score(const std::vector<FeatureRow>& rows) {
    return ners_score(nets_, rows);
}

void NersSampler::record_sampled(const std::vector<std::size_t>& indices) {
    episode_.sampled_indices.insert(episode_.sampled_indices.end(), indices.begin(),
                                    indices.end());
}

void NersSampler::end_of_episode(double replay_reward, ReplayBuffer& buffer,
                                 const ValueOracle& oracle, Rng& rng) {
    episode_.prev_eval_return = 0.0;
    episode_.curr_eval_return = replay_reward;
    if (!episode_.sampled_indices.empty()) ners_update(nets_, buffer, episode_, oracle, rng);
}

EroSampler::EroSampler(const EroConfig& cfg, Rng& rng) : nets_(EroNets::create(cfg, rng)) {}

std::vector<double> EroSampler::score(const std::vector<FeatureRow>& rows) {
    const Matrix x = ero_rows_to_matrix(rows);
    const Matrix probs = forward(nets_.net, x);
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out[i] = clamp_unit_open(probs(static_cast<int>(i), 0));
    return out;
}

SampledBatch EroSampler::draw(ReplayBuffer& buffer, std::size_t batch_size, double alpha,
                              double beta, const ValueOracle& oracle, Rng& rng) {
    (void)alpha;
    (void)beta;
    return ero_sample(nets_, buffer, batch_size, oracle, rng);
}

void EroSampler::end_of_episode(double replay_reward, ReplayBuffer& buffer,
                                const ValueOracle& oracle, Rng& rng) {
    if (buffer.size() == 0) return;
    const std::size_t n = std::min<std::size_t>(nets_.cfg.update_size, buffer.size());
    const std::vector<std::size_t> indices = rng.sample_without_replacement(buffer.size(), n);
    const std::vector<FeatureRow> rows = buffer.features_for(indices, oracle);
    ero_update(nets_, replay_reward, rows, rng);
}

}  // namespace ners
