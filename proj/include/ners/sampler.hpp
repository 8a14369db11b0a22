#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ners/replay.hpp"
#include "ners/tinynn.hpp"

namespace ners {

// Indices sampled since the last sampler update, plus the evaluation returns
// that define the replay reward. The index list grows by the batch size at
// every gradient step and is emptied by the update that consumes it.
struct EpisodeRecord {
    std::vector<std::size_t> sampled_indices;
    double prev_eval_return = 0.0;
    double curr_eval_return = 0.0;
};

// Difference of mean returns between the current and previous evaluation.
// By convention the first evaluation (no previous) yields 0.
double compute_replay_reward(double curr_eval_return, std::optional<double> prev_eval_return);

// Uniform sampling: every score is 1.0.
std::vector<double> random_score(const std::vector<FeatureRow>& rows);

// TD-error prioritization: |delta| + epsilon, with |delta| recovered from the
// row's tanh-squashed value (clamped before atanh, so saturated rows get a
// large finite score).
std::vector<double> per_score(const std::vector<FeatureRow>& rows, double epsilon = 1e-6);

// ---------------------------------------------------------------------------
// NERS: learned set scoring with local and global context

struct NersConfig {
    // Local/global context nets: hidden widths with the last entry being the
    // per-row context dimension.
    std::vector<int> local_widths{32, 64, 32, 16};
    // Score net hidden widths; input is local+global context, output is a
    // single softplus-positive score.
    std::vector<int> score_hidden{32, 16, 8};
    double lr = 1e-4;
    double grad_clip = 10.0;
    int train_size = 128;  // subset size drawn from the episode's index list
    double alpha = 0.5;
    bool restricted_features = false;  // (reward, td, timestep) input only
    bool use_global = true;            // mean-pooled context on/off
};

struct NersNets {
    NersConfig cfg;
    int input_dim = 0;
    Mlp local_net;
    Mlp global_net;
    Mlp score_net;
    AdamState local_adam, global_adam, score_adam;

    static NersNets create(int input_dim, const NersConfig& cfg, Rng& rng);
};

// Strictly positive scores for a set of rows. Per-row local context is
// concatenated with the mean-pooled global context and pushed through the
// score head; permuting the input rows permutes the scores identically.
std::vector<double> ners_score(const NersNets& nets, const std::vector<FeatureRow>& rows);

struct NersGradients {
    double objective = 0.0;  // replay_reward * sum_i log p_i over the rows
    Gradients local, global_ctx, score;
};

// Gradients of the score-function objective with respect to all three nets.
// p_i normalizes sigma^alpha over the given rows.
NersGradients ners_objective_gradients(const NersNets& nets, const std::vector<FeatureRow>& rows,
                                       double replay_reward);

// One ascent step from the episode's sampled indices: draws a uniform subset
// of size min(train_size, |indices|), recomputes features, climbs the
// objective with clipped gradients, and empties the index list. A zero replay
// reward or an empty index list leaves the parameters untouched (the empty
// case warns on stderr). Returns false iff the index list was empty.
bool ners_update(NersNets& nets, ReplayBuffer& buffer, EpisodeRecord& episode,
                 const ValueOracle& oracle, Rng& rng);

// ---------------------------------------------------------------------------
// ERO: per-transition Bernoulli keep probabilities, two-stage sampling

struct EroConfig {
    std::vector<int> hidden{8, 8};
    double lr = 1e-4;
    int update_size = 128;  // uniformly drawn batch for the episode-end update
};

struct EroNets {
    EroConfig cfg;
    Mlp net;  // 3 features -> sigmoid keep probability
    AdamState adam;

    static EroNets create(const EroConfig& cfg, Rng& rng);
};

// The net's 3-feature input for one row: (td_error_norm, reward, timestep_norm).
Vec ero_input_row(const FeatureRow& row);

// Stage one thins the whole buffer with per-slot Bernoulli keeps (cached
// features, O(size)); stage two draws the batch uniformly from the survivors,
// falling back to the whole buffer when fewer than `batch_size` survive.
// Reported probabilities are uniform and weights are all 1.0: this sampler
// applies no importance correction.
SampledBatch ero_sample(const EroNets& nets, const ReplayBuffer& buffer, std::size_t batch_size,
                        const ValueOracle& oracle, Rng& rng);

struct EroGradients {
    double objective = 0.0;  // replay_reward * sum_i log Bern(keep_i | s_i)
    Gradients net;
};

EroGradients ero_objective_gradients(const Mlp& net, const std::vector<FeatureRow>& rows,
                                     const std::vector<std::uint8_t>& keep, double replay_reward);

// REINFORCE step on the realized keep decisions for a uniformly drawn batch.
// Zero replay reward is a no-op.
void ero_update(EroNets& nets, double replay_reward, const std::vector<FeatureRow>& update_batch,
                Rng& rng);

// ---------------------------------------------------------------------------
// Polymorphic wrapper used by the experiment loop

class Sampler {
public:
    virtual ~Sampler() = default;
    virtual std::string name() const = 0;
    // Strictly positive score per row, length == rows.size().
    virtual std::vector<double> score(const std::vector<FeatureRow>& rows) = 0;
    // Draws the training batch; the default is the buffer's proportional draw.
    virtual SampledBatch draw(ReplayBuffer& buffer, std::size_t batch_size, double alpha,
                              double beta, const ValueOracle& oracle, Rng& rng);
    // Whether scores should be written back into the priority tree.
    virtual bool updates_priorities() const { return true; }
    virtual void record_sampled(const std::vector<std::size_t>& indices) { (void)indices; }
    virtual void end_of_episode(double replay_reward, ReplayBuffer& buffer,
                                const ValueOracle& oracle, Rng& rng) {
        (void)replay_reward;
        (void)buffer;
        (void)oracle;
        (void)rng;
    }
};

class RandomSampler final : public Sampler {
public:
    std::string name() const override { return "random"; }
    std::vector<double> score(const std::vector<FeatureRow>& rows) override;
};

class PerSampler final : public Sampler {
public:
    explicit PerSampler(double epsilon = 1e-6) : epsilon_(epsilon) {}
    std::string name() const override { return "per"; }
    std::vector<double> score(const std::vector<FeatureRow>& rows) override;

private:
    double epsilon_;
};

class NersSampler final : public Sampler {
public:
    NersSampler(int input_dim, const NersConfig& cfg, Rng& rng);
    std::string name() const override { return "ners"; }
    std::vector<double> score(const std::vector<FeatureRow>& rows) override;
    void record_sampled(const std::vector<std::size_t>& indices) override;
    void end_of_episode(double replay_reward, ReplayBuffer& buffer, const ValueOracle& oracle,
                        Rng& rng) override;

    const EpisodeRecord& episode() const { return episode_; }
    NersNets& nets() { return nets_; }

private:
    NersNets nets_;
    EpisodeRecord episode_;
};

class EroSampler final : public Sampler {
public:
    EroSampler(const EroConfig& cfg, Rng& rng);
    std::string name() const override { return "ero"; }
    std::vector<double> score(const std::vector<FeatureRow>& rows) override;
    SampledBatch draw(ReplayBuffer& buffer, std::size_t batch_size, double alpha, double beta,
                      const ValueOracle& oracle, Rng& rng) override;
    bool updates_priorities() const override { return false; }
    void end_of_episode(double replay_reward, ReplayBuffer& buffer, const ValueOracle& oracle,
                        Rng& rng) override;

    EroNets& nets() { return nets_; }

private:
    EroNets nets_;
};

// Full feature width for a given environment, or 3 in restricted mode.
int sampler_input_dim(int state_dim, int action_dim, bool restricted);

}  // namespace ners
