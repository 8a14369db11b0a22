#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ners/rng.hpp"
#include "ners/sumtree.hpp"

namespace ners {

using Vec = std::vector<double>;

// One stored interaction. `timestep` is the global environment step at which
// the transition was collected.
struct Transition {
    Vec state;
    Vec action;
    double reward = 0.0;
    Vec next_state;
    bool done = false;
    std::uint64_t timestep = 0;
};

// The per-transition feature encoding handed to samplers: the raw transition
// plus a [0,1] timestep and tanh-squashed TD error / target value. Rows for
// never-sampled transitions carry 1.0 for both squashed entries.
struct FeatureRow {
    Vec state;
    Vec action;
    double reward = 0.0;
    Vec next_state;
    double timestep_norm = 0.0;
    double td_error_norm = 1.0;
    double target_q_norm = 1.0;

    // Concatenated sampler input: state + action + reward + next_state +
    // timestep_norm + td_error_norm + target_q_norm. With `restricted` only
    // (reward, td_error_norm, timestep_norm) is produced.
    Vec flatten(bool restricted = false) const;
};

struct SampledBatch {
    std::vector<std::size_t> indices;
    std::vector<double> probabilities;  // p_i = leaf_i / total
    std::vector<double> weights;        // importance weights (max-normalized by default)
    std::vector<FeatureRow> features;
    std::vector<std::uint8_t> done;
    // Raw values behind the squashed features, kept for priority refresh and
    // batch statistics.
    std::vector<double> raw_td;
    std::vector<double> raw_target_q;
    std::vector<double> raw_q;
};

// Value estimates the buffer needs to build features: the critic's value of a
// stored pair and the target-network bootstrap value of a next state.
struct ValueOracle {
    std::function<double(const Vec& state, const Vec& action)> q;
    std::function<double(const Vec& next_state)> bootstrap;
};

// delta = r + gamma * bootstrap(s') - q(s, a); the bootstrap term is dropped
// for terminal transitions.
double compute_td_error(const Transition& t, const ValueOracle& oracle, double gamma);

// Bias-correcting importance weight (1 / (buffer_size * p))^beta.
double importance_weight(double probability, std::size_t buffer_size, double beta);

struct ReplayConfig {
    std::size_t capacity = 10000;
    int state_dim = 0;
    int action_dim = 0;
    double gamma = 0.99;
    bool max_normalize_weights = true;
    bool stratified = false;
};

// Ring-buffer transition store with a sum tree over priorities. The tree
// holds sigma^alpha directly, so a draw is a plain proportional sample and
// every reported probability is sigma_i^alpha / sum_k sigma_k^alpha.
class ReplayBuffer {
public:
    explicit ReplayBuffer(const ReplayConfig& cfg);

    // Stores the transition with initial priority 1.0 and marks it fresh.
    void push(const Transition& t);

    SampledBatch sample(std::size_t batch_size, double alpha, double beta,
                        const ValueOracle& oracle, Rng& rng) const;

    // Builds a full batch for the given (already chosen) indices, with
    // tree-implied probabilities and importance weights.
    SampledBatch batch_for(const std::vector<std::size_t>& indices, double beta,
                           const ValueOracle& oracle) const;

    // Sets tree leaves at the batch indices to score^alpha, refreshes the
    // cached TD/target values from the batch, and clears freshness flags.
    // Scores must be strictly positive.
    void update_priorities(const SampledBatch& batch, const std::vector<double>& scores,
                           double alpha);

    // Feature rows for arbitrary occupied slots (same code path sample uses).
    std::vector<FeatureRow> features_for(const std::vector<std::size_t>& indices,
                                         const ValueOracle& oracle) const;
    FeatureRow feature_for(std::size_t index, const ValueOracle& oracle) const;

    // Per-slot (td_error_norm, reward, timestep_norm) rows built from cached
    // values only; no oracle calls. Flat row-major [size x 3].
    std::vector<double> cached_rows3() const;

    // Re-derives each index's probability from a linear scan over the leaves
    // and returns the max absolute difference vs the tree's implied
    // probability (debug audit).
    double audit_probabilities(const std::vector<std::size_t>& indices) const;

    const Transition& transition(std::size_t index) const;
    bool fresh(std::size_t index) const;
    double priority_leaf(std::size_t index) const { return tree_.leaf(index); }
    double tree_total() const { return tree_.total(); }
    std::size_t size() const { return tree_.size(); }
    std::size_t capacity() const { return cfg_.capacity; }
    std::uint64_t global_step() const { return global_step_; }
    const ReplayConfig& config() const { return cfg_; }

    // Debug snapshot of the whole buffer as a flat binary file.
    void save_snapshot(const std::string& path) const;
    static ReplayBuffer load_snapshot(const std::string& path);

private:
    ReplayConfig cfg_;
    SumTree tree_;
    std::vector<Transition> slots_;
    std::vector<std::uint8_t> fresh_;
    std::vector<double> cached_td_;
    std::vector<double> cached_target_q_;
    std::uint64_t global_step_ = 0;
    std::size_t write_ = 0;
};

}  // namespace ners
