#pragma once

#include <memory>
#include <stdexcept>
#include <vector>

#include "ners/envs.hpp"
#include "ners/replay.hpp"
#include "ners/tinynn.hpp"

namespace ners {

// Raised when a training loss turns non-finite; the harness terminates the
// run with a nonzero exit status.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Agent {
public:
    virtual ~Agent() = default;
    virtual Vec act(const Vec& state, bool explore, Rng& rng) = 0;
    // One weighted update from the batch; returns the absolute TD error of
    // each row as computed for this step's loss.
    virtual std::vector<double> train_step(const SampledBatch& batch, Rng& rng) = 0;
    virtual ValueOracle value_oracle() const = 0;
};

// target <- tau * online + (1 - tau) * target, elementwise.
void soft_update(Mlp& target, const Mlp& online, double tau);

// Mean undiscounted return of `episodes` greedy rollouts.
double evaluate(Agent& agent, Env& env, int episodes, Rng& rng);

struct QAgentConfig {
    std::vector<int> hidden{64, 64};
    double lr = 1e-3;
    double gamma = 0.99;
    double tau = 5e-3;
    bool soft_target = true;
    long hard_update_interval = 500;
    double eps_start = 1.0;
    double eps_end = 0.05;
    long eps_decay_steps = 10000;
};

// Discrete Q-learner: one output head per action, epsilon-greedy behavior,
// soft (or periodic hard) target updates.
class QAgent final : public Agent {
public:
    QAgent(int obs_dim, int num_actions, const QAgentConfig& cfg, Rng& rng);

    Vec act(const Vec& state, bool explore, Rng& rng) override;
    std::vector<double> train_step(const SampledBatch& batch, Rng& rng) override;
    ValueOracle value_oracle() const override;

    // Bootstrapped targets r + gamma * max_a Q_target(s', a) (zero at terminals).
    std::vector<double> td_targets(const SampledBatch& batch) const;
    // Weighted squared-TD loss, forward pass only (finite-difference oracle path).
    double critic_loss(const SampledBatch& batch, const std::vector<double>& targets) const;
    Gradients critic_gradients(const SampledBatch& batch, const std::vector<double>& targets,
                               double* loss_out, std::vector<double>* td_out) const;

    int greedy_action(const Vec& state) const;
    Mlp& q_net() { return q_; }
    const Mlp& target_net() const { return target_; }
    double epsilon() const;

private:
    QAgentConfig cfg_;
    int num_actions_;
    Mlp q_;
    Mlp target_;
    AdamState adam_;
    long train_calls_ = 0;
    long explore_calls_ = 0;
};

struct ACAgentConfig {
    std::vector<int> hidden{64, 64};
    double actor_lr = 1e-3;
    double critic_lr = 1e-3;
    double gamma = 0.99;
    double tau = 5e-3;
    int policy_delay = 2;
    double action_noise = 0.1;
    double target_noise = 0.2;
    double target_noise_clip = 0.5;
};

// Deterministic actor-critic with delayed policy updates, target policy
// smoothing, and soft target tracking. Actions are tanh-squashed to [-1, 1].
class ACAgent final : public Agent {
public:
    ACAgent(int obs_dim, int action_dim, const ACAgentConfig& cfg, Rng& rng);

    Vec act(const Vec& state, bool explore, Rng& rng) override;
    std::vector<double> train_step(const SampledBatch& batch, Rng& rng) override;
    ValueOracle value_oracle() const override;

    // Smoothed bootstrap targets; draws clipped Gaussian noise from rng.
    std::vector<double> td_targets(const SampledBatch& batch, Rng& rng) const;
    double critic_loss(const SampledBatch& batch, const std::vector<double>& targets) const;
    Gradients critic_gradients(const SampledBatch& batch, const std::vector<double>& targets,
                               double* loss_out, std::vector<double>* td_out) const;

    Vec greedy_action(const Vec& state) const;
    Mlp& critic_net() { return critic_; }
    Mlp& actor_net() { return actor_; }
    const Mlp& target_critic() const { return target_critic_; }
    const Mlp& target_actor() const { return target_actor_; }

private:
    double critic_value(const Mlp& critic, const Vec& state, const Vec& action) const;

    ACAgentConfig cfg_;
    int action_dim_;
    Mlp actor_, critic_;
    Mlp target_actor_, target_critic_;
    AdamState actor_adam_, critic_adam_;
    long train_calls_ = 0;
};

}  // namespace ners
