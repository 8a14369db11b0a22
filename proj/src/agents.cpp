#include "ners/agents.hpp"

#include <algorithm>
#include <cmath>

namespace ners {

namespace {
std::vector<Activation> dense_acts(std::size_t hidden_layers, Activation head) {
    std::vector<Activation> acts(hidden_layers, Activation::Relu);
    acts.push_back(head);
    return acts;
}

std::vector<int> dense_dims(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> dims{in};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(out);
    return dims;
}

Matrix states_matrix(const SampledBatch& batch) {
    const int m = static_cast<int>(batch.features.size());
    const int dim = static_cast<int>(batch.features[0].state.size());
    Matrix x(m, dim);
    for (int i = 0; i < m; ++i)
        std::copy(batch.features[i].state.begin(), batch.features[i].state.end(), x.row(i));
    return x;
}

Matrix state_action_matrix(const SampledBatch& batch) {
    const int m = static_cast<int>(batch.features.size());
    const int sdim = static_cast<int>(batch.features[0].state.size());
    const int adim = static_cast<int>(batch.features[0].action.size());
    Matrix x(m, sdim + adim);
    for (int i = 0; i < m; ++i) {
        std::copy(batch.features[i].state.begin(), batch.features[i].state.end(), x.row(i));
        std::copy(batch.features[i].action.begin(), batch.features[i].action.end(),
                  x.row(i) + sdim);
    }
    return x;
}

Matrix row_matrix(const Vec& v) {
    Matrix x(1, static_cast<int>(v.size()));
    std::copy(v.begin(), v.end(), x.row(0));
    return x;
}
}  // namespace

void soft_update(Mlp& target, const Mlp& online, double tau) {
    for (std::size_t l = 0; l < target.layers.size(); ++l) {
        Layer& t = target.layers[l];
        const Layer& o = online.layers[l];
        for (std::size_t i = 0; i < t.w.size(); ++i)
            t.w.data[i] = tau * o.w.data[i] + (1.0 - tau) * t.w.data[i];
        for (std::size_t i = 0; i < t.b.size(); ++i)
            t.b[i] = tau * o.b[i] + (1.0 - tau) * t.b[i];
    }
    target.version += 1;
}

double evaluate(Agent& agent, Env& env, int episodes, Rng& rng) {
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        Vec state = env.reset(rng);
        bool done = false;
        while (!done) {
            const StepResult r = env.step(agent.act(state, /*explore=*/false, rng));
            total += r.reward;
            state = r.next_state;
            done = r.done;
        }
    }
    return total / episodes;
}

// ---------------------------------------------------------------------------
// QAgent

QAgent::QAgent(int obs_dim, int num_actions, const QAgentConfig& cfg, Rng& rng)
    : cfg_(cfg),
      num_actions_(num_actions),
      q_(Mlp::create(dense_dims(obs_dim, cfg.hidden, num_actions),
                     dense_acts(cfg.hidden.size(), Activation::Identity), rng)),
      target_(q_),
      adam_(AdamState::create(q_, cfg.lr)) {}

double QAgent::epsilon() const {
    if (cfg_.eps_decay_steps <= 0) return cfg_.eps_end;
    const double frac =
        std::min(1.0, static_cast<double>(explore_calls_) / cfg_.eps_decay_steps);
    return cfg_.eps_start + (cfg_.eps_end - cfg_.eps_start) * frac;
}

int QAgent::greedy_action(const Vec& state) const {
    const Matrix q = forward(q_, row_matrix(state));
    int best = 0;
    for (int a = 1; a < num_actions_; ++a)
        if (q(0, a) > q(0, best)) best = a;
    return best;
}

Vec QAgent::act(const Vec& state, bool explore, Rng& rng) {
    if (explore) {
        const double eps = epsilon();
        ++explore_calls_;
        if (rng.uniform01() < eps)
            return {static_cast<double>(rng.uniform_index(num_actions_))};
    }
    return {static_cast<double>(greedy_action(state))};
}

std::vector<double> QAgent::td_targets(const SampledBatch& batch) const {
    std::vector<double> targets(batch.features.size());
    for (std::size_t i = 0; i < batch.features.size(); ++i) {
        const FeatureRow& row = batch.features[i];
        double bootstrap = 0.0;
        if (!batch.done[i]) {
            const Matrix q = forward(target_, row_matrix(row.next_state));
            double best = q(0, 0);
            for (int a = 1; a < num_actions_; ++a) best = std::max(best, q(0, a));
            bootstrap = cfg_.gamma * best;
        }
        targets[i] = batch.features[i].reward + bootstrap;
    }
    return targets;
}

double QAgent::critic_loss(const SampledBatch& batch, const std::vector<double>& targets) const {
    const Matrix q = forward(q_, states_matrix(batch));
    const int m = static_cast<int>(batch.features.size());
    double loss = 0.0;
    for (int i = 0; i < m; ++i) {
        const int a = static_cast<int>(batch.features[i].action[0]);
        const double td = targets[i] - q(i, a);
        loss += batch.weights[i] * td * td;
    }
    return loss / m;
}

Gradients QAgent::critic_gradients(const SampledBatch& batch, const std::vector<double>& targets,
                                   double* loss_out, std::vector<double>* td_out) const {
    ForwardCache cache;
    const Matrix q = forward(q_, states_matrix(batch), cache);
    const int m = static_cast<int>(batch.features.size());
    Matrix grad_out(m, num_actions_);
    double loss = 0.0;
    if (td_out) td_out->assign(m, 0.0);
    for (int i = 0; i < m; ++i) {
        const int a = static_cast<int>(batch.features[i].action[0]);
        const double td = targets[i] - q(i, a);
        loss += batch.weights[i] * td * td;
        grad_out(i, a) = -2.0 * batch.weights[i] * td / m;
        if (td_out) (*td_out)[i] = td;
    }
    loss /= m;
    if (loss_out) *loss_out = loss;
    return backward(q_, cache, grad_out);
}

std::vector<double> QAgent::train_step(const SampledBatch& batch, Rng&) {
    if (batch.features.empty()) throw std::invalid_argument("train_step: empty batch");
    const std::vector<double> targets = td_targets(batch);
    double loss = 0.0;
    std::vector<double> td;
    Gradients grads = critic_gradients(batch, targets, &loss, &td);
    if (!std::isfinite(loss)) throw DivergenceError("QAgent: non-finite loss");
    adam_step(q_, grads, adam_);
    ++train_calls_;
    if (cfg_.soft_target) {
        soft_update(target_, q_, cfg_.tau);
    } else if (train_calls_ % cfg_.hard_update_interval == 0) {
        target_ = q_;
        target_.version += 1;
    }
    for (double& v : td) v = std::abs(v);
    return td;
}

ValueOracle QAgent::value_oracle() const {
    ValueOracle oracle;
    oracle.q = [this](const Vec& s, const Vec& a) {
        const Matrix q = forward(q_, row_matrix(s));
        return q(0, static_cast<int>(a[0]));
    };
    oracle.bootstrap = [this](const Vec& next) {
        const Matrix q = forward(target_, row_matrix(next));
        double best = q(0, 0);
        for (int a = 1; a < num_actions_; ++a) best = std::max(best, q(0, a));
        return best;
    };
    return oracle;
}

// ---------------------------------------------------------------------------
// ACAgent

ACAgent::ACAgent(int obs_dim, int action_dim, const ACAgentConfig& cfg, Rng& rng)
    : cfg_(cfg),
      action_dim_(action_dim),
      actor_(Mlp::create(dense_dims(obs_dim, cfg.hidden, action_dim),
                         dense_acts(cfg.hidden.size(), Activation::Tanh), rng)),
      critic_(Mlp::create(dense_dims(obs_dim + action_dim, cfg.hidden, 1),
                          dense_acts(cfg.hidden.size(), Activation::Identity), rng)),
      target_actor_(actor_),
      target_critic_(critic_),
      actor_adam_(AdamState::create(actor_, cfg.actor_lr)),
      critic_adam_(AdamState::create(critic_, cfg.critic_lr)) {}

Vec ACAgent::greedy_action(const Vec& state) const {
    const Matrix a = forward(actor_, row_matrix(state));
    Vec out(action_dim_);
    for (int j = 0; j < action_dim_; ++j) out[j] = a(0, j);
    return out;
}

Vec ACAgent::act(const Vec& state, bool explore, Rng& rng) {
    Vec a = greedy_action(state);
    if (explore && cfg_.action_noise > 0.0) {
        for (double& v : a)
            v = std::clamp(v + cfg_.action_noise * rng.normal(), -1.0, 1.0);
    }
    return a;
}

double ACAgent::critic_value(const Mlp& critic, const Vec& state, const Vec& action) const {
    Vec input;
    input.reserve(state.size() + action.size());
    input.insert(input.end(), state.begin(), state.end());
    input.insert(input.end(), action.begin(), action.end());
    return forward(critic, row_matrix(input))(0, 0);
}

std::vector<double> ACAgent::td_targets(const SampledBatch& batch, Rng& rng) const {
    std::vector<double> targets(batch.features.size());
    for (std::size_t i = 0; i < batch.features.size(); ++i) {
        const FeatureRow& row = batch.features[i];
        double bootstrap = 0.0;
        if (!batch.done[i]) {
            const Matrix a = forward(target_actor_, row_matrix(row.next_state));
            Vec smoothed(action_dim_);
            for (int j = 0; j < action_dim_; ++j) {
                const double noise = std::clamp(cfg_.target_noise * rng.normal(),
                                                -cfg_.target_noise_clip, cfg_.target_noise_clip);
                smoothed[j] = std::clamp(a(0, j) + noise, -1.0, 1.0);
            }
            bootstrap = cfg_.gamma * critic_value(target_critic_, row.next_state, smoothed);
        }
        targets[i] = row.reward + bootstrap;
    }
    return targets;
}

double ACAgent::critic_loss(const SampledBatch& batch, const std::vector<double>& targets) const {
    const Matrix q = forward(critic_, state_action_matrix(batch));
    const int m = static_cast<int>(batch.features.size());
    double loss = 0.0;
    for (int i = 0; i < m; ++i) {
        const double td = targets[i] - q(i, 0);
        loss += batch.weights[i] * td * td;
    }
    return loss / m;
}

Gradients ACAgent::critic_gradients(const SampledBatch& batch, const std::vector<double>& targets,
                                    double* loss_out, std::vector<double>* td_out) const {
    ForwardCache cache;
    const Matrix q = forward(critic_, state_action_matrix(batch), cache);
    const int m = static_cast<int>(batch.features.size());
    Matrix grad_out(m, 1);
    double loss = 0.0;
    if (td_out) td_out->assign(m, 0.0);
    for (int i = 0; i < m; ++i) {
        const double td = targets[i] - q(i, 0);
        loss += batch.weights[i] * td * td;
        grad_out(i, 0) = -2.0 * batch.weights[i] * td / m;
        if (td_out) (*td_out)[i] = td;
    }
    loss /= m;
    if (loss_out) *loss_out = loss;
    return backward(critic_, cache, grad_out);
}

std::vector<double> ACAgent::train_step(const SampledBatch& batch, Rng& rng) {
    if (batch.features.empty()) throw std::invalid_argument("train_step: empty batch");
    const std::vector<double> targets = td_targets(batch, rng);
    double loss = 0.0;
    std::vector<double> td;
    Gradients critic_grads = critic_gradients(batch, targets, &loss, &td);
    if (!std::isfinite(loss)) throw DivergenceError("ACAgent: non-finite critic loss");
    adam_step(critic_, critic_grads, critic_adam_);
    ++train_calls_;

    if (train_calls_ % cfg_.policy_delay == 0) {
        // Ascend the critic's value of the actor's actions.
        const int m = static_cast<int>(batch.features.size());
        const int sdim = static_cast<int>(batch.features[0].state.size());
        const Matrix states = states_matrix(batch);
        ForwardCache actor_cache;
        const Matrix actions = forward(actor_, states, actor_cache);
        Matrix sa(m, sdim + action_dim_);
        for (int i = 0; i < m; ++i) {
            std::copy(states.row(i), states.row(i) + sdim, sa.row(i));
            std::copy(actions.row(i), actions.row(i) + action_dim_, sa.row(i) + sdim);
        }
        ForwardCache critic_cache;
        forward(critic_, sa, critic_cache);
        Matrix dq(m, 1);
        for (int i = 0; i < m; ++i) dq(i, 0) = -1.0 / m;
        Matrix input_grad;
        backward(critic_, critic_cache, dq, &input_grad);
        Matrix action_grad(m, action_dim_);
        for (int i = 0; i < m; ++i)
            std::copy(input_grad.row(i) + sdim, input_grad.row(i) + sdim + action_dim_,
                      action_grad.row(i));
        Gradients actor_grads = backward(actor_, actor_cache, action_grad);
        adam_step(actor_, actor_grads, actor_adam_);
    }
    soft_update(target_critic_, critic_, cfg_.tau);
    soft_update(target_actor_, actor_, cfg_.tau);

    for (double& v : td) v = std::abs(v);
    return td;
}

ValueOracle ACAgent::value_oracle() const {
    ValueOracle oracle;
    oracle.q = [this](const Vec& s, const Vec& a) { return critic_value(critic_, s, a); };
    oracle.bootstrap = [this](const Vec& next) {
        const Matrix a = forward(target_actor_, row_matrix(next));
        Vec action(action_dim_);
        for (int j = 0; j < action_dim_; ++j) action[j] = a(0, j);
        return critic_value(target_critic_, next, action);
    };
    return oracle;
}

}  // namespace ners
