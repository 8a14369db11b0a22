#include "ners/envs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ners {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Wrap to (-pi, pi].
double wrap_angle(double a) {
    a = std::fmod(a + kPi, 2.0 * kPi);
    if (a <= 0.0) a += 2.0 * kPi;
    return a - kPi;
}

double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }
}  // namespace

// ---------------------------------------------------------------------------
// ChainEnv

ChainEnv::ChainEnv(int num_states, int horizon) : num_states_(num_states), horizon_(horizon) {
    if (num_states < 2) throw std::invalid_argument("ChainEnv: need at least 2 states");
    if (horizon < 1) throw std::invalid_argument("ChainEnv: horizon must be >= 1");
}

EnvSpec ChainEnv::spec() const {
    EnvSpec s;
    s.observation_dim = num_states_;
    s.action_space.discrete = true;
    s.action_space.num_actions = 2;
    s.horizon = horizon_;
    return s;
}

Vec ChainEnv::observe() const {
    Vec obs(num_states_, 0.0);
    obs[pos_] = 1.0;
    return obs;
}

Vec ChainEnv::reset(Rng&) {
    pos_ = 0;
    steps_ = 0;
    done_ = false;
    return observe();
}

StepResult ChainEnv::step(const Vec& action) {
    if (done_) throw std::logic_error("ChainEnv::step: episode already finished");
    const int a = action.empty() ? 0 : static_cast<int>(action[0]);
    pos_ += (a == 1) ? 1 : -1;
    pos_ = std::clamp(pos_, 0, num_states_ - 1);
    ++steps_;
    StepResult r;
    r.reward = (pos_ == num_states_ - 1) ? 1.0 : 0.0;
    r.done = (pos_ == num_states_ - 1) || steps_ >= horizon_;
    r.next_state = observe();
    done_ = r.done;
    return r;
}

std::unique_ptr<Env> ChainEnv::clone() const { return std::make_unique<ChainEnv>(*this); }

// ---------------------------------------------------------------------------
// SparsePendulumEnv

SparsePendulumEnv::SparsePendulumEnv(int horizon, int streak_threshold)
    : horizon_(horizon), streak_threshold_(streak_threshold) {
    if (horizon < 1) throw std::invalid_argument("SparsePendulumEnv: horizon must be >= 1");
}

EnvSpec SparsePendulumEnv::spec() const {
    EnvSpec s;
    s.observation_dim = 3;
    s.action_space.discrete = false;
    s.action_space.dim = 1;
    s.action_space.low = -1.0;
    s.action_space.high = 1.0;
    s.horizon = horizon_;
    return s;
}

Vec SparsePendulumEnv::observe() const {
    return {std::cos(theta_), std::sin(theta_), theta_dot_};
}

Vec SparsePendulumEnv::reset(Rng& rng) {
    theta_ = rng.uniform(-kPi, kPi);
    theta_dot_ = rng.uniform(-1.0, 1.0);
    streak_ = 0;
    steps_ = 0;
    done_ = false;
    return observe();
}

void SparsePendulumEnv::set_state(double theta, double theta_dot) {
    theta_ = wrap_angle(theta);
    theta_dot_ = theta_dot;
    streak_ = 0;
    steps_ = 0;
    done_ = false;
}

StepResult SparsePendulumEnv::step(const Vec& action) {
    if (done_) throw std::logic_error("SparsePendulumEnv::step: episode already finished");
    constexpr double dt = 0.05, g = 10.0, m = 1.0, l = 1.0;
    const double u = 2.0 * clip(action.empty() ? 0.0 : action[0], -1.0, 1.0);

    // Semi-implicit Euler: velocity first, position with the new velocity.
    const double theta_ddot =
        -3.0 * g / (2.0 * l) * std::sin(theta_ + kPi) + 3.0 / (m * l * l) * u;
    theta_dot_ = clip(theta_dot_ + theta_ddot * dt, -8.0, 8.0);
    theta_ = wrap_angle(theta_ + theta_dot_ * dt);
    ++steps_;

    const bool upright = std::abs(theta_) <= kPi / 3.0;
    streak_ = upright ? streak_ + 1 : 0;

    StepResult r;
    r.reward = (streak_ > streak_threshold_) ? 1.0 : 0.0;
    r.done = steps_ >= horizon_;
    r.next_state = observe();
    done_ = r.done;
    return r;
}

std::unique_ptr<Env> SparsePendulumEnv::clone() const {
    return std::make_unique<SparsePendulumEnv>(*this);
}

// ---------------------------------------------------------------------------
// PointMassEnv

PointMassEnv::PointMassEnv(int horizon) : horizon_(horizon) {
    if (horizon < 1) throw std::invalid_argument("PointMassEnv: horizon must be >= 1");
}

EnvSpec PointMassEnv::spec() const {
    EnvSpec s;
    s.observation_dim = 4;
    s.action_space.discrete = false;
    s.action_space.dim = 2;
    s.action_space.low = -1.0;
    s.action_space.high = 1.0;
    s.horizon = horizon_;
    return s;
}

Vec PointMassEnv::observe() const { return {px_, py_, vx_, vy_}; }

Vec PointMassEnv::reset(Rng& rng) {
    px_ = rng.uniform(-0.2, 0.2);
    py_ = rng.uniform(-0.2, 0.2);
    vx_ = 0.0;
    vy_ = 0.0;
    steps_ = 0;
    done_ = false;
    return observe();
}

StepResult PointMassEnv::step(const Vec& action) {
    if (done_) throw std::logic_error("PointMassEnv::step: episode already finished");
    constexpr double dt = 0.1, vmax = 1.0, pmax = 2.0;
    constexpr double goal_x = 1.0, goal_y = 1.0, goal_radius = 0.25;
    const double ax = clip(action.size() > 0 ? action[0] : 0.0, -1.0, 1.0);
    const double ay = clip(action.size() > 1 ? action[1] : 0.0, -1.0, 1.0);
    vx_ = clip(vx_ + ax * dt, -vmax, vmax);
    vy_ = clip(vy_ + ay * dt, -vmax, vmax);
    px_ = clip(px_ + vx_ * dt, -pmax, pmax);
    py_ = clip(py_ + vy_ * dt, -pmax, pmax);
    ++steps_;

    const double dx = px_ - goal_x, dy = py_ - goal_y;
    StepResult r;
    r.reward = (dx * dx + dy * dy <= goal_radius * goal_radius) ? 1.0 : 0.0;
    r.done = steps_ >= horizon_;
    r.next_state = observe();
    done_ = r.done;
    return r;
}

std::unique_ptr<Env> PointMassEnv::clone() const { return std::make_unique<PointMassEnv>(*this); }

std::unique_ptr<Env> make_env(const std::string& name, int chain_states, int chain_horizon,
                              int pendulum_horizon, int pendulum_streak, int pointmass_horizon) {
    if (name == "chain") return std::make_unique<ChainEnv>(chain_states, chain_horizon);
    if (name == "pendulum_sparse")
        return std::make_unique<SparsePendulumEnv>(pendulum_horizon, pendulum_streak);
    if (name == "point_mass") return std::make_unique<PointMassEnv>(pointmass_horizon);
    throw std::invalid_argument("make_env: unknown environment '" + name + "'");
}

}  // namespace ners
