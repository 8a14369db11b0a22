#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ners/replay.hpp"
#include "ners/rng.hpp"

namespace ners {

struct ActionSpace {
    bool discrete = false;
    int num_actions = 0;  // discrete only
    int dim = 0;          // box only
    double low = -1.0;
    double high = 1.0;
};

struct EnvSpec {
    int observation_dim = 0;
    ActionSpace action_space;
    int horizon = 1;
};

struct StepResult {
    Vec next_state;
    double reward = 0.0;
    bool done = false;
};

class Env {
public:
    virtual ~Env() = default;
    virtual EnvSpec spec() const = 0;
    virtual Vec reset(Rng& rng) = 0;
    // Throws std::logic_error if called after the episode has terminated.
    virtual StepResult step(const Vec& action) = 0;
    virtual std::unique_ptr<Env> clone() const = 0;
};

// N-state corridor with actions {left, right}. One-hot observation, start at
// state 0, reward 1.0 on reaching the far end, done there or at the horizon.
class ChainEnv final : public Env {
public:
    explicit ChainEnv(int num_states = 7, int horizon = 50);
    EnvSpec spec() const override;
    Vec reset(Rng& rng) override;
    StepResult step(const Vec& action) override;
    std::unique_ptr<Env> clone() const override;

private:
    Vec observe() const;
    int num_states_;
    int horizon_;
    int pos_ = 0;
    int steps_ = 0;
    bool done_ = true;
};

// Frictionless pendulum with a sparse reward: 1.0 per step once the rod has
// stayed within [-pi/3, pi/3] of upright for more than `streak_threshold`
// consecutive steps. Observation (cos th, sin th, thdot); scalar action in
// [-1, 1] scaled to a torque in [-2, 2]; episode ends at the horizon only.
class SparsePendulumEnv final : public Env {
public:
    explicit SparsePendulumEnv(int horizon = 200, int streak_threshold = 20);
    EnvSpec spec() const override;
    Vec reset(Rng& rng) override;
    StepResult step(const Vec& action) override;
    std::unique_ptr<Env> clone() const override;

    double angle() const { return theta_; }
    double angular_velocity() const { return theta_dot_; }
    int streak() const { return streak_; }
    // Sets the physical state directly (testing hook).
    void set_state(double theta, double theta_dot);

private:
    Vec observe() const;
    int horizon_;
    int streak_threshold_;
    double theta_ = 0.0;
    double theta_dot_ = 0.0;
    int streak_ = 0;
    int steps_ = 0;
    bool done_ = true;
};

// 2-D point mass: observation (px, py, vx, vy), box action is an
// acceleration, reward 1.0 while inside the goal disk, done at horizon.
class PointMassEnv final : public Env {
public:
    explicit PointMassEnv(int horizon = 100);
    EnvSpec spec() const override;
    Vec reset(Rng& rng) override;
    StepResult step(const Vec& action) override;
    std::unique_ptr<Env> clone() const override;

private:
    Vec observe() const;
    int horizon_;
    double px_ = 0.0, py_ = 0.0, vx_ = 0.0, vy_ = 0.0;
    int steps_ = 0;
    bool done_ = true;
};

// Factory by config name: "chain", "pendulum_sparse", "point_mass".
std::unique_ptr<Env> make_env(const std::string& name, int chain_states, int chain_horizon,
                              int pendulum_horizon, int pendulum_streak, int pointmass_horizon);

}  // namespace ners
