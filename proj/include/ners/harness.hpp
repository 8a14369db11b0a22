#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ners/agents.hpp"
#include "ners/envs.hpp"
#include "ners/sampler.hpp"

namespace ners {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    // environment
    std::string env = "chain";  // chain | pendulum_sparse | point_mass
    int chain_states = 7;
    int chain_horizon = 50;
    int pendulum_horizon = 200;
    int pendulum_streak = 20;
    int pointmass_horizon = 100;

    // agent
    std::string agent = "q";  // q | ac
    std::vector<int> agent_hidden{64, 64};
    double agent_lr = 1e-3;
    double gamma = 0.99;
    double tau = 5e-3;
    bool q_soft_target = true;
    long q_hard_interval = 500;
    double eps_start = 1.0;
    double eps_end = 0.05;
    long eps_decay_steps = 0;  // 0 -> total_steps / 2
    int policy_delay = 2;
    double action_noise = 0.1;
    double target_noise = 0.2;
    double target_noise_clip = 0.5;

    // sampler
    std::string sampler = "random";  // random | per | ero | ners
    double alpha = 0.5;
    double beta_start = 0.4;
    std::string beta_schedule = "increase";  // increase | footnote | constant
    double per_epsilon = 1e-6;
    NersConfig ners;
    bool ners_star = false;  // replay reward from training episodes
    EroConfig ero;

    // replay
    std::size_t buffer_capacity = 10000;
    bool stratified = false;
    bool raw_weights = false;  // skip within-batch max normalization

    // loop
    long total_steps = 5000;
    long eval_interval = 1000;
    int eval_episodes = 3;
    long initial_random_steps = 500;
    int batch_size = 32;
    int gradient_steps = 1;
    long stats_interval = 500;
    bool audit = false;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string out_dir = "out";
};

// key = value per line, '#' starts a comment. Unknown keys are errors.
ExperimentConfig parse_config_file(const std::string& path);
void apply_config_line(ExperimentConfig& cfg, const std::string& key, const std::string& value);
void validate_config(const ExperimentConfig& cfg);

// Annealed bias-correction exponent at a given step.
double beta_at(const ExperimentConfig& cfg, long step);

struct CurveRow {
    long step = 0;
    double mean_return = 0.0;
    double replay_reward = 0.0;
};

struct SampleStatsRow {
    long step = 0;
    double td_mean = 0.0;
    double td_std = 0.0;
    double q_mean = 0.0;
    double q_std = 0.0;
};

struct RunLog {
    std::vector<CurveRow> curves;
    std::vector<SampleStatsRow> samples;
    double final_return = 0.0;
};

double mean_of(const std::vector<double>& v);
double stdev_of(const std::vector<double>& v);  // n-1 denominator, 0 for n < 2

// Mean/stdev of raw |TD error| and Q(s, a) over the batch.
SampleStatsRow stats_snapshot(const SampledBatch& batch, const ValueOracle& oracle, double gamma);

std::string curves_path(const ExperimentConfig& cfg, std::uint64_t seed);
std::string samples_path(const ExperimentConfig& cfg, std::uint64_t seed);
void write_curves_csv(const RunLog& log, const std::string& path);
void write_samples_csv(const RunLog& log, const std::string& path);
std::vector<CurveRow> read_curves_csv(const std::string& path);

// Runs the full loop for one seed and writes both CSV logs. On divergence the
// partial logs are flushed before the DivergenceError propagates.
RunLog run_experiment(const ExperimentConfig& cfg, std::uint64_t seed);

struct SweepResult {
    std::string sampler;
    std::uint64_t seed = 0;
    bool ok = false;
    bool diverged = false;
    double final_return = 0.0;
    std::string error;
};

// Runs cfg for each sampler x seed. Independent runs execute in parallel when
// OpenMP is available; each run stays internally single-threaded.
std::vector<SweepResult> sweep(const ExperimentConfig& base,
                               const std::vector<std::string>& samplers);

struct SamplerSummary {
    std::string sampler;
    double final_mean = 0.0;
    double final_std = 0.0;
    double auc_mean = 0.0;
    double auc_std = 0.0;
};

struct ComparisonTable {
    std::vector<SamplerSummary> rows;
};

// Average return over the curve (step-weighted trapezoid, normalized by the
// step span).
double curve_auc(const std::vector<CurveRow>& curve);

// Aggregates previously written logs for each config (same env and
// total_steps required) across that config's seeds.
ComparisonTable compare(const std::vector<ExperimentConfig>& configs);
void write_summary_csv(const ComparisonTable& table, const std::string& path);
std::string format_table(const ComparisonTable& table);

ExperimentConfig with_sampler(ExperimentConfig cfg, const std::string& sampler);

// Builds the sampler an experiment config asks for.
std::unique_ptr<Sampler> make_sampler(const ExperimentConfig& cfg, int state_dim, int action_dim,
                                      Rng& rng);

}  // namespace ners
