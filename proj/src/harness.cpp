#include "ners/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ners {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string item;
    std::stringstream ss(s);
    while (std::getline(ss, item, sep)) parts.push_back(item);
    return parts;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

long to_long(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for '" + key + "': " + value);
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for '" + key + "': " + value);
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("config: bad boolean for '" + key + "': " + value);
}

std::vector<int> to_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    for (const std::string& part : split(value, ',')) {
        const std::string p = trim(part);
        if (p.empty()) continue;
        out.push_back(static_cast<int>(to_long(key, p)));
    }
    if (out.empty()) throw ConfigError("config: empty list for '" + key + "'");
    return out;
}

}  // namespace

void apply_config_line(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "env") cfg.env = value;
    else if (key == "chain_states") cfg.chain_states = static_cast<int>(to_long(key, value));
    else if (key == "chain_horizon") cfg.chain_horizon = static_cast<int>(to_long(key, value));
    else if (key == "pendulum_horizon") cfg.pendulum_horizon = static_cast<int>(to_long(key, value));
    else if (key == "pendulum_streak") cfg.pendulum_streak = static_cast<int>(to_long(key, value));
    else if (key == "pointmass_horizon") cfg.pointmass_horizon = static_cast<int>(to_long(key, value));
    else if (key == "agent") cfg.agent = value;
    else if (key == "agent_hidden") cfg.agent_hidden = to_int_list(key, value);
    else if (key == "agent_lr") cfg.agent_lr = to_double(key, value);
    else if (key == "gamma") cfg.gamma = to_double(key, value);
    else if (key == "tau") cfg.tau = to_double(key, value);
    else if (key == "q_soft_target") cfg.q_soft_target = to_bool(key, value);
    else if (key == "q_hard_interval") cfg.q_hard_interval = to_long(key, value);
    else if (key == "eps_start") cfg.eps_start = to_double(key, value);
    else if (key == "eps_end") cfg.eps_end = to_double(key, value);
    else if (key == "eps_decay_steps") cfg.eps_decay_steps = to_long(key, value);
    else if (key == "policy_delay") cfg.policy_delay = static_cast<int>(to_long(key, value));
    else if (key == "action_noise") cfg.action_noise = to_double(key, value);
    else if (key == "target_noise") cfg.target_noise = to_double(key, value);
    else if (key == "target_noise_clip") cfg.target_noise_clip = to_double(key, value);
    else if (key == "sampler") cfg.sampler = value;
    else if (key == "alpha") cfg.alpha = to_double(key, value);
    else if (key == "beta_start") cfg.beta_start = to_double(key, value);
    else if (key == "beta_schedule") cfg.beta_schedule = value;
    else if (key == "per_epsilon") cfg.per_epsilon = to_double(key, value);
    else if (key == "ners_local_widths") cfg.ners.local_widths = to_int_list(key, value);
    else if (key == "ners_score_hidden") cfg.ners.score_hidden = to_int_list(key, value);
    else if (key == "ners_lr") cfg.ners.lr = to_double(key, value);
    else if (key == "ners_grad_clip") cfg.ners.grad_clip = to_double(key, value);
    else if (key == "ners_train_size") cfg.ners.train_size = static_cast<int>(to_long(key, value));
    else if (key == "ners_restricted_features") cfg.ners.restricted_features = to_bool(key, value);
    else if (key == "ners_use_global") cfg.ners.use_global = to_bool(key, value);
    else if (key == "ners_star") cfg.ners_star = to_bool(key, value);
    else if (key == "ero_hidden") cfg.ero.hidden = to_int_list(key, value);
    else if (key == "ero_lr") cfg.ero.lr = to_double(key, value);
    else if (key == "ero_update_size") cfg.ero.update_size = static_cast<int>(to_long(key, value));
    else if (key == "buffer_capacity") cfg.buffer_capacity = static_cast<std::size_t>(to_long(key, value));
    else if (key == "stratified") cfg.stratified = to_bool(key, value);
    else if (key == "raw_weights") cfg.raw_weights = to_bool(key, value);
    else if (key == "total_steps") cfg.total_steps = to_long(key, value);
    else if (key == "eval_interval") cfg.eval_interval = to_long(key, value);
    else if (key == "eval_episodes") cfg.eval_episodes = static_cast<int>(to_long(key, value));
    else if (key == "initial_random_steps") cfg.initial_random_steps = to_long(key, value);
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(to_long(key, value));
    else if (key == "gradient_steps") cfg.gradient_steps = static_cast<int>(to_long(key, value));
    else if (key == "stats_interval") cfg.stats_interval = to_long(key, value);
    else if (key == "audit") cfg.audit = to_bool(key, value);
    else if (key == "out") cfg.out_dir = value;
    else if (key == "seeds") {
        cfg.seeds.clear();
        for (const std::string& part : split(value, ',')) {
            const std::string p = trim(part);
            if (!p.empty()) cfg.seeds.push_back(static_cast<std::uint64_t>(to_long(key, p)));
        }
        if (cfg.seeds.empty()) throw ConfigError("config: seeds must be nonempty");
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    ExperimentConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(line_no) + " is not key = value");
        apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    validate_config(cfg);
    return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.env != "chain" && cfg.env != "pendulum_sparse" && cfg.env != "point_mass")
        throw ConfigError("config: unknown env '" + cfg.env + "'");
    if (cfg.agent != "q" && cfg.agent != "ac")
        throw ConfigError("config: unknown agent '" + cfg.agent + "'");
    if (cfg.sampler != "random" && cfg.sampler != "per" && cfg.sampler != "ero" &&
        cfg.sampler != "ners")
        throw ConfigError("config: unknown sampler '" + cfg.sampler + "'");
    if (cfg.beta_schedule != "increase" && cfg.beta_schedule != "footnote" &&
        cfg.beta_schedule != "constant")
        throw ConfigError("config: unknown beta_schedule '" + cfg.beta_schedule + "'");
    if (cfg.total_steps < cfg.eval_interval || cfg.eval_interval < 1)
        throw ConfigError("config: need total_steps >= eval_interval >= 1");
    if (cfg.seeds.empty()) throw ConfigError("config: seeds must be nonempty");
    if (cfg.batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (cfg.buffer_capacity < static_cast<std::size_t>(cfg.batch_size))
        throw ConfigError("config: buffer_capacity must be >= batch_size");
    if (cfg.alpha <= 0.0) throw ConfigError("config: alpha must be > 0");
    if (cfg.eval_episodes < 1) throw ConfigError("config: eval_episodes must be >= 1");
    const bool discrete_env = cfg.env == "chain";
    if (discrete_env && cfg.agent != "q")
        throw ConfigError("config: env '" + cfg.env + "' needs the q agent");
    if (!discrete_env && cfg.agent != "ac")
        throw ConfigError("config: env '" + cfg.env + "' needs the ac agent");
}

double beta_at(const ExperimentConfig& cfg, long step) {
    const double eta = std::clamp(
        static_cast<double>(step) / static_cast<double>(cfg.total_steps), 0.0, 1.0);
    if (cfg.beta_schedule == "footnote") return cfg.beta_start * eta + 1.0 * (1.0 - eta);
    if (cfg.beta_schedule == "constant") return cfg.beta_start;
    return cfg.beta_start * (1.0 - eta) + 1.0 * eta;  // anneal up to 1
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / v.size();
}

double stdev_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / (v.size() - 1));
}

SampleStatsRow stats_snapshot(const SampledBatch& batch, const ValueOracle& oracle, double gamma) {
    if (batch.features.empty()) throw std::invalid_argument("stats_snapshot: empty batch");
    std::vector<double> abs_td, q_values;
    abs_td.reserve(batch.features.size());
    q_values.reserve(batch.features.size());
    for (std::size_t i = 0; i < batch.features.size(); ++i) {
        const FeatureRow& row = batch.features[i];
        const double q = oracle.q(row.state, row.action);
        const double bootstrap = batch.done[i] ? 0.0 : gamma * oracle.bootstrap(row.next_state);
        abs_td.push_back(std::abs(row.reward + bootstrap - q));
        q_values.push_back(q);
    }
    SampleStatsRow out;
    out.td_mean = mean_of(abs_td);
    out.td_std = stdev_of(abs_td);
    out.q_mean = mean_of(q_values);
    out.q_std = stdev_of(q_values);
    return out;
}

std::string curves_path(const ExperimentConfig& cfg, std::uint64_t seed) {
    return cfg.out_dir + "/" + cfg.sampler + "_seed" + std::to_string(seed) + "_curves.csv";
}

std::string samples_path(const ExperimentConfig& cfg, std::uint64_t seed) {
    return cfg.out_dir + "/" + cfg.sampler + "_seed" + std::to_string(seed) + "_samples.csv";
}

void write_curves_csv(const RunLog& log, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path);
    std::fprintf(f, "step,return,replay_reward\n");
    for (const CurveRow& row : log.curves)
        std::fprintf(f, "%ld,%.17g,%.17g\n", row.step, row.mean_return, row.replay_reward);
    std::fclose(f);
}

void write_samples_csv(const RunLog& log, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path);
    std::fprintf(f, "step,td_mean,td_std,q_mean,q_std\n");
    for (const SampleStatsRow& row : log.samples)
        std::fprintf(f, "%ld,%.17g,%.17g,%.17g,%.17g\n", row.step, row.td_mean, row.td_std,
                     row.q_mean, row.q_std);
    std::fclose(f);
}

std::vector<CurveRow> read_curves_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<CurveRow> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const std::vector<std::string> parts = split(line, ',');
        if (parts.size() != 3) throw std::runtime_error("bad curves row in " + path);
        CurveRow row;
        row.step = std::stol(parts[0]);
        row.mean_return = std::stod(parts[1]);
        row.replay_reward = std::stod(parts[2]);
        rows.push_back(row);
    }
    return rows;
}

std::unique_ptr<Sampler> make_sampler(const ExperimentConfig& cfg, int state_dim, int action_dim,
                                      Rng& rng) {
    if (cfg.sampler == "random") return std::make_unique<RandomSampler>();
    if (cfg.sampler == "per") return std::make_unique<PerSampler>(cfg.per_epsilon);
    if (cfg.sampler == "ero") return std::make_unique<EroSampler>(cfg.ero, rng);
    if (cfg.sampler == "ners") {
        NersConfig nc = cfg.ners;
        nc.alpha = cfg.alpha;
        const int input_dim = sampler_input_dim(state_dim, action_dim, nc.restricted_features);
        return std::make_unique<NersSampler>(input_dim, nc, rng);
    }
    throw ConfigError("config: unknown sampler '" + cfg.sampler + "'");
}

namespace {

std::unique_ptr<Env> build_env(const ExperimentConfig& cfg) {
    return make_env(cfg.env, cfg.chain_states, cfg.chain_horizon, cfg.pendulum_horizon,
                    cfg.pendulum_streak, cfg.pointmass_horizon);
}

std::unique_ptr<Agent> build_agent(const ExperimentConfig& cfg, const EnvSpec& spec, Rng& rng) {
    if (cfg.agent == "q") {
        QAgentConfig qc;
        qc.hidden = cfg.agent_hidden;
        qc.lr = cfg.agent_lr;
        qc.gamma = cfg.gamma;
        qc.tau = cfg.tau;
        qc.soft_target = cfg.q_soft_target;
        qc.hard_update_interval = cfg.q_hard_interval;
        qc.eps_start = cfg.eps_start;
        qc.eps_end = cfg.eps_end;
        qc.eps_decay_steps = cfg.eps_decay_steps > 0 ? cfg.eps_decay_steps : cfg.total_steps / 2;
        return std::make_unique<QAgent>(spec.observation_dim, spec.action_space.num_actions, qc,
                                        rng);
    }
    ACAgentConfig ac;
    ac.hidden = cfg.agent_hidden;
    ac.actor_lr = cfg.agent_lr;
    ac.critic_lr = cfg.agent_lr;
    ac.gamma = cfg.gamma;
    ac.tau = cfg.tau;
    ac.policy_delay = cfg.policy_delay;
    ac.action_noise = cfg.action_noise;
    ac.target_noise = cfg.target_noise;
    ac.target_noise_clip = cfg.target_noise_clip;
    return std::make_unique<ACAgent>(spec.observation_dim, spec.action_space.dim, ac, rng);
}

Vec random_action(const EnvSpec& spec, Rng& rng) {
    if (spec.action_space.discrete)
        return {static_cast<double>(rng.uniform_index(spec.action_space.num_actions))};
    Vec a(spec.action_space.dim);
    for (double& v : a) v = rng.uniform(spec.action_space.low, spec.action_space.high);
    return a;
}

}  // namespace

RunLog run_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
    validate_config(cfg);
    std::filesystem::create_directories(cfg.out_dir);

    Rng rng(seed);
    std::unique_ptr<Env> env = build_env(cfg);
    const EnvSpec spec = env->spec();
    std::unique_ptr<Agent> agent = build_agent(cfg, spec, rng);
    const int action_dim = spec.action_space.discrete ? 1 : spec.action_space.dim;

    ReplayConfig rc;
    rc.capacity = cfg.buffer_capacity;
    rc.state_dim = spec.observation_dim;
    rc.action_dim = action_dim;
    rc.gamma = cfg.gamma;
    rc.max_normalize_weights = !cfg.raw_weights;
    rc.stratified = cfg.stratified;
    ReplayBuffer buffer(rc);

    std::unique_ptr<Sampler> sampler = make_sampler(cfg, spec.observation_dim, action_dim, rng);

    RunLog log;
    Vec state = env->reset(rng);
    double episode_return = 0.0;
    std::optional<double> prev_train_return;
    std::optional<double> prev_eval_return;
    double latest_eval_delta = 0.0;

    const auto flush = [&] {
        write_curves_csv(log, curves_path(cfg, seed));
        write_samples_csv(log, samples_path(cfg, seed));
    };

    try {
        for (long t = 1; t <= cfg.total_steps; ++t) {
            const Vec action = (t <= cfg.initial_random_steps)
                                   ? random_action(spec, rng)
                                   : agent->act(state, /*explore=*/true, rng);
            const StepResult step = env->step(action);
            Transition tr;
            tr.state = state;
            tr.action = action;
            tr.reward = step.reward;
            tr.next_state = step.next_state;
            tr.done = step.done;
            tr.timestep = static_cast<std::uint64_t>(t);
            buffer.push(tr);
            episode_return += step.reward;
            state = step.next_state;

            if (t > cfg.initial_random_steps &&
                buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
                const ValueOracle oracle = agent->value_oracle();
                for (int g = 0; g < cfg.gradient_steps; ++g) {
                    SampledBatch batch = sampler->draw(buffer, cfg.batch_size, cfg.alpha,
                                                       beta_at(cfg, t), oracle, rng);
                    agent->train_step(batch, rng);
                    const std::vector<double> scores = sampler->score(batch.features);
                    if (sampler->updates_priorities()) {
                        buffer.update_priorities(batch, scores, cfg.alpha);
                        if (cfg.audit && buffer.audit_probabilities(batch.indices) > 1e-9)
                            throw std::logic_error("priority audit failed");
                    }
                    sampler->record_sampled(batch.indices);
                    if (g == 0 && t % cfg.stats_interval == 0) {
                        SampleStatsRow row = stats_snapshot(batch, oracle, cfg.gamma);
                        row.step = t;
                        log.samples.push_back(row);
                    }
                }
            }

            if (t % cfg.eval_interval == 0) {
                Rng eval_rng = rng.fork();
                std::unique_ptr<Env> eval_env = env->clone();
                const double ret = evaluate(*agent, *eval_env, cfg.eval_episodes, eval_rng);
                latest_eval_delta = compute_replay_reward(ret, prev_eval_return);
                log.curves.push_back({t, ret, latest_eval_delta});
                prev_eval_return = ret;
            }

            if (step.done) {
                const double replay_reward =
                    cfg.ners_star ? compute_replay_reward(episode_return, prev_train_return)
                                  : latest_eval_delta;
                const ValueOracle oracle = agent->value_oracle();
                sampler->end_of_episode(replay_reward, buffer, oracle, rng);
                prev_train_return = episode_return;
                episode_return = 0.0;
                state = env->reset(rng);
            }
        }
    } catch (const DivergenceError&) {
        flush();
        throw;
    }

    if (!log.curves.empty()) log.final_return = log.curves.back().mean_return;
    flush();
    return log;
}

std::vector<SweepResult> sweep(const ExperimentConfig& base,
                               const std::vector<std::string>& samplers) {
    struct Job {
        std::string sampler;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const std::string& s : samplers)
        for (std::uint64_t seed : base.seeds) jobs.push_back({s, seed});

    std::vector<SweepResult> results(jobs.size());
#pragma omp parallel for schedule(dynamic) if (kernels::parallel_enabled())
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        SweepResult& r = results[j];
        r.sampler = jobs[j].sampler;
        r.seed = jobs[j].seed;
        try {
            const ExperimentConfig cfg = with_sampler(base, jobs[j].sampler);
            const RunLog log = run_experiment(cfg, jobs[j].seed);
            r.ok = true;
            r.final_return = log.final_return;
        } catch (const DivergenceError& e) {
            r.diverged = true;
            r.error = e.what();
        } catch (const std::exception& e) {
            r.error = e.what();
        }
    }
    return results;
}

double curve_auc(const std::vector<CurveRow>& curve) {
    if (curve.empty()) return 0.0;
    if (curve.size() == 1) return curve[0].mean_return;
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const double dx = static_cast<double>(curve[i].step - curve[i - 1].step);
        area += 0.5 * (curve[i].mean_return + curve[i - 1].mean_return) * dx;
    }
    const double span = static_cast<double>(curve.back().step - curve.front().step);
    return span > 0.0 ? area / span : curve.back().mean_return;
}

ComparisonTable compare(const std::vector<ExperimentConfig>& configs) {
    if (configs.empty()) throw ConfigError("compare: no configs given");
    for (const ExperimentConfig& cfg : configs) {
        if (cfg.env != configs[0].env)
            throw ConfigError("compare: configs must share the same env");
        if (cfg.total_steps != configs[0].total_steps)
            throw ConfigError("compare: configs must share total_steps");
    }
    ComparisonTable table;
    for (const ExperimentConfig& cfg : configs) {
        std::vector<double> finals, aucs;
        for (std::uint64_t seed : cfg.seeds) {
            const std::vector<CurveRow> curve = read_curves_csv(curves_path(cfg, seed));
            if (curve.empty()) throw std::runtime_error("compare: empty curve for seed " +
                                                        std::to_string(seed));
            finals.push_back(curve.back().mean_return);
            aucs.push_back(curve_auc(curve));
        }
        SamplerSummary s;
        s.sampler = cfg.sampler;
        s.final_mean = mean_of(finals);
        s.final_std = stdev_of(finals);
        s.auc_mean = mean_of(aucs);
        s.auc_std = stdev_of(aucs);
        table.rows.push_back(s);
    }
    return table;
}

void write_summary_csv(const ComparisonTable& table, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path);
    std::fprintf(f, "sampler,final_mean,final_std,auc_mean,auc_std\n");
    for (const SamplerSummary& s : table.rows)
        std::fprintf(f, "%s,%.17g,%.17g,%.17g,%.17g\n", s.sampler.c_str(), s.final_mean,
                     s.final_std, s.auc_mean, s.auc_std);
    std::fclose(f);
}

std::string format_table(const ComparisonTable& table) {
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-10s %14s %14s %14s %14s\n", "sampler", "final_mean",
                  "final_std", "auc_mean", "auc_std");
    out += buf;
    for (const SamplerSummary& s : table.rows) {
        std::snprintf(buf, sizeof(buf), "%-10s %14.4f %14.4f %14.4f %14.4f\n", s.sampler.c_str(),
                      s.final_mean, s.final_std, s.auc_mean, s.auc_std);
        out += buf;
    }
    return out;
}

ExperimentConfig with_sampler(ExperimentConfig cfg, const std::string& sampler) {
    cfg.sampler = sampler;
    return cfg;
}

}  // namespace ners
