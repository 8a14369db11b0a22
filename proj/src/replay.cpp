#include "ners/replay.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ners {

Vec FeatureRow::flatten(bool restricted) const {
    if (restricted) return {reward, td_error_norm, timestep_norm};
    Vec out;
    out.reserve(state.size() + action.size() + next_state.size() + 4);
    out.insert(out.end(), state.begin(), state.end());
    out.insert(out.end(), action.begin(), action.end());
    out.push_back(reward);
    out.insert(out.end(), next_state.begin(), next_state.end());
    out.push_back(timestep_norm);
    out.push_back(td_error_norm);
    out.push_back(target_q_norm);
    return out;
}

double compute_td_error(const Transition& t, const ValueOracle& oracle, double gamma) {
    const double bootstrap = t.done ? 0.0 : gamma * oracle.bootstrap(t.next_state);
    return t.reward + bootstrap - oracle.q(t.state, t.action);
}

double importance_weight(double probability, std::size_t buffer_size, double beta) {
    return std::pow(1.0 / (static_cast<double>(buffer_size) * probability), beta);
}

ReplayBuffer::ReplayBuffer(const ReplayConfig& cfg)
    : cfg_(cfg),
      tree_(cfg.capacity),
      slots_(cfg.capacity),
      fresh_(cfg.capacity, 1),
      cached_td_(cfg.capacity, 0.0),
      cached_target_q_(cfg.capacity, 0.0) {
    if (cfg.state_dim <= 0) throw std::invalid_argument("ReplayBuffer: state_dim must be positive");
    if (cfg.action_dim <= 0) throw std::invalid_argument("ReplayBuffer: action_dim must be positive");
}

void ReplayBuffer::push(const Transition& t) {
    if (static_cast<int>(t.state.size()) != cfg_.state_dim ||
        static_cast<int>(t.next_state.size()) != cfg_.state_dim)
        throw std::domain_error("ReplayBuffer::push: state dimension mismatch");
    if (static_cast<int>(t.action.size()) != cfg_.action_dim)
        throw std::domain_error("ReplayBuffer::push: action dimension mismatch");
    const std::size_t slot = tree_.insert(1.0);
    slots_[slot] = t;
    fresh_[slot] = 1;
    cached_td_[slot] = 0.0;
    cached_target_q_[slot] = 0.0;
    global_step_ = std::max(global_step_, t.timestep);
    write_ = tree_.write_cursor();
}

FeatureRow ReplayBuffer::feature_for(std::size_t index, const ValueOracle& oracle) const {
    const Transition& t = transition(index);
    FeatureRow row;
    row.state = t.state;
    row.action = t.action;
    row.reward = t.reward;
    row.next_state = t.next_state;
    row.timestep_norm = global_step_ == 0
                            ? 0.0
                            : std::clamp(static_cast<double>(t.timestep) /
                                             static_cast<double>(global_step_),
                                         0.0, 1.0);
    if (fresh_[index]) {
        row.td_error_norm = 1.0;
        row.target_q_norm = 1.0;
    } else {
        const double td = compute_td_error(t, oracle, cfg_.gamma);
        const double target =
            t.reward + (t.done ? 0.0 : cfg_.gamma * oracle.bootstrap(t.next_state));
        row.td_error_norm = std::tanh(td);
        row.target_q_norm = std::tanh(target);
    }
    return row;
}

std::vector<FeatureRow> ReplayBuffer::features_for(const std::vector<std::size_t>& indices,
                                                   const ValueOracle& oracle) const {
    std::vector<FeatureRow> rows;
    rows.reserve(indices.size());
    for (std::size_t idx : indices) rows.push_back(feature_for(idx, oracle));
    return rows;
}

SampledBatch ReplayBuffer::batch_for(const std::vector<std::size_t>& indices, double beta,
                                     const ValueOracle& oracle) const {
    SampledBatch batch;
    batch.indices = indices;
    const double total = tree_.total();
    batch.probabilities.reserve(indices.size());
    batch.weights.reserve(indices.size());
    batch.features.reserve(indices.size());
    for (std::size_t idx : batch.indices) {
        const Transition& t = transition(idx);
        const double p = tree_.leaf(idx) / total;
        batch.probabilities.push_back(p);
        batch.weights.push_back(importance_weight(p, size(), beta));
        batch.done.push_back(t.done ? 1 : 0);

        const double td = compute_td_error(t, oracle, cfg_.gamma);
        const double target =
            t.reward + (t.done ? 0.0 : cfg_.gamma * oracle.bootstrap(t.next_state));
        batch.raw_td.push_back(td);
        batch.raw_target_q.push_back(target);
        batch.raw_q.push_back(oracle.q(t.state, t.action));

        FeatureRow row;
        row.state = t.state;
        row.action = t.action;
        row.reward = t.reward;
        row.next_state = t.next_state;
        row.timestep_norm = global_step_ == 0
                                ? 0.0
                                : std::clamp(static_cast<double>(t.timestep) /
                                                 static_cast<double>(global_step_),
                                             0.0, 1.0);
        if (fresh_[idx]) {
            row.td_error_norm = 1.0;
            row.target_q_norm = 1.0;
        } else {
            row.td_error_norm = std::tanh(td);
            row.target_q_norm = std::tanh(target);
        }
        batch.features.push_back(std::move(row));
    }
    if (cfg_.max_normalize_weights) {
        const double wmax = *std::max_element(batch.weights.begin(), batch.weights.end());
        if (wmax > 0.0)
            for (double& w : batch.weights) w /= wmax;
    }
    return batch;
}

SampledBatch ReplayBuffer::sample(std::size_t batch_size, double alpha, double beta,
                                  const ValueOracle& oracle, Rng& rng) const {
    (void)alpha;  // the tree already stores sigma^alpha
    if (size() == 0) throw std::runtime_error("ReplayBuffer::sample: buffer is empty");
    const std::vector<std::size_t> indices =
        cfg_.stratified ? tree_.sample_indices_stratified(batch_size, rng)
                        : tree_.sample_indices(batch_size, rng);
    return batch_for(indices, beta, oracle);
}

void ReplayBuffer::update_priorities(const SampledBatch& batch, const std::vector<double>& scores,
                                     double alpha) {
    if (scores.size() != batch.indices.size())
        throw std::invalid_argument("update_priorities: one score per index required");
    for (double s : scores)
        if (!(s > 0.0)) throw std::domain_error("update_priorities: scores must be positive");
    for (std::size_t i = 0; i < batch.indices.size(); ++i) {
        const std::size_t idx = batch.indices[i];
        tree_.update(idx, std::pow(scores[i], alpha));
        cached_td_[idx] = batch.raw_td[i];
        cached_target_q_[idx] = batch.raw_target_q[i];
        fresh_[idx] = 0;
    }
}

std::vector<double> ReplayBuffer::cached_rows3() const {
    std::vector<double> rows;
    rows.reserve(size() * 3);
    for (std::size_t i = 0; i < size(); ++i) {
        rows.push_back(fresh_[i] ? 1.0 : std::tanh(cached_td_[i]));
        rows.push_back(slots_[i].reward);
        rows.push_back(global_step_ == 0
                           ? 0.0
                           : std::clamp(static_cast<double>(slots_[i].timestep) /
                                            static_cast<double>(global_step_),
                                        0.0, 1.0));
    }
    return rows;
}

double ReplayBuffer::audit_probabilities(const std::vector<std::size_t>& indices) const {
    double linear_total = 0.0;
    for (std::size_t i = 0; i < size(); ++i) linear_total += tree_.leaf(i);
    double max_diff = 0.0;
    for (std::size_t idx : indices) {
        const double from_tree = tree_.leaf(idx) / tree_.total();
        const double from_scan = tree_.leaf(idx) / linear_total;
        max_diff = std::max(max_diff, std::abs(from_tree - from_scan));
    }
    return max_diff;
}

const Transition& ReplayBuffer::transition(std::size_t index) const {
    if (index >= size()) throw std::out_of_range("ReplayBuffer: index not occupied");
    return slots_[index];
}

bool ReplayBuffer::fresh(std::size_t index) const {
    if (index >= size()) throw std::out_of_range("ReplayBuffer: index not occupied");
    return fresh_[index] != 0;
}

namespace {
constexpr std::uint32_t kSnapshotMagic = 0x4253524E;  // "NRSB"

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void ReplayBuffer::save_snapshot(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_snapshot: cannot open " + path);
    write_pod(out, kSnapshotMagic);
    write_pod(out, std::uint32_t{1});
    write_pod(out, static_cast<std::uint64_t>(cfg_.capacity));
    write_pod(out, static_cast<std::uint64_t>(size()));
    write_pod(out, static_cast<std::uint32_t>(cfg_.state_dim));
    write_pod(out, static_cast<std::uint32_t>(cfg_.action_dim));
    write_pod(out, cfg_.gamma);
    write_pod(out, global_step_);
    write_pod(out, static_cast<std::uint64_t>(write_));
    for (std::size_t i = 0; i < size(); ++i) {
        const Transition& t = slots_[i];
        out.write(reinterpret_cast<const char*>(t.state.data()),
                  static_cast<std::streamsize>(t.state.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(t.action.data()),
                  static_cast<std::streamsize>(t.action.size() * sizeof(double)));
        write_pod(out, t.reward);
        out.write(reinterpret_cast<const char*>(t.next_state.data()),
                  static_cast<std::streamsize>(t.next_state.size() * sizeof(double)));
        write_pod(out, static_cast<std::uint8_t>(t.done ? 1 : 0));
        write_pod(out, t.timestep);
        write_pod(out, fresh_[i]);
        write_pod(out, cached_td_[i]);
        write_pod(out, cached_target_q_[i]);
    }
    for (std::size_t i = 0; i < size(); ++i) write_pod(out, tree_.leaf(i));
    if (!out) throw std::runtime_error("save_snapshot: write failed for " + path);
}

ReplayBuffer ReplayBuffer::load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_snapshot: cannot open " + path);
    std::uint32_t magic = 0, version = 0, state_dim = 0, action_dim = 0;
    std::uint64_t capacity = 0, count = 0, global_step = 0, write_cursor = 0;
    double gamma = 0.0;
    read_pod(in, magic);
    read_pod(in, version);
    read_pod(in, capacity);
    read_pod(in, count);
    read_pod(in, state_dim);
    read_pod(in, action_dim);
    read_pod(in, gamma);
    read_pod(in, global_step);
    read_pod(in, write_cursor);
    if (!in || magic != kSnapshotMagic || version != 1)
        throw std::runtime_error("load_snapshot: bad header in " + path);

    ReplayConfig cfg;
    cfg.capacity = capacity;
    cfg.state_dim = static_cast<int>(state_dim);
    cfg.action_dim = static_cast<int>(action_dim);
    cfg.gamma = gamma;
    ReplayBuffer buffer(cfg);

    std::vector<std::uint8_t> fresh(count);
    std::vector<double> cached_td(count), cached_target(count), priorities(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Transition t;
        t.state.resize(state_dim);
        t.action.resize(action_dim);
        t.next_state.resize(state_dim);
        in.read(reinterpret_cast<char*>(t.state.data()),
                static_cast<std::streamsize>(t.state.size() * sizeof(double)));
        in.read(reinterpret_cast<char*>(t.action.data()),
                static_cast<std::streamsize>(t.action.size() * sizeof(double)));
        read_pod(in, t.reward);
        in.read(reinterpret_cast<char*>(t.next_state.data()),
                static_cast<std::streamsize>(t.next_state.size() * sizeof(double)));
        std::uint8_t done = 0;
        read_pod(in, done);
        t.done = done != 0;
        read_pod(in, t.timestep);
        read_pod(in, fresh[i]);
        read_pod(in, cached_td[i]);
        read_pod(in, cached_target[i]);
        buffer.push(t);
    }
    for (std::uint64_t i = 0; i < count; ++i) read_pod(in, priorities[i]);
    if (!in) throw std::runtime_error("load_snapshot: truncated file " + path);
    for (std::uint64_t i = 0; i < count; ++i) {
        buffer.tree_.update(i, priorities[i]);
        buffer.fresh_[i] = fresh[i];
        buffer.cached_td_[i] = cached_td[i];
        buffer.cached_target_q_[i] = cached_target[i];
    }
    buffer.global_step_ = global_step;
    buffer.write_ = write_cursor;
    return buffer;
}

}  // namespace ners
