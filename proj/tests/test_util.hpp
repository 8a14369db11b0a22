// Test-only oracles: chi-square tail probability, central finite differences,
// and value iteration for the chain task. Independent of the library paths
// they are used to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ners/tinynn.hpp"

namespace testutil {

// Regularized lower incomplete gamma P(a, x) by series expansion.
inline double gamma_p_series(double a, double x) {
    double sum = 1.0 / a;
    double term = sum;
    for (int n = 1; n < 500; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x) by Lentz continued fraction.
inline double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q: bad arguments");
    if (x == 0.0) return 1.0;
    return (x < a + 1.0) ? 1.0 - gamma_p_series(a, x) : gamma_q_cf(a, x);
}

// Upper-tail p-value of a chi-square statistic with df degrees of freedom.
inline double chi2_pvalue(double chi2, double df) { return gamma_q(df / 2.0, chi2 / 2.0); }

// Chi-square statistic of observed counts against expected probabilities.
inline double chi2_statistic(const std::vector<long>& counts,
                             const std::vector<double>& probs, long total) {
    double stat = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double expected = probs[i] * total;
        if (expected <= 0.0) continue;
        const double diff = counts[i] - expected;
        stat += diff * diff / expected;
    }
    return stat;
}

inline double central_diff(double* param, const std::function<double()>& f, double h = 1e-5) {
    const double orig = *param;
    *param = orig + h;
    const double fp = f();
    *param = orig - h;
    const double fm = f();
    *param = orig;
    return (fp - fm) / (2.0 * h);
}

inline double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-3});
    return std::abs(a - b) / denom;
}

// Applies fn(param_ptr, analytic_grad) over every parameter of the net,
// pairing each with the corresponding entry of g.
template <typename F>
void for_each_param(ners::Mlp& net, const ners::Gradients& g, F&& fn) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        for (std::size_t i = 0; i < net.layers[l].w.size(); ++i)
            fn(&net.layers[l].w.data[i], g.w[l].data[i]);
        for (std::size_t i = 0; i < net.layers[l].b.size(); ++i)
            fn(&net.layers[l].b[i], g.b[l][i]);
    }
}

// Max relative error between analytic gradients and central differences of
// the scalar function f over all parameters of net.
inline double max_grad_rel_err(ners::Mlp& net, const ners::Gradients& g,
                               const std::function<double()>& f, double h = 1e-5) {
    double worst = 0.0;
    for_each_param(net, g, [&](double* p, double analytic) {
        const double fd = central_diff(p, f, h);
        worst = std::max(worst, rel_err(fd, analytic));
    });
    return worst;
}

// Optimal policy/value of the n-state chain by value iteration: actions
// {0: left, 1: right}, reward 1.0 on arriving at the far end (absorbing).
struct ChainSolution {
    std::vector<int> greedy_action;
    std::vector<double> value;
};

inline ChainSolution chain_value_iteration(int n_states, double gamma) {
    std::vector<double> v(n_states, 0.0);
    for (int iter = 0; iter < 10000; ++iter) {
        double max_change = 0.0;
        for (int s = 0; s < n_states - 1; ++s) {
            double best = -1e18;
            for (int a = 0; a < 2; ++a) {
                const int next = std::clamp(s + (a == 1 ? 1 : -1), 0, n_states - 1);
                const double reward = next == n_states - 1 ? 1.0 : 0.0;
                const double q = reward + (next == n_states - 1 ? 0.0 : gamma * v[next]);
                best = std::max(best, q);
            }
            max_change = std::max(max_change, std::abs(best - v[s]));
            v[s] = best;
        }
        if (max_change < 1e-12) break;
    }
    ChainSolution sol;
    sol.value = v;
    sol.greedy_action.assign(n_states, 1);
    for (int s = 0; s < n_states - 1; ++s) {
        double best_q = -1e18;
        int best_a = 0;
        for (int a = 0; a < 2; ++a) {
            const int next = std::clamp(s + (a == 1 ? 1 : -1), 0, n_states - 1);
            const double reward = next == n_states - 1 ? 1.0 : 0.0;
            const double q = reward + (next == n_states - 1 ? 0.0 : gamma * v[next]);
            if (q > best_q) {
                best_q = q;
                best_a = a;
            }
        }
        sol.greedy_action[s] = best_a;
    }
    return sol;
}

}  // namespace testutil
