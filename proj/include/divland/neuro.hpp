#pragma once

// Fixed 2-8-1 neurocontrollers: feed-forward (NN), recurrent (RNN) and
// continuous-time recurrent (CTRNN) networks, their genomes and mutation.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "divland/rng.hpp"

namespace divland::neuro {

enum class Architecture { nn, rnn, ctrnn };

inline constexpr std::array<Architecture, 3> all_architectures{Architecture::nn, Architecture::rnn,
                                                               Architecture::ctrnn};

inline std::string_view to_string(Architecture a)
{
    switch (a) {
    case Architecture::nn: return "nn";
    case Architecture::rnn: return "rnn";
    case Architecture::ctrnn: return "ctrnn";
    }
    return "unknown";
}

inline std::optional<Architecture> parse_architecture(std::string_view s)
{
    for (auto a : all_architectures) {
        if (s == to_string(a)) {
            return a;
        }
    }
    return std::nullopt;
}

inline constexpr std::size_t n_inputs = 2;
inline constexpr std::size_t n_hidden = 8;
inline constexpr std::size_t n_neurons = n_inputs + n_hidden + 1;
inline constexpr std::size_t output_index = n_neurons - 1;

inline constexpr double weight_limit = 5.0;
inline constexpr double recurrent_limit = 1.0;
inline constexpr double tau_min = 0.005;
inline constexpr double tau_max = 5.0;

/// Bias placement follows each model: NN/RNN add a bias to every hidden and
/// output potential; the CTRNN biases the activation of every neuron that
/// has outgoing connections (inputs and hidden).
inline constexpr std::size_t bias_count(Architecture a) { return a == Architecture::ctrnn ? n_inputs + n_hidden : n_hidden + 1; }
inline constexpr std::size_t recurrent_count(Architecture a) { return a == Architecture::rnn ? n_hidden + 1 : 0; }
inline constexpr std::size_t tau_count(Architecture a) { return a == Architecture::ctrnn ? n_neurons : 0; }
inline constexpr std::size_t gene_count(Architecture a)
{
    return n_hidden * n_inputs + n_hidden + bias_count(a) + recurrent_count(a) + tau_count(a);
}

struct Genome {
    Architecture arch = Architecture::nn;
    std::array<double, n_hidden * n_inputs> input_weights{}; // [hidden * n_inputs + input]
    std::array<double, n_hidden> output_weights{};
    std::vector<double> bias;
    std::vector<double> recurrent;
    std::vector<double> tau;

    double input_weight(std::size_t hidden, std::size_t input) const { return input_weights[hidden * n_inputs + input]; }

    friend bool operator==(const Genome&, const Genome&) = default;
};

inline Genome zero_genome(Architecture arch)
{
    Genome g;
    g.arch = arch;
    g.bias.assign(bias_count(arch), 0.0);
    g.recurrent.assign(recurrent_count(arch), 0.0);
    g.tau.assign(tau_count(arch), tau_min);
    return g;
}

/// Empty string when every gene count and bound holds.
inline std::string genome_violation(const Genome& g)
{
    if (g.bias.size() != bias_count(g.arch) || g.recurrent.size() != recurrent_count(g.arch) ||
        g.tau.size() != tau_count(g.arch)) {
        return "gene counts do not match architecture " + std::string{to_string(g.arch)};
    }
    auto in = [](double x, double lo, double hi) { return std::isfinite(x) && x >= lo && x <= hi; };
    for (double w : g.input_weights) {
        if (!in(w, -weight_limit, weight_limit)) return "input weight outside [-5, 5]";
    }
    for (double w : g.output_weights) {
        if (!in(w, -weight_limit, weight_limit)) return "output weight outside [-5, 5]";
    }
    for (double b : g.bias) {
        if (!in(b, -weight_limit, weight_limit)) return "bias outside [-5, 5]";
    }
    for (double r : g.recurrent) {
        if (!in(r, -recurrent_limit, recurrent_limit)) return "recurrent weight outside [-1, 1]";
    }
    for (double t : g.tau) {
        if (!in(t, tau_min, tau_max)) return "time constant outside [0.005, 5]";
    }
    return {};
}

inline bool satisfies_invariants(const Genome& g) { return genome_violation(g).empty(); }

struct NetworkState {
    std::vector<double> potentials = std::vector<double>(n_neurons, 0.0);

    double output() const { return potentials[output_index]; }
    void reset() { std::fill(potentials.begin(), potentials.end(), 0.0); }
};

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

/// Advances the network one step with inputs (divergence, divergence rate)
/// and returns the output potential, read as commanded acceleration (m/s^2).
inline double step(const Genome& g, NetworkState& state, double divergence, double divergence_rate, double dt)
{
    if (state.potentials.size() != n_neurons || g.bias.size() != bias_count(g.arch) ||
        g.recurrent.size() != recurrent_count(g.arch) || g.tau.size() != tau_count(g.arch)) {
        throw std::domain_error("network state or genome dimensions do not match the 2-8-1 topology");
    }
    if (!(dt > 0.0)) {
        throw std::domain_error("network step needs dt > 0");
    }
    auto& y = state.potentials;
    const std::array<double, n_inputs> external{divergence, divergence_rate};

    switch (g.arch) {
    case Architecture::nn:
    case Architecture::rnn: {
        const bool recurrent = g.arch == Architecture::rnn;
        y[0] = external[0];
        y[1] = external[1];
        double out = 0.0;
        for (std::size_t i = 0; i < n_hidden; ++i) {
            double net = 0.0;
            for (std::size_t j = 0; j < n_inputs; ++j) {
                net += g.input_weight(i, j) * y[j];
            }
            double& h = y[n_inputs + i];
            h = (recurrent ? g.recurrent[i] * h : 0.0) + relu(net) + g.bias[i];
            out += g.output_weights[i] * h;
        }
        double& o = y[output_index];
        o = (recurrent ? g.recurrent[n_hidden] * o : 0.0) + out + g.bias[n_hidden];
        return o;
    }
    case Architecture::ctrnn: {
        // synchronous update: every neuron reads the previous potentials
        std::array<double, n_inputs + n_hidden> activation{};
        for (std::size_t j = 0; j < activation.size(); ++j) {
            activation[j] = std::tanh(y[j] + g.bias[j]);
        }
        auto relax = [&](std::size_t k, double drive) {
            y[k] += dt * (-y[k] + drive) / (dt + g.tau[k]);
        };
        for (std::size_t j = 0; j < n_inputs; ++j) {
            relax(j, external[j]);
        }
        for (std::size_t i = 0; i < n_hidden; ++i) {
            double net = 0.0;
            for (std::size_t j = 0; j < n_inputs; ++j) {
                net += g.input_weight(i, j) * activation[j];
            }
            relax(n_inputs + i, net);
        }
        double net = 0.0;
        for (std::size_t i = 0; i < n_hidden; ++i) {
            net += g.output_weights[i] * activation[n_inputs + i];
        }
        relax(output_index, net);
        return y[output_index];
    }
    }
    throw std::domain_error("unknown architecture");
}

/// Per-episode controller: a genome plus its own network state.
class NeuroController {
public:
    explicit NeuroController(const Genome& genome) : genome_{&genome} {}

    double operator()(double divergence, double divergence_rate, double dt)
    {
        return step(*genome_, state_, divergence, divergence_rate, dt);
    }

    const NetworkState& state() const { return state_; }

private:
    const Genome* genome_;
    NetworkState state_;
};

enum class GeneKind { weight, bias, recurrent, tau };

/// Visits every gene in a fixed order: input weights, output weights, biases,
/// recurrent weights, time constants.
template <typename G, typename F>
    requires std::same_as<std::remove_const_t<G>, Genome>
void for_each_gene(G& g, F&& f)
{
    for (auto& w : g.input_weights) f(w, GeneKind::weight);
    for (auto& w : g.output_weights) f(w, GeneKind::weight);
    for (auto& b : g.bias) f(b, GeneKind::bias);
    for (auto& r : g.recurrent) f(r, GeneKind::recurrent);
    for (auto& t : g.tau) f(t, GeneKind::tau);
}

inline Genome random_genome(Architecture arch, Rng& rng)
{
    Genome g = zero_genome(arch);
    const double log_lo = std::log(tau_min);
    const double log_hi = std::log(tau_max);
    for_each_gene(g, [&](double& v, GeneKind kind) {
        v = kind == GeneKind::tau ? std::exp(uniform(rng, log_lo, log_hi)) : uniform(rng, -1.0, 1.0);
        if (kind == GeneKind::tau) {
            v = std::clamp(v, tau_min, tau_max);
        }
    });
    return g;
}

inline constexpr double default_mutation_rate = 0.1;
inline constexpr double default_mutation_scale = 0.1;

/// Gaussian per-gene mutation. The step is sigma times the width of the
/// gene's legal range (log range for time constants), and the result is
/// clamped back into range.
inline Genome mutate(const Genome& parent, Rng& rng, double rate = default_mutation_rate,
                     double scale = default_mutation_scale)
{
    if (!(rate >= 0.0 && rate <= 1.0)) {
        throw std::domain_error("mutation rate must be in [0, 1]");
    }
    Genome child = parent;
    std::bernoulli_distribution pick{rate};
    std::normal_distribution<double> normal{0.0, 1.0};
    const double log_lo = std::log(tau_min);
    const double log_hi = std::log(tau_max);
    for_each_gene(child, [&](double& v, GeneKind kind) {
        if (!pick(rng)) {
            return;
        }
        const double z = normal(rng);
        switch (kind) {
        case GeneKind::weight:
        case GeneKind::bias:
            v = std::clamp(v + scale * 2.0 * weight_limit * z, -weight_limit, weight_limit);
            break;
        case GeneKind::recurrent:
            v = std::clamp(v + scale * 2.0 * recurrent_limit * z, -recurrent_limit, recurrent_limit);
            break;
        case GeneKind::tau:
            v = std::clamp(std::exp(std::log(v) + scale * (log_hi - log_lo) * z), tau_min, tau_max);
            break;
        }
    });
    return child;
}

inline constexpr double steady_state_dt = 0.025;
inline constexpr double steady_state_tolerance = 1e-6;
inline constexpr int steady_state_window = 20;
inline constexpr int steady_state_max_steps = 10000;

struct SteadyState {
    double output = 0.0;
    bool converged = false;
    int steps = 0;
};

/// Holds the inputs constant from a reset state and steps until the output
/// changes by less than the tolerance for a full window of steps.
inline SteadyState steady_state_response(const Genome& g, double divergence, double divergence_rate,
                                         NetworkState* final_state = nullptr)
{
    NetworkState state;
    SteadyState result;
    double previous = 0.0;
    int quiet = 0;
    for (int k = 1; k <= steady_state_max_steps; ++k) {
        const double out = step(g, state, divergence, divergence_rate, steady_state_dt);
        quiet = std::abs(out - previous) < steady_state_tolerance && k > 1 ? quiet + 1 : 0;
        previous = out;
        result.output = out;
        result.steps = k;
        if (quiet >= steady_state_window) {
            result.converged = true;
            break;
        }
    }
    if (final_state != nullptr) {
        *final_state = state;
    }
    return result;
}

} // namespace divland::neuro
