#pragma once

// Mutation-only (mu + lambda) evolution with NSGA-II survivor selection.
// Every generation draws one environment, re-evaluates the parents on it and
// evaluates the offspring on the same draw.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "divland/neuro.hpp"
#include "divland/nsga2.hpp"
#include "divland/parallel.hpp"
#include "divland/rng.hpp"
#include "divland/sim.hpp"

namespace divland::evo {

using sim::FitnessVector;
using sim::SimParams;
using neuro::Architecture;
using neuro::Genome;

struct EvoConfig {
    std::size_t generations = 250;
    std::size_t mu = 100;
    std::size_t lambda = 100;
    std::vector<double> altitudes{2.0, 4.0, 6.0, 8.0};
    double mutation_rate = neuro::default_mutation_rate;
    double mutation_scale = neuro::default_mutation_scale;
    std::uint64_t seed = 0;
    Architecture arch = Architecture::nn;
    sim::SimParamRanges ranges{};

    friend bool operator==(const EvoConfig&, const EvoConfig&) = default;
};

/// Empty string when the configuration is usable.
inline std::string config_violation(const EvoConfig& c)
{
    if (c.mu < 1) return "mu must be >= 1";
    if (c.altitudes.empty()) return "altitudes_m must not be empty";
    for (double h : c.altitudes) {
        if (!(h > sim::landing_height && h < sim::ceiling_height)) return "altitudes_m must lie in (0.05, 15)";
    }
    if (!(c.mutation_rate >= 0.0 && c.mutation_rate <= 1.0)) return "mutation_rate must lie in [0, 1]";
    if (!(c.mutation_scale >= 0.0) || !std::isfinite(c.mutation_scale)) return "mutation_scale must be >= 0";
    return sim::check_ranges(c.ranges);
}

/// Desk-scale preset: mu = lambda = 50 for 50 generations.
inline EvoConfig desk_preset(Architecture arch, std::uint64_t seed)
{
    EvoConfig c;
    c.generations = 50;
    c.mu = 50;
    c.lambda = 50;
    c.arch = arch;
    c.seed = seed;
    return c;
}

struct Individual {
    std::uint64_t genome_id = 0;
    Genome genome;
    std::optional<FitnessVector> fitness;
    std::size_t rank = 0;
    double crowding = 0.0;
    std::uint64_t eval_seed = 0;
    std::size_t generation = 0;
};

using Population = std::vector<Individual>;

/// Mean fitness over one episode per starting altitude.
inline FitnessVector evaluate(const Genome& genome, const SimParams& params, const std::vector<double>& altitudes,
                              std::uint64_t seed)
{
    if (altitudes.empty()) {
        throw std::domain_error("evaluation needs at least one altitude");
    }
    std::array<double, 3> sum{};
    for (std::size_t run = 0; run < altitudes.size(); ++run) {
        neuro::NeuroController controller{genome};
        const auto traj = sim::run_episode(controller, altitudes[run], params, derive_seed(seed, {run}));
        const auto f = sim::fitness(traj).values();
        for (std::size_t k = 0; k < 3; ++k) {
            sum[k] += f[k];
        }
    }
    const double n = static_cast<double>(altitudes.size());
    return {sum[0] / n, sum[1] / n, sum[2] / n};
}

inline std::uint64_t params_seed(const EvoConfig& c, std::size_t generation)
{
    return derive_seed(c.seed, {stream::params, generation});
}

inline SimParams generation_params(const EvoConfig& c, std::size_t generation)
{
    auto rng = make_rng(params_seed(c, generation));
    return sim::sample_params(rng, c.ranges);
}

inline std::uint64_t evaluation_seed(const EvoConfig& c, std::size_t generation, std::size_t slot)
{
    return derive_seed(c.seed, {stream::episode, generation, slot});
}

/// Evaluates every member on `params`; member i uses the stream for slot i.
inline void evaluate_all(Population& pop, const EvoConfig& c, std::size_t generation, const SimParams& params,
                         unsigned workers)
{
    parallel_for(pop.size(), workers, [&](std::size_t i) {
        auto& ind = pop[i];
        ind.eval_seed = evaluation_seed(c, generation, i);
        ind.generation = generation;
        ind.fitness = evaluate(ind.genome, params, c.altitudes, ind.eval_seed);
    });
}

inline std::vector<std::array<double, 3>> objective_matrix(const Population& pop)
{
    std::vector<std::array<double, 3>> f;
    f.reserve(pop.size());
    for (const auto& ind : pop) {
        if (!ind.fitness) {
            throw std::domain_error("individual " + std::to_string(ind.genome_id) + " has not been evaluated");
        }
        f.push_back(ind.fitness->values());
    }
    return f;
}

/// Sorts the population into fronts and writes rank and crowding back.
inline void assign_rank_and_crowding(Population& pop)
{
    const auto f = objective_matrix(pop);
    const auto r = nsga2::rank_and_crowd(std::span<const std::array<double, 3>>{f});
    for (std::size_t i = 0; i < pop.size(); ++i) {
        pop[i].rank = r.rank[i];
        pop[i].crowding = r.crowding[i];
    }
}

struct GenerationRecord {
    std::size_t generation = 0;
    SimParams params;
    Population population;
};

/// One (mu + lambda) generation. `next_id` hands out genome ids to offspring.
inline Population generation_step(const Population& parents, const EvoConfig& c, std::size_t generation,
                                  std::uint64_t& next_id, unsigned workers = 1, SimParams* drawn = nullptr)
{
    if (parents.size() != c.mu) {
        throw std::domain_error("population size differs from mu");
    }
    const SimParams params = generation_params(c, generation);
    if (drawn != nullptr) {
        *drawn = params;
    }

    Population pool = parents;
    pool.reserve(c.mu + c.lambda);
    auto rng = make_rng(derive_seed(c.seed, {stream::offspring, generation}));
    std::uniform_int_distribution<std::size_t> pick{0, c.mu - 1};
    for (std::size_t k = 0; k < c.lambda; ++k) {
        const auto& parent = parents[pick(rng)];
        Individual child;
        child.genome_id = next_id++;
        child.genome = neuro::mutate(parent.genome, rng, c.mutation_rate, c.mutation_scale);
        pool.push_back(std::move(child));
    }

    evaluate_all(pool, c, generation, params, workers);

    const auto f = objective_matrix(pool);
    nsga2::Ranking ranking;
    const auto keep = nsga2::select_survivors(std::span<const std::array<double, 3>>{f}, c.mu, &ranking);

    Population survivors;
    survivors.reserve(keep.size());
    for (auto i : keep) {
        Individual ind = pool[i];
        ind.rank = ranking.rank[i];
        ind.crowding = ranking.crowding[i];
        survivors.push_back(std::move(ind));
    }
    return survivors;
}

inline Population initial_population(const EvoConfig& c, std::uint64_t& next_id)
{
    auto rng = make_rng(derive_seed(c.seed, {stream::init}));
    Population pop(c.mu);
    for (auto& ind : pop) {
        ind.genome_id = next_id++;
        ind.genome = neuro::random_genome(c.arch, rng);
    }
    return pop;
}

struct RunArchive {
    EvoConfig config;
    std::vector<GenerationRecord> generations; // generations + 1 snapshots
    std::map<std::uint64_t, Genome> genomes;   // every genome that appears in a snapshot

    const Population& final_population() const { return generations.back().population; }

    /// Rank-0 members of the final snapshot.
    Population final_front() const
    {
        Population front;
        for (const auto& ind : final_population()) {
            if (ind.rank == 0) {
                front.push_back(ind);
            }
        }
        return front;
    }
};

using GenerationCallback = std::function<void(const GenerationRecord&)>;

inline RunArchive evolve(const EvoConfig& c, unsigned workers = 1, const GenerationCallback& on_generation = {})
{
    if (const auto why = config_violation(c); !why.empty()) {
        throw std::invalid_argument(why);
    }
    RunArchive archive;
    archive.config = c;
    archive.generations.reserve(c.generations + 1);

    auto remember = [&](GenerationRecord rec) {
        for (const auto& ind : rec.population) {
            archive.genomes.try_emplace(ind.genome_id, ind.genome);
        }
        if (on_generation) {
            on_generation(rec);
        }
        archive.generations.push_back(std::move(rec));
    };

    std::uint64_t next_id = 0;
    Population pop = initial_population(c, next_id);
    const SimParams first = generation_params(c, 0);
    evaluate_all(pop, c, 0, first, workers);
    assign_rank_and_crowding(pop);
    remember({0, first, pop});

    for (std::size_t gen = 1; gen <= c.generations; ++gen) {
        SimParams params;
        pop = generation_step(pop, c, gen, next_id, workers, &params);
        remember({gen, params, pop});
    }
    return archive;
}

} // namespace divland::evo
