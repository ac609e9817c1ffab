#pragma once

// Pareto-front diagnostics, robustness validation over many environments,
// and steady-state input/output maps of controllers.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "divland/evo.hpp"
#include "divland/neuro.hpp"
#include "divland/nsga2.hpp"
#include "divland/parallel.hpp"
#include "divland/sim.hpp"

namespace divland::analysis {

using Point2 = std::array<double, 2>;
using sim::FitnessVector;

/// Projection used for front diagnostics: (time to land, final speed).
inline Point2 live_objectives(const FitnessVector& f) { return {f.time_to_land, f.final_speed}; }

/// Non-dominated subset (duplicates collapsed), sorted by the first objective.
inline std::vector<Point2> pareto_filter(std::vector<Point2> points)
{
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    std::vector<Point2> front;
    double best_second = std::numeric_limits<double>::infinity();
    for (const auto& p : points) {
        // sorted by (x, y): a point survives iff its y beats every earlier y
        if (p[1] < best_second) {
            front.push_back(p);
            best_second = p[1];
        }
    }
    return front;
}

inline void require_inside(const std::vector<Point2>& front, const Point2& reference)
{
    for (const auto& p : front) {
        if (!(p[0] <= reference[0] && p[1] <= reference[1])) {
            throw std::domain_error("front member lies outside the reference box");
        }
    }
}

/// Area dominated by the front and bounded by the reference point.
inline double dominated_hypervolume(const std::vector<Point2>& points, const Point2& reference)
{
    const auto front = pareto_filter(points);
    require_inside(front, reference);
    double area = 0.0;
    for (std::size_t i = 0; i < front.size(); ++i) {
        const double next_x = i + 1 < front.size() ? front[i + 1][0] : reference[0];
        area += (next_x - front[i][0]) * (reference[1] - front[i][1]);
    }
    return area;
}

/// Length of the polyline through the front sorted by the first objective.
inline double front_length(const std::vector<Point2>& front)
{
    double s = 0.0;
    for (std::size_t i = 1; i < front.size(); ++i) {
        s += std::hypot(front[i][0] - front[i - 1][0], front[i][1] - front[i - 1][1]);
    }
    return s;
}

/// Area enclosed between the origin and the front: the union of the boxes
/// [0, f1] x [0, f3] spanned by the members. Shrinks as the front moves
/// toward the ideal point.
inline double enclosed_volume(const std::vector<Point2>& points)
{
    const auto front = pareto_filter(points);
    double area = 0.0;
    double previous_x = 0.0;
    for (const auto& p : front) {
        area += (p[0] - previous_x) * p[1];
        previous_x = p[0];
    }
    return area;
}

struct NuResult {
    double nu = 0.0;          // enclosed volume / length; smaller is better
    double volume = 0.0;
    double length = 0.0;
    double dominated = 0.0;   // hypervolume dominated inside the reference box
    double dominated_ratio = 0.0;
    std::size_t members = 0;
    Point2 reference{};
};

/// nu = enclosed volume / front length on the (f1, f3) projection, after
/// dominance filtering. Single-member fronts use a unit length. Members must
/// lie inside the reference box, which also bounds the dominated hypervolume
/// reported alongside.
inline NuResult nu_metric(const std::vector<Point2>& points, const Point2& reference)
{
    if (points.empty()) {
        throw std::domain_error("nu of an empty front");
    }
    const auto front = pareto_filter(points);
    NuResult r;
    r.reference = reference;
    r.members = front.size();
    r.dominated = dominated_hypervolume(front, reference);
    r.volume = enclosed_volume(front);
    r.length = front.size() == 1 ? 1.0 : front_length(front);
    r.nu = r.volume / r.length;
    r.dominated_ratio = r.dominated / r.length;
    return r;
}

/// Component-wise maximum over all points, scaled by `margin`. Zero maxima
/// fall back to 1 so that the box never collapses.
inline Point2 reference_point(const std::vector<std::vector<Point2>>& fronts, double margin = 1.1)
{
    Point2 hi{0.0, 0.0};
    for (const auto& front : fronts) {
        for (const auto& p : front) {
            hi[0] = std::max(hi[0], p[0]);
            hi[1] = std::max(hi[1], p[1]);
        }
    }
    for (auto& v : hi) {
        v = v > 0.0 ? v * margin : 1.0;
    }
    return hi;
}

/// (f1, f3) points of the rank-0 members of a population.
inline std::vector<Point2> population_front(const evo::Population& pop)
{
    std::vector<Point2> pts;
    for (const auto& ind : pop) {
        if (ind.rank == 0 && ind.fitness) {
            pts.push_back(live_objectives(*ind.fitness));
        }
    }
    return pts;
}

// --- percentiles and validation -------------------------------------------

/// Linear interpolation between order statistics (position p * (n - 1)).
inline double percentile(std::vector<double> values, double p)
{
    if (values.empty()) {
        throw std::domain_error("percentile of an empty sample");
    }
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct Quartiles {
    double p25 = 0.0;
    double p50 = 0.0;
    double p75 = 0.0;
};

struct ValidationReport {
    std::uint64_t seed = 0;
    std::vector<sim::SimParams> draws;                      // shared by every individual
    std::vector<std::vector<FitnessVector>> evaluations;    // [individual][draw]
    std::vector<std::array<Quartiles, 3>> quartiles;        // [individual][objective]
};

inline std::uint64_t validation_episode_seed(std::uint64_t seed, std::size_t draw)
{
    return derive_seed(seed, {stream::validation, draw});
}

/// Evaluates every genome on the same n environment draws and episode seeds.
inline ValidationReport validate(const std::vector<neuro::Genome>& genomes, std::size_t n, std::uint64_t seed,
                                 const std::vector<double>& altitudes = {2.0, 4.0, 6.0, 8.0}, unsigned workers = 1,
                                 const sim::SimParamRanges& ranges = sim::legal_ranges())
{
    if (n < 1) {
        throw std::domain_error("validation needs at least one draw");
    }
    ValidationReport report;
    report.seed = seed;
    auto rng = make_rng(derive_seed(seed, {stream::params}));
    report.draws.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        report.draws.push_back(sim::sample_params(rng, ranges));
    }

    report.evaluations.assign(genomes.size(), std::vector<FitnessVector>(n));
    parallel_for(genomes.size() * n, workers, [&](std::size_t job) {
        const std::size_t i = job / n;
        const std::size_t k = job % n;
        report.evaluations[i][k] =
            evo::evaluate(genomes[i], report.draws[k], altitudes, validation_episode_seed(seed, k));
    });

    report.quartiles.resize(genomes.size());
    for (std::size_t i = 0; i < genomes.size(); ++i) {
        for (std::size_t obj = 0; obj < 3; ++obj) {
            std::vector<double> col;
            col.reserve(n);
            for (const auto& f : report.evaluations[i]) {
                col.push_back(f.values()[obj]);
            }
            report.quartiles[i][obj] = {percentile(col, 0.25), percentile(col, 0.5), percentile(col, 0.75)};
        }
    }
    return report;
}

// --- steady-state maps ----------------------------------------------------

inline std::vector<double> linspace(double lo, double hi, std::size_t n)
{
    if (n == 0) {
        return {};
    }
    if (n == 1) {
        return {lo};
    }
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return v;
}

struct MapGrid {
    std::vector<double> divergence = linspace(-1.0, 2.0, 81);
    std::vector<double> divergence_rate = linspace(-4.0, 4.0, 81);
};

struct SteadyStateMap {
    MapGrid grid;
    std::vector<std::vector<double>> thrust; // [divergence][divergence rate], NaN when not converged
    std::size_t nonconvergent = 0;
};

inline void require_valid_grid(const MapGrid& g)
{
    for (const auto* axis : {&g.divergence, &g.divergence_rate}) {
        if (axis->empty()) {
            throw std::domain_error("steady-state grid axis is empty");
        }
        for (std::size_t i = 0; i < axis->size(); ++i) {
            if (!std::isfinite((*axis)[i]) || (i > 0 && (*axis)[i] < (*axis)[i - 1])) {
                throw std::domain_error("steady-state grid axis must be finite and sorted");
            }
        }
    }
}

/// Fills the map from a response function (D, dD) -> neuro::SteadyState.
template <typename Response>
SteadyStateMap steady_state_map_of(const MapGrid& grid, Response&& response)
{
    require_valid_grid(grid);
    SteadyStateMap map{grid, {}, 0};
    map.thrust.assign(grid.divergence.size(), std::vector<double>(grid.divergence_rate.size(), 0.0));
    for (std::size_t i = 0; i < grid.divergence.size(); ++i) {
        for (std::size_t j = 0; j < grid.divergence_rate.size(); ++j) {
            const neuro::SteadyState s = response(grid.divergence[i], grid.divergence_rate[j]);
            if (s.converged) {
                map.thrust[i][j] = s.output;
            } else {
                map.thrust[i][j] = std::numeric_limits<double>::quiet_NaN();
                ++map.nonconvergent;
            }
        }
    }
    return map;
}

inline SteadyStateMap steady_state_map(const neuro::Genome& genome, const MapGrid& grid = {})
{
    return steady_state_map_of(grid, [&](double d, double dd) { return neuro::steady_state_response(genome, d, dd); });
}

inline SteadyStateMap steady_state_map(const sim::BaselineController& controller, const MapGrid& grid = {})
{
    return steady_state_map_of(grid, [&](double d, double dd) {
        return neuro::SteadyState{controller(d, dd, neuro::steady_state_dt), true, 1};
    });
}

/// Least-squares slope of T_sp against D along the row-average of the map,
/// restricted to D within [lo, hi]. Non-convergent cells are skipped.
inline double divergence_gain(const SteadyStateMap& map, double lo, double hi)
{
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < map.grid.divergence.size(); ++i) {
        const double d = map.grid.divergence[i];
        if (d < lo || d > hi) {
            continue;
        }
        for (double t : map.thrust[i]) {
            if (!std::isfinite(t)) {
                continue;
            }
            sx += d;
            sy += t;
            sxx += d * d;
            sxy += d * t;
            ++n;
        }
    }
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    if (n < 2 || !(std::abs(denom) > 0.0)) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return (static_cast<double>(n) * sxy - sx * sy) / denom;
}

// --- nu trend across runs ---------------------------------------------------

struct TrendSeries {
    Point2 reference{};
    std::vector<std::vector<double>> per_run; // [run][generation]
    std::vector<double> mean;
    std::vector<double> min;
    std::vector<double> max;
};

/// Per-generation nu of each archive's rank-0 front, with a single reference
/// point shared by every run and generation.
inline TrendSeries trend(const std::vector<const evo::RunArchive*>& runs, double margin = 1.1)
{
    if (runs.empty()) {
        throw std::domain_error("trend needs at least one run archive");
    }
    std::vector<std::vector<Point2>> fronts;
    for (const auto* run : runs) {
        for (const auto& rec : run->generations) {
            fronts.push_back(population_front(rec.population));
        }
    }
    TrendSeries t;
    t.reference = reference_point(fronts, margin);

    std::size_t longest = 0;
    std::size_t k = 0;
    for (const auto* run : runs) {
        std::vector<double> series;
        series.reserve(run->generations.size());
        for (std::size_t g = 0; g < run->generations.size(); ++g) {
            series.push_back(nu_metric(fronts[k++], t.reference).nu);
        }
        longest = std::max(longest, series.size());
        t.per_run.push_back(std::move(series));
    }
    for (std::size_t g = 0; g < longest; ++g) {
        double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
        std::size_t count = 0;
        for (const auto& s : t.per_run) {
            if (g < s.size()) {
                sum += s[g];
                lo = std::min(lo, s[g]);
                hi = std::max(hi, s[g]);
                ++count;
            }
        }
        t.mean.push_back(sum / static_cast<double>(count));
        t.min.push_back(lo);
        t.max.push_back(hi);
    }
    return t;
}

inline TrendSeries trend(const evo::RunArchive& run, double margin = 1.1) { return trend({&run}, margin); }

/// nu detail for every snapshot of one run against the run's own reference.
inline std::vector<NuResult> nu_series(const evo::RunArchive& run, double margin = 1.1)
{
    std::vector<std::vector<Point2>> fronts;
    for (const auto& rec : run.generations) {
        fronts.push_back(population_front(rec.population));
    }
    const Point2 ref = reference_point(fronts, margin);
    std::vector<NuResult> out;
    out.reserve(fronts.size());
    for (const auto& f : fronts) {
        out.push_back(nu_metric(f, ref));
    }
    return out;
}

} // namespace divland::analysis
