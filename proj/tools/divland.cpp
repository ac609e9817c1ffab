// divland: evolve, simulate, validate, map and flow-check subcommands.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 I/O error.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "divland/divland.hpp"

namespace {

using namespace divland;
using io::json;
namespace fs = std::filesystem;

constexpr int exit_usage = 2;
constexpr int exit_io = 3;

std::string utc_now()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    unsigned workers = 0;

    std::uint64_t seed_or(std::uint64_t fallback) const { return seed.value_or(fallback); }
    unsigned worker_count() const { return workers == 0 ? default_workers() : workers; }
};

// controller selection shared by simulate and map
struct ControllerArgs {
    std::string genome_path;
    std::optional<double> gain;
    double setpoint = 0.5;

    void add_to(CLI::App& cmd)
    {
        auto* g = cmd.add_option("--genome", genome_path, "genome JSON file");
        auto* k = cmd.add_option("--baseline-gain", gain, "proportional gain K of the baseline controller");
        cmd.add_option("--setpoint", setpoint, "baseline divergence set-point (1/s)")->capture_default_str();
        g->excludes(k);
    }

    bool has_genome() const { return !genome_path.empty(); }

    void require() const
    {
        if (!has_genome() && !gain) {
            throw io::InputError("either --genome or --baseline-gain is required");
        }
    }

    sim::BaselineController baseline() const { return {*gain, setpoint}; }

    json describe(const std::optional<neuro::Genome>& g) const
    {
        if (g) {
            return {{"type", "genome"}, {"genome", io::to_json(*g)}};
        }
        return {{"type", "baseline"}, {"gain", *gain}, {"setpoint", setpoint}};
    }
};

// --- evolve ------------------------------------------------------------------

struct EvolveArgs {
    std::string config_path;
    bool quiet = false;
};

int run_evolve(const Globals& g, const EvolveArgs& a)
{
    const std::string started = utc_now();
    io::RunConfig rc = io::parse_run_config(io::read_file(a.config_path));
    rc.evo.seed = g.seed_or(rc.evo.seed);
    const unsigned workers = g.workers != 0 ? g.workers : (rc.workers != 0 ? rc.workers : default_workers());
    const fs::path out = g.out;
    io::ensure_directory(out);

    const auto& c = rc.evo;
    auto archive = evo::evolve(c, workers, [&](const evo::GenerationRecord& rec) {
        if (!a.quiet && (rec.generation % 10 == 0 || rec.generation == c.generations)) {
            std::cerr << "generation " << rec.generation << '/' << c.generations << '\n';
        }
    });

    const auto nu = analysis::nu_series(archive);
    const json nu_meta{{"seed", c.seed},
                       {"reference", {nu.front().reference[0], nu.front().reference[1]}},
                       {"objectives", {"time_to_land", "final_speed"}},
                       {"generations", nu.size()}};

    io::write_outputs(out,
                      {{std::string{io::archive_file}, io::archive_jsonl(archive)},
                       {std::string{io::genomes_file}, io::genome_sidecar(archive)},
                       {"nu_series.csv", io::nu_series_csv(nu)},
                       {"nu_series.json", nu_meta.dump(2) + '\n'}},
                      {{"command", "evolve"}, {"seed", c.seed}, {"config", io::format_run_config(rc)}}, started,
                      utc_now());
    std::cout << "final front: " << archive.final_front().size() << " members, nu " << io::fmt9(nu.front().nu)
              << " -> " << io::fmt9(nu.back().nu) << '\n';
    return 0;
}

// --- simulate ----------------------------------------------------------------

struct SimulateArgs {
    ControllerArgs controller;
    double altitude = 4.0;
    bool sample = false;
    bool noiseless = false;
    std::optional<int> delay;
    std::optional<double> jitter, sigma_w, sigma_p, tau, frequency;
};

int run_simulate(const Globals& g, const SimulateArgs& a)
{
    const std::string started = utc_now();
    a.controller.require();
    if (!(a.altitude > sim::landing_height && a.altitude < sim::ceiling_height)) {
        throw io::InputError("--altitude must lie in (0.05, 15) m");
    }
    const std::uint64_t seed = g.seed_or(0);

    sim::SimParams p = sim::nominal_params();
    if (a.sample) {
        auto rng = make_rng(derive_seed(seed, {stream::params}));
        p = sim::sample_params(rng);
    }
    if (a.noiseless) {
        p.jitter_probability = 0.0;
        p.sigma_white = 0.0;
        p.sigma_proportional = 0.0;
    }
    if (a.delay) p.delay_samples = *a.delay;
    if (a.jitter) p.jitter_probability = *a.jitter;
    if (a.sigma_w) p.sigma_white = *a.sigma_w;
    if (a.sigma_p) p.sigma_proportional = *a.sigma_p;
    if (a.tau) p.thrust_time_constant = *a.tau;
    if (a.frequency) p.frequency = *a.frequency;
    try {
        sim::require_valid(p);
    } catch (const std::domain_error& e) {
        throw io::InputError(e.what());
    }

    std::optional<neuro::Genome> genome;
    if (a.controller.has_genome()) {
        genome = io::load_genome(a.controller.genome_path);
    }
    const std::uint64_t episode_seed = derive_seed(seed, {stream::episode});
    sim::Trajectory traj;
    if (genome) {
        neuro::NeuroController nc{*genome};
        traj = sim::run_episode(nc, a.altitude, p, episode_seed);
    } else {
        traj = sim::run_episode(a.controller.baseline(), a.altitude, p, episode_seed);
    }

    const json side = io::trajectory_sidecar(traj, p, seed, a.controller.describe(genome));
    io::write_outputs(g.out,
                      {{"trajectory.csv", io::trajectory_csv(traj)}, {"trajectory.json", side.dump(2) + '\n'}},
                      {{"command", "simulate"}, {"seed", seed}, {"config", side}}, started, utc_now());
    std::cout << sim::to_string(traj.termination) << " after " << io::fmt9(traj.elapsed) << " s, final h "
              << io::fmt9(traj.final_state().height) << " m, v " << io::fmt9(traj.final_state().velocity) << " m/s\n";
    return 0;
}

// --- validate ----------------------------------------------------------------

struct ValidateArgs {
    std::string archive_dir;
    std::size_t n = 250;
};

int run_validate(const Globals& g, const ValidateArgs& a)
{
    const std::string started = utc_now();
    if (a.n < 1) {
        throw io::InputError("--n must be >= 1");
    }
    const auto archive = io::load_archive(a.archive_dir);
    const auto front = archive.final_front();
    if (front.empty()) {
        throw io::InputError("archive has an empty final front");
    }
    std::vector<neuro::Genome> genomes;
    std::vector<std::uint64_t> ids;
    for (const auto& ind : front) {
        genomes.push_back(ind.genome);
        ids.push_back(ind.genome_id);
    }
    const std::uint64_t seed = g.seed_or(0);
    const auto report = analysis::validate(genomes, a.n, seed, archive.config.altitudes, g.worker_count(),
                                           archive.config.ranges);

    json draws = json::array();
    for (const auto& d : report.draws) {
        draws.push_back(io::to_json(d));
    }
    const json meta{{"seed", seed},
                    {"n", a.n},
                    {"altitudes_m", archive.config.altitudes},
                    {"genome_ids", ids},
                    {"percentiles", {0.25, 0.5, 0.75}},
                    {"draws", std::move(draws)}};
    io::write_outputs(g.out,
                      {{"validation.csv", io::validation_csv(report, ids)}, {"validation.json", meta.dump(2) + '\n'}},
                      {{"command", "validate"}, {"seed", seed}, {"config", {{"n", a.n}}}}, started, utc_now());
    std::cout << "validated " << ids.size() << " front members on " << a.n << " draws\n";
    return 0;
}

// --- map -----------------------------------------------------------------------

struct MapArgs {
    ControllerArgs controller;
    double d_min = -1.0, d_max = 2.0, dd_min = -4.0, dd_max = 4.0;
    std::size_t d_steps = 81, dd_steps = 81;
};

int run_map(const Globals& g, const MapArgs& a)
{
    const std::string started = utc_now();
    a.controller.require();
    if (!(a.d_min <= a.d_max) || !(a.dd_min <= a.dd_max) || a.d_steps < 1 || a.dd_steps < 1) {
        throw io::InputError("grid flags need min <= max and at least one step per axis");
    }
    analysis::MapGrid grid{analysis::linspace(a.d_min, a.d_max, a.d_steps),
                           analysis::linspace(a.dd_min, a.dd_max, a.dd_steps)};
    try {
        analysis::require_valid_grid(grid);
    } catch (const std::domain_error& e) {
        throw io::InputError(e.what());
    }

    std::optional<neuro::Genome> genome;
    if (a.controller.has_genome()) {
        genome = io::load_genome(a.controller.genome_path);
    }
    const auto map = genome ? analysis::steady_state_map(*genome, grid)
                            : analysis::steady_state_map(a.controller.baseline(), grid);

    const json meta{{"controller", a.controller.describe(genome)},
                    {"divergence_axis", grid.divergence},
                    {"divergence_rate_axis", grid.divergence_rate},
                    {"rows", "divergence"},
                    {"columns", "divergence_rate"},
                    {"nonconvergent", map.nonconvergent},
                    {"steady_state", {{"dt_s", neuro::steady_state_dt},
                                      {"tolerance", neuro::steady_state_tolerance},
                                      {"window", neuro::steady_state_window},
                                      {"max_steps", neuro::steady_state_max_steps}}}};
    io::write_outputs(g.out, {{"map.csv", io::map_csv(map)}, {"map.json", meta.dump(2) + '\n'}},
                      {{"command", "map"}, {"seed", g.seed_or(0)}, {"config", meta}}, started, utc_now());
    std::cout << map.thrust.size() << 'x' << grid.divergence_rate.size() << " map, " << map.nonconvergent
              << " non-convergent cells\n";
    return 0;
}

// --- flow-check --------------------------------------------------------------

struct FlowArgs {
    double theta_z = 0.5;
    std::vector<double> dts{0.005};
    double z0 = 2.0;
    double slope_x = 0.0, slope_y = 0.0;
    std::size_t points = 150;
    double half_fov = 0.5;
};

int run_flow_check(const Globals& g, const FlowArgs& a)
{
    const std::string started = utc_now();
    const std::uint64_t seed = g.seed_or(0);
    if (a.points < 2 || !(a.z0 > 0.0) || !(a.half_fov > 0.0)) {
        throw io::InputError("degenerate scene: need >= 2 points, z0 > 0 and half-fov > 0");
    }
    std::string csv = "dt,analytic_D,estimated_D,bias,points,pairs_used\n";
    json rows = json::array();
    for (double dt : a.dts) {
        flow::DescentCheck c;
        try {
            c = flow::descent_check(a.z0, a.slope_x, a.slope_y, a.theta_z, dt, a.points, a.half_fov, seed);
        } catch (const std::domain_error& e) {
            throw io::InputError(std::string{"degenerate scene: "} + e.what());
        }
        csv += io::fmt9(dt) + ',' + io::fmt9(c.analytic) + ',' + io::fmt9(c.estimate) + ',' + io::fmt9(c.bias) + ',' +
               std::to_string(c.points) + ',' + std::to_string(c.pairs_used) + '\n';
        std::cout << "dt " << io::fmt9(dt) << ": D " << io::fmt9(c.analytic) << ", D_hat " << io::fmt9(c.estimate)
                  << ", bias " << io::fmt9(c.bias) << ", " << c.pairs_used << " pairs from " << c.points
                  << " points\n";
    }
    const json meta{{"seed", seed},        {"theta_z_per_s", a.theta_z}, {"z0_m", a.z0},
                    {"slope_x", a.slope_x}, {"slope_y", a.slope_y},       {"points", a.points},
                    {"half_fov", a.half_fov}, {"dt_s", a.dts}};
    io::write_outputs(g.out, {{"flow_check.csv", csv}, {"flow_check.json", meta.dump(2) + '\n'}},
                      {{"command", "flow-check"}, {"seed", seed}, {"config", meta}}, started, utc_now());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Divergence-based landing: neuroevolution, simulation and analysis"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "master seed");
    app.add_option("--out", g.out, "output directory")->capture_default_str();
    app.add_option("--workers", g.workers, "worker threads (0 = available parallelism)")->capture_default_str();

    EvolveArgs ev;
    auto* evolve = app.add_subcommand("evolve", "run (mu + lambda) NSGA-II neuroevolution");
    evolve->add_option("--config", ev.config_path, "run configuration (key = value)")->required();
    evolve->add_flag("--quiet", ev.quiet, "no progress output");

    SimulateArgs si;
    auto* simulate = app.add_subcommand("simulate", "fly one landing episode");
    si.controller.add_to(*simulate);
    simulate->add_option("--altitude", si.altitude, "initial height (m)")->capture_default_str();
    simulate->add_flag("--sample", si.sample, "draw sensor/plant parameters from the evolution ranges");
    simulate->add_flag("--noiseless", si.noiseless, "zero noise and jitter");
    simulate->add_option("--delay-samples", si.delay, "sensor delay L (samples)");
    simulate->add_option("--jitter-probability", si.jitter, "missed-frame probability");
    simulate->add_option("--sigma-w", si.sigma_w, "white noise std (1/s)");
    simulate->add_option("--sigma-p", si.sigma_p, "proportional noise std");
    simulate->add_option("--tau-thrust", si.tau, "thrust time constant (s)");
    simulate->add_option("--frequency", si.frequency, "control frequency (Hz)");

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "re-test the final Pareto front on random draws");
    validate->add_option("--archive", va.archive_dir, "directory written by evolve")->required();
    validate->add_option("--n", va.n, "number of parameter draws")->capture_default_str();

    MapArgs ma;
    auto* map = app.add_subcommand("map", "steady-state thrust over (D, dD)");
    ma.controller.add_to(*map);
    map->add_option("--d-min", ma.d_min)->capture_default_str();
    map->add_option("--d-max", ma.d_max)->capture_default_str();
    map->add_option("--d-steps", ma.d_steps)->capture_default_str();
    map->add_option("--dd-min", ma.dd_min)->capture_default_str();
    map->add_option("--dd-max", ma.dd_max)->capture_default_str();
    map->add_option("--dd-steps", ma.dd_steps)->capture_default_str();

    FlowArgs fa;
    auto* flow_check = app.add_subcommand("flow-check", "size-divergence estimate against the analytic value");
    flow_check->add_option("--theta-z", fa.theta_z, "scaled vertical velocity (1/s)")->capture_default_str();
    flow_check->add_option("--dt", fa.dts, "frame interval(s) (s)")->capture_default_str();
    flow_check->add_option("--z0", fa.z0, "distance to the plane (m)")->capture_default_str();
    flow_check->add_option("--slope-x", fa.slope_x)->capture_default_str();
    flow_check->add_option("--slope-y", fa.slope_y)->capture_default_str();
    flow_check->add_option("--points", fa.points, "tracked feature points")->capture_default_str();
    flow_check->add_option("--half-fov", fa.half_fov, "image half-width (normalized)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    try {
        if (*evolve) return run_evolve(g, ev);
        if (*simulate) return run_simulate(g, si);
        if (*validate) return run_validate(g, va);
        if (*map) return run_map(g, ma);
        if (*flow_check) return run_flow_check(g, fa);
    } catch (const io::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_io;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_io;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_usage;
}
