#pragma once

// File formats: genome JSON, trajectory CSV, run archives (JSON lines plus a
// genome sidecar), analysis CSVs, the flat key = value run configuration and
// the run manifest.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "divland/analysis.hpp"
#include "divland/evo.hpp"
#include "divland/flow_geometry.hpp"
#include "divland/neuro.hpp"
#include "divland/sim.hpp"

namespace divland::io {

using nlohmann::json;
namespace fs = std::filesystem;

/// Bad user input: configuration, genome files, flags. Maps to exit code 2.
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Filesystem failure. Maps to exit code 3.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- numbers ----------------------------------------------------------------

/// 9 significant digits, "nan"/"inf" for non-finite values.
inline std::string fmt9(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

/// Infinite values become null in JSON.
inline json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// --- files --------------------------------------------------------------------

inline std::string read_file(const fs::path& path)
{
    std::ifstream in{path, std::ios::binary};
    if (!in) {
        throw InputError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes through a temporary file and renames it into place.
inline void write_file_atomic(const fs::path& path, std::string_view content)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out{tmp, std::ios::binary | std::ios::trunc};
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw IoError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
    }
}

inline void ensure_directory(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory " + dir.string());
    }
}

inline std::string sha256_hex(std::string_view data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("sha256 failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return hex.str();
}

// --- simulation parameters ---------------------------------------------------

inline json to_json(const sim::SimParams& p)
{
    return {{"delay_samples", p.delay_samples},
            {"jitter_probability", p.jitter_probability},
            {"sigma_w_per_s", p.sigma_white},
            {"sigma_p_per_s", p.sigma_proportional},
            {"tau_thrust_s", p.thrust_time_constant},
            {"frequency_hz", p.frequency}};
}

inline sim::SimParams params_from_json(const json& j)
{
    sim::SimParams p;
    p.delay_samples = j.at("delay_samples").get<int>();
    p.jitter_probability = j.at("jitter_probability").get<double>();
    p.sigma_white = j.at("sigma_w_per_s").get<double>();
    p.sigma_proportional = j.at("sigma_p_per_s").get<double>();
    p.thrust_time_constant = j.at("tau_thrust_s").get<double>();
    p.frequency = j.at("frequency_hz").get<double>();
    return p;
}

// --- genomes --------------------------------------------------------------------

/// {arch, w1 (8x2), w2 (1x8), theta, r?, tau?}
inline json to_json(const neuro::Genome& g)
{
    json w1 = json::array();
    for (std::size_t i = 0; i < neuro::n_hidden; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < neuro::n_inputs; ++j) {
            row.push_back(g.input_weight(i, j));
        }
        w1.push_back(std::move(row));
    }
    json out{{"arch", neuro::to_string(g.arch)},
             {"w1", std::move(w1)},
             {"w2", json::array({json(std::vector<double>(g.output_weights.begin(), g.output_weights.end()))})},
             {"theta", g.bias}};
    if (!g.recurrent.empty()) {
        out["r"] = g.recurrent;
    }
    if (!g.tau.empty()) {
        out["tau"] = g.tau;
    }
    return out;
}

inline neuro::Genome genome_from_json(const json& j)
{
    try {
        const auto arch = neuro::parse_architecture(j.at("arch").get<std::string>());
        if (!arch) {
            throw InputError("genome: unknown arch '" + j.at("arch").get<std::string>() + "'");
        }
        neuro::Genome g = neuro::zero_genome(*arch);
        const auto& w1 = j.at("w1");
        if (!w1.is_array() || w1.size() != neuro::n_hidden) {
            throw InputError("genome: w1 must be an 8x2 array");
        }
        for (std::size_t i = 0; i < neuro::n_hidden; ++i) {
            if (!w1[i].is_array() || w1[i].size() != neuro::n_inputs) {
                throw InputError("genome: w1 must be an 8x2 array");
            }
            for (std::size_t k = 0; k < neuro::n_inputs; ++k) {
                g.input_weights[i * neuro::n_inputs + k] = w1[i][k].get<double>();
            }
        }
        const auto& w2 = j.at("w2");
        if (!w2.is_array() || w2.size() != 1 || !w2[0].is_array() || w2[0].size() != neuro::n_hidden) {
            throw InputError("genome: w2 must be a 1x8 array");
        }
        for (std::size_t i = 0; i < neuro::n_hidden; ++i) {
            g.output_weights[i] = w2[0][i].get<double>();
        }
        g.bias = j.at("theta").get<std::vector<double>>();
        g.recurrent = j.contains("r") ? j.at("r").get<std::vector<double>>() : std::vector<double>{};
        g.tau = j.contains("tau") ? j.at("tau").get<std::vector<double>>() : std::vector<double>{};
        if (const auto why = neuro::genome_violation(g); !why.empty()) {
            throw InputError("genome: " + why);
        }
        return g;
    } catch (const json::exception& e) {
        throw InputError(std::string{"genome: "} + e.what());
    }
}

inline neuro::Genome load_genome(const fs::path& path)
{
    try {
        return genome_from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw InputError("malformed genome file " + path.string() + ": " + e.what());
    }
}

// --- trajectories -------------------------------------------------------------

inline std::string trajectory_csv(const sim::Trajectory& traj)
{
    std::string out = "t,h,v,T,T_sp,D_true,D_obs,dD_obs,missed\n";
    for (const auto& r : traj.records) {
        out += fmt9(r.t) + ',' + fmt9(r.height) + ',' + fmt9(r.velocity) + ',' + fmt9(r.thrust) + ',' +
               fmt9(r.thrust_setpoint) + ',' + fmt9(r.true_divergence) + ',' + fmt9(r.observed_divergence) + ',' +
               fmt9(r.observed_divergence_rate) + ',' + (r.missed ? "1" : "0") + '\n';
    }
    return out;
}

inline json trajectory_sidecar(const sim::Trajectory& traj, const sim::SimParams& params, std::uint64_t seed,
                               const json& controller)
{
    const auto f = sim::fitness(traj);
    return {{"termination", sim::to_string(traj.termination)},
            {"elapsed_s", traj.elapsed},
            {"steps", traj.records.size()},
            {"initial_height_m", traj.initial_height},
            {"seed", seed},
            {"params", to_json(params)},
            {"controller", controller},
            {"fitness", {f.time_to_land, f.final_height, f.final_speed}}};
}

// --- run archives ---------------------------------------------------------------

inline json to_json(const evo::EvoConfig& c)
{
    const auto& r = c.ranges;
    return {{"architecture", neuro::to_string(c.arch)},
            {"generations", c.generations},
            {"mu", c.mu},
            {"lambda", c.lambda},
            {"altitudes_m", c.altitudes},
            {"mutation_rate", c.mutation_rate},
            {"mutation_scale", c.mutation_scale},
            {"seed", c.seed},
            {"ranges",
             {{"delay_samples", {r.delay_min, r.delay_max}},
              {"jitter_probability", {r.jitter_probability.lo, r.jitter_probability.hi}},
              {"sigma_w_per_s", {r.sigma_white.lo, r.sigma_white.hi}},
              {"sigma_p_per_s", {r.sigma_proportional.lo, r.sigma_proportional.hi}},
              {"tau_thrust_s", {r.thrust_time_constant.lo, r.thrust_time_constant.hi}},
              {"frequency_hz", {r.frequency.lo, r.frequency.hi}}}}};
}

inline evo::EvoConfig evo_config_from_json(const json& j)
{
    evo::EvoConfig c;
    c.arch = neuro::parse_architecture(j.at("architecture").get<std::string>()).value();
    c.generations = j.at("generations").get<std::size_t>();
    c.mu = j.at("mu").get<std::size_t>();
    c.lambda = j.at("lambda").get<std::size_t>();
    c.altitudes = j.at("altitudes_m").get<std::vector<double>>();
    c.mutation_rate = j.at("mutation_rate").get<double>();
    c.mutation_scale = j.at("mutation_scale").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& r = j.at("ranges");
    auto range = [&](const char* key) { return sim::Range{r.at(key)[0].get<double>(), r.at(key)[1].get<double>()}; };
    c.ranges.delay_min = r.at("delay_samples")[0].get<int>();
    c.ranges.delay_max = r.at("delay_samples")[1].get<int>();
    c.ranges.jitter_probability = range("jitter_probability");
    c.ranges.sigma_white = range("sigma_w_per_s");
    c.ranges.sigma_proportional = range("sigma_p_per_s");
    c.ranges.thrust_time_constant = range("tau_thrust_s");
    c.ranges.frequency = range("frequency_hz");
    return c;
}

/// One archive line: {gen, params, params_seed, individuals:[...]}.
inline std::string generation_line(const evo::GenerationRecord& rec, const evo::EvoConfig& c)
{
    json members = json::array();
    for (const auto& ind : rec.population) {
        const auto f = ind.fitness.value_or(sim::FitnessVector{});
        members.push_back({{"genome_id", ind.genome_id},
                           {"fitness", {f.time_to_land, f.final_height, f.final_speed}},
                           {"rank", ind.rank},
                           {"crowding", number_or_null(ind.crowding)},
                           {"eval_seed", ind.eval_seed}});
    }
    const json line{{"gen", rec.generation},
                    {"params", to_json(rec.params)},
                    {"params_seed", evo::params_seed(c, rec.generation)},
                    {"individuals", std::move(members)}};
    return line.dump() + '\n';
}

inline std::string archive_jsonl(const evo::RunArchive& a)
{
    std::string out;
    for (const auto& rec : a.generations) {
        out += generation_line(rec, a.config);
    }
    return out;
}

/// Sidecar: {config, genomes: {"<id>": genome}} with ids in ascending order.
inline std::string genome_sidecar(const evo::RunArchive& a)
{
    json genomes = json::object();
    for (const auto& [id, g] : a.genomes) {
        genomes[std::to_string(id)] = to_json(g);
    }
    const json doc{{"config", to_json(a.config)}, {"genomes", std::move(genomes)}};
    return doc.dump(1) + '\n';
}

inline constexpr std::string_view archive_file = "archive.jsonl";
inline constexpr std::string_view genomes_file = "genomes.json";

inline evo::RunArchive load_archive(const fs::path& dir)
{
    evo::RunArchive a;
    try {
        const json side = json::parse(read_file(dir / genomes_file));
        a.config = evo_config_from_json(side.at("config"));
        for (const auto& [key, g] : side.at("genomes").items()) {
            a.genomes.emplace(std::stoull(key), genome_from_json(g));
        }
        std::istringstream lines{read_file(dir / archive_file)};
        std::string line;
        while (std::getline(lines, line)) {
            if (line.empty()) {
                continue;
            }
            const json j = json::parse(line);
            evo::GenerationRecord rec;
            rec.generation = j.at("gen").get<std::size_t>();
            rec.params = params_from_json(j.at("params"));
            for (const auto& m : j.at("individuals")) {
                evo::Individual ind;
                ind.genome_id = m.at("genome_id").get<std::uint64_t>();
                const auto it = a.genomes.find(ind.genome_id);
                if (it == a.genomes.end()) {
                    throw InputError("archive references unknown genome " + std::to_string(ind.genome_id));
                }
                ind.genome = it->second;
                const auto f = m.at("fitness").get<std::array<double, 3>>();
                ind.fitness = sim::FitnessVector::from(f);
                ind.rank = m.at("rank").get<std::size_t>();
                ind.crowding = m.at("crowding").is_null() ? std::numeric_limits<double>::infinity()
                                                          : m.at("crowding").get<double>();
                ind.eval_seed = m.at("eval_seed").get<std::uint64_t>();
                ind.generation = rec.generation;
                rec.population.push_back(std::move(ind));
            }
            a.generations.push_back(std::move(rec));
        }
    } catch (const json::exception& e) {
        throw InputError("malformed archive in " + dir.string() + ": " + e.what());
    }
    if (a.generations.empty()) {
        throw InputError("archive in " + dir.string() + " has no generations");
    }
    return a;
}

// --- analysis outputs ------------------------------------------------------------

inline std::string nu_series_csv(const std::vector<analysis::NuResult>& detail)
{
    std::string out = "generation,nu,volume,length,members,nu_dominated\n";
    for (std::size_t g = 0; g < detail.size(); ++g) {
        const auto& d = detail[g];
        out += std::to_string(g) + ',' + fmt9(d.nu) + ',' + fmt9(d.volume) + ',' + fmt9(d.length) + ',' +
               std::to_string(d.members) + ',' + fmt9(d.dominated_ratio) + '\n';
    }
    return out;
}

inline std::string validation_csv(const analysis::ValidationReport& r, const std::vector<std::uint64_t>& ids)
{
    std::string out = "genome_id,n,f1_p25,f1_p50,f1_p75,f2_p25,f2_p50,f2_p75,f3_p25,f3_p50,f3_p75\n";
    for (std::size_t i = 0; i < r.quartiles.size(); ++i) {
        out += std::to_string(ids.at(i)) + ',' + std::to_string(r.evaluations[i].size());
        for (const auto& q : r.quartiles[i]) {
            out += ',' + fmt9(q.p25) + ',' + fmt9(q.p50) + ',' + fmt9(q.p75);
        }
        out += '\n';
    }
    return out;
}

/// Two axis rows (D then dD) followed by one matrix row per D value.
inline std::string map_csv(const analysis::SteadyStateMap& m)
{
    std::string out = "D_axis";
    for (double d : m.grid.divergence) out += ',' + fmt9(d);
    out += "\ndD_axis";
    for (double d : m.grid.divergence_rate) out += ',' + fmt9(d);
    out += '\n';
    for (std::size_t i = 0; i < m.thrust.size(); ++i) {
        for (std::size_t j = 0; j < m.thrust[i].size(); ++j) {
            if (j > 0) out += ',';
            out += fmt9(m.thrust[i][j]);
        }
        out += '\n';
    }
    return out;
}

// --- run configuration -------------------------------------------------------------

struct RunConfig {
    evo::EvoConfig evo;
    std::string out_dir = "out";
    unsigned workers = 0; // 0 = available parallelism
};

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string{s.substr(b, e - b + 1)};
}

inline double parse_double(const std::string& key, const std::string& v)
{
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw InputError("config field '" + key + "': expected a number, got '" + v + "'");
    }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v)
{
    try {
        std::size_t pos = 0;
        if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
        const auto x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw InputError("config field '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    std::stringstream ss{v};
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_double(key, trim(item)));
    }
    return out;
}

} // namespace detail

/// Parses the flat `key = value` format (`#` starts a comment). Unknown keys,
/// duplicate keys and out-of-range values are rejected with the field name.
inline RunConfig parse_run_config(std::string_view text)
{
    using namespace detail;
    RunConfig rc;
    auto& c = rc.evo;
    auto& r = c.ranges;
    std::set<std::string> seen;
    std::istringstream in{std::string{text}};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InputError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(std::string_view{line}.substr(0, eq));
        const std::string value = trim(std::string_view{line}.substr(eq + 1));
        if (!seen.insert(key).second) {
            throw InputError("config field '" + key + "' given twice");
        }

        if (key == "architecture") {
            const auto a = neuro::parse_architecture(value);
            if (!a) throw InputError("config field 'architecture': expected nn, rnn or ctrnn");
            c.arch = *a;
        } else if (key == "generations") {
            c.generations = parse_uint(key, value);
        } else if (key == "mu") {
            c.mu = parse_uint(key, value);
        } else if (key == "lambda") {
            c.lambda = parse_uint(key, value);
        } else if (key == "altitudes_m") {
            c.altitudes = parse_list(key, value);
        } else if (key == "mutation_rate") {
            c.mutation_rate = parse_double(key, value);
        } else if (key == "mutation_scale") {
            c.mutation_scale = parse_double(key, value);
        } else if (key == "seed") {
            c.seed = parse_uint(key, value);
        } else if (key == "workers") {
            rc.workers = static_cast<unsigned>(parse_uint(key, value));
        } else if (key == "out_dir") {
            rc.out_dir = value;
        } else if (key == "delay_samples_min") {
            r.delay_min = static_cast<int>(parse_uint(key, value));
        } else if (key == "delay_samples_max") {
            r.delay_max = static_cast<int>(parse_uint(key, value));
        } else if (key == "jitter_probability_min") {
            r.jitter_probability.lo = parse_double(key, value);
        } else if (key == "jitter_probability_max") {
            r.jitter_probability.hi = parse_double(key, value);
        } else if (key == "sigma_w_per_s_min") {
            r.sigma_white.lo = parse_double(key, value);
        } else if (key == "sigma_w_per_s_max") {
            r.sigma_white.hi = parse_double(key, value);
        } else if (key == "sigma_p_per_s_min") {
            r.sigma_proportional.lo = parse_double(key, value);
        } else if (key == "sigma_p_per_s_max") {
            r.sigma_proportional.hi = parse_double(key, value);
        } else if (key == "tau_thrust_s_min") {
            r.thrust_time_constant.lo = parse_double(key, value);
        } else if (key == "tau_thrust_s_max") {
            r.thrust_time_constant.hi = parse_double(key, value);
        } else if (key == "frequency_hz_min") {
            r.frequency.lo = parse_double(key, value);
        } else if (key == "frequency_hz_max") {
            r.frequency.hi = parse_double(key, value);
        } else {
            throw InputError("config: unknown field '" + key + "'");
        }
    }
    if (const auto why = evo::config_violation(c); !why.empty()) {
        throw InputError("config: " + why);
    }
    return rc;
}

/// Inverse of parse_run_config, used for the manifest's config snapshot.
inline std::string format_run_config(const RunConfig& rc)
{
    const auto& c = rc.evo;
    const auto& r = c.ranges;
    std::string alt;
    for (std::size_t i = 0; i < c.altitudes.size(); ++i) {
        alt += (i ? "," : "") + fmt9(c.altitudes[i]);
    }
    std::ostringstream o;
    o << "architecture = " << neuro::to_string(c.arch) << '\n'
      << "generations = " << c.generations << '\n'
      << "mu = " << c.mu << '\n'
      << "lambda = " << c.lambda << '\n'
      << "altitudes_m = " << alt << '\n'
      << "mutation_rate = " << fmt9(c.mutation_rate) << '\n'
      << "mutation_scale = " << fmt9(c.mutation_scale) << '\n'
      << "seed = " << c.seed << '\n'
      << "delay_samples_min = " << r.delay_min << '\n'
      << "delay_samples_max = " << r.delay_max << '\n'
      << "jitter_probability_min = " << fmt9(r.jitter_probability.lo) << '\n'
      << "jitter_probability_max = " << fmt9(r.jitter_probability.hi) << '\n'
      << "sigma_w_per_s_min = " << fmt9(r.sigma_white.lo) << '\n'
      << "sigma_w_per_s_max = " << fmt9(r.sigma_white.hi) << '\n'
      << "sigma_p_per_s_min = " << fmt9(r.sigma_proportional.lo) << '\n'
      << "sigma_p_per_s_max = " << fmt9(r.sigma_proportional.hi) << '\n'
      << "tau_thrust_s_min = " << fmt9(r.thrust_time_constant.lo) << '\n'
      << "tau_thrust_s_max = " << fmt9(r.thrust_time_constant.hi) << '\n'
      << "frequency_hz_min = " << fmt9(r.frequency.lo) << '\n'
      << "frequency_hz_max = " << fmt9(r.frequency.hi) << '\n';
    return o.str();
}

// --- manifest -----------------------------------------------------------------------

inline constexpr std::string_view tool_version = "0.1.0";

/// Writes `files` (name -> content) into `dir`, then a manifest listing their
/// checksums. Only the manifest carries timestamps.
inline void write_outputs(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& files,
                          const json& manifest_extra, const std::string& started_at, const std::string& finished_at)
{
    ensure_directory(dir);
    json checksums = json::object();
    for (const auto& [name, content] : files) {
        write_file_atomic(dir / name, content);
        checksums[name] = sha256_hex(content);
    }
    json manifest = manifest_extra;
    manifest["tool_version"] = tool_version;
    manifest["started_at"] = started_at;
    manifest["finished_at"] = finished_at;
    manifest["checksums"] = std::move(checksums);
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + '\n');
}

/// True when every checksum in the manifest matches the file on disk.
inline bool verify_manifest(const fs::path& dir)
{
    const json m = json::parse(read_file(dir / "manifest.json"));
    for (const auto& [name, sum] : m.at("checksums").items()) {
        if (sha256_hex(read_file(dir / name)) != sum.get<std::string>()) {
            return false;
        }
    }
    return true;
}

} // namespace divland::io
