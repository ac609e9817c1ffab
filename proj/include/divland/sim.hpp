#pragma once

// Vertical-axis quadrotor plant, stochastic divergence sensor, episode runner
// and the constant-divergence baseline controller.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "divland/rng.hpp"

namespace divland::sim {

inline constexpr double gravity = 9.81;
inline constexpr double thrust_min = -0.8 * gravity;
inline constexpr double thrust_max = 0.5 * gravity;

inline constexpr double landing_height = 0.05;
inline constexpr double ceiling_height = 15.0;
inline constexpr double max_episode_time = 30.0;
inline constexpr double controller_activation_delay = 1.0;

/// Closed interval used for the randomized environment.
struct Range {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x) const { return x >= lo && x <= hi; }
    bool within(const Range& outer) const { return lo >= outer.lo && hi <= outer.hi && lo <= hi; }

    friend bool operator==(const Range&, const Range&) = default;
};

/// One draw of the randomized environment.
struct SimParams {
    int delay_samples = 1;
    double jitter_probability = 0.0;
    double sigma_white = 0.0;        // 1/s
    double sigma_proportional = 0.0; // 1/s
    double thrust_time_constant = 0.02; // s
    double frequency = 40.0;         // Hz

    double dt() const { return 1.0 / frequency; }

    friend bool operator==(const SimParams&, const SimParams&) = default;
};

/// Sampling ranges of the environment. The defaults are the widest legal
/// ranges; narrower sub-ranges may be configured.
struct SimParamRanges {
    int delay_min = 1;
    int delay_max = 4;
    Range jitter_probability{0.0, 0.2};
    Range sigma_white{0.05, 0.15};
    Range sigma_proportional{0.0, 0.25};
    Range thrust_time_constant{0.005, 0.04};
    Range frequency{30.0, 50.0};

    friend bool operator==(const SimParamRanges&, const SimParamRanges&) = default;
};

inline const SimParamRanges& legal_ranges()
{
    static const SimParamRanges ranges{};
    return ranges;
}

/// Returns an empty string when `ranges` lies within the legal ranges,
/// otherwise a message naming the offending field.
inline std::string check_ranges(const SimParamRanges& ranges)
{
    const auto& legal = legal_ranges();
    if (ranges.delay_min < legal.delay_min || ranges.delay_max > legal.delay_max || ranges.delay_min > ranges.delay_max) {
        return "delay_samples range must lie within [1, 4]";
    }
    if (!ranges.jitter_probability.within(legal.jitter_probability)) {
        return "jitter_probability range must lie within [0, 0.2]";
    }
    if (!ranges.sigma_white.within(legal.sigma_white)) {
        return "sigma_w_per_s range must lie within [0.05, 0.15]";
    }
    if (!ranges.sigma_proportional.within(legal.sigma_proportional)) {
        return "sigma_p_per_s range must lie within [0, 0.25]";
    }
    if (!ranges.thrust_time_constant.within(legal.thrust_time_constant)) {
        return "tau_thrust_s range must lie within [0.005, 0.04]";
    }
    if (!ranges.frequency.within(legal.frequency)) {
        return "frequency_hz range must lie within [30, 50]";
    }
    return {};
}

/// Checks structural validity only (positive rates, probabilities in [0,1]).
/// Noise-free and jitter-free parameter sets are allowed for analysis runs.
inline void require_valid(const SimParams& p)
{
    if (p.delay_samples < 1) {
        throw std::domain_error("delay_samples must be >= 1");
    }
    if (!(p.jitter_probability >= 0.0 && p.jitter_probability <= 1.0)) {
        throw std::domain_error("jitter_probability must be in [0, 1]");
    }
    if (!(p.sigma_white >= 0.0) || !(p.sigma_proportional >= 0.0)) {
        throw std::domain_error("noise standard deviations must be >= 0");
    }
    if (!(p.thrust_time_constant > 0.0) || !std::isfinite(p.thrust_time_constant)) {
        throw std::domain_error("thrust time constant must be > 0");
    }
    if (!(p.frequency > 0.0) || !std::isfinite(p.frequency)) {
        throw std::domain_error("simulation frequency must be > 0");
    }
}

inline SimParams sample_params(Rng& rng, const SimParamRanges& ranges = legal_ranges())
{
    SimParams p;
    p.delay_samples = std::uniform_int_distribution<int>{ranges.delay_min, ranges.delay_max}(rng);
    p.jitter_probability = uniform(rng, ranges.jitter_probability.lo, ranges.jitter_probability.hi);
    p.sigma_white = uniform(rng, ranges.sigma_white.lo, ranges.sigma_white.hi);
    p.sigma_proportional = uniform(rng, ranges.sigma_proportional.lo, ranges.sigma_proportional.hi);
    p.thrust_time_constant = uniform(rng, ranges.thrust_time_constant.lo, ranges.thrust_time_constant.hi);
    p.frequency = uniform(rng, ranges.frequency.lo, ranges.frequency.hi);
    return p;
}

/// Representative mid-range conditions used for single nominal landings.
inline SimParams nominal_params()
{
    return {.delay_samples = 2,
            .jitter_probability = 0.1,
            .sigma_white = 0.1,
            .sigma_proportional = 0.1,
            .thrust_time_constant = 0.02,
            .frequency = 40.0};
}

/// Noise-free, jitter-free sensor with the given delay.
inline SimParams noiseless_params(int delay_samples = 1, double thrust_time_constant = 0.02, double frequency = 40.0)
{
    return {.delay_samples = delay_samples,
            .jitter_probability = 0.0,
            .sigma_white = 0.0,
            .sigma_proportional = 0.0,
            .thrust_time_constant = thrust_time_constant,
            .frequency = frequency};
}

struct VehicleState {
    double height = 0.0;   // m
    double velocity = 0.0; // m/s, positive up
    double thrust = 0.0;   // m/s^2 net of gravity, 0 = hover
};

inline double clamp_thrust(double t) { return std::clamp(t, thrust_min, thrust_max); }

/// Divergence of a purely vertical approach; positive while descending.
inline double true_divergence(const VehicleState& s)
{
    if (!(s.height > 0.0)) {
        throw std::domain_error("divergence is undefined at or below the ground");
    }
    return -2.0 * s.velocity / s.height;
}

/// First-order thrust response followed by semi-implicit Euler integration.
inline VehicleState step_dynamics(const VehicleState& s, double thrust_setpoint, double dt, double tau)
{
    if (!std::isfinite(s.height) || !std::isfinite(s.velocity) || !std::isfinite(s.thrust) ||
        !std::isfinite(thrust_setpoint) || !std::isfinite(dt) || !std::isfinite(tau)) {
        throw std::domain_error("step_dynamics received a non-finite input");
    }
    if (!(dt > 0.0) || !(tau > 0.0)) {
        throw std::domain_error("step_dynamics needs dt > 0 and tau > 0");
    }
    VehicleState next;
    next.thrust = clamp_thrust(s.thrust + dt * (clamp_thrust(thrust_setpoint) - s.thrust) / (dt + tau));
    next.velocity = s.velocity + next.thrust * dt;
    next.height = s.height + next.velocity * dt;
    return next;
}

struct Observation {
    double divergence = 0.0;
    double divergence_rate = 0.0;
    bool missed = false;
};

/// Delay line plus white, proportional and missed-frame noise on divergence.
class SensorChannel {
public:
    SensorChannel(const SimParams& params, std::uint64_t seed)
        : params_{(require_valid(params), params)},
          delay_line_(static_cast<std::size_t>(params.delay_samples), 0.0),
          rng_{seed}
    {
    }

    /// Feeds one true divergence sample and returns what the controller sees.
    Observation observe(double true_divergence, double dt)
    {
        delay_line_.push_back(true_divergence);
        const double delayed = delay_line_.front();
        delay_line_.pop_front();

        since_last_frame_ += dt;
        const bool missed = std::bernoulli_distribution{params_.jitter_probability}(rng_);
        if (missed) {
            return {last_.divergence, last_.divergence_rate, true};
        }
        double measured = delayed;
        if (params_.sigma_white > 0.0) {
            measured += std::normal_distribution<double>{0.0, params_.sigma_white}(rng_);
        }
        if (params_.sigma_proportional > 0.0) {
            measured += std::abs(delayed) * std::normal_distribution<double>{0.0, params_.sigma_proportional}(rng_);
        }
        last_.divergence_rate = (measured - last_.divergence) / since_last_frame_;
        last_.divergence = measured;
        since_last_frame_ = 0.0;
        return {last_.divergence, last_.divergence_rate, false};
    }

    const std::deque<double>& delay_line() const { return delay_line_; }
    Observation last() const { return last_; }

private:
    SimParams params_;
    std::deque<double> delay_line_;
    Rng rng_;
    Observation last_{};
    double since_last_frame_ = 0.0;
};

/// Constant-gain, constant-divergence controller. Observed divergence below
/// the set-point (descending too slowly) commands downward acceleration.
struct BaselineController {
    double gain = 1.5;
    double setpoint = 0.5;

    double operator()(double divergence, double /*divergence_rate*/, double /*dt*/) const
    {
        return -gain * (setpoint - divergence);
    }
};

inline constexpr BaselineController high_gain_baseline{8.0, 0.5}; // C1
inline constexpr BaselineController low_gain_baseline{1.5, 0.5};  // C2

enum class Termination { landed, ceiling, timeout };

inline std::string_view to_string(Termination t)
{
    switch (t) {
    case Termination::landed: return "landed";
    case Termination::ceiling: return "ceiling";
    case Termination::timeout: return "timeout";
    }
    return "unknown";
}

/// One simulation step. Time and vehicle state are taken at the end of the
/// step; sensor and command columns are the values applied during it.
struct StepRecord {
    double t = 0.0;
    double height = 0.0;
    double velocity = 0.0;
    double thrust = 0.0;
    double thrust_setpoint = 0.0;
    double true_divergence = 0.0;
    double observed_divergence = 0.0;
    double observed_divergence_rate = 0.0;
    bool missed = false;
};

struct Trajectory {
    double initial_height = 0.0;
    std::vector<StepRecord> records;
    Termination termination = Termination::timeout;
    double elapsed = 0.0;

    VehicleState final_state() const
    {
        if (records.empty()) {
            return {initial_height, 0.0, 0.0};
        }
        const auto& r = records.back();
        return {r.height, r.velocity, r.thrust};
    }
};

struct FitnessVector {
    double time_to_land = 0.0;
    double final_height = 0.0;
    double final_speed = 0.0;

    std::array<double, 3> values() const { return {time_to_land, final_height, final_speed}; }
    static FitnessVector from(const std::array<double, 3>& v) { return {v[0], v[1], v[2]}; }

    friend bool operator==(const FitnessVector&, const FitnessVector&) = default;
};

/// A policy maps (observed divergence, observed divergence rate, dt) to a
/// commanded acceleration in m/s^2.
template <typename P>
concept Policy = requires(P p, double d) {
    { p(d, d, d) } -> std::convertible_to<double>;
};

inline std::size_t max_episode_steps(double frequency)
{
    // smallest step count whose time reaches the limit
    return static_cast<std::size_t>(std::ceil(max_episode_time * frequency - 1e-9));
}

/// Runs one episode from a standstill at `initial_height`. The controller is
/// executed every step but its output is replaced by 0 until the activation
/// delay has elapsed.
template <Policy Controller>
Trajectory run_episode(Controller&& controller, double initial_height, const SimParams& params, std::uint64_t seed)
{
    if (!(initial_height > landing_height && initial_height < ceiling_height)) {
        throw std::domain_error("initial height must lie in (0.05, 15) m");
    }
    require_valid(params);

    const double dt = params.dt();
    const std::size_t limit = max_episode_steps(params.frequency);

    Trajectory traj;
    traj.initial_height = initial_height;
    traj.records.reserve(limit);

    SensorChannel sensor{params, seed};
    VehicleState state{initial_height, 0.0, 0.0};

    for (std::size_t i = 0;; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double divergence = true_divergence(state);
        const Observation obs = sensor.observe(divergence, dt);
        double command = controller(obs.divergence, obs.divergence_rate, dt);
        if (t < controller_activation_delay - 1e-12) {
            command = 0.0;
        }
        state = step_dynamics(state, command, dt, params.thrust_time_constant);

        const std::size_t steps = i + 1;
        const double t_next = static_cast<double>(steps) * dt;
        traj.records.push_back({t_next, state.height, state.velocity, state.thrust, command, divergence,
                                obs.divergence, obs.divergence_rate, obs.missed});

        if (state.height < landing_height) {
            traj.termination = Termination::landed;
        } else if (state.height > ceiling_height) {
            traj.termination = Termination::ceiling;
        } else if (steps >= limit) {
            traj.termination = Termination::timeout;
        } else {
            continue;
        }
        traj.elapsed = t_next;
        return traj;
    }
}

/// Timeouts report the nominal limit so the last step's overshoot at
/// non-integer frequencies does not leak into f1.
inline FitnessVector fitness(const Trajectory& traj)
{
    const auto s = traj.final_state();
    const double t = traj.termination == Termination::timeout ? max_episode_time : traj.elapsed;
    return {t, std::max(0.0, s.height), std::abs(s.velocity)};
}

} // namespace divland::sim
