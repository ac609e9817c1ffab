#pragma once

// Optical flow of a pinhole camera over a planar scene, and the
// size-divergence estimator used to validate the simulated divergence sensor.
//
// Image coordinates are non-dimensional (focal length 1). The camera frame has
// its Z axis along the optical axis, pointing at the scene, so W_C > 0 means
// the camera approaches the surface.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "divland/rng.hpp"

namespace divland::flow {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

struct ImagePoint {
    double x = 0.0;
    double y = 0.0;
};

struct Flow {
    double u = 0.0;
    double v = 0.0;
};

struct CameraState {
    Vec3 position;     // world frame, m
    Vec3 attitude;     // roll, pitch, yaw, rad
    Vec3 velocity;     // U_C, V_C, W_C in the camera frame, m/s
    Vec3 rates;        // p, q, r, rad/s
};

/// Plane Z_C = z0 + slope_x * X_C + slope_y * Y_C. Feature points are stored
/// in camera-frame coordinates at the reference instant.
struct PlanarScene {
    double z0 = 1.0;
    double slope_x = 0.0;
    double slope_y = 0.0;
    std::vector<Vec3> points;
};

struct FlowObservables {
    double ventral_x = 0.0;
    double ventral_y = 0.0;
    double scaled_x = 0.0;
    double scaled_y = 0.0;
    double scaled_z = 0.0;
    double divergence = 0.0;
};

/// Two synchronized sets of image points, at t - dt (previous) and t (current).
struct TrackedPointSet {
    std::vector<ImagePoint> previous;
    std::vector<ImagePoint> current;
    double dt = 0.0;
};

struct DivergenceEstimate {
    double value = 0.0;          // mean size divergence, estimator's own sign
    std::size_t pairs_used = 0;
};

inline constexpr std::size_t max_divergence_pairs = 100;

/// Depth of the scene point seen at image coordinate pt.
inline double depth_at(const PlanarScene& scene, ImagePoint pt)
{
    if (!(scene.z0 > 0.0)) {
        throw std::domain_error("planar scene distance z0 must be positive");
    }
    const double denom = 1.0 - scene.slope_x * pt.x - scene.slope_y * pt.y;
    if (!(denom > 0.0)) {
        throw std::domain_error("image point does not see the planar scene in front of the camera");
    }
    return scene.z0 / denom;
}

inline bool on_plane(const PlanarScene& scene, const Vec3& p, double tol = 1e-9)
{
    return std::abs(p.z - (scene.z0 + scene.slope_x * p.x + scene.slope_y * p.y)) <= tol;
}

inline FlowObservables observables(const CameraState& cam, const PlanarScene& scene)
{
    if (!(scene.z0 > 0.0)) {
        throw std::domain_error("planar scene distance z0 must be positive");
    }
    FlowObservables obs;
    obs.scaled_x = cam.velocity.x / scene.z0;
    obs.scaled_y = cam.velocity.y / scene.z0;
    obs.scaled_z = cam.velocity.z / scene.z0;
    obs.ventral_x = -obs.scaled_x;
    obs.ventral_y = -obs.scaled_y;
    obs.divergence = 2.0 * obs.scaled_z;
    return obs;
}

/// Rotational part of the flow; independent of scene structure.
inline Flow rotational_flow(ImagePoint pt, const Vec3& rates)
{
    const double p = rates.x;
    const double q = rates.y;
    const double r = rates.z;
    return {-q + r * pt.y + p * pt.x * pt.y - q * pt.x * pt.x,
            p - r * pt.x - q * pt.x * pt.y + p * pt.y * pt.y};
}

/// Full optical flow at an image point for a camera moving over the plane.
inline Flow flow_at_point(const CameraState& cam, const PlanarScene& scene, ImagePoint pt)
{
    const double depth = depth_at(scene, pt);
    const auto& vel = cam.velocity;
    const Flow rot = rotational_flow(pt, cam.rates);
    return {-vel.x / depth + vel.z / depth * pt.x + rot.u,
            -vel.y / depth + vel.z / depth * pt.y + rot.v};
}

inline Flow derotate(Flow flow, ImagePoint pt, const Vec3& rates)
{
    const Flow rot = rotational_flow(pt, rates);
    return {flow.u - rot.u, flow.v - rot.v};
}

inline double size_divergence(double length_previous, double length_current, double dt)
{
    if (!(length_previous > 0.0)) {
        throw std::domain_error("size divergence needs a positive baseline distance");
    }
    if (!(dt > 0.0)) {
        throw std::domain_error("size divergence needs dt > 0");
    }
    return (length_previous - length_current) / (length_previous * dt);
}

inline double distance(ImagePoint a, ImagePoint b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Picks up to `cap` distinct unordered pairs (i < j) out of n points. If all
/// pairs fit they are all used, in lexicographic order; otherwise a seeded
/// sample without replacement is drawn and returned sorted.
inline std::vector<std::pair<std::size_t, std::size_t>> select_pairs(std::size_t n, std::uint64_t seed,
                                                                       std::size_t cap = max_divergence_pairs)
{
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (n < 2) {
        return pairs;
    }
    const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;

    auto unrank = [n](std::uint64_t k) {
        // row i holds pairs (i, i+1..n-1)
        std::size_t i = 0;
        std::uint64_t row = n - 1;
        while (k >= row) {
            k -= row;
            ++i;
            --row;
        }
        return std::pair<std::size_t, std::size_t>{i, i + 1 + static_cast<std::size_t>(k)};
    };

    if (total <= cap) {
        pairs.reserve(total);
        for (std::uint64_t k = 0; k < total; ++k) {
            pairs.push_back(unrank(k));
        }
        return pairs;
    }

    // Floyd's sampling of `cap` distinct ranks from [0, total).
    auto rng = make_rng(derive_seed(seed, {stream::pairs}));
    std::unordered_set<std::uint64_t> chosen;
    std::vector<std::uint64_t> ranks;
    ranks.reserve(cap);
    for (std::uint64_t j = total - cap; j < total; ++j) {
        const std::uint64_t t = std::uniform_int_distribution<std::uint64_t>{0, j}(rng);
        const std::uint64_t pick = chosen.insert(t).second ? t : j;
        if (pick == j) {
            chosen.insert(j);
        }
        ranks.push_back(pick);
    }
    std::sort(ranks.begin(), ranks.end());
    pairs.reserve(cap);
    for (auto k : ranks) {
        pairs.push_back(unrank(k));
    }
    return pairs;
}

/// Mean size divergence over the selected point pairs. Positive when the
/// tracked pattern contracts, i.e. negative while the camera descends.
inline DivergenceEstimate estimate_divergence(const TrackedPointSet& pts, std::uint64_t seed = 0)
{
    if (pts.previous.size() != pts.current.size()) {
        throw std::domain_error("tracked point lists differ in length");
    }
    if (pts.previous.size() < 2) {
        throw std::domain_error("divergence estimation needs at least two tracked points");
    }
    if (!(pts.dt > 0.0)) {
        throw std::domain_error("divergence estimation needs dt > 0");
    }
    const auto pairs = select_pairs(pts.previous.size(), seed);
    double sum = 0.0;
    for (const auto& [i, j] : pairs) {
        sum += size_divergence(distance(pts.previous[i], pts.previous[j]),
                               distance(pts.current[i], pts.current[j]), pts.dt);
    }
    return {sum / static_cast<double>(pairs.size()), pairs.size()};
}

/// Converts the size-divergence estimate (relative image contraction rate) to
/// the flow divergence convention used by the rest of the library: positive
/// while approaching the surface, and equal to 2 * W_C / Z_0.
inline double divergence_from_size_estimate(double size_estimate) { return -2.0 * size_estimate; }

// --- synthetic scenes -----------------------------------------------------

/// Scatters n feature points uniformly over the image within +-half_fov
/// (tangent of the half field of view) and lifts them onto the plane.
inline PlanarScene make_planar_scene(double z0, double slope_x, double slope_y, std::size_t n, double half_fov,
                                     std::uint64_t seed)
{
    PlanarScene scene{z0, slope_x, slope_y, {}};
    auto rng = make_rng(seed);
    scene.points.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const ImagePoint pt{uniform(rng, -half_fov, half_fov), uniform(rng, -half_fov, half_fov)};
        const double z = depth_at(scene, pt);
        scene.points.push_back({pt.x * z, pt.y * z, z});
    }
    return scene;
}

inline ImagePoint project(const Vec3& p)
{
    if (!(p.z > 0.0)) {
        throw std::domain_error("point is not in front of the camera");
    }
    return {p.x / p.z, p.y / p.z};
}

/// Image positions of the scene points now and after the camera translates
/// with constant camera-frame velocity for dt (no rotation).
inline TrackedPointSet track_translation(const PlanarScene& scene, const Vec3& velocity, double dt)
{
    TrackedPointSet pts;
    pts.dt = dt;
    pts.previous.reserve(scene.points.size());
    pts.current.reserve(scene.points.size());
    for (const auto& p : scene.points) {
        pts.previous.push_back(project(p));
        pts.current.push_back(project({p.x - velocity.x * dt, p.y - velocity.y * dt, p.z - velocity.z * dt}));
    }
    return pts;
}

struct DescentCheck {
    double analytic = 0.0; // 2 * theta_z
    double estimate = 0.0; // converted size-divergence estimate
    double bias = 0.0;
    std::size_t points = 0;
    std::size_t pairs_used = 0;
};

/// Pure vertical descent over a tilted plane seen by a camera at rest in
/// rotation: camera-frame velocity (0, 0, theta_z * z0) for one frame of dt.
inline DescentCheck descent_check(double z0, double slope_x, double slope_y, double theta_z, double dt,
                                  std::size_t n, double half_fov, std::uint64_t seed)
{
    const auto scene = make_planar_scene(z0, slope_x, slope_y, n, half_fov, seed);
    const auto pts = track_translation(scene, {0.0, 0.0, theta_z * z0}, dt);
    const auto est = estimate_divergence(pts, derive_seed(seed, {stream::pairs}));
    DescentCheck c;
    c.analytic = 2.0 * theta_z;
    c.estimate = divergence_from_size_estimate(est.value);
    c.bias = c.estimate - c.analytic;
    c.points = n;
    c.pairs_used = est.pairs_used;
    return c;
}

} // namespace divland::flow
