// SPDX-License-Identifier: Apache-2.0
#include "msense/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "msense/core/constants.hpp"
#include "msense/core/rng.hpp"

namespace msense::scene {

namespace {

constexpr double kGeomEps = 1e-9;

double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }

} // namespace

// ---------------------------------------------------------------------------
// Facet

Vec3 Facet::normal() const {
    const Vec3 n = (corners[1] - corners[0]).cross(corners[2] - corners[0]);
    return n.normalized();
}

Vec3 Facet::centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : corners) c += p;
    return c / static_cast<double>(corners.size());
}

double Facet::area() const {
    // Fan triangulation from corner 0; valid for convex polygons.
    double a = 0.0;
    for (std::size_t i = 1; i + 1 < corners.size(); ++i) {
        a += 0.5 * ((corners[i] - corners[0]).cross(corners[i + 1] - corners[0])).norm();
    }
    return a;
}

double Facet::plane_distance(const Vec3& p) const { return normal().dot(p - corners[0]); }

bool Facet::contains(const Vec3& p) const {
    const Vec3 n = normal();
    // Convex polygon: p is inside iff it is on the same side of every edge.
    int sign = 0;
    for (std::size_t i = 0; i < corners.size(); ++i) {
        const Vec3& a = corners[i];
        const Vec3& b = corners[(i + 1) % corners.size()];
        const double s = n.dot((b - a).cross(p - a));
        if (std::abs(s) < kGeomEps) continue; // on an edge counts as inside
        const int si = s > 0 ? 1 : -1;
        if (sign == 0) {
            sign = si;
        } else if (si != sign) {
            return false;
        }
    }
    return true;
}

std::optional<double> Facet::raycast(const Vec3& origin, const Vec3& dir) const {
    const Vec3 n = normal();
    const double denom = n.dot(dir);
    if (std::abs(denom) < kGeomEps) return std::nullopt; // parallel
    const double s = n.dot(corners[0] - origin) / denom;
    if (s < kGeomEps) return std::nullopt;
    const Vec3 hit = origin + s * dir;
    if (!contains(hit)) return std::nullopt;
    return s * dir.norm();
}

// ---------------------------------------------------------------------------
// Trajectory

Pose Trajectory::pose_at(double t) const {
    if (keys.empty()) throw std::out_of_range("trajectory has no keyframes");
    if (t < t_begin() - 1e-12 || t > t_end() + 1e-12) {
        throw std::out_of_range("time outside trajectory span");
    }
    t = std::clamp(t, t_begin(), t_end());
    auto it = std::upper_bound(keys.begin(), keys.end(), t,
                               [](double v, const Keyframe& k) { return v < k.t; });
    Pose pose;
    pose.t = t;
    if (it == keys.begin()) {
        pose.p = keys.front().position;
        pose.R = keys.front().orientation.toRotationMatrix();
        return pose;
    }
    if (it == keys.end()) {
        pose.p = keys.back().position;
        pose.R = keys.back().orientation.toRotationMatrix();
        return pose;
    }
    const Keyframe& k1 = *it;
    const Keyframe& k0 = *(it - 1);
    const double span = k1.t - k0.t;
    const double u = span > 0 ? (t - k0.t) / span : 0.0;
    pose.p = (1.0 - u) * k0.position + u * k1.position;
    pose.R = k0.orientation.slerp(u, k1.orientation).toRotationMatrix();
    return pose;
}

Vec3 Trajectory::velocity_at(double t) const {
    if (keys.size() < 2) return Vec3::Zero();
    if (t < t_begin() - 1e-12 || t > t_end() + 1e-12) {
        throw std::out_of_range("time outside trajectory span");
    }
    t = std::clamp(t, t_begin(), t_end());
    auto it = std::upper_bound(keys.begin(), keys.end(), t,
                               [](double v, const Keyframe& k) { return v < k.t; });
    if (it == keys.begin()) ++it;
    if (it == keys.end()) --it;
    const Keyframe& k1 = *it;
    const Keyframe& k0 = *(it - 1);
    const double span = k1.t - k0.t;
    if (span <= 0) return Vec3::Zero();
    return (k1.position - k0.position) / span;
}

Trajectory Trajectory::fixed(const Vec3& p, double t0, double t1) {
    Trajectory traj;
    traj.keys.push_back({t0, p, Eigen::Quaterniond::Identity()});
    if (t1 > t0) traj.keys.push_back({t1, p, Eigen::Quaterniond::Identity()});
    return traj;
}

Trajectory Trajectory::line(const Vec3& from, const Vec3& to, double t0, double t1) {
    Trajectory traj;
    traj.keys.push_back({t0, from, Eigen::Quaterniond::Identity()});
    traj.keys.push_back({t1, to, Eigen::Quaterniond::Identity()});
    return traj;
}

// ---------------------------------------------------------------------------
// SceneSpec

double SceneSpec::wavelength() const { return kSpeedOfLight / carrier_frequency_hz; }

std::vector<std::string> SceneSpec::validate() const {
    std::vector<std::string> errors;
    if (!(carrier_frequency_hz > 0)) {
        errors.push_back("carrier_frequency must be > 0");
    }
    for (std::size_t i = 0; i < reflectors.size(); ++i) {
        const auto& f = reflectors[i];
        const std::string tag = "reflector[" + std::to_string(i) + "]";
        if (f.corners.size() < 3) {
            errors.push_back(tag + ": needs >= 3 corners");
            continue;
        }
        if (f.area() <= kGeomEps) {
            errors.push_back(tag + ": degenerate (area ~ 0)");
            continue;
        }
        const Vec3 n = f.normal();
        for (const auto& c : f.corners) {
            if (std::abs(n.dot(c - f.corners[0])) > 1e-6) {
                errors.push_back(tag + ": corners are not coplanar");
                break;
            }
        }
    }
    if (rx_trajectory.keys.empty()) {
        errors.push_back("rx_trajectory: needs >= 1 keyframe");
    }
    for (std::size_t i = 1; i < rx_trajectory.keys.size(); ++i) {
        if (!(rx_trajectory.keys[i].t > rx_trajectory.keys[i - 1].t)) {
            errors.push_back("rx_trajectory: timestamps must be strictly increasing (keyframe " +
                             std::to_string(i) + ")");
        }
    }
    if (!is_rotation(tx_pose.R)) {
        errors.push_back("tx_pose: orientation is not a rotation matrix");
    }
    if (shadowing_sigma_db < 0) {
        errors.push_back("shadowing_sigma_db must be >= 0");
    }
    return errors;
}

double SceneSpec::bounding_diameter() const {
    std::vector<Vec3> pts;
    pts.push_back(tx_pose.p);
    for (const auto& f : reflectors)
        for (const auto& c : f.corners) pts.push_back(c);
    for (const auto& s : scatterers) pts.push_back(s.position);
    for (const auto& k : rx_trajectory.keys) pts.push_back(k.position);
    double d = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, (pts[i] - pts[j]).norm());
    return d;
}

// ---------------------------------------------------------------------------
// Path generation

bool PathSet::has_los() const { return los() != nullptr; }

const Path* PathSet::los() const {
    for (const auto& p : paths)
        if (p.kind == PathKind::LineOfSight) return &p;
    return nullptr;
}

double PathSet::min_delay() const {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& p : paths) d = std::min(d, p.delay_s);
    return d;
}

namespace {

/// True when the open segment a->b is blocked by any facet. `skip` excludes
/// the reflecting facet itself (its reflection point lies on the plane).
bool segment_blocked(const SceneSpec& scene, const Vec3& a, const Vec3& b, int skip = -1) {
    const Vec3 d = b - a;
    const double len = d.norm();
    if (len < kGeomEps) return false;
    const Vec3 dir = d / len;
    for (std::size_t i = 0; i < scene.reflectors.size(); ++i) {
        if (static_cast<int>(i) == skip) continue;
        const auto hit = scene.reflectors[i].raycast(a, dir);
        if (hit && *hit > kGeomEps && *hit < len - kGeomEps) return true;
    }
    return false;
}

double shadowing_db(const SceneSpec& scene, double t) {
    if (scene.shadowing_sigma_db <= 0) return 0.0;
    const auto tick = static_cast<std::uint64_t>(
        std::llround(std::max(0.0, t) * scene.shadowing_rate_hz));
    Rng rng = Rng::substream(scene.shadowing_seed, "shadowing", tick);
    return scene.shadowing_sigma_db * rng.gaussian();
}

} // namespace

PathSet ground_truth_paths(const SceneSpec& scene, double t) {
    const Pose rx = scene.rx_trajectory.pose_at(t); // throws out_of_range if t outside span
    const Vec3 rx_vel = scene.rx_trajectory.velocity_at(t);
    const Vec3 tx = scene.tx_pose.p;
    const double lambda = scene.wavelength();
    const double ple = scene.path_loss_exponent;
    const double shadow_amp = db_to_amplitude(shadowing_db(scene, t));

    // Distance spreading factor with a configurable exponent; reduces to the
    // free-space 1/d at the default exponent 2.
    const auto spread = [&](double d) { return std::pow(std::max(d, kGeomEps), -ple / 2.0); };
    const auto arrival = [&](const Vec3& source_point) {
        return angles_from_unit(rx.R.transpose() * (source_point - rx.p).normalized());
    };
    // Doppler from the receiver's radial motion: nu = -f_c/c * dL/dt, with L
    // the total path length and only the Rx end moving.
    const auto doppler = [&](const Vec3& last_leg_source) {
        const Vec3 u = (rx.p - last_leg_source).normalized();
        const double dl_dt = u.dot(rx_vel);
        return -scene.carrier_frequency_hz / kSpeedOfLight * dl_dt;
    };

    PathSet out;
    out.t = t;

    // Line of sight.
    if (!segment_blocked(scene, tx, rx.p)) {
        const double d = (rx.p - tx).norm();
        Path p;
        p.kind = PathKind::LineOfSight;
        p.delay_s = d / kSpeedOfLight;
        p.gain = lambda / (4.0 * kPi) * spread(d) * shadow_amp;
        const Angles a = arrival(tx);
        p.azimuth_rad = a.azimuth;
        p.elevation_rad = a.elevation;
        p.doppler_hz = doppler(tx);
        out.paths.push_back(p);
    }

    // Single-bounce specular reflections (image method).
    for (std::size_t i = 0; i < scene.reflectors.size(); ++i) {
        const Facet& facet = scene.reflectors[i];
        const Vec3 n = facet.normal();
        const double side_tx = facet.plane_distance(tx);
        const double side_rx = facet.plane_distance(rx.p);
        if (side_tx * side_rx <= kGeomEps) continue; // must be on the same side
        const Vec3 image = tx - 2.0 * side_tx * n;
        const Vec3 seg = rx.p - image;
        const double seg_len = seg.norm();
        if (seg_len < kGeomEps) continue;
        // Reflection point: intersection of image->rx with the facet plane.
        const double denom = n.dot(seg);
        if (std::abs(denom) < kGeomEps) continue;
        const double s = n.dot(facet.corners[0] - image) / denom;
        if (s <= kGeomEps || s >= 1.0 - kGeomEps) continue;
        const Vec3 q = image + s * seg;
        if (!facet.contains(q)) continue;
        if (segment_blocked(scene, tx, q, static_cast<int>(i))) continue;
        if (segment_blocked(scene, q, rx.p, static_cast<int>(i))) continue;

        const double total_len = (q - tx).norm() + (rx.p - q).norm(); // == seg_len
        Path p;
        p.kind = PathKind::Reflection;
        p.source_index = static_cast<int>(i);
        p.delay_s = total_len / kSpeedOfLight;
        p.gain = db_to_amplitude(-facet.reflection_loss_db) * lambda / (4.0 * kPi) *
                 spread(total_len) * shadow_amp;
        const Angles a = arrival(q);
        p.azimuth_rad = a.azimuth;
        p.elevation_rad = a.elevation;
        // dL/dt for the image path: L = |rx - image|, only rx moves.
        p.doppler_hz = doppler(image);
        out.paths.push_back(p);
    }

    // Point scatterers, bistatic single bounce.
    for (std::size_t i = 0; i < scene.scatterers.size(); ++i) {
        const Scatterer& sc = scene.scatterers[i];
        if (segment_blocked(scene, tx, sc.position)) continue;
        if (segment_blocked(scene, sc.position, rx.p)) continue;
        const double d1 = (sc.position - tx).norm();
        const double d2 = (rx.p - sc.position).norm();
        if (d1 < kGeomEps || d2 < kGeomEps) continue;
        Path p;
        p.kind = PathKind::Scatter;
        p.source_index = static_cast<int>(i);
        p.delay_s = (d1 + d2) / kSpeedOfLight;
        // Bistatic radar amplitude: sqrt(sigma) * lambda / ((4 pi)^{3/2} d1 d2),
        // with gain_db read as 10*log10(sigma).
        p.gain = db_to_amplitude(sc.gain_db) * lambda / std::pow(4.0 * kPi, 1.5) * spread(d1) *
                 spread(d2) * shadow_amp;
        const Angles a = arrival(sc.position);
        p.azimuth_rad = a.azimuth;
        p.elevation_rad = a.elevation;
        p.doppler_hz = doppler(sc.position);
        out.paths.push_back(p);
    }

    return out;
}

Pose trajectory_pose(const SceneSpec& scene, double t) { return scene.rx_trajectory.pose_at(t); }

std::vector<double> ground_truth_ranges(const SceneSpec& scene, const Pose& sensor_pose,
                                        const std::vector<Vec3>& beam_dirs) {
    std::vector<double> ranges(beam_dirs.size(), kNoReturn);
    for (std::size_t b = 0; b < beam_dirs.size(); ++b) {
        if (std::abs(beam_dirs[b].norm() - 1.0) > 1e-6) {
            throw std::invalid_argument("beam direction must be a unit vector");
        }
        const Vec3 dir = sensor_pose.R * beam_dirs[b];
        double best = std::numeric_limits<double>::infinity();
        for (const auto& facet : scene.reflectors) {
            const auto hit = facet.raycast(sensor_pose.p, dir);
            if (hit && *hit < best) best = *hit;
        }
        if (std::isfinite(best)) ranges[b] = best;
    }
    return ranges;
}

} // namespace msense::scene
