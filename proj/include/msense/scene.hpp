// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "msense/core/geometry.hpp"

namespace msense::scene {

/// Finite planar reflector. Corners must be coplanar and are assumed to form
/// a convex polygon (counter-clockwise or clockwise, either works).
struct Facet {
    std::vector<Vec3> corners;
    double reflection_loss_db = 0.0;
    std::string label;

    Vec3 normal() const;   // unit normal (orientation from corner winding)
    Vec3 centroid() const;
    double area() const;
    /// Signed distance of a point to the facet plane.
    double plane_distance(const Vec3& p) const;
    /// True if a point already on the plane lies inside the polygon.
    bool contains(const Vec3& p_on_plane) const;
    /// Ray-facet intersection: returns distance along dir (>= 0) if hit.
    std::optional<double> raycast(const Vec3& origin, const Vec3& dir) const;
};

struct Scatterer {
    Vec3 position = Vec3::Zero();
    double gain_db = 0.0; // radar-cross-section-like bistatic gain
    std::string label;
};

struct Keyframe {
    double t = 0.0;
    Vec3 position = Vec3::Zero();
    Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

/// Piecewise-linear position, slerp orientation between keyframes.
struct Trajectory {
    std::vector<Keyframe> keys;

    double t_begin() const { return keys.front().t; }
    double t_end() const { return keys.back().t; }
    Pose pose_at(double t) const;     // throws std::out_of_range outside span
    Vec3 velocity_at(double t) const; // piecewise-constant segment velocity

    static Trajectory fixed(const Vec3& p, double t0 = 0.0, double t1 = 0.0);
    static Trajectory line(const Vec3& from, const Vec3& to, double t0, double t1);
};

struct SceneSpec {
    std::vector<Facet> reflectors;
    std::vector<Scatterer> scatterers;
    Pose tx_pose;
    Trajectory rx_trajectory;
    double carrier_frequency_hz = 28e9;

    // Generative large-scale overrides. The geometric model is free-space
    // (exponent 2); campaigns that need a different slope or lognormal
    // shadowing dial these. Shadowing is a pure function of (seed, t) so
    // path generation stays deterministic.
    double path_loss_exponent = 2.0;
    double shadowing_sigma_db = 0.0;
    std::uint64_t shadowing_seed = 0;
    double shadowing_rate_hz = 50.0; // shadowing sample-and-hold rate over t

    double wavelength() const;
    /// Collects every violated invariant (empty result = valid).
    std::vector<std::string> validate() const;
    /// Diameter of the bounding sphere of all geometry and trajectory keys.
    double bounding_diameter() const;
};

enum class PathKind { LineOfSight, Reflection, Scatter };

struct Path {
    double delay_s = 0.0;
    std::complex<double> gain; // linear amplitude (carrier phase applied by the synthesizer)
    double azimuth_rad = 0.0;  // arrival direction, Rx sensor frame
    double elevation_rad = 0.0;
    double doppler_hz = 0.0;
    PathKind kind = PathKind::LineOfSight;
    int source_index = -1; // reflectors[] or scatterers[] index; -1 for LoS
};

struct PathSet {
    double t = 0.0;
    std::vector<Path> paths;

    bool has_los() const;
    const Path* los() const;
    double min_delay() const;
};

/// Image-method path generation: LoS (occlusion-tested), one single-bounce
/// specular path per facet, one bounce per point scatterer.
PathSet ground_truth_paths(const SceneSpec& scene, double t);

/// Rx platform pose at time t (piecewise-linear / slerp interpolation).
Pose trajectory_pose(const SceneSpec& scene, double t);

inline constexpr double kNoReturn = -1.0; // marker for beams with no intersection

/// Per-beam nearest ray-facet intersection distance from a sensor pose.
/// Beam directions are unit vectors in the sensor frame; misses return
/// kNoReturn.
std::vector<double> ground_truth_ranges(const SceneSpec& scene, const Pose& sensor_pose,
                                        const std::vector<Vec3>& beam_dirs);

} // namespace msense::scene
