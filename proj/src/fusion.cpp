// SPDX-License-Identifier: Apache-2.0
#include "msense/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "msense/core/constants.hpp"
#include "msense/core/errors.hpp"

namespace msense::fusion {

Eigen::Matrix4d Extrinsics::homogeneous() const {
    Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
    t.topLeftCorner<3, 3>() = rotation;
    t.topRightCorner<3, 1>() = translation;
    return t;
}

Extrinsics Extrinsics::inverse() const {
    Extrinsics inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(rotation.transpose() * translation);
    return inv;
}

Extrinsics operator*(const Extrinsics& a, const Extrinsics& b) {
    Extrinsics out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

std::vector<std::string> Extrinsics::validate() const {
    std::vector<std::string> errors;
    if (!is_rotation(rotation)) errors.push_back("extrinsics rotation is not in SO(3)");
    if (!translation.allFinite()) errors.push_back("extrinsics translation must be finite");
    return errors;
}

std::vector<std::string> Intrinsics::validate() const {
    std::vector<std::string> errors;
    if (!(fx > 0) || !(fy > 0)) errors.push_back("focal lengths must be > 0");
    if (width < 1 || height < 1) errors.push_back("image dimensions must be >= 1");
    if (cx < 0 || cx > width || cy < 0 || cy > height) {
        errors.push_back("principal point must lie inside the image");
    }
    return errors;
}

Vec3 lidar_to_camera(const Vec3& p_lidar, const Extrinsics& ext) {
    return ext.rotation * p_lidar + ext.translation;
}

Eigen::Vector2d project(const Vec3& p_camera, const Intrinsics& intr) {
    if (!(p_camera.z() > 0)) {
        throw std::domain_error("project: point is behind the camera (Z <= 0)");
    }
    return {intr.fx * p_camera.x() / p_camera.z() + intr.cx,
            intr.fy * p_camera.y() / p_camera.z() + intr.cy};
}

Vec3 back_project(const Eigen::Vector2d& pixel, double depth, const Intrinsics& intr) {
    return {(pixel.x() - intr.cx) / intr.fx * depth, (pixel.y() - intr.cy) / intr.fy * depth,
            depth};
}

DepthOverlay overlay(const lidar::PointCloud& cloud, const Extrinsics& ext,
                     const Intrinsics& intr) {
    {
        auto errors = ext.validate();
        auto ie = intr.validate();
        errors.insert(errors.end(), ie.begin(), ie.end());
        if (!errors.empty()) throw ValidationError("overlay: " + errors.front());
    }
    DepthOverlay out;
    out.width = intr.width;
    out.height = intr.height;

    // Z-buffer keyed by integer pixel; nearest depth wins.
    std::unordered_map<std::int64_t, std::size_t> zbuffer;
    std::vector<DepthOverlay::Point> candidates;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const Vec3 pc = lidar_to_camera(cloud.points[i], ext);
        if (!(pc.z() > 0)) continue;
        const Eigen::Vector2d px = project(pc, intr);
        if (px.x() < 0 || px.x() >= intr.width || px.y() < 0 || px.y() >= intr.height) continue;
        const auto iu = static_cast<std::int64_t>(px.x());
        const auto iv = static_cast<std::int64_t>(px.y());
        const std::int64_t key = iv * intr.width + iu;
        DepthOverlay::Point p;
        p.u = px.x();
        p.v = px.y();
        p.depth = pc.z();
        p.source_index = static_cast<int>(i);
        const auto it = zbuffer.find(key);
        if (it == zbuffer.end()) {
            zbuffer.emplace(key, candidates.size());
            candidates.push_back(p);
        } else if (p.depth < candidates[it->second].depth) {
            candidates[it->second] = p;
        }
    }
    // Deterministic output order: by pixel, then depth.
    std::sort(candidates.begin(), candidates.end(), [&](const auto& a, const auto& b) {
        const auto ka = static_cast<std::int64_t>(a.v) * intr.width + static_cast<std::int64_t>(a.u);
        const auto kb = static_cast<std::int64_t>(b.v) * intr.width + static_cast<std::int64_t>(b.u);
        return ka != kb ? ka < kb : a.depth < b.depth;
    });
    out.points = std::move(candidates);

    if (!out.points.empty()) {
        std::vector<double> depths;
        depths.reserve(out.points.size());
        for (const auto& p : out.points) depths.push_back(p.depth);
        std::sort(depths.begin(), depths.end());
        const auto pick = [&](double q) {
            return depths[static_cast<std::size_t>(q * static_cast<double>(depths.size() - 1))];
        };
        out.depth_min = pick(0.01);
        out.depth_max = pick(0.99);
    }
    return out;
}

std::vector<Association> associate_paths_to_objects(const estim::PathEstimates& paths,
                                                    const scene::SceneSpec& scn,
                                                    const Pose& rx_pose,
                                                    const AssocParams& params,
                                                    const Extrinsics* camera_from_sensor,
                                                    const Intrinsics* intr) {
    std::vector<Association> out;
    for (std::size_t i = 0; i < paths.paths.size(); ++i) {
        const auto& path = paths.paths[i];
        Association assoc;
        assoc.path_index = static_cast<int>(i);

        const Vec3 dir_sensor = unit_from_angles(path.azimuth_rad, path.elevation_rad);
        const Vec3 dir_world = rx_pose.R * dir_sensor;

        // Transmitter marker first: LoS arrivals point straight at the Tx.
        const Vec3 to_tx = scn.tx_pose.p - rx_pose.p;
        const double tx_angle = angle_between(dir_world, to_tx);
        if (tx_angle <= params.angular_gate_rad) {
            assoc.kind = TargetKind::Transmitter;
            assoc.label = "tx";
            assoc.angle_error_rad = tx_angle;
            assoc.geometric_length_m = to_tx.norm();
        } else {
            // Scatterer markers next (point objects, gated like the Tx).
            double best_angle = params.angular_gate_rad;
            int best_scatter = -1;
            for (std::size_t s = 0; s < scn.scatterers.size(); ++s) {
                const Vec3 to_s = scn.scatterers[s].position - rx_pose.p;
                const double ang = angle_between(dir_world, to_s);
                if (ang < best_angle) {
                    best_angle = ang;
                    best_scatter = static_cast<int>(s);
                }
            }
            if (best_scatter >= 0) {
                const auto& sc = scn.scatterers[static_cast<std::size_t>(best_scatter)];
                assoc.kind = TargetKind::Scatterer;
                assoc.target_index = best_scatter;
                assoc.label = sc.label.empty() ? ("scatterer_" + std::to_string(best_scatter))
                                               : sc.label;
                assoc.angle_error_rad = best_angle;
                assoc.geometric_length_m =
                    (sc.position - scn.tx_pose.p).norm() + (rx_pose.p - sc.position).norm();
            } else {
                // Facets: cast the arrival ray; the first surface hit is the
                // reflector, and its bounce length checks the delay.
                double best_dist = std::numeric_limits<double>::infinity();
                int best_facet = -1;
                Vec3 best_hit = Vec3::Zero();
                for (std::size_t f = 0; f < scn.reflectors.size(); ++f) {
                    const auto hit = scn.reflectors[f].raycast(rx_pose.p, dir_world);
                    if (hit && *hit < best_dist) {
                        best_dist = *hit;
                        best_facet = static_cast<int>(f);
                        best_hit = rx_pose.p + *hit * dir_world;
                    }
                }
                if (best_facet >= 0) {
                    const auto& facet = scn.reflectors[static_cast<std::size_t>(best_facet)];
                    assoc.kind = TargetKind::Facet;
                    assoc.target_index = best_facet;
                    assoc.label = facet.label.empty() ? ("facet_" + std::to_string(best_facet))
                                                      : facet.label;
                    assoc.geometric_length_m =
                        best_dist + (scn.tx_pose.p - best_hit).norm();
                }
            }
        }

        if (assoc.kind == TargetKind::Unassociated) {
            assoc.delay_length_residual_m = 0.0;
        } else {
            assoc.delay_length_residual_m =
                std::abs(kSpeedOfLight * path.delay_s - assoc.geometric_length_m);
        }

        if (camera_from_sensor && intr) {
            // Footprint pixel: a point along the arrival ray, one geometric
            // length out (or 10 m for unassociated rays).
            const double reach = assoc.kind == TargetKind::Unassociated
                                     ? 10.0
                                     : std::max(1.0, assoc.geometric_length_m);
            const Vec3 p_sensor = reach * dir_sensor;
            const Vec3 p_cam = lidar_to_camera(p_sensor, *camera_from_sensor);
            if (p_cam.z() > 0) {
                const Eigen::Vector2d px = project(p_cam, *intr);
                if (px.x() >= 0 && px.x() < intr->width && px.y() >= 0 && px.y() < intr->height) {
                    assoc.pixel = px;
                }
            }
        }
        out.push_back(assoc);
    }
    return out;
}

} // namespace msense::fusion
