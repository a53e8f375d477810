// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msense/core/geometry.hpp"
#include "msense/estim.hpp"
#include "msense/lidar.hpp"
#include "msense/scene.hpp"

namespace msense::fusion {

/// Rigid LiDAR -> camera transform.
struct Extrinsics {
    Mat3 rotation = Mat3::Identity();    // R_{C<-L}
    Vec3 translation = Vec3::Zero();     // t_{C<-L}

    Eigen::Matrix4d homogeneous() const;
    Extrinsics inverse() const;
    /// Composition: (a * b) maps through b first, then a.
    friend Extrinsics operator*(const Extrinsics& a, const Extrinsics& b);
    std::vector<std::string> validate() const;
};

struct Intrinsics {
    double fx = 500.0, fy = 500.0; // pixels
    double cx = 320.0, cy = 240.0;
    int width = 640, height = 480;

    std::vector<std::string> validate() const;
};

/// P_C = R * P_L + t.
Vec3 lidar_to_camera(const Vec3& p_lidar, const Extrinsics& ext);

/// Pinhole projection u = fx*X/Z + cx, v = fy*Y/Z + cy. Throws
/// std::domain_error for Z <= 0 (callers filter; nothing is dropped
/// silently inside).
Eigen::Vector2d project(const Vec3& p_camera, const Intrinsics& intr);

/// Inverse pinhole: pixel + depth -> camera-frame point.
Vec3 back_project(const Eigen::Vector2d& pixel, double depth, const Intrinsics& intr);

struct DepthOverlay {
    struct Point {
        double u = 0.0, v = 0.0;
        double depth = 0.0;   // Z_C, meters
        int source_index = -1;
    };
    std::vector<Point> points;
    int width = 0, height = 0;
    double depth_min = 0.0, depth_max = 0.0; // 1-99 percentile color bounds
};

/// Transform, project, keep in-bounds pixels with positive depth; when two
/// points land on the same integer pixel the nearer one wins.
DepthOverlay overlay(const lidar::PointCloud& cloud, const Extrinsics& ext,
                     const Intrinsics& intr);

enum class TargetKind { Transmitter, Facet, Scatterer, Unassociated };

struct Association {
    int path_index = -1;
    TargetKind kind = TargetKind::Unassociated;
    int target_index = -1;
    std::string label;
    double angle_error_rad = 0.0;       // gate residual for Tx associations
    double geometric_length_m = 0.0;    // ray-cast propagation length
    double delay_length_residual_m = 0.0; // |c*tau - geometric length|
    std::optional<Eigen::Vector2d> pixel; // camera footprint if projectable
};

struct AssocParams {
    double angular_gate_rad = deg2rad(5.0);
};

/// Map estimated arrival directions onto scene objects: a direction within
/// the angular gate of the Tx marker is LoS; otherwise the ray is cast onto
/// the facets and the first hit wins (its image-method length supplies the
/// delay-consistency check). Directions that miss everything come back
/// Unassociated.
std::vector<Association> associate_paths_to_objects(const estim::PathEstimates& paths,
                                                    const scene::SceneSpec& scn,
                                                    const Pose& rx_pose,
                                                    const AssocParams& params = {},
                                                    const Extrinsics* camera_from_sensor = nullptr,
                                                    const Intrinsics* intr = nullptr);

} // namespace msense::fusion
