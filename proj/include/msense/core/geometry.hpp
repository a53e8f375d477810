// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>

#include "msense/core/constants.hpp"

namespace msense {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rigid pose: world_point = R * body_point + p.
struct Pose {
    Mat3 R = Mat3::Identity();
    Vec3 p = Vec3::Zero();
    double t = 0.0; // seconds

    Vec3 to_world(const Vec3& body) const { return R * body + p; }
    Vec3 to_body(const Vec3& world) const { return R.transpose() * (world - p); }
};

inline Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

/// SO(3) exponential map (Rodrigues).
inline Mat3 so3_exp(const Vec3& phi) {
    const double angle = phi.norm();
    if (angle < 1e-12) {
        return Mat3::Identity() + skew(phi);
    }
    const Vec3 axis = phi / angle;
    const Mat3 k = skew(axis);
    return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

/// SO(3) logarithm; returns rotation vector.
inline Vec3 so3_log(const Mat3& r) {
    const double cos_angle = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
    const double angle = std::acos(cos_angle);
    if (angle < 1e-12) {
        return Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)) / 2.0;
    }
    if (angle > kPi - 1e-6) {
        // Near pi the off-diagonal extraction degenerates; recover the axis
        // from the symmetric part.
        Eigen::AngleAxisd aa(r);
        return aa.angle() * aa.axis();
    }
    const Vec3 w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    return angle / (2.0 * std::sin(angle)) * w;
}

/// Inverse of the SO(3) right Jacobian, used by the error-state estimator.
inline Mat3 so3_right_jacobian_inverse(const Vec3& phi) {
    const double angle = phi.norm();
    const Mat3 k = skew(phi);
    if (angle < 1e-8) {
        return Mat3::Identity() + 0.5 * k;
    }
    const double half = 0.5 * angle;
    const double cot_term = (1.0 / (angle * angle)) - (1.0 + std::cos(angle)) / (2.0 * angle * std::sin(angle));
    (void)half;
    return Mat3::Identity() + 0.5 * k + cot_term * k * k;
}

/// Project a near-rotation back onto SO(3) via quaternion normalization.
inline Mat3 orthonormalize(const Mat3& r) {
    Eigen::Quaterniond q(r);
    q.normalize();
    return q.toRotationMatrix();
}

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
    return (r.transpose() * r - Mat3::Identity()).norm() < tol && std::abs(r.determinant() - 1.0) < tol;
}

// Direction conventions, fixed project-wide:
//   azimuth   in [0, 2*pi): angle in the x-y plane, from +x toward +y;
//   elevation in [0, pi]:   polar angle from +z (0 = zenith, pi/2 = horizon).
inline Vec3 unit_from_angles(double azimuth, double elevation) {
    const double se = std::sin(elevation);
    return Vec3(se * std::cos(azimuth), se * std::sin(azimuth), std::cos(elevation));
}

struct Angles {
    double azimuth;   // radians, [0, 2*pi)
    double elevation; // radians, [0, pi]
};

inline Angles angles_from_unit(const Vec3& u) {
    double az = std::atan2(u.y(), u.x());
    if (az < 0) az += kTwoPi;
    const double el = std::acos(std::clamp(u.z(), -1.0, 1.0));
    return {az, el};
}

/// Smallest angle between two directions.
inline double angle_between(const Vec3& a, const Vec3& b) {
    return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0));
}

} // namespace msense
