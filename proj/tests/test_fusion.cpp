// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "msense/core/rng.hpp"
#include "msense/fusion.hpp"
#include "oracles.hpp"

using namespace msense;
using namespace msense::fusion;

namespace {

Intrinsics vga() {
    Intrinsics intr;
    intr.fx = 500;
    intr.fy = 500;
    intr.cx = 320;
    intr.cy = 240;
    intr.width = 640;
    intr.height = 480;
    return intr;
}

Extrinsics yaw_translate(double yaw, const Vec3& t) {
    Extrinsics ext;
    ext.rotation = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
    ext.translation = t;
    return ext;
}

} // namespace

TEST_CASE("identity and pure-translation transforms") {
    const Extrinsics identity;
    CHECK((lidar_to_camera(Vec3(1, 2, 3), identity) - Vec3(1, 2, 3)).norm() == 0.0);
    const Extrinsics shift = yaw_translate(0.0, Vec3(0, 0, 1));
    CHECK((lidar_to_camera(Vec3::Zero(), shift) - Vec3(0, 0, 1)).norm() == 0.0);
}

TEST_CASE("yaw + translation matches the homogeneous 4x4 oracle") {
    Rng rng(8);
    const Extrinsics ext = yaw_translate(kPi / 2, Vec3(0.3, -1.2, 2.0));
    const Eigen::Matrix4d t = ext.homogeneous();
    for (int i = 0; i < 20; ++i) {
        const Vec3 p(rng.gaussian(), rng.gaussian(), rng.gaussian());
        Eigen::Vector4d homo;
        homo << p, 1.0;
        const Eigen::Vector4d mapped = t * homo;
        CHECK((lidar_to_camera(p, ext) - mapped.head<3>()).norm() < 1e-12);
    }
}

TEST_CASE("rigid-transform composition is associative application") {
    Rng rng(9);
    const Extrinsics t1 = yaw_translate(0.7, Vec3(1, 0, 0));
    const Extrinsics t2 = yaw_translate(-0.3, Vec3(0, 2, -1));
    const Extrinsics t21 = t2 * t1;
    for (int i = 0; i < 20; ++i) {
        const Vec3 p(rng.gaussian(), rng.gaussian(), rng.gaussian());
        const Vec3 chained = lidar_to_camera(lidar_to_camera(p, t1), t2);
        CHECK((lidar_to_camera(p, t21) - chained).norm() < 1e-12);
    }
}

TEST_CASE("optical-axis points project onto the principal point") {
    const auto intr = vga();
    for (const double z : {0.1, 1.0, 57.0}) {
        const auto px = project(Vec3(0, 0, z), intr);
        CHECK(px.x() == doctest::Approx(intr.cx));
        CHECK(px.y() == doctest::Approx(intr.cy));
    }
}

TEST_CASE("pinhole substitution and projective scale invariance") {
    const auto intr = vga();
    const auto px = project(Vec3(1, 0, 1), intr);
    CHECK(px.x() == doctest::Approx(820.0)); // 500 * 1/1 + 320
    const auto px2 = project(Vec3(2, 0, 2), intr);
    CHECK((px - px2).norm() < 1e-12);
}

TEST_CASE("behind-camera points throw rather than silently dropping") {
    const auto intr = vga();
    CHECK_THROWS_AS(project(Vec3(0, 0, -1), intr), std::domain_error);
    CHECK_THROWS_AS(project(Vec3(1, 1, 0), intr), std::domain_error);
}

TEST_CASE("project / back_project round trip to 1e-9") {
    Rng rng(12);
    const auto intr = vga();
    const Extrinsics ext = yaw_translate(0.4, Vec3(0.1, 0.2, 0.3));
    const Extrinsics inv = ext.inverse();
    for (int i = 0; i < 1000; ++i) {
        const Vec3 p_lidar(rng.gaussian() * 5, rng.gaussian() * 5, rng.gaussian() * 5);
        const Vec3 p_cam = lidar_to_camera(p_lidar, ext);
        if (p_cam.z() <= 0.01) continue;
        const auto px = project(p_cam, intr);
        const Vec3 rebuilt_cam = back_project(px, p_cam.z(), intr);
        const Vec3 rebuilt_lidar = lidar_to_camera(rebuilt_cam, inv);
        CHECK((rebuilt_lidar - p_lidar).norm() < 1e-9);
    }
}

TEST_CASE("overlay keeps in-bounds positive-depth points; nearest wins per pixel") {
    const auto intr = vga();
    lidar::PointCloud cloud;
    cloud.points.push_back(Vec3(0, 0, 5));   // principal point, depth 5
    cloud.points.push_back(Vec3(0, 0, 8));   // same ray, farther
    cloud.points.push_back(Vec3(0, 0, -3));  // behind
    cloud.points.push_back(Vec3(100, 0, 1)); // out of frame
    const auto d = overlay(cloud, Extrinsics{}, intr);
    REQUIRE(d.points.size() == 1);
    CHECK(d.points[0].depth == doctest::Approx(5.0));
    CHECK(d.points[0].source_index == 0);
    CHECK(d.points.size() <= cloud.points.size());
}

TEST_CASE("empty cloud gives an empty overlay, not an error") {
    const auto d = overlay(lidar::PointCloud{}, Extrinsics{}, vga());
    CHECK(d.points.empty());
}

TEST_CASE("synthetic wall cloud lands inside its projected rectangle with the right depths") {
    const auto intr = vga();
    // Wall at z=10 in camera coordinates, x in [-2,2], y in [-1,1].
    lidar::PointCloud cloud;
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        cloud.points.push_back(
            Vec3(-2.0 + 4.0 * rng.uniform(), -1.0 + 2.0 * rng.uniform(), 10.0));
    }
    const auto d = overlay(cloud, Extrinsics{}, intr);
    REQUIRE(d.points.size() > 100);
    // Analytic projection of the wall corners.
    const auto tl = project(Vec3(-2, -1, 10), intr);
    const auto br = project(Vec3(2, 1, 10), intr);
    for (const auto& p : d.points) {
        CHECK(p.depth == doctest::Approx(10.0));
        CHECK(p.u >= tl.x() - 1.0);
        CHECK(p.u <= br.x() + 1.0);
        CHECK(p.v >= tl.y() - 1.0);
        CHECK(p.v <= br.y() + 1.0);
    }
    CHECK(d.depth_min == doctest::Approx(10.0));
    CHECK(d.depth_max == doctest::Approx(10.0));
}

namespace {

scene::SceneSpec assoc_scene() {
    scene::SceneSpec scn;
    scn.carrier_frequency_hz = 28e9;
    scn.tx_pose.p = Vec3(0, 0, 2);
    scn.rx_trajectory = scene::Trajectory::fixed(Vec3(30, 0, 2), 0.0, 1.0);
    scene::Facet ground;
    ground.corners = {Vec3(-100, -100, 0), Vec3(100, -100, 0), Vec3(100, 100, 0),
                      Vec3(-100, 100, 0)};
    ground.label = "ground";
    scn.reflectors.push_back(ground);
    return scn;
}

estim::PathEstimates estimates_from_truth(const scene::SceneSpec& scn, double t) {
    const auto truth = scene::ground_truth_paths(scn, t);
    estim::PathEstimates est;
    for (const auto& p : truth.paths) {
        estim::PathEstimate e;
        e.delay_s = p.delay_s;
        e.azimuth_rad = p.azimuth_rad;
        e.elevation_rad = p.elevation_rad;
        e.amplitude = p.gain;
        est.paths.push_back(e);
    }
    est.converged = true;
    return est;
}

} // namespace

TEST_CASE("LoS path associates to the Tx with near-zero delay residual") {
    const auto scn = assoc_scene();
    const Pose rx = scene::trajectory_pose(scn, 0.0);
    const auto est = estimates_from_truth(scn, 0.0);
    const auto assoc = associate_paths_to_objects(est, scn, rx);
    REQUIRE(assoc.size() == est.paths.size());
    bool saw_tx = false, saw_ground = false;
    for (const auto& a : assoc) {
        if (a.kind == TargetKind::Transmitter) {
            saw_tx = true;
            CHECK(a.delay_length_residual_m < 1e-6);
        }
        if (a.kind == TargetKind::Facet) {
            saw_ground = true;
            CHECK(a.label == "ground");
            // Image-method length agrees with c*tau within a delay bin (1 ns ~ 0.3 m).
            CHECK(a.delay_length_residual_m < 0.3);
        }
    }
    CHECK(saw_tx);
    CHECK(saw_ground);
}

TEST_CASE("a path pointing into open sky stays unassociated") {
    const auto scn = assoc_scene();
    const Pose rx = scene::trajectory_pose(scn, 0.0);
    estim::PathEstimates est;
    estim::PathEstimate sky;
    sky.delay_s = 100e-9;
    sky.azimuth_rad = deg2rad(45.0);
    sky.elevation_rad = deg2rad(10.0); // well above the horizon
    sky.amplitude = {0.1, 0};
    est.paths.push_back(sky);
    const auto assoc = associate_paths_to_objects(est, scn, rx);
    REQUIRE(assoc.size() == 1);
    CHECK(assoc[0].kind == TargetKind::Unassociated);
}

TEST_CASE("association can tag the camera footprint pixel") {
    const auto scn = assoc_scene();
    const Pose rx = scene::trajectory_pose(scn, 0.0);
    const auto est = estimates_from_truth(scn, 0.0);
    // Camera looking along -x (toward the Tx): camera z = sensor -x.
    Extrinsics cam;
    cam.rotation << 0, -1, 0, 0, 0, -1, -1, 0, 0;
    const auto intr = vga();
    const auto assoc = associate_paths_to_objects(est, scn, rx, {}, &cam, &intr);
    bool tx_pixel = false;
    for (const auto& a : assoc) {
        if (a.kind == TargetKind::Transmitter && a.pixel) tx_pixel = true;
    }
    CHECK(tx_pixel);
}

TEST_CASE("intrinsics/extrinsics validation") {
    Intrinsics intr = vga();
    intr.fx = -1;
    CHECK_FALSE(intr.validate().empty());
    Extrinsics ext;
    ext.rotation(0, 0) = 2.0;
    CHECK_FALSE(ext.validate().empty());
}
