// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msense/core/geometry.hpp"

namespace msense::recon {

/// Full navigation state. R is re-orthonormalized after every update.
struct NavState {
    Mat3 R = Mat3::Identity();
    Vec3 p = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    Vec3 bg = Vec3::Zero(); // gyro bias, rad/s
    Vec3 ba = Vec3::Zero(); // accel bias, m/s^2
    double t = 0.0;
};

struct ImuSample {
    Vec3 gyro = Vec3::Zero();  // rad/s
    Vec3 accel = Vec3::Zero(); // specific force, m/s^2
    double t = 0.0;
};

/// One integration step of the IMU kinematics:
///   R <- R Exp((w - bg) dt)
///   v <- v + (R (a - ba) + g) dt
///   p <- p + v dt + 1/2 (R (a - ba) + g) dt^2
/// (first order in rotation, exact for piecewise-constant acceleration).
NavState imu_propagate(const NavState& state, const ImuSample& imu, double dt,
                       const Vec3& gravity = Vec3(0, 0, -9.80665));

// ---------------------------------------------------------------------------
// Spatial index

struct Neighbor {
    int index = -1;
    double distance = 0.0;
};

/// Interface shared by the k-d tree and the voxel-hash cross-check backend.
class SpatialIndex {
  public:
    virtual ~SpatialIndex() = default;
    virtual void insert(const std::vector<Vec3>& points) = 0;
    virtual std::vector<Neighbor> knn(const Vec3& query, int k) const = 0; // sorted by distance
    virtual const std::vector<Vec3>& points() const = 0;
    std::size_t size() const { return points().size(); }
};

/// Incremental k-d tree: leaf-path insertion with subtree rebuilds when a
/// node's children grow too lopsided. kNN queries are exact.
class IncrementalKdTree final : public SpatialIndex {
  public:
    IncrementalKdTree();
    IncrementalKdTree(IncrementalKdTree&&) noexcept;
    IncrementalKdTree& operator=(IncrementalKdTree&&) noexcept;
    ~IncrementalKdTree() override;
    void insert(const std::vector<Vec3>& points) override;
    std::vector<Neighbor> knn(const Vec3& query, int k) const override;
    const std::vector<Vec3>& points() const override;
    Eigen::AlignedBox3d bounding_box() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Uniform voxel-hash grid with ring search; same contract, used to
/// cross-check the tree.
class VoxelHashIndex final : public SpatialIndex {
  public:
    explicit VoxelHashIndex(double cell_size = 1.0);
    ~VoxelHashIndex() override;
    void insert(const std::vector<Vec3>& points) override;
    std::vector<Neighbor> knn(const Vec3& query, int k) const override;
    const std::vector<Vec3>& points() const override;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Residuals and the iterative update

struct PlaneFit {
    Vec3 normal = Vec3::UnitZ();
    Vec3 centroid = Vec3::Zero();
    double rms = 0.0;
};

struct PlaneResidual {
    double residual = 0.0; // signed point-plane distance
    PlaneFit plane;
    std::vector<int> neighbors;
};

/// Fit a plane (total least squares: centroid + smallest covariance
/// eigenvector) to the k nearest map points and return the signed distance.
/// Degenerate or non-planar neighborhoods yield nullopt rather than a crash,
/// as do neighborhoods whose farthest member exceeds the distance gate (a
/// remote exact-fit line or wall edge is not a usable local plane).
std::optional<PlaneResidual> point_to_plane_residual(
    const Vec3& point, const SpatialIndex& map, int knn_k = 5, double plane_fit_tol = 0.05,
    double max_neighbor_distance = std::numeric_limits<double>::infinity());

/// One scan point paired with its map plane, expressed for the optimizer:
/// residual(x) = n . (R p_body + p) - n . q.
struct PointConstraint {
    Vec3 point_body = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    Vec3 point_on_plane = Vec3::Zero();
    double weight = 1.0; // 1/sigma^2
};

struct ResidualSet {
    NavState prior;
    Eigen::Matrix<double, 15, 15> prior_information = Eigen::Matrix<double, 15, 15>::Identity();
    std::vector<PointConstraint> points;
};

struct UpdateResult {
    NavState state;
    bool converged = false;
    bool degenerate = false;
    std::vector<double> cost_history; // cost after each accepted iteration
};

/// Damped Gauss-Newton over the 15-dof error state
/// [dtheta, dp, dv, dbg, dba] (rotation updated multiplicatively on the
/// right). The cost is the prior Mahalanobis term plus weighted squared
/// point-plane residuals; accepted iterations never increase it.
UpdateResult update_state(const NavState& predicted, const ResidualSet& residuals,
                          int max_iterations = 10, double tol = 1e-10);

/// Stacked residual vector and analytic Jacobian at the given state
/// (exposed for gradient checking).
void evaluate_residuals(const NavState& x, const ResidualSet& residuals, Eigen::VectorXd& r,
                        Eigen::MatrixXd& jacobian, Eigen::VectorXd& weights);

// ---------------------------------------------------------------------------
// Odometry driver

struct Scan {
    double t = 0.0;
    std::vector<Vec3> points; // sensor frame
};

struct OdomConfig {
    Vec3 gravity = Vec3(0, 0, -9.80665);
    int knn_k = 5;
    double plane_fit_tol = 0.05;
    double max_association_distance = 1.0; // farthest usable kNN neighbor
    double point_weight = 400.0; // 1/sigma^2 for sigma = 5 cm
    int max_gn_iterations = 8;
    int reassociation_passes = 2;
    double gap_threshold_s = 0.5; // larger gaps break the trajectory segment
    NavState initial_state;
    Eigen::Matrix<double, 15, 15> prior_information =
        (Eigen::Matrix<double, 15, 15>::Identity() * 1e4);
};

struct SegmentBreak {
    double t = 0.0;
    std::string reason;
};

struct OdometryResult {
    std::vector<NavState> trajectory; // one state per scan
    std::vector<SegmentBreak> breaks;
    std::vector<Vec3> map_points;
    std::vector<std::vector<double>> cost_histories; // per scan
};

/// Alternates IMU propagation between scans with a scan-to-map update at
/// each scan, inserting corrected points into the incremental map.
OdometryResult run_odometry(const std::vector<ImuSample>& imu, const std::vector<Scan>& scans,
                            const OdomConfig& config);

} // namespace msense::recon
