// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msense/calib.hpp"
#include "msense/sounder.hpp"

namespace msense::estim {

/// Power delay profile of one snapshot. Built with the amplitude-preserving
/// 1/N inverse transform, so sum_tau P(tau) == sum_f |H(f)|^2 / N_f.
struct PDP {
    std::vector<double> delay_s;   // uniform, spacing = 1/bandwidth
    Eigen::VectorXd power_linear;  // |h(tau)|^2
    double timestamp = 0.0;

    double power_db(std::size_t i) const;
    double total_power() const { return power_linear.sum(); }
};

/// Delay-domain transform of a single calibrated frequency response row.
PDP pdp(const Eigen::VectorXcd& h_freq, double bin_spacing_hz, double timestamp = 0.0);

struct PathLossSeries {
    std::vector<double> pl_db;      // per window
    std::vector<double> distance_m; // window-center Tx-Rx distance
    int window_snapshots = 0;
    int n_f = 0;
};

/// Sliding-window average channel gain:
///   PL = -10 log10( (1/W) sum_T (1/M) sum_m sum_tau |h_m(T,tau)|^2 )
/// over a centered window of W snapshots.
PathLossSeries path_loss_series(const calib::CIRMatrix& cir, const std::vector<double>& distances,
                                int window_snapshots);

/// Window length (odd snapshot count) covering `n_lambda` wavelengths of
/// receiver travel given the per-snapshot distances.
int window_from_wavelengths(double wavelength_m, const std::vector<double>& distances,
                            double n_lambda = 40.0);

struct LogDistanceFit {
    double ple = 0.0;          // path loss exponent
    double intercept_db = 0.0; // PL at d0
    double sigma_db = 0.0;     // shadowing (residual std)
    double d0_m = 1.0;
};

/// Least-squares fit of PL = PL0 + 10 * PLE * log10(d / d0).
LogDistanceFit fit_log_distance(const PathLossSeries& series, double d0_m = 1.0);

// ---------------------------------------------------------------------------
// SAGE

struct SageConfig {
    int max_paths = 8;
    double residual_tol = 1e-4;     // relative residual improvement stop
    int max_em_iterations = 10;
    double coarse_angle_step_rad = deg2rad(2.0);
    double azimuth_min_rad = 0.0;
    double azimuth_max_rad = kTwoPi;
    double elevation_min_rad = 0.0; // restrict for planar arrays (up/down ambiguity)
    double elevation_max_rad = kPi;
    double detection_margin_db = 40.0; // stop SIC below strongest-path power - margin
    double min_residual_fraction = 1e-10; // stop when residual below this fraction of input
};

struct PathEstimate {
    double delay_s = 0.0;
    double azimuth_rad = 0.0;
    double elevation_rad = 0.0;
    std::complex<double> amplitude;
    double power_db_rel = 0.0; // relative to strongest path
};

struct PathEstimates {
    std::vector<PathEstimate> paths; // sorted by descending power
    bool converged = false;
    int iterations = 0;
    std::vector<double> residual_history; // residual power after each EM sweep
    double residual_power = 0.0;
    double input_power = 0.0;
};

/// Space-alternating EM multipath extraction on one calibrated snapshot:
/// successive-interference-cancellation initialization, then coordinate-wise
/// (delay, azimuth, elevation, amplitude) refinement per path. Each
/// coordinate search includes the incumbent candidate, so the residual is
/// non-increasing across sweeps.
PathEstimates sage_estimate(const Eigen::MatrixXcd& y, const std::vector<double>& freq_hz,
                            const sounder::ArrayGeometry& array, double steering_freq_hz,
                            const SageConfig& cfg);

/// Convenience overload for calibrated captures.
PathEstimates sage_estimate(const calib::CirEntry& entry, const sounder::ArrayGeometry& array,
                            double steering_freq_hz, const SageConfig& cfg);

// ---------------------------------------------------------------------------
// Clustering

struct ClusterParams {
    double delay_gap_s = 10e-9;       // new cluster when the delay gap exceeds this
    double floor_margin_db = 6.0;     // margin over the estimated noise floor
    std::optional<double> floor_db;   // externally supplied floor (skips estimation)
    bool refine_centroids = true;     // nearest-centroid (Lloyd) refinement pass
    int refine_iterations = 8;
};

struct Cluster {
    int id = 0;
    double centroid_delay_s = 0.0;   // power-weighted
    double centroid_power_db = 0.0;  // total member power
    int member_count = 0;
};

struct ClusterSet {
    std::vector<Cluster> clusters;   // ordered by centroid delay
    std::vector<int> assignment;     // per retained sample, cluster id
    std::vector<std::size_t> sample_index; // retained sample -> input index
};

/// Delay-gap partition of PDP bins above the noise floor.
ClusterSet cluster_pdp(const PDP& profile, const ClusterParams& params);

/// Same partition over discrete path estimates.
ClusterSet cluster_paths(const PathEstimates& paths, const ClusterParams& params);

/// Robust (median-based, bias-corrected) noise floor estimate plus margin.
/// Requires >= 16 bins.
double noise_floor_db(const PDP& profile, double margin_db = 6.0);

} // namespace msense::estim
