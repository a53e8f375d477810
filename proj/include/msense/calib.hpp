// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msense/sounder.hpp"

namespace msense::calib {

/// Intrinsic system response extracted from a back-to-back capture.
struct SystemResponse {
    Eigen::MatrixXcd response;     // M x N_f
    std::vector<double> freq_hz;
    std::vector<bool> valid_bins;  // guard-zeroed bins are excluded from division
    double reference_attenuation_db = 0.0;
};

/// Per-channel phase offsets relative to channel 1 (index 0) plus linear
/// drift rates over the estimation window.
struct PhaseOffsets {
    Eigen::VectorXd offset_rad;        // offset_rad(0) == 0 by construction
    Eigen::VectorXd drift_rad_per_s;
    double window_start_s = 0.0;
    double window_span_s = 0.0;
    double post_residual_std_rad = 0.0; // residual after compensation
};

/// Calibrated frequency response of one snapshot.
struct CirEntry {
    double timestamp = 0.0;
    Eigen::MatrixXcd h;            // M x N_f, calibrated
    std::vector<double> freq_hz;
    std::vector<bool> valid_bins;
};

/// Calibrated capture series with a lazily computed delay-domain cache.
class CIRMatrix {
  public:
    void append(CirEntry entry);

    std::size_t size() const { return entries_.size(); }
    const CirEntry& entry(std::size_t i) const { return entries_.at(i); }
    const std::vector<double>& timestamps() const { return timestamps_; }
    const std::vector<double>& freq_hz() const;
    double bin_spacing_hz() const;
    double bandwidth_hz() const;
    double carrier_hz() const;
    double wavelength_m() const;

    /// Delay-domain impulse response of snapshot i (M x N_f). Uses the
    /// amplitude-preserving 1/N inverse transform: a pure delay of amplitude
    /// a appears as a bin of amplitude ~a. Cached after first evaluation.
    const Eigen::MatrixXcd& impulse_response(std::size_t i) const;

  private:
    std::vector<CirEntry> entries_;
    std::vector<double> timestamps_;
    mutable std::vector<Eigen::MatrixXcd> ir_cache_;
    mutable std::vector<bool> ir_ready_;
};

/// Divide the raw B2B capture by the ideal attenuated-and-delayed response,
/// leaving exactly the system's own structure.
SystemResponse b2b_extract(const sounder::Snapshot& reference, double known_attenuation_db,
                           double cable_delay_s = 0.0);

/// Per-bin division by the system response.  Guard-zeroed bins are flagged
/// invalid rather than divided.
CirEntry apply_calibration(const sounder::Snapshot& raw, const SystemResponse& sys);

/// Circular-mean offsets relative to channel 1 and least-squares drift over
/// the capture window. Requires a static scene (no Doppler).
PhaseOffsets estimate_phase_offsets(const std::vector<sounder::Snapshot>& captures);

/// Remove the estimated offsets/drift from a calibrated entry (in place).
void apply_phase_offsets(CirEntry& entry, const PhaseOffsets& offsets);
void apply_phase_offsets(sounder::Snapshot& snap, const PhaseOffsets& offsets);

/// Serialization (session container artifacts).
void save_system_response(const SystemResponse& sys, const std::string& path);
SystemResponse load_system_response(const std::string& path);
void save_phase_offsets(const PhaseOffsets& off, const std::string& path);
PhaseOffsets load_phase_offsets(const std::string& path);

} // namespace msense::calib
