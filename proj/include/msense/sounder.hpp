// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msense/core/geometry.hpp"
#include "msense/scene.hpp"
#include "msense/waveform.hpp"

namespace msense::sounder {

// Phase conventions, fixed project-wide:
//   propagation delay   -> exp(-j 2 pi f tau)
//   Doppler             -> exp(+j 2 pi nu t)
//   steering (geometry) -> exp(+j 2 pi f <u, p_k> / c)

/// Complex element gain sampled on a uniform azimuth/elevation grid
/// (synthetic stand-in for chamber-measured patterns). Azimuth wraps;
/// elevation support may be partial.
class ElementPattern {
  public:
    static ElementPattern isotropic();
    /// Rotationally symmetric |cos(el - el0)|^exponent magnitude pattern,
    /// sampled on the grid; useful as a synthetic directional element.
    static ElementPattern cosine_power(double exponent, int az_samples = 73, int el_samples = 37);
    static ElementPattern from_grid(std::vector<double> az_grid, std::vector<double> el_grid,
                                    Eigen::MatrixXcd gains);

    /// Bilinear interpolation; throws std::domain_error outside the grid's
    /// elevation support.
    std::complex<double> gain(double azimuth, double elevation) const;
    bool full_sphere() const;

  private:
    bool isotropic_ = true;
    std::vector<double> az_grid_; // radians, ascending, covers [0, 2 pi)
    std::vector<double> el_grid_; // radians, ascending subset of [0, pi]
    Eigen::MatrixXcd gains_;      // az x el
};

struct ArrayGeometry {
    Eigen::Matrix3Xd positions;            // meters, sensor frame, 3 x M
    std::vector<ElementPattern> patterns;  // size 1 (shared) or M

    int size() const { return static_cast<int>(positions.cols()); }
    const ElementPattern& pattern(int element) const;

    static ArrayGeometry single_isotropic();
    static ArrayGeometry uniform_linear(int count, double spacing_m, const Vec3& axis = Vec3::UnitX());
    /// rows x cols grid in the x-y plane; the default sounder array is the
    /// 4 x 8 half-wavelength variant of this.
    static ArrayGeometry uniform_planar(int rows, int cols, double spacing_m);
    /// Stacked circular rings (x-y circles offset in z). Unlike a flat
    /// aperture this resolves azimuth over the full circle and elevation
    /// without the up/down mirror, which full-surround estimation needs.
    static ArrayGeometry stacked_circular(int rings, int elements_per_ring, double radius_m,
                                          double ring_spacing_m);
    std::vector<std::string> validate() const;
};

Eigen::VectorXcd steering_vector(const ArrayGeometry& array, double azimuth, double elevation,
                                 double frequency_hz);

/// Forward channel model at elapsed time t since the PathSet epoch:
///   H[m,f] = sum_p gain_p exp(-j 2 pi f tau_p) exp(+j 2 pi nu_p t) a_m(az_p, el_p)
/// Steering vectors use steering_freq (default: center of the grid). The
/// frequency grid is absolute RF, so the delay phasor carries carrier phase.
Eigen::MatrixXcd synth_channel(const scene::PathSet& paths, const ArrayGeometry& array,
                               const std::vector<double>& freq_hz, double t,
                               double steering_freq_hz = 0.0);

struct SwitchSchedule {
    std::vector<int> element_order; // permutation of 0..M-1
    double dwell_s = 8e-6;          // default per the mmWave switch spec
    double snapshot_period_s = 0.02;
    double snapshot_rate_hz = 50.0;

    std::vector<std::string> validate(int element_count) const;
    static SwitchSchedule sequential(int element_count, double dwell_s = 8e-6,
                                     double rate_hz = 50.0);
};

struct ImpairmentProfile {
    Eigen::VectorXd phase_offset_rad;      // per channel; empty -> zeros
    Eigen::VectorXd gain_ripple_db;        // per channel; empty -> zeros
    Eigen::VectorXd phase_drift_rad_per_s; // per channel; empty -> zeros
    Eigen::VectorXcd system_response;      // per frequency bin; empty -> ones

    static ImpairmentProfile none() { return {}; }
    double phase_offset(int ch) const;
    double gain_ripple(int ch) const;
    double drift(int ch) const;
    std::complex<double> system(int bin) const;
    std::vector<std::string> validate(int element_count, int bin_count) const;
};

struct NoiseSpec {
    bool enabled = false;
    double per_bin_variance = 0.0; // complex noise power per frequency bin
    std::uint64_t seed = 0;
    std::uint64_t snapshot_index = 0; // substream split key
};

/// One complete switched SIMO capture: raw (uncalibrated) per-element
/// frequency responses plus per-element capture instants.
struct Snapshot {
    double timestamp = 0.0;
    Eigen::MatrixXcd response;        // M x N_f
    std::vector<double> element_time; // per element, from the switch schedule
    std::vector<double> freq_hz;      // absolute bin grid
    std::vector<bool> in_band;        // per bin (guard-zeroed bins are false)
    double noise_variance = 0.0;
    double steering_freq_hz = 0.0;
};

/// Switched capture through the synthetic channel. Element k (in schedule
/// order) is evaluated k*dwell after the snapshot epoch, so platform motion
/// shows up as inter-element Doppler phase progression. Impairments apply
/// multiplicatively; seeded complex white Gaussian noise is added per bin
/// when enabled.
Snapshot capture_snapshot(const scene::SceneSpec& scn, const ArrayGeometry& array,
                          const SwitchSchedule& schedule, const ImpairmentProfile& impairments,
                          const waveform::ToneConfig& wave, const NoiseSpec& noise, double t);

/// Back-to-back capture: Tx connected to every Rx channel through a pure
/// attenuation + fixed delay (no array geometry, no propagation). Used to
/// extract the system response.
Snapshot capture_b2b(const ArrayGeometry& array, const SwitchSchedule& schedule,
                     const ImpairmentProfile& impairments, const waveform::ToneConfig& wave,
                     double carrier_hz, double attenuation_db, double cable_delay_s,
                     const NoiseSpec& noise, double t);

struct BudgetLedger {
    double source_power_dbm = -6.0;
    double amplifier_gain_db = 47.0;
    double tx_antenna_gain_dbi = 30.0;
    double tx_hardware_loss_db = 4.0;
    double rx_antenna_gain_dbi = 5.0;
    double lna_gain_db = 20.0;
    double rx_cable_loss_db = 3.0;
    double switch_insertion_loss_db = 10.0;
    double noise_density_dbm_hz = -147.2;
    double bandwidth_db_hz = 90.0; // 10*log10(bandwidth)
    double receiver_noise_figure_db = 6.0;
    double snr_threshold_db = 0.0;

    std::vector<std::string> validate() const;
};

struct BudgetReport {
    BudgetLedger ledger;
    double noise_power_dbm = 0.0;     // density + bandwidth + noise figure
    double tx_chain_db = 0.0;         // source + amp + antenna - loss
    double rx_chain_db = 0.0;         // antenna + LNA - cable - switch
    double max_path_loss_db = 0.0;
    std::optional<double> reference_db; // externally reported value, if any
    std::optional<double> residual_db;  // computed - reference

    std::string to_text() const;
};

/// Additive dB ledger: noise floor, effective chains, and the maximum
/// measurable propagation loss at the configured SNR threshold. When a
/// reference value is supplied the report flags the residual against it
/// instead of resolving the discrepancy.
BudgetReport max_measurable_path_loss(const BudgetLedger& ledger,
                                      std::optional<double> reference_db = std::nullopt);

} // namespace msense::sounder
