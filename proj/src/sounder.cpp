// SPDX-License-Identifier: Apache-2.0
#include "msense/sounder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "msense/core/constants.hpp"
#include "msense/core/errors.hpp"
#include "msense/core/rng.hpp"

namespace msense::sounder {

// ---------------------------------------------------------------------------
// ElementPattern

ElementPattern ElementPattern::isotropic() { return {}; }

ElementPattern ElementPattern::cosine_power(double exponent, int az_samples, int el_samples) {
    std::vector<double> az(az_samples), el(el_samples);
    for (int i = 0; i < az_samples; ++i) az[i] = kTwoPi * i / (az_samples - 1);
    for (int i = 0; i < el_samples; ++i) el[i] = kPi * i / (el_samples - 1);
    Eigen::MatrixXcd g(az_samples, el_samples);
    for (int i = 0; i < az_samples; ++i) {
        for (int j = 0; j < el_samples; ++j) {
            g(i, j) = std::pow(std::abs(std::sin(el[j])), exponent);
        }
    }
    return from_grid(std::move(az), std::move(el), std::move(g));
}

ElementPattern ElementPattern::from_grid(std::vector<double> az_grid, std::vector<double> el_grid,
                                         Eigen::MatrixXcd gains) {
    if (az_grid.size() < 2 || el_grid.size() < 2) {
        throw ValidationError("pattern grid needs >= 2 samples per axis");
    }
    if (gains.rows() != static_cast<Eigen::Index>(az_grid.size()) ||
        gains.cols() != static_cast<Eigen::Index>(el_grid.size())) {
        throw ValidationError("pattern gain matrix does not match grid");
    }
    ElementPattern p;
    p.isotropic_ = false;
    p.az_grid_ = std::move(az_grid);
    p.el_grid_ = std::move(el_grid);
    p.gains_ = std::move(gains);
    return p;
}

bool ElementPattern::full_sphere() const {
    if (isotropic_) return true;
    return el_grid_.front() <= 1e-9 && el_grid_.back() >= kPi - 1e-9;
}

std::complex<double> ElementPattern::gain(double azimuth, double elevation) const {
    if (isotropic_) return {1.0, 0.0};
    azimuth = std::fmod(azimuth, kTwoPi);
    if (azimuth < 0) azimuth += kTwoPi;
    if (elevation < el_grid_.front() - 1e-12 || elevation > el_grid_.back() + 1e-12) {
        throw std::domain_error("direction outside pattern elevation support");
    }
    elevation = std::clamp(elevation, el_grid_.front(), el_grid_.back());

    const auto locate = [](const std::vector<double>& grid, double v) {
        auto it = std::upper_bound(grid.begin(), grid.end(), v);
        std::size_t hi = std::min<std::size_t>(grid.size() - 1,
                                               static_cast<std::size_t>(it - grid.begin()));
        std::size_t lo = hi == 0 ? 0 : hi - 1;
        const double span = grid[hi] - grid[lo];
        const double u = span > 0 ? (v - grid[lo]) / span : 0.0;
        return std::pair<std::size_t, double>(lo, u);
    };
    const auto [ia, ua] = locate(az_grid_, azimuth);
    const auto [ie, ue] = locate(el_grid_, elevation);
    const auto g = [&](std::size_t i, std::size_t j) { return gains_(static_cast<Eigen::Index>(i),
                                                                     static_cast<Eigen::Index>(j)); };
    return (1 - ua) * (1 - ue) * g(ia, ie) + ua * (1 - ue) * g(ia + 1, ie) +
           (1 - ua) * ue * g(ia, ie + 1) + ua * ue * g(ia + 1, ie + 1);
}

// ---------------------------------------------------------------------------
// ArrayGeometry

const ElementPattern& ArrayGeometry::pattern(int element) const {
    if (patterns.size() == 1) return patterns.front();
    return patterns.at(static_cast<std::size_t>(element));
}

ArrayGeometry ArrayGeometry::single_isotropic() {
    ArrayGeometry a;
    a.positions = Eigen::Matrix3Xd::Zero(3, 1);
    a.patterns = {ElementPattern::isotropic()};
    return a;
}

ArrayGeometry ArrayGeometry::uniform_linear(int count, double spacing_m, const Vec3& axis) {
    ArrayGeometry a;
    a.positions.resize(3, count);
    const Vec3 u = axis.normalized();
    for (int i = 0; i < count; ++i) {
        a.positions.col(i) = (i - (count - 1) / 2.0) * spacing_m * u;
    }
    a.patterns = {ElementPattern::isotropic()};
    return a;
}

ArrayGeometry ArrayGeometry::uniform_planar(int rows, int cols, double spacing_m) {
    ArrayGeometry a;
    a.positions.resize(3, rows * cols);
    int k = 0;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c, ++k) {
            a.positions.col(k) = Vec3((c - (cols - 1) / 2.0) * spacing_m,
                                      (r - (rows - 1) / 2.0) * spacing_m, 0.0);
        }
    }
    a.patterns = {ElementPattern::isotropic()};
    return a;
}

ArrayGeometry ArrayGeometry::stacked_circular(int rings, int elements_per_ring, double radius_m,
                                              double ring_spacing_m) {
    ArrayGeometry a;
    a.positions.resize(3, rings * elements_per_ring);
    int k = 0;
    for (int r = 0; r < rings; ++r) {
        const double z = (r - (rings - 1) / 2.0) * ring_spacing_m;
        for (int e = 0; e < elements_per_ring; ++e, ++k) {
            const double phi = kTwoPi * e / elements_per_ring;
            a.positions.col(k) = Vec3(radius_m * std::cos(phi), radius_m * std::sin(phi), z);
        }
    }
    a.patterns = {ElementPattern::isotropic()};
    return a;
}

std::vector<std::string> ArrayGeometry::validate() const {
    std::vector<std::string> errors;
    if (positions.cols() < 1) errors.push_back("array needs >= 1 element");
    if (!positions.allFinite()) errors.push_back("element positions must be finite");
    if (patterns.empty()) {
        errors.push_back("array needs at least one element pattern");
    } else if (patterns.size() != 1 && patterns.size() != static_cast<std::size_t>(positions.cols())) {
        errors.push_back("pattern list must have size 1 or M");
    }
    return errors;
}

Eigen::VectorXcd steering_vector(const ArrayGeometry& array, double azimuth, double elevation,
                                 double frequency_hz) {
    const Vec3 u = unit_from_angles(azimuth, elevation);
    const double k = kTwoPi * frequency_hz / kSpeedOfLight;
    Eigen::VectorXcd v(array.size());
    for (int m = 0; m < array.size(); ++m) {
        const double phase = k * u.dot(array.positions.col(m));
        v(m) = array.pattern(m).gain(azimuth, elevation) * std::polar(1.0, phase);
    }
    return v;
}

// ---------------------------------------------------------------------------
// Channel synthesis

namespace {

/// exp(-j 2 pi f tau) with the large product reduced mod 1 first; keeps the
/// phase accurate for RF-scale f*tau.
std::complex<double> delay_phasor(double f, double tau) {
    return std::polar(1.0, -kTwoPi * std::remainder(f * tau, 1.0));
}

} // namespace

Eigen::MatrixXcd synth_channel(const scene::PathSet& paths, const ArrayGeometry& array,
                               const std::vector<double>& freq_hz, double t,
                               double steering_freq_hz) {
    if (paths.paths.empty()) throw ValidationError("synth_channel: empty path set");
    if (freq_hz.empty()) throw ValidationError("synth_channel: empty frequency grid");
    double f_st = steering_freq_hz;
    if (f_st <= 0) {
        f_st = std::accumulate(freq_hz.begin(), freq_hz.end(), 0.0) /
               static_cast<double>(freq_hz.size());
    }

    const int m_count = array.size();
    const auto n_f = static_cast<Eigen::Index>(freq_hz.size());
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(m_count, n_f);
    for (const auto& path : paths.paths) {
        const Eigen::VectorXcd a =
            steering_vector(array, path.azimuth_rad, path.elevation_rad, f_st);
        const std::complex<double> doppler =
            std::polar(1.0, kTwoPi * std::remainder(path.doppler_hz * t, 1.0));
        for (Eigen::Index fi = 0; fi < n_f; ++fi) {
            const std::complex<double> base = path.gain * delay_phasor(freq_hz[fi], path.delay_s) * doppler;
            for (int m = 0; m < m_count; ++m) {
                h(m, fi) += base * a(m);
            }
        }
    }
    return h;
}

// ---------------------------------------------------------------------------
// Switch schedule / impairments

std::vector<std::string> SwitchSchedule::validate(int element_count) const {
    std::vector<std::string> errors;
    if (static_cast<int>(element_order.size()) != element_count) {
        errors.push_back("element_order size must equal array element count");
        return errors;
    }
    std::vector<int> sorted = element_order;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < element_count; ++i) {
        if (sorted[i] != i) {
            errors.push_back("element_order must be a permutation of 0..M-1");
            break;
        }
    }
    if (!(dwell_s >= 0)) errors.push_back("dwell must be >= 0");
    if (element_count * dwell_s > snapshot_period_s + 1e-12) {
        errors.push_back("M * dwell exceeds the snapshot period");
    }
    if (!(snapshot_rate_hz > 0)) errors.push_back("snapshot_rate must be > 0");
    return errors;
}

SwitchSchedule SwitchSchedule::sequential(int element_count, double dwell_s, double rate_hz) {
    SwitchSchedule s;
    s.element_order.resize(element_count);
    std::iota(s.element_order.begin(), s.element_order.end(), 0);
    s.dwell_s = dwell_s;
    s.snapshot_rate_hz = rate_hz;
    s.snapshot_period_s = 1.0 / rate_hz;
    return s;
}

double ImpairmentProfile::phase_offset(int ch) const {
    return phase_offset_rad.size() ? phase_offset_rad(ch) : 0.0;
}
double ImpairmentProfile::gain_ripple(int ch) const {
    return gain_ripple_db.size() ? gain_ripple_db(ch) : 0.0;
}
double ImpairmentProfile::drift(int ch) const {
    return phase_drift_rad_per_s.size() ? phase_drift_rad_per_s(ch) : 0.0;
}
std::complex<double> ImpairmentProfile::system(int bin) const {
    return system_response.size() ? system_response(bin) : std::complex<double>{1.0, 0.0};
}

std::vector<std::string> ImpairmentProfile::validate(int element_count, int bin_count) const {
    std::vector<std::string> errors;
    const auto check_len = [&](const auto& v, const char* name, int want) {
        if (v.size() && v.size() != want) {
            errors.push_back(std::string(name) + " must have length " + std::to_string(want));
        }
        if (v.size() && !v.allFinite()) {
            errors.push_back(std::string(name) + " must be finite");
        }
    };
    check_len(phase_offset_rad, "phase_offset", element_count);
    check_len(gain_ripple_db, "gain_ripple", element_count);
    check_len(phase_drift_rad_per_s, "phase_drift", element_count);
    check_len(system_response, "system_response", bin_count);
    for (Eigen::Index i = 0; i < system_response.size(); ++i) {
        if (std::abs(system_response(i)) < 1e-15) {
            errors.push_back("system_response has a zero in-band bin at index " + std::to_string(i));
            break;
        }
    }
    return errors;
}

// ---------------------------------------------------------------------------
// Capture

namespace {

std::vector<double> tone_grid(const waveform::ToneConfig& wave, double carrier_hz,
                              std::vector<bool>& in_band) {
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(wave.tone_count()));
    in_band.clear();
    for (int n = -wave.half_tone_count; n <= wave.half_tone_count; ++n) {
        grid.push_back(carrier_hz + n * wave.tone_spacing_hz);
        in_band.push_back(wave.tone_enabled(n));
    }
    return grid;
}

void apply_impairments_and_noise(Eigen::MatrixXcd& h, const std::vector<double>& times,
                                 const std::vector<bool>& in_band,
                                 const ImpairmentProfile& impairments, const NoiseSpec& noise,
                                 Snapshot& snap) {
    const auto m_count = h.rows();
    const auto n_f = h.cols();
    Rng rng = Rng::substream(noise.seed, "snapshot-noise", noise.snapshot_index);
    for (Eigen::Index m = 0; m < m_count; ++m) {
        const double ripple = std::pow(10.0, impairments.gain_ripple(static_cast<int>(m)) / 20.0);
        const std::complex<double> channel_phase = std::polar(
            ripple, impairments.phase_offset(static_cast<int>(m)) +
                        impairments.drift(static_cast<int>(m)) * times[static_cast<std::size_t>(m)]);
        for (Eigen::Index f = 0; f < n_f; ++f) {
            if (!in_band[static_cast<std::size_t>(f)]) {
                h(m, f) = 0.0;
                continue;
            }
            h(m, f) *= channel_phase * impairments.system(static_cast<int>(f));
            if (noise.enabled) {
                h(m, f) += rng.complex_gaussian(noise.per_bin_variance);
            }
        }
    }
    snap.noise_variance = noise.enabled ? noise.per_bin_variance : 0.0;
}

} // namespace

Snapshot capture_snapshot(const scene::SceneSpec& scn, const ArrayGeometry& array,
                          const SwitchSchedule& schedule, const ImpairmentProfile& impairments,
                          const waveform::ToneConfig& wave, const NoiseSpec& noise, double t) {
    {
        auto errs = schedule.validate(array.size());
        auto imp_errs = impairments.validate(array.size(), wave.tone_count());
        errs.insert(errs.end(), imp_errs.begin(), imp_errs.end());
        if (!errs.empty()) throw ValidationError("capture_snapshot: " + errs.front());
    }

    Snapshot snap;
    snap.timestamp = t;
    snap.steering_freq_hz = scn.carrier_frequency_hz;
    snap.freq_hz = tone_grid(wave, scn.carrier_frequency_hz, snap.in_band);
    snap.element_time.assign(static_cast<std::size_t>(array.size()), t);
    snap.response.resize(array.size(), static_cast<Eigen::Index>(snap.freq_hz.size()));

    // Geometry is frozen at the snapshot epoch; each element then advances by
    // its dwell slot, which the Doppler phasor turns into the inter-element
    // phase progression a moving platform produces.
    const scene::PathSet paths = scene::ground_truth_paths(scn, t);
    if (paths.paths.empty()) {
        snap.response.setZero();
    }
    for (std::size_t slot = 0; slot < schedule.element_order.size(); ++slot) {
        const int element = schedule.element_order[slot];
        const double elapsed = static_cast<double>(slot) * schedule.dwell_s;
        snap.element_time[static_cast<std::size_t>(element)] = t + elapsed;
        if (paths.paths.empty()) continue;
        const Eigen::MatrixXcd h =
            synth_channel(paths, array, snap.freq_hz, elapsed, snap.steering_freq_hz);
        snap.response.row(element) = h.row(element);
    }

    apply_impairments_and_noise(snap.response, snap.element_time, snap.in_band, impairments, noise,
                                snap);
    return snap;
}

Snapshot capture_b2b(const ArrayGeometry& array, const SwitchSchedule& schedule,
                     const ImpairmentProfile& impairments, const waveform::ToneConfig& wave,
                     double carrier_hz, double attenuation_db, double cable_delay_s,
                     const NoiseSpec& noise, double t) {
    {
        auto errs = schedule.validate(array.size());
        auto imp_errs = impairments.validate(array.size(), wave.tone_count());
        errs.insert(errs.end(), imp_errs.begin(), imp_errs.end());
        if (!errs.empty()) throw ValidationError("capture_b2b: " + errs.front());
    }
    Snapshot snap;
    snap.timestamp = t;
    snap.steering_freq_hz = carrier_hz;
    snap.freq_hz = tone_grid(wave, carrier_hz, snap.in_band);
    snap.element_time.assign(static_cast<std::size_t>(array.size()), t);
    snap.response.resize(array.size(), static_cast<Eigen::Index>(snap.freq_hz.size()));

    const double amp = std::pow(10.0, -attenuation_db / 20.0);
    for (std::size_t slot = 0; slot < schedule.element_order.size(); ++slot) {
        const int element = schedule.element_order[slot];
        snap.element_time[static_cast<std::size_t>(element)] =
            t + static_cast<double>(slot) * schedule.dwell_s;
        for (std::size_t f = 0; f < snap.freq_hz.size(); ++f) {
            snap.response(element, static_cast<Eigen::Index>(f)) =
                amp * delay_phasor(snap.freq_hz[f], cable_delay_s);
        }
    }
    apply_impairments_and_noise(snap.response, snap.element_time, snap.in_band, impairments, noise,
                                snap);
    return snap;
}

// ---------------------------------------------------------------------------
// Link budget

std::vector<std::string> BudgetLedger::validate() const {
    std::vector<std::string> errors;
    for (const double v : {source_power_dbm, amplifier_gain_db, tx_antenna_gain_dbi,
                           tx_hardware_loss_db, rx_antenna_gain_dbi, lna_gain_db, rx_cable_loss_db,
                           switch_insertion_loss_db, noise_density_dbm_hz, bandwidth_db_hz,
                           receiver_noise_figure_db, snr_threshold_db}) {
        if (!std::isfinite(v)) {
            errors.push_back("ledger entries must be finite");
            break;
        }
    }
    return errors;
}

BudgetReport max_measurable_path_loss(const BudgetLedger& ledger,
                                      std::optional<double> reference_db) {
    if (!ledger.validate().empty()) throw ValidationError("budget: non-finite ledger");
    BudgetReport r;
    r.ledger = ledger;
    r.noise_power_dbm =
        ledger.noise_density_dbm_hz + ledger.bandwidth_db_hz + ledger.receiver_noise_figure_db;
    r.tx_chain_db = ledger.source_power_dbm + ledger.amplifier_gain_db +
                    ledger.tx_antenna_gain_dbi - ledger.tx_hardware_loss_db;
    r.rx_chain_db = ledger.rx_antenna_gain_dbi + ledger.lna_gain_db - ledger.rx_cable_loss_db -
                    ledger.switch_insertion_loss_db;
    r.max_path_loss_db = r.tx_chain_db + r.rx_chain_db - r.noise_power_dbm - ledger.snr_threshold_db;
    if (reference_db) {
        r.reference_db = reference_db;
        r.residual_db = r.max_path_loss_db - *reference_db;
    }
    return r;
}

std::string BudgetReport::to_text() const {
    std::ostringstream os;
    const auto line = [&](const char* name, double v, const char* unit) {
        os << name << "\t" << v << "\t" << unit << "\n";
    };
    line("source_power", ledger.source_power_dbm, "dBm");
    line("amplifier_gain", ledger.amplifier_gain_db, "dB");
    line("tx_antenna_gain", ledger.tx_antenna_gain_dbi, "dBi");
    line("tx_hardware_loss", ledger.tx_hardware_loss_db, "dB");
    line("rx_antenna_gain", ledger.rx_antenna_gain_dbi, "dBi");
    line("lna_gain", ledger.lna_gain_db, "dB");
    line("rx_cable_loss", ledger.rx_cable_loss_db, "dB");
    line("switch_insertion_loss", ledger.switch_insertion_loss_db, "dB");
    line("noise_density", ledger.noise_density_dbm_hz, "dBm/Hz");
    line("bandwidth", ledger.bandwidth_db_hz, "dB.Hz");
    line("receiver_noise_figure", ledger.receiver_noise_figure_db, "dB");
    line("snr_threshold", ledger.snr_threshold_db, "dB");
    line("noise_power", noise_power_dbm, "dBm");
    line("tx_chain", tx_chain_db, "dB");
    line("rx_chain", rx_chain_db, "dB");
    line("max_measurable_path_loss", max_path_loss_db, "dB");
    if (reference_db) {
        line("reference_value", *reference_db, "dB");
        line("residual_vs_reference", *residual_db, "dB");
        os << "note\tledger sum and reference disagree by " << *residual_db
           << " dB; unreconciled terms are reported, not hidden\n";
    }
    return os.str();
}

} // namespace msense::sounder
