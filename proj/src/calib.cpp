// SPDX-License-Identifier: Apache-2.0
#include "msense/calib.hpp"

#include <cmath>

#include "msense/core/binio.hpp"
#include "msense/core/constants.hpp"
#include "msense/core/errors.hpp"
#include "msense/core/fft.hpp"

namespace msense::calib {

namespace {

std::complex<double> delay_phasor(double f, double tau) {
    return std::polar(1.0, -kTwoPi * std::remainder(f * tau, 1.0));
}

/// Per-capture phase of channel `ch` relative to channel 0, averaged over
/// valid bins as a unit-phasor sum (circular mean).
double relative_phase(const sounder::Snapshot& snap, int ch) {
    std::complex<double> acc{0.0, 0.0};
    for (Eigen::Index f = 0; f < snap.response.cols(); ++f) {
        if (!snap.in_band[static_cast<std::size_t>(f)]) continue;
        acc += snap.response(ch, f) * std::conj(snap.response(0, f));
    }
    return std::arg(acc);
}

} // namespace

// ---------------------------------------------------------------------------
// CIRMatrix

void CIRMatrix::append(CirEntry entry) {
    if (!entries_.empty()) {
        if (entry.freq_hz != entries_.front().freq_hz) {
            throw ValidationError("CIRMatrix: bin grid mismatch between snapshots");
        }
    }
    timestamps_.push_back(entry.timestamp);
    entries_.push_back(std::move(entry));
    ir_cache_.emplace_back();
    ir_ready_.push_back(false);
}

const std::vector<double>& CIRMatrix::freq_hz() const {
    if (entries_.empty()) throw ValidationError("CIRMatrix: empty");
    return entries_.front().freq_hz;
}

double CIRMatrix::bin_spacing_hz() const {
    const auto& f = freq_hz();
    if (f.size() < 2) throw ValidationError("CIRMatrix: need >= 2 bins for spacing");
    return f[1] - f[0];
}

double CIRMatrix::bandwidth_hz() const {
    return bin_spacing_hz() * static_cast<double>(freq_hz().size());
}

double CIRMatrix::carrier_hz() const {
    const auto& f = freq_hz();
    return (f.front() + f.back()) / 2.0;
}

double CIRMatrix::wavelength_m() const { return kSpeedOfLight / carrier_hz(); }

const Eigen::MatrixXcd& CIRMatrix::impulse_response(std::size_t i) const {
    if (!ir_ready_.at(i)) {
        const auto& h = entries_[i].h;
        Eigen::MatrixXcd ir(h.rows(), h.cols());
        const auto n = static_cast<std::size_t>(h.cols());
        fft::cvec row(n);
        for (Eigen::Index m = 0; m < h.rows(); ++m) {
            for (std::size_t f = 0; f < n; ++f) row[f] = h(m, static_cast<Eigen::Index>(f));
            fft::cvec td = fft::inverse(row);
            for (std::size_t k = 0; k < n; ++k) {
                ir(m, static_cast<Eigen::Index>(k)) = td[k] / static_cast<double>(n);
            }
        }
        ir_cache_[i] = std::move(ir);
        ir_ready_[i] = true;
    }
    return ir_cache_[i];
}

// ---------------------------------------------------------------------------
// B2B extraction and compensation

SystemResponse b2b_extract(const sounder::Snapshot& reference, double known_attenuation_db,
                           double cable_delay_s) {
    SystemResponse sys;
    sys.freq_hz = reference.freq_hz;
    sys.valid_bins = reference.in_band;
    sys.reference_attenuation_db = known_attenuation_db;
    sys.response.resize(reference.response.rows(), reference.response.cols());

    const double amp = std::pow(10.0, -known_attenuation_db / 20.0);
    for (Eigen::Index f = 0; f < reference.response.cols(); ++f) {
        if (!reference.in_band[static_cast<std::size_t>(f)]) {
            sys.response.col(f).setZero();
            continue;
        }
        const std::complex<double> ideal = amp * delay_phasor(reference.freq_hz[static_cast<std::size_t>(f)], cable_delay_s);
        for (Eigen::Index m = 0; m < reference.response.rows(); ++m) {
            const std::complex<double> raw = reference.response(m, f);
            if (std::abs(raw) < 1e-15) {
                throw NumericalError("b2b_extract: zero-valued raw bin at channel " +
                                     std::to_string(m) + ", bin " + std::to_string(f));
            }
            sys.response(m, f) = raw / ideal;
        }
    }
    return sys;
}

CirEntry apply_calibration(const sounder::Snapshot& raw, const SystemResponse& sys) {
    if (raw.freq_hz != sys.freq_hz) {
        throw ValidationError("apply_calibration: bin grid mismatch");
    }
    if (raw.response.rows() != sys.response.rows()) {
        throw ValidationError("apply_calibration: channel count mismatch");
    }
    CirEntry out;
    out.timestamp = raw.timestamp;
    out.freq_hz = raw.freq_hz;
    out.valid_bins.resize(raw.freq_hz.size());
    out.h.resize(raw.response.rows(), raw.response.cols());
    for (Eigen::Index f = 0; f < raw.response.cols(); ++f) {
        const bool valid = raw.in_band[static_cast<std::size_t>(f)] &&
                           sys.valid_bins[static_cast<std::size_t>(f)];
        out.valid_bins[static_cast<std::size_t>(f)] = valid;
        if (!valid) {
            out.h.col(f).setZero();
            continue;
        }
        for (Eigen::Index m = 0; m < raw.response.rows(); ++m) {
            out.h(m, f) = raw.response(m, f) / sys.response(m, f);
        }
    }
    return out;
}

PhaseOffsets estimate_phase_offsets(const std::vector<sounder::Snapshot>& captures) {
    if (captures.size() < 2) {
        throw ValidationError("estimate_phase_offsets: need >= 2 captures");
    }
    const auto m_count = captures.front().response.rows();
    const auto s_count = captures.size();
    const double t0 = captures.front().timestamp;

    PhaseOffsets result;
    result.offset_rad = Eigen::VectorXd::Zero(m_count);
    result.drift_rad_per_s = Eigen::VectorXd::Zero(m_count);
    result.window_start_s = t0;
    result.window_span_s = captures.back().timestamp - t0;

    double residual_acc = 0.0;
    std::size_t residual_n = 0;
    for (Eigen::Index ch = 1; ch < m_count; ++ch) {
        // Unwrap the per-capture relative phase into a continuous series, then
        // fit offset + drift by least squares. Unwrapping (not averaging raw
        // angles) avoids wrap-around bias.
        std::vector<double> phase(s_count), time(s_count);
        double prev = relative_phase(captures.front(), static_cast<int>(ch));
        double accum = prev;
        phase[0] = accum;
        time[0] = 0.0;
        for (std::size_t s = 1; s < s_count; ++s) {
            const double ph = relative_phase(captures[s], static_cast<int>(ch));
            double delta = ph - prev;
            delta = std::remainder(delta, kTwoPi);
            accum += delta;
            prev = ph;
            phase[s] = accum;
            time[s] = captures[s].timestamp - t0;
        }
        double st = 0, sp = 0, stt = 0, stp = 0;
        for (std::size_t s = 0; s < s_count; ++s) {
            st += time[s];
            sp += phase[s];
            stt += time[s] * time[s];
            stp += time[s] * phase[s];
        }
        const double n = static_cast<double>(s_count);
        const double denom = n * stt - st * st;
        double drift = 0.0;
        if (std::abs(denom) > 1e-30) drift = (n * stp - st * sp) / denom;
        const double intercept = (sp - drift * st) / n;
        result.drift_rad_per_s(ch) = drift;
        // Offsets are reported as the circular mean of the drift-compensated
        // phase, wrapped to (-pi, pi].
        std::complex<double> mean{0.0, 0.0};
        for (std::size_t s = 0; s < s_count; ++s) {
            mean += std::polar(1.0, phase[s] - drift * time[s]);
        }
        result.offset_rad(ch) = std::arg(mean);
        for (std::size_t s = 0; s < s_count; ++s) {
            const double r = std::remainder(phase[s] - drift * time[s] - intercept, kTwoPi);
            residual_acc += r * r;
            ++residual_n;
        }
    }
    result.post_residual_std_rad = residual_n ? std::sqrt(residual_acc / static_cast<double>(residual_n)) : 0.0;
    return result;
}

namespace {

template <typename Matrix>
void compensate(Matrix& h, const std::vector<double>& element_time, const PhaseOffsets& off) {
    for (Eigen::Index ch = 0; ch < h.rows(); ++ch) {
        const double t = element_time.empty() ? off.window_start_s
                                              : element_time[static_cast<std::size_t>(ch)];
        const double phase =
            off.offset_rad(ch) + off.drift_rad_per_s(ch) * (t - off.window_start_s);
        h.row(ch) *= std::polar(1.0, -phase);
    }
}

} // namespace

void apply_phase_offsets(CirEntry& entry, const PhaseOffsets& offsets) {
    std::vector<double> times(static_cast<std::size_t>(entry.h.rows()), entry.timestamp);
    compensate(entry.h, times, offsets);
}

void apply_phase_offsets(sounder::Snapshot& snap, const PhaseOffsets& offsets) {
    compensate(snap.response, snap.element_time, offsets);
}

// ---------------------------------------------------------------------------
// Persistence

void save_system_response(const SystemResponse& sys, const std::string& path) {
    io::Writer w(path);
    w.header("MSSR", 1);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(sys.response.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(sys.response.cols()));
    w.put<double>(sys.reference_attenuation_db);
    for (const double f : sys.freq_hz) w.put<double>(f);
    for (const bool v : sys.valid_bins) w.put<std::uint8_t>(v ? 1 : 0);
    for (Eigen::Index m = 0; m < sys.response.rows(); ++m) {
        for (Eigen::Index f = 0; f < sys.response.cols(); ++f) {
            w.put<double>(sys.response(m, f).real());
            w.put<double>(sys.response(m, f).imag());
        }
    }
    w.close();
}

SystemResponse load_system_response(const std::string& path) {
    io::Reader r(path);
    r.expect_header("MSSR", 1);
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    SystemResponse sys;
    sys.reference_attenuation_db = r.get<double>();
    sys.freq_hz.resize(cols);
    for (auto& f : sys.freq_hz) f = r.get<double>();
    sys.valid_bins.resize(cols);
    for (std::size_t i = 0; i < cols; ++i) sys.valid_bins[i] = r.get<std::uint8_t>() != 0;
    sys.response.resize(rows, cols);
    for (Eigen::Index m = 0; m < sys.response.rows(); ++m) {
        for (Eigen::Index f = 0; f < sys.response.cols(); ++f) {
            const double re = r.get<double>();
            const double im = r.get<double>();
            sys.response(m, f) = {re, im};
        }
    }
    return sys;
}

void save_phase_offsets(const PhaseOffsets& off, const std::string& path) {
    io::Writer w(path);
    w.header("MSPO", 1);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(off.offset_rad.size()));
    w.put<double>(off.window_start_s);
    w.put<double>(off.window_span_s);
    w.put<double>(off.post_residual_std_rad);
    for (Eigen::Index i = 0; i < off.offset_rad.size(); ++i) w.put<double>(off.offset_rad(i));
    for (Eigen::Index i = 0; i < off.drift_rad_per_s.size(); ++i) w.put<double>(off.drift_rad_per_s(i));
    w.close();
}

PhaseOffsets load_phase_offsets(const std::string& path) {
    io::Reader r(path);
    r.expect_header("MSPO", 1);
    const auto n = r.get<std::uint32_t>();
    PhaseOffsets off;
    off.window_start_s = r.get<double>();
    off.window_span_s = r.get<double>();
    off.post_residual_std_rad = r.get<double>();
    off.offset_rad.resize(n);
    off.drift_rad_per_s.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) off.offset_rad(i) = r.get<double>();
    for (std::uint32_t i = 0; i < n; ++i) off.drift_rad_per_s(i) = r.get<double>();
    return off;
}

} // namespace msense::calib
