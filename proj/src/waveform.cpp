// SPDX-License-Identifier: Apache-2.0
#include "msense/waveform.hpp"

#include <cmath>
#include <stdexcept>

#include "msense/core/binio.hpp"
#include "msense/core/constants.hpp"
#include "msense/core/errors.hpp"
#include "msense/core/fft.hpp"

namespace msense::waveform {

double ToneConfig::phase(int n) const {
    switch (schedule) {
        case PhaseSchedule::Zero:
            return 0.0;
        case PhaseSchedule::Newman:
            // Quadratic schedule; bounds the coherent peak without touching
            // the flat magnitude profile.
            return kPi * static_cast<double>(n) * static_cast<double>(n) /
                   static_cast<double>(tone_count());
        case PhaseSchedule::Custom:
            return custom_phases.at(static_cast<std::size_t>(n + half_tone_count));
    }
    return 0.0;
}

bool ToneConfig::tone_enabled(int n) const {
    if (guard_mask.empty()) return true;
    return guard_mask.at(static_cast<std::size_t>(n + half_tone_count));
}

std::vector<std::string> ToneConfig::validate() const {
    std::vector<std::string> errors;
    if (half_tone_count < 0) errors.push_back("half_tone_count must be >= 0");
    if (!(tone_spacing_hz > 0)) errors.push_back("tone_spacing must be > 0");
    if (schedule == PhaseSchedule::Custom &&
        custom_phases.size() != static_cast<std::size_t>(tone_count())) {
        errors.push_back("custom_phases length must equal 2N+1");
    }
    if (!guard_mask.empty() && guard_mask.size() != static_cast<std::size_t>(tone_count())) {
        errors.push_back("guard_mask length must equal 2N+1");
    }
    if (sample_rate_hz > 0) {
        const double ratio = sample_rate_hz / tone_spacing_hz;
        if (std::abs(ratio - std::round(ratio)) > 1e-9) {
            errors.push_back("sample_rate must be an integer multiple of tone_spacing");
        }
        if (std::llround(ratio) < tone_count()) {
            errors.push_back("sample_rate too low: tones would alias");
        }
    }
    return errors;
}

ComplexSignal multitone(const ToneConfig& cfg) {
    const auto errors = cfg.validate();
    if (!errors.empty()) throw ValidationError("multitone: " + errors.front());

    double fs = cfg.sample_rate_hz;
    if (fs <= 0) {
        std::size_t n = 1;
        while (n < 2 * static_cast<std::size_t>(cfg.tone_count())) n <<= 1;
        fs = static_cast<double>(n) * cfg.tone_spacing_hz;
    }
    const auto period = static_cast<std::size_t>(std::llround(fs / cfg.tone_spacing_hz));

    // Tone n lands in natural-order DFT bin (n mod period). Unnormalized
    // inverse transform makes each tone a unit-amplitude complex exponential.
    fft::cvec bins(period, {0.0, 0.0});
    for (int n = -cfg.half_tone_count; n <= cfg.half_tone_count; ++n) {
        if (!cfg.tone_enabled(n)) continue;
        const auto idx = static_cast<std::size_t>((n + static_cast<int>(period)) %
                                                  static_cast<int>(period));
        bins[idx] = std::polar(1.0, cfg.phase(n));
    }

    ComplexSignal sig;
    sig.samples = fft::inverse(bins);
    sig.sample_rate_hz = fs;
    return sig;
}

double papr_db(const ComplexSignal& sig) {
    if (sig.samples.empty()) throw ValidationError("papr: empty signal");
    double peak = 0.0;
    double sum = 0.0;
    for (const auto& x : sig.samples) {
        const double p = std::norm(x);
        peak = std::max(peak, p);
        sum += p;
    }
    const double mean = sum / static_cast<double>(sig.samples.size());
    if (mean <= 0.0) throw NumericalError("papr: all-zero signal");
    return 10.0 * std::log10(peak / mean);
}

Spectrum spectrum(const ComplexSignal& sig) {
    if (sig.samples.empty()) throw ValidationError("spectrum: empty signal");
    Spectrum s;
    s.bins = fft::fftshift(fft::forward(sig.samples));
    s.freq_hz = fft::centered_bin_frequencies(sig.samples.size(), sig.sample_rate_hz);
    return s;
}

void save_iq(const ComplexSignal& sig, const std::string& path) {
    io::Writer w(path);
    w.header("MSIQ", 1);
    w.put<std::uint64_t>(sig.samples.size());
    w.put<double>(sig.sample_rate_hz);
    w.put<double>(sig.epoch_s);
    for (const auto& x : sig.samples) {
        w.put<double>(x.real());
        w.put<double>(x.imag());
    }
    w.close();
}

ComplexSignal load_iq(const std::string& path) {
    io::Reader r(path);
    r.expect_header("MSIQ", 1);
    const auto count = r.get<std::uint64_t>();
    ComplexSignal sig;
    sig.sample_rate_hz = r.get<double>();
    sig.epoch_s = r.get<double>();
    sig.samples.resize(count);
    for (auto& x : sig.samples) {
        const double re = r.get<double>();
        const double im = r.get<double>();
        x = {re, im};
    }
    return sig;
}

} // namespace msense::waveform
