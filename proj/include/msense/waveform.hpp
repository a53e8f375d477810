// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <string>
#include <vector>

namespace msense::waveform {

enum class PhaseSchedule { Newman, Zero, Custom };

/// Multi-tone waveform, tones at n * tone_spacing for n in [-N, N].
struct ToneConfig {
    double tone_spacing_hz = 1e6;
    int half_tone_count = 500; // N; total tones = 2N+1
    PhaseSchedule schedule = PhaseSchedule::Newman;
    std::vector<double> custom_phases; // used when schedule == Custom; size 2N+1
    double sample_rate_hz = 0.0;       // 0 -> smallest power of two >= 2*(2N+1) bins
    std::vector<bool> guard_mask;      // optional per-tone enable; empty -> all on

    int tone_count() const { return 2 * half_tone_count + 1; }
    double bandwidth_hz() const { return tone_count() * tone_spacing_hz; }
    /// Phase of tone n (n in [-N, N]) under the configured schedule.
    double phase(int n) const;
    /// Tone enabled under the guard mask?
    bool tone_enabled(int n) const;
    std::vector<std::string> validate() const;
};

struct ComplexSignal {
    std::vector<std::complex<double>> samples;
    double sample_rate_hz = 0.0;
    double epoch_s = 0.0;
};

/// One period (1/tone_spacing) of the multi-tone waveform, built by placing
/// unit-magnitude bins at the tone frequencies and inverse-transforming.
/// Each enabled tone contributes exp(j(2 pi n df t + theta_n)) exactly.
ComplexSignal multitone(const ToneConfig& cfg);

/// Peak-to-average power ratio in dB.
double papr_db(const ComplexSignal& sig);

/// DC-centered discrete spectrum of the signal.
struct Spectrum {
    std::vector<std::complex<double>> bins; // DC at index floor(n/2)
    std::vector<double> freq_hz;
};
Spectrum spectrum(const ComplexSignal& sig);

/// Serialize as interleaved little-endian float64 I/Q plus a small sidecar
/// metadata record (sample rate and epoch) in the same file header.
void save_iq(const ComplexSignal& sig, const std::string& path);
ComplexSignal load_iq(const std::string& path);

} // namespace msense::waveform
