// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "msense/calib.hpp"
#include "msense/core/errors.hpp"
#include "msense/core/rng.hpp"
#include "oracles.hpp"

using namespace msense;
using namespace msense::calib;
using namespace msense::sounder;

namespace {

waveform::ToneConfig test_wave(int half = 16) {
    waveform::ToneConfig cfg;
    cfg.half_tone_count = half;
    cfg.tone_spacing_hz = 1e9 / (2.0 * half + 1.0);
    return cfg;
}

Snapshot b2b_capture(const ImpairmentProfile& imp, double atten_db, double delay_s,
                     const NoiseSpec& noise = {}, double t = 0.0, int channels = 4) {
    const auto array = [&] {
        auto a = ArrayGeometry::single_isotropic();
        a.positions = Eigen::Matrix3Xd::Zero(3, channels);
        return a;
    }();
    auto schedule = SwitchSchedule::sequential(channels, 8e-6, 50.0);
    return capture_b2b(array, schedule, imp, test_wave(), 28e9, atten_db, delay_s, noise, t);
}

ImpairmentProfile ripple_profile(int channels, int bins) {
    ImpairmentProfile imp;
    imp.system_response.resize(bins);
    for (int i = 0; i < bins; ++i) {
        // Raised-cosine amplitude ripple with a mild phase curl.
        const double u = static_cast<double>(i) / (bins - 1);
        imp.system_response(i) = std::polar(1.0 + 0.2 * std::cos(kTwoPi * 2 * u), 0.3 * u);
    }
    imp.phase_offset_rad = Eigen::VectorXd::LinSpaced(channels, 0.0, 1.2);
    imp.gain_ripple_db = Eigen::VectorXd::LinSpaced(channels, -1.0, 1.0);
    return imp;
}

} // namespace

TEST_CASE("impairment-free B2B extraction is flat unity") {
    const auto snap = b2b_capture(ImpairmentProfile::none(), 30.0, 0.0);
    const auto sys = b2b_extract(snap, 30.0);
    for (Eigen::Index m = 0; m < sys.response.rows(); ++m) {
        for (Eigen::Index f = 0; f < sys.response.cols(); ++f) {
            CHECK(std::abs(sys.response(m, f) - std::complex<double>(1, 0)) < 1e-12);
        }
    }
}

TEST_CASE("injected ripple is recovered exactly by extraction") {
    const int bins = test_wave().tone_count();
    const auto imp = ripple_profile(4, bins);
    const auto snap = b2b_capture(imp, 30.0, 40e-9);
    const auto sys = b2b_extract(snap, 30.0, 40e-9);
    for (Eigen::Index m = 0; m < sys.response.rows(); ++m) {
        for (Eigen::Index f = 0; f < sys.response.cols(); ++f) {
            const std::complex<double> expected =
                imp.system_response(f) *
                std::polar(std::pow(10.0, imp.gain_ripple_db(m) / 20.0), imp.phase_offset_rad(m));
            CHECK(std::abs(sys.response(m, f) - expected) < 1e-9);
        }
    }
}

TEST_CASE("repeated B2B captures with one seed are bit-identical") {
    NoiseSpec noise;
    noise.enabled = true;
    noise.per_bin_variance = 1e-4;
    noise.seed = 9;
    const auto a = b2b_capture(ImpairmentProfile::none(), 20.0, 0.0, noise);
    const auto b = b2b_capture(ImpairmentProfile::none(), 20.0, 0.0, noise);
    CHECK(b2b_extract(a, 20.0).response == b2b_extract(b, 20.0).response);
}

TEST_CASE("zero-valued raw bins raise a division-guard error naming the bin") {
    auto snap = b2b_capture(ImpairmentProfile::none(), 30.0, 0.0);
    snap.response(2, 5) = 0.0;
    CHECK_THROWS_WITH_AS(b2b_extract(snap, 30.0), doctest::Contains("channel 2"), NumericalError);
}

TEST_CASE("apply_calibration: self-cancellation and multiplicative cancellation") {
    const int bins = test_wave().tone_count();
    const auto imp = ripple_profile(4, bins);
    const auto ref = b2b_capture(imp, 30.0, 0.0);
    const auto sys = b2b_extract(ref, 30.0);

    // raw == capture of the system itself -> all-ones calibrated response.
    Snapshot raw = ref;
    raw.response *= std::pow(10.0, 30.0 / 20.0); // undo the pad
    const auto entry = apply_calibration(raw, sys);
    for (Eigen::Index m = 0; m < entry.h.rows(); ++m) {
        for (Eigen::Index f = 0; f < entry.h.cols(); ++f) {
            CHECK(std::abs(entry.h(m, f) - std::complex<double>(1, 0)) < 1e-10);
        }
    }

    // raw = sys x pure delay -> calibrated response is exactly the delay.
    Snapshot delayed = raw;
    const double tau = 25e-9;
    for (Eigen::Index m = 0; m < delayed.response.rows(); ++m) {
        for (Eigen::Index f = 0; f < delayed.response.cols(); ++f) {
            delayed.response(m, f) *= std::polar(
                1.0,
                -kTwoPi * std::remainder(delayed.freq_hz[static_cast<std::size_t>(f)] * tau, 1.0));
        }
    }
    const auto cal = apply_calibration(delayed, sys);
    for (Eigen::Index f = 0; f < cal.h.cols(); ++f) {
        const std::complex<double> expected = std::polar(
            1.0, -kTwoPi * std::remainder(cal.freq_hz[static_cast<std::size_t>(f)] * tau, 1.0));
        CHECK(std::abs(cal.h(0, f) - expected) < 1e-10);
    }
}

TEST_CASE("end-to-end: impairments captured through a scene calibrate out") {
    scene::SceneSpec scn;
    scn.carrier_frequency_hz = 28e9;
    scn.tx_pose.p = Vec3::Zero();
    scn.rx_trajectory = scene::Trajectory::fixed(Vec3(40, 3, 1), 0.0, 1.0);
    const double lambda = scn.wavelength();
    const auto array = ArrayGeometry::uniform_planar(2, 2, lambda / 2);
    auto schedule = SwitchSchedule::sequential(4, 0.0, 50.0);
    const auto wave = test_wave();
    const auto imp = ripple_profile(4, wave.tone_count());

    const auto ref = capture_b2b(array, schedule, imp, wave, scn.carrier_frequency_hz, 30.0, 0.0,
                                 NoiseSpec{}, 0.0);
    const auto sys = b2b_extract(ref, 30.0);
    const auto raw = capture_snapshot(scn, array, schedule, imp, wave, NoiseSpec{}, 0.5);
    const auto cal = apply_calibration(raw, sys);

    const auto clean =
        capture_snapshot(scn, array, schedule, ImpairmentProfile::none(), wave, NoiseSpec{}, 0.5);
    CHECK((cal.h - clean.response).norm() < 1e-8 * clean.response.norm());
}

TEST_CASE("grid mismatch is a configuration error") {
    const auto ref = b2b_capture(ImpairmentProfile::none(), 30.0, 0.0);
    const auto sys = b2b_extract(ref, 30.0);
    auto other = b2b_capture(ImpairmentProfile::none(), 30.0, 0.0);
    other.freq_hz[3] += 1.0;
    CHECK_THROWS_AS(apply_calibration(other, sys), ValidationError);
}

TEST_CASE("noiseless phase offsets are estimated exactly") {
    ImpairmentProfile imp;
    imp.phase_offset_rad = Eigen::VectorXd(4);
    imp.phase_offset_rad << 0.0, deg2rad(30), deg2rad(60), deg2rad(90);
    std::vector<Snapshot> captures;
    for (int i = 0; i < 10; ++i) {
        captures.push_back(b2b_capture(imp, 30.0, 0.0, NoiseSpec{}, 0.02 * i));
    }
    const auto offsets = estimate_phase_offsets(captures);
    CHECK(offsets.offset_rad(0) == 0.0);
    for (int ch = 1; ch < 4; ++ch) {
        CHECK(offsets.offset_rad(ch) == doctest::Approx(imp.phase_offset_rad(ch)).epsilon(1e-9));
        CHECK(std::abs(offsets.drift_rad_per_s(ch)) < 1e-9);
    }
}

TEST_CASE("linear drift over a 10 s window is recovered to 1e-9") {
    ImpairmentProfile imp;
    imp.phase_offset_rad = Eigen::VectorXd::Zero(3);
    imp.phase_drift_rad_per_s = Eigen::VectorXd(3);
    imp.phase_drift_rad_per_s << 0.0, 0.01, -0.004;
    std::vector<Snapshot> captures;
    for (int i = 0; i < 51; ++i) {
        captures.push_back(b2b_capture(imp, 30.0, 0.0, NoiseSpec{}, 0.2 * i, 3));
    }
    const auto offsets = estimate_phase_offsets(captures);
    CHECK(offsets.drift_rad_per_s(1) == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(offsets.drift_rad_per_s(2) == doctest::Approx(-0.004).epsilon(1e-9));
    CHECK(offsets.window_span_s == doctest::Approx(10.0));
}

TEST_CASE("noisy offsets stay within 2 degrees and match a grid-search oracle") {
    ImpairmentProfile imp;
    imp.phase_offset_rad = Eigen::VectorXd(3);
    imp.phase_offset_rad << 0.0, deg2rad(47.0), deg2rad(-112.0);
    std::vector<Snapshot> captures;
    for (int i = 0; i < 100; ++i) {
        NoiseSpec noise;
        noise.enabled = true;
        // 20 dB per-bin SNR against the 30 dB pad (|raw|^2 = 1e-3).
        noise.per_bin_variance = 1e-3 * std::pow(10.0, -20.0 / 10.0);
        noise.seed = 1234;
        noise.snapshot_index = static_cast<std::uint64_t>(i);
        captures.push_back(b2b_capture(imp, 30.0, 0.0, noise, 0.02 * i, 3));
    }
    const auto offsets = estimate_phase_offsets(captures);

    // Independent oracle: dense grid search over candidate offsets maximizing
    // sum_s cos(phase_s(ch) - candidate).
    for (int ch = 1; ch < 3; ++ch) {
        double best = 0, best_score = -1e300;
        for (double cand = -kPi; cand < kPi; cand += deg2rad(0.05)) {
            double score = 0;
            for (const auto& snap : captures) {
                std::complex<double> acc{0, 0};
                for (Eigen::Index f = 0; f < snap.response.cols(); ++f) {
                    acc += snap.response(ch, f) * std::conj(snap.response(0, f));
                }
                score += std::cos(std::arg(acc) - cand);
            }
            if (score > best_score) {
                best_score = score;
                best = cand;
            }
        }
        CHECK(std::abs(std::remainder(offsets.offset_rad(ch) - imp.phase_offset_rad(ch), kTwoPi)) <
              deg2rad(2.0));
        // The estimator also fits a drift term the offset-only oracle lacks;
        // they agree to a fraction of a degree.
        CHECK(std::abs(std::remainder(offsets.offset_rad(ch) - best, kTwoPi)) < deg2rad(0.5));
    }
}

TEST_CASE("offset compensation is idempotent") {
    ImpairmentProfile imp;
    imp.phase_offset_rad = Eigen::VectorXd(4);
    imp.phase_offset_rad << 0.0, 0.4, -0.9, 2.2;
    std::vector<Snapshot> captures;
    for (int i = 0; i < 8; ++i) {
        captures.push_back(b2b_capture(imp, 30.0, 0.0, NoiseSpec{}, 0.02 * i));
    }
    const auto offsets = estimate_phase_offsets(captures);
    for (auto& snap : captures) apply_phase_offsets(snap, offsets);
    const auto second = estimate_phase_offsets(captures);
    for (int ch = 0; ch < 4; ++ch) {
        CHECK(std::abs(second.offset_rad(ch)) < 1e-6);
    }
}

TEST_CASE("offsets are invariant to a global phase rotation") {
    ImpairmentProfile imp;
    imp.phase_offset_rad = Eigen::VectorXd(3);
    imp.phase_offset_rad << 0.0, 0.7, 1.9;
    std::vector<Snapshot> captures, rotated;
    for (int i = 0; i < 8; ++i) {
        auto snap = b2b_capture(imp, 30.0, 0.0, NoiseSpec{}, 0.02 * i, 3);
        captures.push_back(snap);
        snap.response *= std::polar(1.0, 1.234);
        rotated.push_back(snap);
    }
    const auto a = estimate_phase_offsets(captures);
    const auto b = estimate_phase_offsets(rotated);
    for (int ch = 0; ch < 3; ++ch) {
        CHECK(a.offset_rad(ch) == doctest::Approx(b.offset_rad(ch)).epsilon(1e-12));
    }
}

TEST_CASE("fewer than two captures is insufficient data") {
    std::vector<Snapshot> captures{b2b_capture(ImpairmentProfile::none(), 30.0, 0.0)};
    CHECK_THROWS_AS(estimate_phase_offsets(captures), ValidationError);
}

TEST_CASE("calibration artifacts round-trip through their binary formats") {
    const int bins = test_wave().tone_count();
    const auto imp = ripple_profile(4, bins);
    const auto ref = b2b_capture(imp, 30.0, 10e-9);
    const auto sys = b2b_extract(ref, 30.0, 10e-9);
    save_system_response(sys, "sys_roundtrip.bin");
    const auto sys2 = load_system_response("sys_roundtrip.bin");
    CHECK(sys2.response == sys.response);
    CHECK(sys2.freq_hz == sys.freq_hz);
    std::remove("sys_roundtrip.bin");

    PhaseOffsets off;
    off.offset_rad = Eigen::VectorXd::LinSpaced(4, 0, 1);
    off.drift_rad_per_s = Eigen::VectorXd::LinSpaced(4, -1e-3, 1e-3);
    off.window_start_s = 2.0;
    off.window_span_s = 8.0;
    save_phase_offsets(off, "off_roundtrip.bin");
    const auto off2 = load_phase_offsets("off_roundtrip.bin");
    CHECK(off2.offset_rad == off.offset_rad);
    CHECK(off2.drift_rad_per_s == off.drift_rad_per_s);
    std::remove("off_roundtrip.bin");
}

TEST_CASE("CIRMatrix impulse-response cache preserves Parseval (1/N convention)") {
    Rng rng(5);
    CirEntry entry;
    entry.timestamp = 0;
    const int bins = 32;
    entry.h.resize(2, bins);
    for (Eigen::Index m = 0; m < 2; ++m) {
        for (int f = 0; f < bins; ++f) entry.h(m, f) = rng.complex_gaussian();
    }
    for (int f = 0; f < bins; ++f) {
        entry.freq_hz.push_back(28e9 + f * 1e6);
        entry.valid_bins.push_back(true);
    }
    CIRMatrix cir;
    cir.append(entry);
    const auto& ir = cir.impulse_response(0);
    CHECK(ir.squaredNorm() == doctest::Approx(entry.h.squaredNorm() / bins).epsilon(1e-9));
}
