// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "msense/core/rng.hpp"
#include "msense/sounder.hpp"
#include "oracles.hpp"

using namespace msense;
using namespace msense::sounder;

namespace {

scene::PathSet make_paths(std::initializer_list<scene::Path> list) {
    scene::PathSet ps;
    ps.paths = list;
    return ps;
}

scene::Path path(double delay, std::complex<double> gain, double az, double el, double doppler = 0) {
    scene::Path p;
    p.delay_s = delay;
    p.gain = gain;
    p.azimuth_rad = az;
    p.elevation_rad = el;
    p.doppler_hz = doppler;
    return p;
}

std::vector<double> grid(double center, double span, int n) {
    std::vector<double> f(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        f[static_cast<std::size_t>(i)] = center - span / 2 + span * i / (n - 1);
    }
    return f;
}

} // namespace

TEST_CASE("steering vector is all-ones at broadside of a linear array") {
    const auto array = ArrayGeometry::uniform_linear(4, 0.005, Vec3::UnitX());
    // Broadside: direction orthogonal to the x-axis baselines.
    const auto v = steering_vector(array, kPi / 2, kPi / 2, 28e9); // +y, horizon
    for (int m = 0; m < 4; ++m) {
        CHECK(std::abs(v(m) - std::complex<double>(1, 0)) < 1e-12);
    }
}

TEST_CASE("half-wavelength endfire gives alternating 0 / pi phases") {
    const double f = 10e9;
    const double lambda = kSpeedOfLight / f;
    const auto array = ArrayGeometry::uniform_linear(2, lambda / 2, Vec3::UnitX());
    const auto v = steering_vector(array, 0.0, kPi / 2, f); // +x, endfire
    CHECK(std::abs(std::abs(v(0)) - 1.0) < 1e-12);
    CHECK(std::abs(std::abs(v(1)) - 1.0) < 1e-12);
    const double phase_diff = std::arg(v(1) * std::conj(v(0)));
    CHECK(std::abs(std::abs(phase_diff) - kPi) < 1e-9);
}

TEST_CASE("32-element planar steering matches the per-element inner-product oracle") {
    const double f = 28e9;
    const double lambda = kSpeedOfLight / f;
    const auto array = ArrayGeometry::uniform_planar(4, 8, lambda / 2);
    const double az = deg2rad(60.0);
    const double el = deg2rad(10.0);
    const auto v = steering_vector(array, az, el, f);
    const Vec3 u = Vec3(std::sin(el) * std::cos(az), std::sin(el) * std::sin(az), std::cos(el));
    for (int m = 0; m < array.size(); ++m) {
        const double phase = kTwoPi * f / kSpeedOfLight * u.dot(array.positions.col(m));
        const std::complex<double> expected = std::polar(1.0, phase);
        CHECK(std::abs(v(m) - expected) < 1e-12);
    }
}

TEST_CASE("steering magnitude equals the pattern gain") {
    auto array = ArrayGeometry::uniform_linear(3, 0.01);
    array.patterns = {ElementPattern::cosine_power(2.0)};
    const auto v = steering_vector(array, 1.0, deg2rad(70.0), 10e9);
    const auto g = std::abs(array.pattern(0).gain(1.0, deg2rad(70.0)));
    for (int m = 0; m < 3; ++m) CHECK(std::abs(v(m)) == doctest::Approx(g).epsilon(1e-12));
}

TEST_CASE("direction outside pattern support is a domain error") {
    std::vector<double> az{0, kPi, kTwoPi};
    std::vector<double> el{deg2rad(60), deg2rad(90), deg2rad(120)};
    Eigen::MatrixXcd gains = Eigen::MatrixXcd::Ones(3, 3);
    auto array = ArrayGeometry::single_isotropic();
    array.patterns = {ElementPattern::from_grid(az, el, gains)};
    CHECK_THROWS_AS(steering_vector(array, 0.1, deg2rad(10.0), 1e9), std::domain_error);
}

TEST_CASE("single unit path with zero delay gives the all-ones channel") {
    const auto array = ArrayGeometry::single_isotropic();
    const auto ps = make_paths({path(0.0, {1, 0}, 0, kPi / 2)});
    const auto h = synth_channel(ps, array, grid(1e9, 100e6, 11), 0.0);
    for (Eigen::Index i = 0; i < h.cols(); ++i) {
        CHECK(std::abs(h(0, i) - std::complex<double>(1, 0)) < 1e-12);
    }
}

TEST_CASE("pure delay is a linear phase slope across the band") {
    const auto array = ArrayGeometry::single_isotropic();
    const double tau = 100e-9;
    const auto freq = grid(28e9, 1e9, 1001);
    const auto h = synth_channel(make_paths({path(tau, {1, 0}, 0, kPi / 2)}), array, freq, 0.0);
    // Phase difference between adjacent bins: -2 pi df tau = -2 pi * 1e6 * 1e-7.
    const double df = freq[1] - freq[0];
    const double expected = -kTwoPi * df * tau;
    for (Eigen::Index i = 1; i < h.cols(); ++i) {
        const double step = std::arg(h(0, i) * std::conj(h(0, i - 1)));
        CHECK(step == doctest::Approx(std::remainder(expected, kTwoPi)).epsilon(1e-9));
    }
}

TEST_CASE("synth_channel equals the brute-force triple loop") {
    Rng rng(42);
    const double f_c = 28e9;
    const double lambda = kSpeedOfLight / f_c;
    const auto array = ArrayGeometry::uniform_planar(2, 2, lambda / 2);
    const auto freq = grid(f_c, 400e6, 64);

    scene::PathSet ps;
    for (int i = 0; i < 3; ++i) {
        ps.paths.push_back(path(rng.uniform() * 200e-9, rng.complex_gaussian(),
                                rng.uniform() * kTwoPi, 0.2 + rng.uniform() * 2.0,
                                rng.uniform() * 100));
    }
    const double t = 0.37;
    const auto h = synth_channel(ps, array, freq, t, f_c);

    for (int m = 0; m < array.size(); ++m) {
        for (std::size_t fi = 0; fi < freq.size(); ++fi) {
            std::complex<double> acc{0, 0};
            for (const auto& p : ps.paths) {
                const Vec3 u = unit_from_angles(p.azimuth_rad, p.elevation_rad);
                const double steer_phase =
                    kTwoPi * f_c / kSpeedOfLight * u.dot(array.positions.col(m));
                const double delay_phase = -kTwoPi * std::remainder(freq[fi] * p.delay_s, 1.0);
                const double doppler_phase = kTwoPi * std::remainder(p.doppler_hz * t, 1.0);
                acc += p.gain * std::polar(1.0, steer_phase + delay_phase + doppler_phase);
            }
            CHECK(std::abs(h(m, static_cast<Eigen::Index>(fi)) - acc) < 1e-10);
        }
    }
}

TEST_CASE("superposition and linearity of the forward model") {
    const auto array = ArrayGeometry::uniform_linear(3, 0.005);
    const auto freq = grid(28e9, 200e6, 16);
    const auto pa = make_paths({path(50e-9, {0.5, 0.25}, 1.0, 1.5)});
    const auto pb = make_paths({path(80e-9, {0.1, -0.7}, 2.0, 1.8)});
    scene::PathSet both;
    both.paths = pa.paths;
    both.paths.push_back(pb.paths[0]);

    const auto ha = synth_channel(pa, array, freq, 0.0);
    const auto hb = synth_channel(pb, array, freq, 0.0);
    const auto hab = synth_channel(both, array, freq, 0.0);
    CHECK((hab - (ha + hb)).norm() < 1e-12);

    scene::PathSet scaled = both;
    for (auto& p : scaled.paths) p.gain *= 3.0;
    const auto hs = synth_channel(scaled, array, freq, 0.0);
    CHECK((hs - 3.0 * hab).norm() < 1e-12);
}

namespace {

scene::SceneSpec static_scene(double distance = 30.0) {
    scene::SceneSpec scn;
    scn.carrier_frequency_hz = 28e9;
    scn.tx_pose.p = Vec3::Zero();
    scn.rx_trajectory = scene::Trajectory::fixed(Vec3(distance, 0, 0), 0.0, 10.0);
    return scn;
}

waveform::ToneConfig test_wave(int half_tones = 16) {
    waveform::ToneConfig cfg;
    cfg.half_tone_count = half_tones;
    cfg.tone_spacing_hz = 1e9 / (2.0 * half_tones + 1.0);
    return cfg;
}

} // namespace

TEST_CASE("impairment-free static capture equals synth_channel") {
    const auto scn = static_scene();
    const double lambda = scn.wavelength();
    const auto array = ArrayGeometry::uniform_planar(2, 4, lambda / 2);
    auto schedule = SwitchSchedule::sequential(array.size(), 0.0, 50.0);
    const auto wave = test_wave();
    const auto snap = capture_snapshot(scn, array, schedule, ImpairmentProfile::none(), wave,
                                       NoiseSpec{}, 1.0);

    const auto paths = scene::ground_truth_paths(scn, 1.0);
    const auto h = synth_channel(paths, array, snap.freq_hz, 0.0, scn.carrier_frequency_hz);
    CHECK((snap.response - h).norm() < 1e-12);
}

TEST_CASE("programmed channel offsets pass through to the measured phases") {
    const auto scn = static_scene();
    const auto array = ArrayGeometry::uniform_linear(4, 0.005);
    auto schedule = SwitchSchedule::sequential(4, 8e-6, 50.0);
    ImpairmentProfile imp;
    imp.phase_offset_rad = Eigen::VectorXd(4);
    imp.phase_offset_rad << 0.0, deg2rad(30), deg2rad(60), deg2rad(90);
    const auto wave = test_wave(8);

    const auto clean = capture_snapshot(scn, array, schedule, ImpairmentProfile::none(), wave,
                                        NoiseSpec{}, 0.0);
    const auto impaired = capture_snapshot(scn, array, schedule, imp, wave, NoiseSpec{}, 0.0);
    for (int ch = 0; ch < 4; ++ch) {
        const std::complex<double> ratio = impaired.response(ch, 3) / clean.response(ch, 3);
        CHECK(std::arg(ratio) == doctest::Approx(imp.phase_offset_rad(ch)).epsilon(1e-9));
    }
}

TEST_CASE("element dwell staggering produces the analytic Doppler phase step") {
    // Rx receding radially at 20 km/h, 28 GHz, dwell 8 us.
    scene::SceneSpec scn;
    scn.carrier_frequency_hz = 28e9;
    scn.tx_pose.p = Vec3::Zero();
    const double v = 20.0 / 3.6;
    scn.rx_trajectory = scene::Trajectory::line(Vec3(50, 0, 0), Vec3(50 + 10 * v, 0, 0), 0.0, 10.0);
    const auto array = ArrayGeometry::single_isotropic();
    // Fake a 4-"element" schedule by using a 4-element co-located array: all
    // elements see the same geometry, only the dwell instant differs.
    auto colocated = ArrayGeometry::single_isotropic();
    colocated.positions = Eigen::Matrix3Xd::Zero(3, 4);
    colocated.patterns = {ElementPattern::isotropic()};
    const double dwell = 8e-6;
    auto schedule = SwitchSchedule::sequential(4, dwell, 50.0);
    const auto wave = test_wave(4);
    const auto snap =
        capture_snapshot(scn, colocated, schedule, ImpairmentProfile::none(), wave, NoiseSpec{}, 1.0);

    const auto paths = scene::ground_truth_paths(scn, 1.0);
    const double doppler = paths.los()->doppler_hz;
    const double expected_step = kTwoPi * doppler * dwell; // analytic oracle
    for (int ch = 1; ch < 4; ++ch) {
        const std::complex<double> ratio = snap.response(ch, 2) / snap.response(ch - 1, 2);
        CHECK(std::arg(ratio) == doctest::Approx(expected_step).epsilon(1e-6));
    }
    CHECK(std::abs(expected_step) == doctest::Approx(kTwoPi * scn.carrier_frequency_hz *
                                                     (v / kSpeedOfLight) * dwell)
                                         .epsilon(1e-9));
    (void)array;
}

TEST_CASE("identical seeds reproduce noisy snapshots bit-for-bit") {
    const auto scn = static_scene();
    const auto array = ArrayGeometry::uniform_linear(2, 0.005);
    auto schedule = SwitchSchedule::sequential(2, 8e-6, 50.0);
    NoiseSpec noise;
    noise.enabled = true;
    noise.per_bin_variance = 1e-6;
    noise.seed = 77;
    noise.snapshot_index = 3;
    const auto wave = test_wave(8);
    const auto a = capture_snapshot(scn, array, schedule, ImpairmentProfile::none(), wave, noise, 0.0);
    const auto b = capture_snapshot(scn, array, schedule, ImpairmentProfile::none(), wave, noise, 0.0);
    CHECK(a.response == b.response); // bitwise
    noise.snapshot_index = 4;
    const auto c = capture_snapshot(scn, array, schedule, ImpairmentProfile::none(), wave, noise, 0.0);
    CHECK((a.response - c.response).norm() > 0);
}

TEST_CASE("linearity of capture under path gain scaling (noise off)") {
    auto scn = static_scene();
    scn.reflectors.push_back([] {
        scene::Facet f;
        f.corners = {Vec3(-100, -100, -1), Vec3(100, -100, -1), Vec3(100, 100, -1),
                     Vec3(-100, 100, -1)};
        return f;
    }());
    // alpha-scaling all gains equals scaling the response; realized here by
    // comparing against a manual scale of the path set through synth_channel.
    const auto array = ArrayGeometry::uniform_linear(2, 0.005);
    const auto wave = test_wave(8);
    auto schedule = SwitchSchedule::sequential(2, 0.0, 50.0);
    const auto base = capture_snapshot(scn, array, schedule, ImpairmentProfile::none(), wave,
                                       NoiseSpec{}, 1.0);
    auto paths = scene::ground_truth_paths(scn, 1.0);
    for (auto& p : paths.paths) p.gain *= 2.5;
    const auto scaled = synth_channel(paths, array, base.freq_hz, 0.0, scn.carrier_frequency_hz);
    CHECK((scaled - 2.5 * base.response).norm() < 1e-10);
}

TEST_CASE("schedule validation catches dwell overruns and bad permutations") {
    SwitchSchedule s = SwitchSchedule::sequential(4, 8e-6, 50.0);
    CHECK(s.validate(4).empty());
    s.element_order = {0, 1, 1, 3};
    CHECK_FALSE(s.validate(4).empty());
    s = SwitchSchedule::sequential(4, 0.01, 50.0); // 4 * 10ms > 20ms period
    CHECK_FALSE(s.validate(4).empty());
}

TEST_CASE("budget: noise power sub-result matches the stated density + bandwidth") {
    BudgetLedger ledger;
    ledger.noise_density_dbm_hz = -147.2;
    ledger.bandwidth_db_hz = 90.0;
    ledger.receiver_noise_figure_db = 0.0;
    const auto report = max_measurable_path_loss(ledger);
    CHECK(report.noise_power_dbm == doctest::Approx(-57.2).epsilon(1e-12));
}

TEST_CASE("budget: degenerate all-zero ledger reduces to the negative noise power") {
    BudgetLedger ledger;
    ledger.source_power_dbm = 0;
    ledger.amplifier_gain_db = 0;
    ledger.tx_antenna_gain_dbi = 0;
    ledger.tx_hardware_loss_db = 0;
    ledger.rx_antenna_gain_dbi = 0;
    ledger.lna_gain_db = 0;
    ledger.rx_cable_loss_db = 0;
    ledger.switch_insertion_loss_db = 0;
    ledger.receiver_noise_figure_db = 0;
    ledger.snr_threshold_db = 0;
    const auto report = max_measurable_path_loss(ledger);
    CHECK(report.max_path_loss_db == doctest::Approx(-report.noise_power_dbm));
}

TEST_CASE("budget: the documented ledger sums to 130.2 dB and flags the 128.2 reference") {
    const BudgetLedger ledger; // defaults carry the documented chain values
    const auto report = max_measurable_path_loss(ledger, 128.2);
    CHECK(report.max_path_loss_db == doctest::Approx(130.2).epsilon(1e-9));
    REQUIRE(report.residual_db.has_value());
    CHECK(*report.residual_db == doctest::Approx(2.0).epsilon(1e-9));
    const std::string text = report.to_text();
    CHECK(text.find("residual_vs_reference") != std::string::npos);
}
