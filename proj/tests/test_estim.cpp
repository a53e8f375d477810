// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "msense/core/errors.hpp"
#include "msense/core/rng.hpp"
#include "msense/estim.hpp"
#include "oracles.hpp"

using namespace msense;
using namespace msense::estim;

namespace {

/// Frequency response of a set of (delay, amplitude) taps on a uniform grid.
Eigen::VectorXcd taps_response(const std::vector<std::pair<double, std::complex<double>>>& taps,
                               double f0, double df, int n) {
    Eigen::VectorXcd h = Eigen::VectorXcd::Zero(n);
    for (int k = 0; k < n; ++k) {
        const double f = f0 + k * df;
        for (const auto& [tau, amp] : taps) {
            h(k) += amp * std::polar(1.0, -kTwoPi * std::remainder(f * tau, 1.0));
        }
    }
    return h;
}

calib::CirEntry entry_from(const Eigen::VectorXcd& h, double f0, double df, double t = 0.0) {
    calib::CirEntry e;
    e.timestamp = t;
    e.h.resize(1, h.size());
    e.h.row(0) = h.transpose();
    for (int k = 0; k < h.size(); ++k) {
        e.freq_hz.push_back(f0 + k * df);
        e.valid_bins.push_back(true);
    }
    return e;
}

} // namespace

TEST_CASE("pdp of an off-grid delay matches the analytic Dirichlet (sinc) oracle") {
    const int n = 1024;
    const double df = 1e9 / n; // 1 GHz band, ~1 ns resolution
    const double f0 = 27.5e9;
    const double tau = 100.4e-9; // off-grid: sidelobes present
    const auto h = taps_response({{tau, {1, 0}}}, f0, df, n);
    const PDP profile = pdp(h, df);

    const auto oracle = oracles::delay_pdp_oracle(tau, f0, df, n);
    REQUIRE(oracle.size() == profile.delay_s.size());
    for (int k = 0; k < n; ++k) {
        CHECK(profile.power_linear(k) ==
              doctest::Approx(oracle[static_cast<std::size_t>(k)]).epsilon(1e-6).scale(1e-9));
    }

    Eigen::Index peak;
    profile.power_linear.maxCoeff(&peak);
    CHECK(peak == 100);
    double sidelobe = 0;
    for (int k = 0; k < n; ++k) {
        if (std::abs(k - static_cast<int>(peak)) <= 2) continue; // skip the mainlobe
        sidelobe = std::max(sidelobe, profile.power_linear(k));
    }
    CHECK(10 * std::log10(profile.power_linear(peak) / sidelobe) >= 13.0);
}

TEST_CASE("all-ones response is an impulse at delay zero") {
    const Eigen::VectorXcd h = Eigen::VectorXcd::Ones(64);
    const PDP profile = pdp(h, 1e6);
    Eigen::Index peak;
    profile.power_linear.maxCoeff(&peak);
    CHECK(peak == 0);
    CHECK(profile.power_linear(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(profile.power_linear.segment(1, 63).maxCoeff() < 1e-20);
    CHECK(profile.delay_s[1] - profile.delay_s[0] == doctest::Approx(1.0 / (64 * 1e6)));
}

TEST_CASE("two equal paths 2 ns apart resolve at 1 GHz bandwidth") {
    const int n = 1024;
    const double df = 1e9 / n;
    const double f0 = 27.5e9;
    const double b = df * n;
    const auto h = taps_response({{50.0 / b, {1, 0}}, {52.0 / b, {1, 0}}}, f0, df, n);
    const PDP profile = pdp(h, df);
    CHECK(profile.power_linear(50) > 0.5);
    CHECK(profile.power_linear(52) > 0.5);
    CHECK(profile.power_linear(51) < 1e-10);
}

TEST_CASE("pdp energy identity (Parseval with the 1/N convention)") {
    Rng rng(3);
    Eigen::VectorXcd h(128);
    for (int i = 0; i < 128; ++i) h(i) = rng.complex_gaussian();
    const PDP profile = pdp(h, 1e6);
    CHECK(profile.total_power() == doctest::Approx(h.squaredNorm() / 128.0).epsilon(1e-9));
}

TEST_CASE("path loss of a constant unit delay field is -10 log10(N_f)") {
    calib::CIRMatrix cir;
    const int n_f = 64;
    // A delay-domain field |h(tau)| = 1 for every tau corresponds (under the
    // 1/N inverse) to the frequency response H = forward-DFT(ones) = N_f at
    // bin 0. Feed that through the pipeline and expect the closed form.
    Eigen::VectorXcd h = Eigen::VectorXcd::Zero(n_f);
    h(0) = static_cast<double>(n_f);
    for (int s = 0; s < 9; ++s) cir.append(entry_from(h, 28e9, 1e6, 0.02 * s));
    const std::vector<double> distances(9, 10.0);
    const auto series = path_loss_series(cir, distances, 3);
    for (const double pl : series.pl_db) {
        CHECK(pl == doctest::Approx(-10.0 * std::log10(static_cast<double>(n_f))).epsilon(1e-9));
    }
}

TEST_CASE("window of identical snapshots equals the single-snapshot value") {
    calib::CIRMatrix cir;
    Rng rng(11);
    Eigen::VectorXcd h(32);
    for (int i = 0; i < 32; ++i) h(i) = rng.complex_gaussian();
    for (int s = 0; s < 7; ++s) cir.append(entry_from(h, 1e9, 1e6, 0.02 * s));
    const std::vector<double> distances(7, 50.0);
    const auto w1 = path_loss_series(cir, distances, 1);
    const auto w7 = path_loss_series(cir, distances, 7);
    CHECK(w7.pl_db.front() == doctest::Approx(w1.pl_db[3]).epsilon(1e-12));
}

TEST_CASE("series shorter than the window is insufficient data") {
    calib::CIRMatrix cir;
    cir.append(entry_from(Eigen::VectorXcd::Ones(16), 1e9, 1e6, 0.0));
    CHECK_THROWS_AS(path_loss_series(cir, {10.0}, 3), ValidationError);
}

TEST_CASE("free-space synthetic series matches Friis within 0.5 dB and fits PLE 2") {
    const double f_c = 28e9;
    const double lambda = kSpeedOfLight / f_c;
    calib::CIRMatrix cir;
    std::vector<double> distances;
    const int n_f = 64;
    const double df = 1e9 / n_f;
    const double f0 = f_c - 0.5e9 + df / 2;
    for (int s = 0; s < 300; ++s) {
        const double d = 10.0 + s * (290.0 / 299.0);
        const double amp = lambda / (4 * kPi * d);
        const auto h = taps_response({{d / kSpeedOfLight, {amp, 0}}}, f0, df, n_f);
        cir.append(entry_from(h, f0, df, 0.02 * s));
        distances.push_back(d);
    }
    const auto series = path_loss_series(cir, distances, 5);
    for (std::size_t i = 0; i < series.pl_db.size(); ++i) {
        CHECK(std::abs(series.pl_db[i] -
                       oracles::friis_path_loss_db(series.distance_m[i], lambda)) < 0.5);
    }
    const auto fit = fit_log_distance(series);
    // The centered window maps a mean power to its center distance, which
    // bends the close-in samples slightly; the slope still lands within 0.01.
    CHECK(std::abs(fit.ple - 2.0) < 0.01);
    CHECK(fit.sigma_db < 0.05);
}

TEST_CASE("alpha-scaled channel shifts PL by exactly -20 log10(alpha)") {
    calib::CIRMatrix a, b;
    Rng rng(17);
    const double alpha = 3.7;
    for (int s = 0; s < 5; ++s) {
        Eigen::VectorXcd h(32);
        for (int i = 0; i < 32; ++i) h(i) = rng.complex_gaussian();
        a.append(entry_from(h, 1e9, 1e6, 0.02 * s));
        b.append(entry_from((alpha * h).eval(), 1e9, 1e6, 0.02 * s));
    }
    const std::vector<double> distances(5, 20.0);
    const auto pa = path_loss_series(a, distances, 3);
    const auto pb = path_loss_series(b, distances, 3);
    for (std::size_t i = 0; i < pa.pl_db.size(); ++i) {
        CHECK(pb.pl_db[i] - pa.pl_db[i] == doctest::Approx(-20 * std::log10(alpha)).epsilon(1e-9));
    }
}

TEST_CASE("fit_log_distance recovers a synthetic PLE 2.07 under 3 dB shadowing") {
    Rng rng(99);
    PathLossSeries series;
    for (int i = 0; i < 500; ++i) {
        const double d = 10.0 + 270.0 * i / 499.0;
        series.distance_m.push_back(d);
        series.pl_db.push_back(61.34 + 10 * 2.07 * std::log10(d) + 3.0 * rng.gaussian());
    }
    const auto fit = fit_log_distance(series);
    CHECK(std::abs(fit.ple - 2.07) < 0.1);
    CHECK(fit.sigma_db == doctest::Approx(3.0).epsilon(0.15));

    // Closed-form regression oracle on the same data.
    std::vector<double> x, y;
    for (std::size_t i = 0; i < series.pl_db.size(); ++i) {
        x.push_back(10 * std::log10(series.distance_m[i]));
        y.push_back(series.pl_db[i]);
    }
    const auto line = oracles::least_squares_line(x, y);
    CHECK(fit.ple == doctest::Approx(line.slope).epsilon(1e-12));
}

TEST_CASE("flat PL regresses to PLE 0; equal distances are degenerate") {
    PathLossSeries series;
    for (int i = 0; i < 10; ++i) {
        series.distance_m.push_back(5.0 + i);
        series.pl_db.push_back(80.0);
    }
    CHECK(fit_log_distance(series).ple == doctest::Approx(0.0));

    PathLossSeries degenerate;
    for (int i = 0; i < 10; ++i) {
        degenerate.distance_m.push_back(50.0);
        degenerate.pl_db.push_back(80.0 + i);
    }
    CHECK_THROWS_AS(fit_log_distance(degenerate), NumericalError);
}

TEST_CASE("fit is invariant under window reordering") {
    PathLossSeries series;
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        const double d = 10 + i * 3.0;
        series.distance_m.push_back(d);
        series.pl_db.push_back(60 + 20.7 * std::log10(d) + rng.gaussian());
    }
    auto shuffled = series;
    for (std::size_t i = shuffled.distance_m.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.next_u64() % i);
        std::swap(shuffled.distance_m[i - 1], shuffled.distance_m[j]);
        std::swap(shuffled.pl_db[i - 1], shuffled.pl_db[j]);
    }
    CHECK(fit_log_distance(series).ple ==
          doctest::Approx(fit_log_distance(shuffled).ple).epsilon(1e-12));
}

TEST_CASE("window_from_wavelengths converts 40 lambda of travel into an odd count") {
    // 28 GHz, ~1.07 cm wavelength; ~0.111 m per snapshot (20 km/h @ 50 Hz).
    std::vector<double> distances;
    for (int i = 0; i < 100; ++i) distances.push_back(10.0 + 0.1111 * i);
    const int w = window_from_wavelengths(0.0107, distances, 40.0);
    CHECK(w % 2 == 1);
    CHECK(w >= 3);
    CHECK(w <= 7);
}

// ---------------------------------------------------------------------------
// Noise floor and clustering

TEST_CASE("noise floor lands within 1 dB of the known variance plus margin") {
    Rng rng(2024);
    const double sigma2 = 1e-6;
    PDP profile;
    profile.power_linear.resize(4096);
    profile.delay_s.resize(4096, 0.0);
    for (int i = 0; i < profile.power_linear.size(); ++i) {
        profile.power_linear(i) = std::norm(rng.complex_gaussian(sigma2));
    }
    const double floor = noise_floor_db(profile, 6.0);
    CHECK(std::abs(floor - (10 * std::log10(sigma2) + 6.0)) < 1.0);
}

TEST_CASE("noiseless impulse: signal clears the floor; floor is deterministic") {
    const PDP profile = pdp(Eigen::VectorXcd::Ones(64), 1e6);
    const double floor = noise_floor_db(profile);
    CHECK(profile.power_db(0) > floor);
    CHECK(noise_floor_db(profile) == floor);
}

TEST_CASE("two well-separated groups form exactly two clusters") {
    PDP profile;
    const int n = 512;
    profile.delay_s.resize(n);
    profile.power_linear = Eigen::VectorXd::Constant(n, 1e-10);
    for (int i = 0; i < n; ++i) profile.delay_s[static_cast<std::size_t>(i)] = i * 1e-9;
    for (int i = 0; i <= 10; ++i) profile.power_linear(i) = 1.0;    // 0-10 ns
    for (int i = 200; i <= 210; ++i) profile.power_linear(i) = 0.5; // 200-210 ns

    ClusterParams params;
    params.floor_db = -60.0;
    const auto clusters = cluster_pdp(profile, params);
    REQUIRE(clusters.clusters.size() == 2);
    CHECK(clusters.clusters[0].centroid_delay_s < clusters.clusters[1].centroid_delay_s);
    CHECK(clusters.clusters[0].member_count == 11);
    CHECK(clusters.clusters[1].member_count == 11);
}

TEST_CASE("a single contiguous peak is one cluster") {
    PDP profile;
    const int n = 128;
    profile.delay_s.resize(n);
    profile.power_linear = Eigen::VectorXd::Constant(n, 1e-12);
    for (int i = 0; i < n; ++i) profile.delay_s[static_cast<std::size_t>(i)] = i * 1e-9;
    for (int i = 40; i < 46; ++i) profile.power_linear(i) = 1.0;
    ClusterParams params;
    params.floor_db = -60.0;
    CHECK(cluster_pdp(profile, params).clusters.size() == 1);
}

TEST_CASE("the 7-component fixture yields exactly 7 clusters under defaults") {
    PDP profile;
    const int n = 512;
    profile.delay_s.resize(n);
    profile.power_linear = Eigen::VectorXd::Constant(n, 1e-11);
    for (int i = 0; i < n; ++i) profile.delay_s[static_cast<std::size_t>(i)] = i * 1e-9;
    const int centers[7] = {20, 65, 110, 160, 210, 265, 320};
    const double powers_db[7] = {0, -3, -8, -12, -16, -20, -24};
    for (int c = 0; c < 7; ++c) {
        for (int k = -2; k <= 2; ++k) {
            const double weight = 1.0 / (1 + std::abs(k));
            profile.power_linear(centers[c] + k) += weight * std::pow(10.0, powers_db[c] / 10.0);
        }
    }
    const ClusterParams params; // defaults
    const auto clusters = cluster_pdp(profile, params);
    REQUIRE(clusters.clusters.size() == 7);
    for (int c = 0; c < 7; ++c) {
        CHECK(std::abs(clusters.clusters[static_cast<std::size_t>(c)].centroid_delay_s -
                       centers[c] * 1e-9) < 3e-9);
    }
}

TEST_CASE("everything below the floor yields an empty cluster set") {
    PDP profile;
    profile.delay_s.resize(64);
    profile.power_linear = Eigen::VectorXd::Constant(64, 1e-12);
    for (int i = 0; i < 64; ++i) profile.delay_s[static_cast<std::size_t>(i)] = i * 1e-9;
    ClusterParams params;
    params.floor_db = 0.0;
    CHECK(cluster_pdp(profile, params).clusters.empty());
}

TEST_CASE("clusters are invariant to uniform power scaling") {
    PDP profile;
    const int n = 256;
    profile.delay_s.resize(n);
    profile.power_linear = Eigen::VectorXd::Constant(n, 1e-10);
    for (int i = 0; i < n; ++i) profile.delay_s[static_cast<std::size_t>(i)] = i * 1e-9;
    for (int i = 30; i < 35; ++i) profile.power_linear(i) = 1.0;
    for (int i = 90; i < 94; ++i) profile.power_linear(i) = 0.2;

    PDP scaled = profile;
    scaled.power_linear *= 123.4;
    const ClusterParams params; // floor estimated, so it follows the scale
    const auto a = cluster_pdp(profile, params);
    const auto b = cluster_pdp(scaled, params);
    REQUIRE(a.clusters.size() == b.clusters.size());
    CHECK(a.assignment == b.assignment);
    for (std::size_t i = 0; i < a.clusters.size(); ++i) {
        CHECK(a.clusters[i].centroid_delay_s ==
              doctest::Approx(b.clusters[i].centroid_delay_s).epsilon(1e-12));
    }
}

TEST_CASE("members sit closer to their own centroid than to any other") {
    PDP profile;
    const int n = 300;
    profile.delay_s.resize(n);
    profile.power_linear = Eigen::VectorXd::Constant(n, 1e-10);
    for (int i = 0; i < n; ++i) profile.delay_s[static_cast<std::size_t>(i)] = i * 1e-9;
    for (int i = 10; i < 30; ++i) profile.power_linear(i) = 1.0;
    for (int i = 80; i < 90; ++i) profile.power_linear(i) = 0.7;
    for (int i = 200; i < 230; ++i) profile.power_linear(i) = 0.1;
    ClusterParams params;
    params.floor_db = -80;
    const auto set = cluster_pdp(profile, params);
    REQUIRE(set.clusters.size() == 3);
    for (std::size_t s = 0; s < set.assignment.size(); ++s) {
        const double tau = profile.delay_s[set.sample_index[s]];
        const auto own = static_cast<std::size_t>(set.assignment[s]);
        const double own_dist = std::abs(tau - set.clusters[own].centroid_delay_s);
        for (const auto& other : set.clusters) {
            if (other.id == set.assignment[s]) continue;
            CHECK(own_dist <= std::abs(tau - other.centroid_delay_s) + 1e-15);
        }
    }
}

TEST_CASE("noise floor requires at least 16 bins") {
    PDP profile;
    profile.delay_s.resize(8);
    profile.power_linear = Eigen::VectorXd::Ones(8);
    CHECK_THROWS_AS(noise_floor_db(profile), ValidationError);
}
