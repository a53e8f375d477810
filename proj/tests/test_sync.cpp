// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "msense/core/errors.hpp"
#include "msense/core/rng.hpp"
#include "msense/sync.hpp"
#include "oracles.hpp"

using namespace msense;
using namespace msense::sync;

namespace {

std::vector<std::pair<double, double>> make_pairs(double offset, double drift, int count,
                                                  double span, double jitter = 0.0,
                                                  std::uint64_t seed = 0) {
    Rng rng(seed);
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < count; ++i) {
        const double ref = span * i / std::max(1, count - 1);
        const double local =
            ref * (1.0 + drift) + offset + (jitter > 0 ? jitter * rng.gaussian() : 0.0);
        pairs.emplace_back(local, ref);
    }
    return pairs;
}

} // namespace

TEST_CASE("pure offset is recovered exactly") {
    const auto model = fit_clock_model(make_pairs(0.5, 0.0, 20, 10.0));
    CHECK(model.offset_s == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(model.drift) < 1e-15);
    CHECK(model.residual_rms_s < 1e-12);
}

TEST_CASE("offset + drift from 100 noiseless pairs to 1e-12") {
    const auto model = fit_clock_model(make_pairs(0.5, 1e-6, 100, 50.0));
    CHECK(std::abs(model.offset_s - 0.5) < 1e-12);
    CHECK(std::abs(model.drift - 1e-6) < 1e-12);
    CHECK(model.residual_rms_s < 1e-12);
}

TEST_CASE("1 ms jitter: offset within 1 ms, drift within 1e-7, matching the closed form") {
    // Drift std ~ jitter / (sd(ref) sqrt(n)); 6000 pairs over 20 min gives
    // ~4e-8, comfortably inside the 1e-7 budget.
    const auto pairs = make_pairs(0.25, 3e-7, 6000, 1200.0, 1e-3, 77);
    const auto model = fit_clock_model(pairs);
    CHECK(std::abs(model.offset_s - 0.25) < 1e-3);
    CHECK(std::abs(model.drift - 3e-7) < 1e-7);

    // Closed-form least-squares oracle (local on reference).
    std::vector<double> x, y;
    for (const auto& [local, ref] : pairs) {
        x.push_back(ref);
        y.push_back(local);
    }
    const auto line = oracles::least_squares_line(x, y);
    CHECK(model.offset_s == doctest::Approx(line.intercept).epsilon(1e-12));
    CHECK(model.drift == doctest::Approx(line.slope - 1.0).epsilon(1e-9));
}

TEST_CASE("fewer than two pairs is insufficient data") {
    CHECK_THROWS_AS(fit_clock_model({{1.0, 1.0}}), ValidationError);
}

TEST_CASE("to_reference inverts the identity and offset-only maps") {
    ClockModel identity = ClockModel::identity(0, 100);
    CHECK(to_reference(identity, 10.0).reference_s == doctest::Approx(10.0));
    ClockModel offset;
    offset.offset_s = 0.5;
    offset.valid_start_s = 0;
    offset.valid_end_s = 100;
    CHECK(to_reference(offset, 10.5).reference_s == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("to_reference round-trips to_local within 1e-12 on random models") {
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        ClockModel m;
        m.offset_s = rng.gaussian();
        m.drift = 1e-5 * rng.gaussian();
        m.valid_start_s = -1e6;
        m.valid_end_s = 1e6;
        const double t = 100.0 * rng.gaussian();
        CHECK(to_reference(m, to_local(m, t)).reference_s == doctest::Approx(t).epsilon(1e-12));
    }
}

TEST_CASE("mapping outside the validity span flags extrapolation") {
    ClockModel m = ClockModel::identity(0.0, 10.0);
    CHECK_FALSE(to_reference(m, 5.0).extrapolated);
    CHECK(to_reference(m, 11.0).extrapolated);
}

namespace {

SampledStream stream_of(const std::string& name, Modality modality,
                        const std::vector<double>& t, double rate, bool interpolatable,
                        const ClockModel& clock = ClockModel::identity(-1e9, 1e9)) {
    SampledStream s;
    s.name = name;
    s.modality = modality;
    s.local_t = t;
    s.nominal_rate_hz = rate;
    s.interpolatable = interpolatable;
    s.clock = clock;
    return s;
}

} // namespace

TEST_CASE("co-sampled streams align exactly with zero residual") {
    std::vector<double> t;
    for (int i = 0; i < 50; ++i) t.push_back(i * 0.02);
    auto s = stream_of("channel", Modality::Channel, t, 50.0, false);
    const auto timeline = align({s}, t);
    for (const auto& e : timeline.samples.at("channel")) {
        CHECK(e.method == SampleMethod::Exact);
        CHECK(e.residual_s == 0.0);
    }
}

TEST_CASE("10 Hz stream on a 50 Hz grid: nearest residual bounded by half the interval") {
    std::vector<double> lidar_t, grid;
    for (int i = 0; i < 20; ++i) lidar_t.push_back(i * 0.1);
    for (int i = 0; i < 95; ++i) grid.push_back(i * 0.02);
    auto s = stream_of("lidar", Modality::Lidar, lidar_t, 10.0, false);
    const auto timeline = align({s}, grid);
    for (const auto& e : timeline.samples.at("lidar")) {
        REQUIRE(e.method != SampleMethod::Absent);
        if (e.method == SampleMethod::Nearest) {
            CHECK(std::abs(e.residual_s) <= 0.05 + 1e-12);
        }
    }
}

TEST_CASE("linear payloads interpolate exactly at arbitrary instants") {
    // Constant-velocity motion sampled at 7.3 Hz, queried on a shifted grid.
    std::vector<double> t;
    std::vector<Eigen::VectorXd> values;
    const Vec3 v(1.5, -0.4, 0.1);
    for (int i = 0; i < 40; ++i) {
        const double ti = i / 7.3;
        t.push_back(ti);
        Eigen::VectorXd row(3);
        row << v.x() * ti, v.y() * ti, v.z() * ti;
        values.push_back(row);
    }
    auto s = stream_of("geolocation", Modality::Geolocation, t, 7.3, true);
    s.values = values;
    std::vector<double> grid;
    for (int i = 0; i < 100; ++i) grid.push_back(0.013 + i * 0.05);
    const auto timeline = align({s}, grid);
    const auto& column = timeline.samples.at("geolocation");
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (column[g].method != SampleMethod::Interpolated &&
            column[g].method != SampleMethod::Exact) {
            continue;
        }
        for (int d = 0; d < 3; ++d) {
            CHECK(std::abs(column[g].value(d) - v(d) * grid[g]) < 1e-9);
        }
    }
}

TEST_CASE("clock models put the streams back on the reference axis before aligning") {
    ClockModel skew;
    skew.offset_s = 0.3;
    skew.drift = 1e-5;
    skew.valid_start_s = -1e9;
    skew.valid_end_s = 1e9;
    std::vector<double> local;
    for (int i = 0; i < 30; ++i) local.push_back(to_local(skew, i * 0.1));
    auto s = stream_of("lidar", Modality::Lidar, local, 10.0, false, skew);
    std::vector<double> grid;
    for (int i = 0; i < 30; ++i) grid.push_back(i * 0.1);
    const auto timeline = align({s}, grid);
    for (const auto& e : timeline.samples.at("lidar")) {
        CHECK(e.method == SampleMethod::Exact);
    }
}

TEST_CASE("alignment is idempotent on an already-aligned timeline") {
    std::vector<double> t;
    for (int i = 0; i < 25; ++i) t.push_back(i * 0.04);
    auto s = stream_of("image", Modality::Image, t, 25.0, false);
    const auto first = align({s}, t);
    // Re-aligning the same stream to the same grid yields identical tags.
    const auto second = align({s}, first.reference_grid);
    const auto& a = first.samples.at("image");
    const auto& b = second.samples.at("image");
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].method == b[i].method);
        CHECK(a[i].index == b[i].index);
        CHECK(a[i].residual_s == b[i].residual_s);
    }
}

TEST_CASE("nearest residual is bounded by half the max inter-sample gap") {
    // Irregular stream.
    std::vector<double> t{0.0, 0.13, 0.19, 0.55, 0.8, 1.7};
    double max_gap = 0;
    for (std::size_t i = 1; i < t.size(); ++i) max_gap = std::max(max_gap, t[i] - t[i - 1]);
    auto s = stream_of("other", Modality::Other, t, 0.0, false);
    std::vector<double> grid;
    for (int i = 0; i < 170; ++i) grid.push_back(i * 0.01);
    const auto timeline = align({s}, grid);
    for (const auto& e : timeline.samples.at("other")) {
        if (e.method == SampleMethod::Nearest) {
            CHECK(std::abs(e.residual_s) <= max_gap / 2 + 1e-12);
        }
    }
}

TEST_CASE("empty streams are absent everywhere; bounded extrapolation is tagged") {
    auto empty = stream_of("channel", Modality::Channel, {}, 50.0, false);
    std::vector<double> short_t{0.0, 0.1, 0.2};
    auto stub = stream_of("lidar", Modality::Lidar, short_t, 10.0, false);
    std::vector<double> grid{0.0, 0.1, 0.25, 0.5};
    const auto timeline = align({empty, stub}, grid);
    for (const auto& e : timeline.samples.at("channel")) {
        CHECK(e.method == SampleMethod::Absent);
    }
    const auto& lidar_col = timeline.samples.at("lidar");
    CHECK(lidar_col[2].method == SampleMethod::Extrapolated); // 0.25: 0.05 past support
    CHECK(lidar_col[3].method == SampleMethod::Absent);       // 0.5: 3 intervals past
}

TEST_CASE("timeline writes a wide delimited table") {
    std::vector<double> t{0.0, 0.5, 1.0};
    auto s = stream_of("geolocation", Modality::Geolocation, t, 2.0, true);
    for (double ti : t) {
        Eigen::VectorXd row(2);
        row << ti, -ti;
        s.values.push_back(row);
    }
    const auto timeline = align({s}, t);
    write_timeline_table(timeline, "timeline_test.tsv", {{"session", "unittest"}});
    std::ifstream in("timeline_test.tsv");
    std::string line;
    std::getline(in, line);
    CHECK(line.find("session") != std::string::npos);
    int rows = 0;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            CHECK(line.find("geolocation_method") != std::string::npos);
            continue;
        }
        ++rows;
    }
    CHECK(rows == 3);
    in.close();
    std::remove("timeline_test.tsv");
}
