// SPDX-License-Identifier: Apache-2.0
#include "msense/lidar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "msense/core/binio.hpp"
#include "msense/core/constants.hpp"
#include "msense/core/errors.hpp"
#include "msense/core/rng.hpp"

namespace msense::lidar {

double LidarConfig::omega() const {
    return rotation_rate_rad_s > 0 ? rotation_rate_rad_s : kTwoPi * frame_rate_hz;
}

double LidarConfig::col_interval() const {
    return col_interval_s > 0 ? col_interval_s : 1.0 / (frame_rate_hz * cols);
}

std::vector<std::string> LidarConfig::validate() const {
    std::vector<std::string> errors;
    if (rows < 1) errors.push_back("rows must be >= 1");
    if (cols < 1) errors.push_back("cols must be >= 1");
    if (!(frame_rate_hz > 0)) errors.push_back("frame_rate must be > 0");
    if (firing_delay_s.size() != static_cast<std::size_t>(rows)) {
        errors.push_back("firing_delay table must have one entry per row");
    }
    if (pixel_shift.size() != static_cast<std::size_t>(rows)) {
        errors.push_back("pixel_shift table must have one entry per row");
    }
    if (beam_elevation_rad.size() != static_cast<std::size_t>(rows)) {
        errors.push_back("beam_elevation table must have one entry per row");
    }
    if (!(max_range_m > 0)) errors.push_back("max_range must be > 0");
    if (range_noise_sigma_m < 0) errors.push_back("range_noise_sigma must be >= 0");
    if (destagger_sign != 1 && destagger_sign != -1) {
        errors.push_back("destagger_sign must be +1 or -1");
    }
    // One full revolution per frame.
    const double rev = omega() * col_interval() * cols;
    if (std::abs(rev - kTwoPi) > 1e-6 * kTwoPi) {
        errors.push_back("omega * col_interval * cols must equal 2*pi (full revolution per frame)");
    }
    return errors;
}

LidarConfig LidarConfig::os1_like(int cols) {
    LidarConfig cfg;
    cfg.rows = 128;
    cfg.cols = cols;
    cfg.frame_rate_hz = 10.0;
    cfg.max_range_m = 200.0;
    cfg.range_noise_sigma_m = 0.05;
    cfg.firing_delay_s.resize(128);
    cfg.pixel_shift.resize(128);
    cfg.beam_elevation_rad.resize(128);
    const double dt_col = cfg.col_interval();
    for (int r = 0; r < 128; ++r) {
        // 4-phase staggering: rows fire in groups offset by multiples of 3
        // column intervals (mirrors the interleaved-firing layout of
        // multi-beam spinning units).
        cfg.firing_delay_s[static_cast<std::size_t>(r)] = (r % 4) * 3.0 * dt_col;
        cfg.pixel_shift[static_cast<std::size_t>(r)] = (r % 4) * 3;
        // 45 degree vertical FoV centered on the horizon, elevation measured
        // from +z (polar convention).
        const double fov = deg2rad(45.0);
        cfg.beam_elevation_rad[static_cast<std::size_t>(r)] =
            kPi / 2 - fov / 2 + fov * r / 127.0;
    }
    return cfg;
}

int pixel_shift_from_timing(const LidarConfig& cfg, int row) {
    return static_cast<int>(
        std::lround(row_azimuth_offset(cfg, row) / (cfg.omega() * cfg.col_interval())));
}

double pixel_time(const LidarConfig& cfg, int row, int col, double t0) {
    if (row < 0 || row >= cfg.rows || col < 0 || col >= cfg.cols) {
        throw std::out_of_range("pixel_time: index out of bounds");
    }
    return t0 + col * cfg.col_interval() + cfg.firing_delay_s[static_cast<std::size_t>(row)];
}

double row_azimuth_offset(const LidarConfig& cfg, int row) {
    if (row < 0 || row >= cfg.rows) throw std::out_of_range("row_azimuth_offset: bad row");
    return cfg.omega() * cfg.firing_delay_s[static_cast<std::size_t>(row)];
}

std::size_t RangeImage::valid_count() const {
    std::size_t n = 0;
    for (const float r : ranges) {
        if (r != kInvalidRange) ++n;
    }
    return n;
}

RangeImage synth_staggered_frame(const scene::SceneSpec& scn, const PoseProvider& pose_at,
                                 const LidarConfig& cfg, double t0, std::uint64_t noise_seed,
                                 std::uint64_t frame_index) {
    {
        const auto errors = cfg.validate();
        if (!errors.empty()) throw ValidationError("lidar config: " + errors.front());
    }
    RangeImage img;
    img.rows = cfg.rows;
    img.cols = cfg.cols;
    img.ranges.assign(static_cast<std::size_t>(cfg.rows) * static_cast<std::size_t>(cfg.cols),
                      kInvalidRange);
    img.staggered = true;
    img.t0 = t0;

    Rng rng = Rng::substream(noise_seed, "lidar-range-noise", frame_index);
    const double dt_col = cfg.col_interval();
    const double omega = cfg.omega();
    for (int c = 0; c < cfg.cols; ++c) {
        const double theta_c = omega * (c * dt_col);
        for (int r = 0; r < cfg.rows; ++r) {
            const double az = theta_c + row_azimuth_offset(cfg, r);
            const double el = cfg.beam_elevation_rad[static_cast<std::size_t>(r)];
            const double t = pixel_time(cfg, r, c, t0);
            const Pose pose = pose_at(t);
            const std::vector<Vec3> beam{unit_from_angles(az, el)};
            const auto ranges = scene::ground_truth_ranges(scn, pose, beam);
            // Draw noise unconditionally so the stream position does not
            // depend on scene content.
            const double noise = cfg.range_noise_sigma_m > 0
                                     ? cfg.range_noise_sigma_m * rng.gaussian()
                                     : 0.0;
            if (ranges[0] == scene::kNoReturn) continue;
            const double range = ranges[0] + noise;
            if (range <= 0 || range > cfg.max_range_m) continue;
            img.at(r, c) = static_cast<float>(range);
        }
    }
    return img;
}

namespace {

RangeImage shift_rows(const RangeImage& src, const LidarConfig& cfg, int sign, bool out_staggered) {
    const auto errors = cfg.validate();
    if (!errors.empty()) throw ValidationError("lidar config: " + errors.front());
    if (src.rows != cfg.rows || src.cols != cfg.cols) {
        throw ValidationError("frame dimensions do not match the config");
    }
    RangeImage out;
    out.rows = src.rows;
    out.cols = src.cols;
    out.t0 = src.t0;
    out.staggered = out_staggered;
    out.ranges.resize(src.ranges.size());
    const int w = src.cols;
    for (int r = 0; r < src.rows; ++r) {
        const int shift = sign * cfg.pixel_shift[static_cast<std::size_t>(r)];
        for (int c = 0; c < w; ++c) {
            const int from = ((c + shift) % w + w) % w;
            out.at(r, c) = src.at(r, from);
        }
    }
    return out;
}

} // namespace

RangeImage destagger(const RangeImage& staggered, const LidarConfig& cfg) {
    if (!staggered.staggered) {
        throw ValidationError("destagger: frame is already destaggered");
    }
    return shift_rows(staggered, cfg, cfg.destagger_sign, /*out_staggered=*/false);
}

RangeImage restagger(const RangeImage& destaggered, const LidarConfig& cfg) {
    if (destaggered.staggered) {
        throw ValidationError("restagger: frame is already staggered");
    }
    return shift_rows(destaggered, cfg, -cfg.destagger_sign, /*out_staggered=*/true);
}

PointCloud to_points(const RangeImage& img, const LidarConfig& cfg) {
    if (img.staggered) {
        throw ValidationError("to_points: destagger the frame first");
    }
    PointCloud cloud;
    cloud.timestamp = img.t0;
    const double dt_col = cfg.col_interval();
    const double omega = cfg.omega();
    for (int r = 0; r < img.rows; ++r) {
        const double el = cfg.beam_elevation_rad[static_cast<std::size_t>(r)];
        for (int c = 0; c < img.cols; ++c) {
            const float range = img.at(r, c);
            if (range == kInvalidRange) continue;
            const double az = omega * (c * dt_col); // one azimuth per column
            cloud.points.push_back(static_cast<double>(range) * unit_from_angles(az, el));
            cloud.pixel.emplace_back(r, c);
        }
    }
    return cloud;
}

void save_raster(const RangeImage& img, const std::string& path) {
    io::Writer w(path);
    w.header("MSRI", 1);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(img.rows));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(img.cols));
    w.put<std::uint8_t>(img.staggered ? 1 : 0);
    w.put<double>(img.t0);
    w.put_array(img.ranges.data(), img.ranges.size());
    w.close();
}

RangeImage load_raster(const std::string& path) {
    io::Reader r(path);
    r.expect_header("MSRI", 1);
    RangeImage img;
    img.rows = static_cast<int>(r.get<std::uint32_t>());
    img.cols = static_cast<int>(r.get<std::uint32_t>());
    img.staggered = r.get<std::uint8_t>() != 0;
    img.t0 = r.get<double>();
    img.ranges.resize(static_cast<std::size_t>(img.rows) * static_cast<std::size_t>(img.cols));
    r.get_array(img.ranges.data(), img.ranges.size());
    return img;
}

void write_pgm_render(const RangeImage& img, const std::string& path) {
    std::vector<float> valid;
    for (const float v : img.ranges) {
        if (v != kInvalidRange) valid.push_back(v);
    }
    float lo = 0.0f, hi = 1.0f;
    if (!valid.empty()) {
        std::sort(valid.begin(), valid.end());
        const auto pick = [&](double q) {
            const auto idx = static_cast<std::size_t>(q * static_cast<double>(valid.size() - 1));
            return valid[idx];
        };
        lo = pick(0.01);
        hi = pick(0.99);
        if (hi <= lo) hi = lo + 1.0f;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open for writing: " + path);
    out << "P5\n" << img.cols << " " << img.rows << "\n255\n";
    for (int r = 0; r < img.rows; ++r) {
        for (int c = 0; c < img.cols; ++c) {
            const float v = img.at(r, c);
            unsigned char px = 255; // invalid -> white mask
            if (v != kInvalidRange) {
                const float q = std::clamp((v - lo) / (hi - lo), 0.0f, 1.0f);
                px = static_cast<unsigned char>(std::lround(q * 254.0f));
            }
            out.put(static_cast<char>(px));
        }
    }
}

} // namespace msense::lidar
