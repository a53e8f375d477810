// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "msense/core/geometry.hpp"
#include "msense/scene.hpp"

namespace msense::lidar {

/// Spinning LiDAR timing/geometry model.
///
/// Pixel (r, c) of a frame starting at t0 is sampled at
///     t = t0 + c * col_interval + firing_delay[r]
/// while the head sweeps azimuth at `rotation_rate`, so the row's firing
/// delay shows up as an azimuth offset omega * firing_delay[r].
struct LidarConfig {
    int rows = 128;
    int cols = 1024;
    double rotation_rate_rad_s = 0.0; // 0 -> derived as 2*pi*frame_rate
    double col_interval_s = 0.0;      // 0 -> derived as 1/(frame_rate*cols)
    std::vector<double> firing_delay_s; // per row
    std::vector<int> pixel_shift;       // per row, metadata s_r
    std::vector<double> beam_elevation_rad; // per row
    double frame_rate_hz = 10.0;
    double max_range_m = 200.0;
    double range_noise_sigma_m = 0.05;

    // Eq-form destaggering reads S[r, (c + s_r) mod W]. For a frame
    // synthesized from the timing model above the geometric correction is the
    // opposite direction, so self-consistent configs use -1 here; real
    // metadata whose shifts are signed the other way uses +1.
    int destagger_sign = -1;

    double omega() const;       // rotation rate, derived when unset
    double col_interval() const;
    std::vector<std::string> validate() const;

    /// OS1-128-flavored defaults: 128 rows, 45 deg vertical FoV, 10 Hz,
    /// 200 m, 5 cm range noise, a repeating 4-phase firing-delay pattern and
    /// matching pixel shifts.
    static LidarConfig os1_like(int cols = 512);
};

/// Pixel shift implied by the timing model: round(delta_theta_r / (omega * dt_col)).
int pixel_shift_from_timing(const LidarConfig& cfg, int row);

/// Sampling instant of pixel (r, c) for a frame starting at t0.
double pixel_time(const LidarConfig& cfg, int row, int col, double t0);

/// Azimuth offset of row r: omega * firing_delay[r].
double row_azimuth_offset(const LidarConfig& cfg, int row);

inline constexpr float kInvalidRange = 0.0f; // no-return sentinel, masked in renders

struct RangeImage {
    int rows = 0;
    int cols = 0;
    std::vector<float> ranges; // row-major
    bool staggered = false;
    double t0 = 0.0;

    float& at(int r, int c) { return ranges[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)]; }
    float at(int r, int c) const { return ranges[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)]; }
    std::size_t valid_count() const;
};

using PoseProvider = std::function<Pose(double)>;

/// Ray-cast a staggered frame out of the scene: pixel (r, c) looks along
/// azimuth theta_c + row_azimuth_offset(r) (sensor frame) at its own firing
/// time. Gaussian range noise is seeded per frame; sigma = 0 disables it.
RangeImage synth_staggered_frame(const scene::SceneSpec& scn, const PoseProvider& pose_at,
                                 const LidarConfig& cfg, double t0, std::uint64_t noise_seed = 0,
                                 std::uint64_t frame_index = 0);

/// Per-row circular column shift, D[r, c] = S[r, (c + sign * s_r) mod W].
/// Throws on an already-destaggered frame.
RangeImage destagger(const RangeImage& staggered, const LidarConfig& cfg);

/// Inverse shift (returns a staggered frame); restagger(destagger(S)) == S
/// bit-for-bit.
RangeImage restagger(const RangeImage& destaggered, const LidarConfig& cfg);

struct PointCloud {
    std::vector<Vec3> points; // sensor frame
    std::vector<std::pair<int, int>> pixel; // row/column provenance
    double timestamp = 0.0;
};

/// Spherical-to-Cartesian conversion of a destaggered frame; invalid pixels
/// are skipped. Throws on staggered input.
PointCloud to_points(const RangeImage& destaggered, const LidarConfig& cfg);

/// Raster persistence: row-major little-endian float32 with a fixed-width
/// header (dims, staggered flag, t0).
void save_raster(const RangeImage& img, const std::string& path);
RangeImage load_raster(const std::string& path);

/// 8-bit PGM render with the display range clamped to the valid pixels'
/// 1-99 percentile; invalid pixels are painted white.
void write_pgm_render(const RangeImage& img, const std::string& path);

} // namespace msense::lidar
