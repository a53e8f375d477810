// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "msense/estim.hpp"
#include "msense/fusion.hpp"
#include "msense/lidar.hpp"
#include "msense/scene.hpp"
#include "msense/sounder.hpp"
#include "msense/sync.hpp"
#include "msense/waveform.hpp"

namespace msense::session {

using json = nlohmann::json;

/// Injected per-modality clock error (simulation ground truth for the
/// synchronization chain).
struct ClockSpec {
    double offset_s = 0.0;
    double drift = 0.0;
    double jitter_s = 0.0; // timestamp jitter std
};

struct ArraySpec {
    enum class Kind { SingleIsotropic, UniformPlanar, StackedCircular } kind = Kind::UniformPlanar;
    int rows = 4, cols = 8;                      // planar
    int rings = 2, ring_elements = 16;           // stacked circular
    double spacing_m = 0.0;                      // 0 -> half wavelength
    double ring_radius_m = 0.0;                  // 0 -> ring_elements*lambda/2 circumference
    double ring_spacing_m = 0.0;                 // 0 -> half wavelength

    sounder::ArrayGeometry build(double carrier_hz) const;
};

struct ImpairmentSpec {
    std::vector<double> phase_offsets_deg;   // per channel; empty -> zeros
    std::vector<double> gain_ripple_db;      // per channel
    std::vector<double> drift_deg_per_s;     // per channel
    double system_ripple_db = 0.0;           // parametric amplitude ripple over the band
    double system_ripple_periods = 2.0;
    double system_delay_ns = 0.0;            // bulk system group delay

    sounder::ImpairmentProfile build(int channels, const std::vector<double>& freq_hz) const;
};

struct B2BSpec {
    int captures = 16;
    double attenuation_db = 30.0;
    double cable_delay_ns = 50.0;
    bool noise = false;
};

struct ProcessingSpec {
    double pl_window_wavelengths = 40.0;
    int analysis_stride = 0;       // 0 -> auto (~<=200 analyzed snapshots)
    estim::SageConfig sage;
    estim::ClusterParams cluster;
    double fuse_time_s = -1.0;     // <0 -> session midpoint
};

struct SessionConfig {
    std::string name = "session";
    double start_s = 0.0;
    double duration_s = 10.0;
    double channel_rate_hz = 50.0;
    double lidar_rate_hz = 10.0;   // 0 disables the stream
    double image_rate_hz = 100.0;  // 0 disables the stream
    double geolocation_rate_hz = 120.0;
    double geolocation_noise_m = 0.0;

    scene::SceneSpec scene;
    waveform::ToneConfig wave;
    ArraySpec array;
    double dwell_s = 8e-6;
    ImpairmentSpec impairments;
    B2BSpec b2b;
    bool noise_enabled = true;
    double noise_per_bin_variance = 0.0; // 0 -> derived from the budget max PL
    sounder::BudgetLedger budget;
    std::optional<double> budget_reference_db;

    lidar::LidarConfig lidar_cfg;
    fusion::Intrinsics camera;
    fusion::Extrinsics camera_from_sensor;

    std::map<std::string, ClockSpec> clocks; // keys: channel, lidar, image, geolocation

    ProcessingSpec processing;

    std::vector<std::string> validate() const;
    int snapshot_count() const;
    int lidar_frame_count() const;
};

json to_json(const SessionConfig& config);
SessionConfig config_from_json(const json& j);
SessionConfig load_config(const std::filesystem::path& path);

/// Built-in scenario presets.
/// - "v2i": 400 m straight road, walls on the left, fence on the right,
///   ground plane, static elevated Tx, Rx driving 20 km/h, full sensor suite.
/// - "freespace": LoS-only variant of the same drive (path-loss studies).
/// - "static": short static capture with impairments (calibration studies).
SessionConfig preset(const std::string& name);
std::vector<std::string> preset_names();

struct StreamInfo {
    std::string modality;
    std::string file;
    std::uint64_t count = 0;
    double rate_hz = 0.0;
};

struct SessionManifest {
    std::string id;
    std::string created;
    std::uint64_t seed = 0;
    SessionConfig config;
    std::map<std::string, ClockSpec> clock_truth;
    std::vector<StreamInfo> streams;
    int format_version = 1;
};

/// Generate a full synthetic measurement session (manifest + streams) under
/// `dir`. Byte-identical for identical (config, seed).
SessionManifest generate_session(const SessionConfig& config, std::uint64_t seed,
                                 const std::filesystem::path& dir);

/// Parse the manifest without touching stream payloads.
SessionManifest read_session(const std::filesystem::path& dir);

/// Full validation: manifest invariants, stream headers, record counts
/// against both the manifest and the file sizes. Throws ValidationError with
/// file names and byte offsets.
SessionManifest validate_session(const std::filesystem::path& dir);

/// Snapshot stream access.
std::vector<sounder::Snapshot> load_snapshots(const std::filesystem::path& file);
std::vector<sounder::Snapshot> load_b2b(const SessionManifest& manifest,
                                        const std::filesystem::path& dir);
std::vector<lidar::RangeImage> load_lidar_frames(const std::filesystem::path& file,
                                                 std::uint64_t expect_count);

/// True Rx poses for every channel snapshot (ground truth table).
std::vector<Pose> load_trajectory(const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineOptions {
    std::vector<std::string> stages; // subset of {calibrate,pdp,pl,sage,cluster,destagger,fuse,report}
    std::filesystem::path out_dir;   // default: <session>/reports
    bool force = false;              // ignore stage hashes and re-run
};

struct StageResult {
    std::string name;
    bool skipped = false; // hash matched, nothing to do
    std::vector<std::string> outputs;
};

/// Run the requested stages in dependency order. Each stage writes its outputs
/// plus a stage record (config hash + seed); re-running an unchanged stage is
/// a no-op. Missing prerequisites raise DependencyError naming the artifact.
std::vector<StageResult> run_pipeline(const std::filesystem::path& session_dir,
                                      const PipelineOptions& options);

} // namespace msense::session
