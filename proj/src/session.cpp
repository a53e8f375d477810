// SPDX-License-Identifier: Apache-2.0
#include "msense/session.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "msense/core/binio.hpp"
#include "msense/core/constants.hpp"
#include "msense/core/errors.hpp"
#include "msense/core/rng.hpp"
#include "msense/core/table.hpp"

namespace msense::session {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Spec builders

sounder::ArrayGeometry ArraySpec::build(double carrier_hz) const {
    const double lambda = kSpeedOfLight / carrier_hz;
    const double d = spacing_m > 0 ? spacing_m : lambda / 2.0;
    switch (kind) {
        case Kind::SingleIsotropic:
            return sounder::ArrayGeometry::single_isotropic();
        case Kind::UniformPlanar:
            return sounder::ArrayGeometry::uniform_planar(rows, cols, d);
        case Kind::StackedCircular: {
            const double radius =
                ring_radius_m > 0 ? ring_radius_m : ring_elements * lambda / 2.0 / kTwoPi;
            const double dz = ring_spacing_m > 0 ? ring_spacing_m : lambda / 2.0;
            return sounder::ArrayGeometry::stacked_circular(rings, ring_elements, radius, dz);
        }
    }
    return sounder::ArrayGeometry::single_isotropic();
}

sounder::ImpairmentProfile ImpairmentSpec::build(int channels,
                                                 const std::vector<double>& freq_hz) const {
    sounder::ImpairmentProfile imp;
    const auto fill = [&](const std::vector<double>& src, double scale) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(channels);
        for (int i = 0; i < channels && i < static_cast<int>(src.size()); ++i) {
            v(i) = src[static_cast<std::size_t>(i)] * scale;
        }
        return v;
    };
    if (!phase_offsets_deg.empty()) imp.phase_offset_rad = fill(phase_offsets_deg, kPi / 180.0);
    if (!gain_ripple_db.empty()) imp.gain_ripple_db = fill(gain_ripple_db, 1.0);
    if (!drift_deg_per_s.empty()) imp.phase_drift_rad_per_s = fill(drift_deg_per_s, kPi / 180.0);
    if (system_ripple_db != 0.0 || system_delay_ns != 0.0) {
        const auto n = static_cast<Eigen::Index>(freq_hz.size());
        imp.system_response.resize(n);
        const double f0 = freq_hz.front();
        const double band = freq_hz.back() - freq_hz.front();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double u = band > 0 ? (freq_hz[static_cast<std::size_t>(i)] - f0) / band : 0.0;
            const double ripple_db =
                system_ripple_db / 2.0 * std::cos(kTwoPi * system_ripple_periods * u);
            const double amp = std::pow(10.0, ripple_db / 20.0);
            const double phase = -kTwoPi * std::remainder(
                freq_hz[static_cast<std::size_t>(i)] * system_delay_ns * 1e-9, 1.0);
            imp.system_response(i) = std::polar(amp, phase);
        }
    }
    return imp;
}

int SessionConfig::snapshot_count() const {
    return static_cast<int>(std::floor(duration_s * channel_rate_hz + 1e-9));
}

int SessionConfig::lidar_frame_count() const {
    if (lidar_rate_hz <= 0) return 0;
    return static_cast<int>(std::floor(duration_s * lidar_rate_hz + 1e-9));
}

std::vector<std::string> SessionConfig::validate() const {
    std::vector<std::string> errors;
    auto add = [&](const std::string& prefix, const std::vector<std::string>& list) {
        for (const auto& e : list) errors.push_back(prefix + ": " + e);
    };
    add("scene", scene.validate());
    add("waveform", wave.validate());
    if (!(duration_s > 0)) errors.push_back("session: duration must be > 0");
    if (!(channel_rate_hz > 0)) errors.push_back("session: channel_rate must be > 0");
    const auto array_geom = array.build(scene.carrier_frequency_hz);
    add("array", array_geom.validate());
    const auto schedule = sounder::SwitchSchedule::sequential(array_geom.size(), dwell_s, channel_rate_hz);
    add("schedule", schedule.validate(array_geom.size()));
    if (lidar_rate_hz > 0) add("lidar", lidar_cfg.validate());
    add("camera", camera.validate());
    add("camera_extrinsics", camera_from_sensor.validate());
    add("budget", budget.validate());
    if (b2b.captures < 1) errors.push_back("b2b: captures must be >= 1");
    for (const auto& [name, clock] : clocks) {
        if (std::abs(clock.drift) >= 1e-3) {
            errors.push_back("clocks." + name + ": |drift| must be < 1e-3");
        }
        if (clock.jitter_s < 0) errors.push_back("clocks." + name + ": jitter must be >= 0");
    }
    if (!scene.rx_trajectory.keys.empty()) {
        const double need_end = start_s + duration_s;
        if (scene.rx_trajectory.t_begin() > start_s || scene.rx_trajectory.t_end() < need_end) {
            errors.push_back("scene: rx_trajectory must span [start, start+duration]");
        }
    }
    return errors;
}

// ---------------------------------------------------------------------------
// JSON round trip

namespace {

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j) {
    return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

json mat3_to_json(const Mat3& m) {
    json rows = json::array();
    for (int r = 0; r < 3; ++r) rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
    return rows;
}

Mat3 mat3_from_json(const json& j) {
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = j.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
    return m;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

json to_json(const SessionConfig& c) {
    json j;
    j["session"] = {{"name", c.name},
                    {"start_s", c.start_s},
                    {"duration_s", c.duration_s}};
    j["rates"] = {{"channel_hz", c.channel_rate_hz},
                  {"lidar_hz", c.lidar_rate_hz},
                  {"image_hz", c.image_rate_hz},
                  {"geolocation_hz", c.geolocation_rate_hz},
                  {"geolocation_noise_m", c.geolocation_noise_m}};

    json scene;
    scene["carrier_frequency_hz"] = c.scene.carrier_frequency_hz;
    scene["path_loss_exponent"] = c.scene.path_loss_exponent;
    scene["shadowing_sigma_db"] = c.scene.shadowing_sigma_db;
    scene["shadowing_rate_hz"] = c.scene.shadowing_rate_hz;
    scene["tx_position"] = vec3_to_json(c.scene.tx_pose.p);
    scene["tx_rotation"] = mat3_to_json(c.scene.tx_pose.R);
    json keys = json::array();
    for (const auto& k : c.scene.rx_trajectory.keys) {
        keys.push_back({{"t", k.t},
                        {"position", vec3_to_json(k.position)},
                        {"quaternion", json::array({k.orientation.w(), k.orientation.x(),
                                                    k.orientation.y(), k.orientation.z()})}});
    }
    scene["rx_keyframes"] = keys;
    json facets = json::array();
    for (const auto& f : c.scene.reflectors) {
        json corners = json::array();
        for (const auto& p : f.corners) corners.push_back(vec3_to_json(p));
        facets.push_back({{"corners", corners}, {"loss_db", f.reflection_loss_db}, {"label", f.label}});
    }
    scene["reflectors"] = facets;
    json scatterers = json::array();
    for (const auto& s : c.scene.scatterers) {
        scatterers.push_back(
            {{"position", vec3_to_json(s.position)}, {"gain_db", s.gain_db}, {"label", s.label}});
    }
    scene["scatterers"] = scatterers;
    j["scene"] = scene;

    j["waveform"] = {{"tone_spacing_hz", c.wave.tone_spacing_hz},
                     {"half_tone_count", c.wave.half_tone_count},
                     {"schedule", c.wave.schedule == waveform::PhaseSchedule::Zero ? "zero"
                                  : c.wave.schedule == waveform::PhaseSchedule::Newman
                                      ? "newman"
                                      : "custom"},
                     {"sample_rate_hz", c.wave.sample_rate_hz}};

    json array;
    array["kind"] = c.array.kind == ArraySpec::Kind::SingleIsotropic    ? "single"
                    : c.array.kind == ArraySpec::Kind::UniformPlanar ? "planar"
                                                                        : "stacked_circular";
    array["rows"] = c.array.rows;
    array["cols"] = c.array.cols;
    array["rings"] = c.array.rings;
    array["ring_elements"] = c.array.ring_elements;
    array["spacing_m"] = c.array.spacing_m;
    array["ring_radius_m"] = c.array.ring_radius_m;
    array["ring_spacing_m"] = c.array.ring_spacing_m;
    j["array"] = array;

    j["capture"] = {{"dwell_s", c.dwell_s},
                    {"noise_enabled", c.noise_enabled},
                    {"noise_per_bin_variance", c.noise_per_bin_variance}};

    j["impairments"] = {{"phase_offsets_deg", c.impairments.phase_offsets_deg},
                        {"gain_ripple_db", c.impairments.gain_ripple_db},
                        {"drift_deg_per_s", c.impairments.drift_deg_per_s},
                        {"system_ripple_db", c.impairments.system_ripple_db},
                        {"system_ripple_periods", c.impairments.system_ripple_periods},
                        {"system_delay_ns", c.impairments.system_delay_ns}};

    j["b2b"] = {{"captures", c.b2b.captures},
                {"attenuation_db", c.b2b.attenuation_db},
                {"cable_delay_ns", c.b2b.cable_delay_ns},
                {"noise", c.b2b.noise}};

    j["budget"] = {{"source_power_dbm", c.budget.source_power_dbm},
                   {"amplifier_gain_db", c.budget.amplifier_gain_db},
                   {"tx_antenna_gain_dbi", c.budget.tx_antenna_gain_dbi},
                   {"tx_hardware_loss_db", c.budget.tx_hardware_loss_db},
                   {"rx_antenna_gain_dbi", c.budget.rx_antenna_gain_dbi},
                   {"lna_gain_db", c.budget.lna_gain_db},
                   {"rx_cable_loss_db", c.budget.rx_cable_loss_db},
                   {"switch_insertion_loss_db", c.budget.switch_insertion_loss_db},
                   {"noise_density_dbm_hz", c.budget.noise_density_dbm_hz},
                   {"bandwidth_db_hz", c.budget.bandwidth_db_hz},
                   {"receiver_noise_figure_db", c.budget.receiver_noise_figure_db},
                   {"snr_threshold_db", c.budget.snr_threshold_db}};
    if (c.budget_reference_db) j["budget"]["reference_db"] = *c.budget_reference_db;

    j["lidar"] = {{"rows", c.lidar_cfg.rows},
                  {"cols", c.lidar_cfg.cols},
                  {"frame_rate_hz", c.lidar_cfg.frame_rate_hz},
                  {"max_range_m", c.lidar_cfg.max_range_m},
                  {"range_noise_sigma_m", c.lidar_cfg.range_noise_sigma_m},
                  {"destagger_sign", c.lidar_cfg.destagger_sign},
                  {"firing_delay_s", c.lidar_cfg.firing_delay_s},
                  {"pixel_shift", c.lidar_cfg.pixel_shift},
                  {"beam_elevation_rad", c.lidar_cfg.beam_elevation_rad}};

    j["camera"] = {{"fx", c.camera.fx}, {"fy", c.camera.fy},     {"cx", c.camera.cx},
                   {"cy", c.camera.cy}, {"width", c.camera.width}, {"height", c.camera.height},
                   {"rotation_from_sensor", mat3_to_json(c.camera_from_sensor.rotation)},
                   {"translation_from_sensor", vec3_to_json(c.camera_from_sensor.translation)}};

    json clocks;
    for (const auto& [name, clock] : c.clocks) {
        clocks[name] = {{"offset_s", clock.offset_s}, {"drift", clock.drift}, {"jitter_s", clock.jitter_s}};
    }
    j["clocks"] = clocks;

    j["processing"] = {{"pl_window_wavelengths", c.processing.pl_window_wavelengths},
                       {"analysis_stride", c.processing.analysis_stride},
                       {"fuse_time_s", c.processing.fuse_time_s},
                       {"sage",
                        {{"max_paths", c.processing.sage.max_paths},
                         {"residual_tol", c.processing.sage.residual_tol},
                         {"max_em_iterations", c.processing.sage.max_em_iterations},
                         {"coarse_angle_step_deg", rad2deg(c.processing.sage.coarse_angle_step_rad)},
                         {"elevation_min_deg", rad2deg(c.processing.sage.elevation_min_rad)},
                         {"elevation_max_deg", rad2deg(c.processing.sage.elevation_max_rad)},
                         {"detection_margin_db", c.processing.sage.detection_margin_db}}},
                       {"cluster",
                        {{"delay_gap_ns", c.processing.cluster.delay_gap_s * 1e9},
                         {"floor_margin_db", c.processing.cluster.floor_margin_db},
                         {"refine_centroids", c.processing.cluster.refine_centroids}}}};
    return j;
}

SessionConfig config_from_json(const json& j) {
    SessionConfig c;
    if (j.contains("session")) {
        const auto& s = j.at("session");
        maybe(s, "name", c.name);
        maybe(s, "start_s", c.start_s);
        maybe(s, "duration_s", c.duration_s);
    }
    if (j.contains("rates")) {
        const auto& r = j.at("rates");
        maybe(r, "channel_hz", c.channel_rate_hz);
        maybe(r, "lidar_hz", c.lidar_rate_hz);
        maybe(r, "image_hz", c.image_rate_hz);
        maybe(r, "geolocation_hz", c.geolocation_rate_hz);
        maybe(r, "geolocation_noise_m", c.geolocation_noise_m);
    }
    if (j.contains("scene")) {
        const auto& s = j.at("scene");
        maybe(s, "carrier_frequency_hz", c.scene.carrier_frequency_hz);
        maybe(s, "path_loss_exponent", c.scene.path_loss_exponent);
        maybe(s, "shadowing_sigma_db", c.scene.shadowing_sigma_db);
        maybe(s, "shadowing_rate_hz", c.scene.shadowing_rate_hz);
        if (s.contains("tx_position")) c.scene.tx_pose.p = vec3_from_json(s.at("tx_position"));
        if (s.contains("tx_rotation")) c.scene.tx_pose.R = mat3_from_json(s.at("tx_rotation"));
        if (s.contains("rx_keyframes")) {
            c.scene.rx_trajectory.keys.clear();
            for (const auto& k : s.at("rx_keyframes")) {
                scene::Keyframe key;
                key.t = k.at("t").get<double>();
                key.position = vec3_from_json(k.at("position"));
                if (k.contains("quaternion")) {
                    const auto& q = k.at("quaternion");
                    key.orientation = Eigen::Quaterniond(q.at(0).get<double>(), q.at(1).get<double>(),
                                                         q.at(2).get<double>(), q.at(3).get<double>());
                    key.orientation.normalize();
                }
                c.scene.rx_trajectory.keys.push_back(key);
            }
        }
        if (s.contains("reflectors")) {
            for (const auto& f : s.at("reflectors")) {
                scene::Facet facet;
                for (const auto& corner : f.at("corners")) facet.corners.push_back(vec3_from_json(corner));
                facet.reflection_loss_db = f.value("loss_db", 0.0);
                facet.label = f.value("label", std::string());
                c.scene.reflectors.push_back(std::move(facet));
            }
        }
        if (s.contains("scatterers")) {
            for (const auto& sc : s.at("scatterers")) {
                scene::Scatterer scatterer;
                scatterer.position = vec3_from_json(sc.at("position"));
                scatterer.gain_db = sc.value("gain_db", 0.0);
                scatterer.label = sc.value("label", std::string());
                c.scene.scatterers.push_back(std::move(scatterer));
            }
        }
    }
    if (j.contains("waveform")) {
        const auto& w = j.at("waveform");
        maybe(w, "tone_spacing_hz", c.wave.tone_spacing_hz);
        maybe(w, "half_tone_count", c.wave.half_tone_count);
        maybe(w, "sample_rate_hz", c.wave.sample_rate_hz);
        if (w.contains("schedule")) {
            const auto name = w.at("schedule").get<std::string>();
            c.wave.schedule = name == "zero"     ? waveform::PhaseSchedule::Zero
                              : name == "custom" ? waveform::PhaseSchedule::Custom
                                                 : waveform::PhaseSchedule::Newman;
        }
    }
    if (j.contains("array")) {
        const auto& a = j.at("array");
        if (a.contains("kind")) {
            const auto kind = a.at("kind").get<std::string>();
            c.array.kind = kind == "single"             ? ArraySpec::Kind::SingleIsotropic
                           : kind == "stacked_circular" ? ArraySpec::Kind::StackedCircular
                                                        : ArraySpec::Kind::UniformPlanar;
        }
        maybe(a, "rows", c.array.rows);
        maybe(a, "cols", c.array.cols);
        maybe(a, "rings", c.array.rings);
        maybe(a, "ring_elements", c.array.ring_elements);
        maybe(a, "spacing_m", c.array.spacing_m);
        maybe(a, "ring_radius_m", c.array.ring_radius_m);
        maybe(a, "ring_spacing_m", c.array.ring_spacing_m);
    }
    if (j.contains("capture")) {
        const auto& cap = j.at("capture");
        maybe(cap, "dwell_s", c.dwell_s);
        maybe(cap, "noise_enabled", c.noise_enabled);
        maybe(cap, "noise_per_bin_variance", c.noise_per_bin_variance);
    }
    if (j.contains("impairments")) {
        const auto& imp = j.at("impairments");
        maybe(imp, "phase_offsets_deg", c.impairments.phase_offsets_deg);
        maybe(imp, "gain_ripple_db", c.impairments.gain_ripple_db);
        maybe(imp, "drift_deg_per_s", c.impairments.drift_deg_per_s);
        maybe(imp, "system_ripple_db", c.impairments.system_ripple_db);
        maybe(imp, "system_ripple_periods", c.impairments.system_ripple_periods);
        maybe(imp, "system_delay_ns", c.impairments.system_delay_ns);
    }
    if (j.contains("b2b")) {
        const auto& b = j.at("b2b");
        maybe(b, "captures", c.b2b.captures);
        maybe(b, "attenuation_db", c.b2b.attenuation_db);
        maybe(b, "cable_delay_ns", c.b2b.cable_delay_ns);
        maybe(b, "noise", c.b2b.noise);
    }
    if (j.contains("budget")) {
        const auto& b = j.at("budget");
        maybe(b, "source_power_dbm", c.budget.source_power_dbm);
        maybe(b, "amplifier_gain_db", c.budget.amplifier_gain_db);
        maybe(b, "tx_antenna_gain_dbi", c.budget.tx_antenna_gain_dbi);
        maybe(b, "tx_hardware_loss_db", c.budget.tx_hardware_loss_db);
        maybe(b, "rx_antenna_gain_dbi", c.budget.rx_antenna_gain_dbi);
        maybe(b, "lna_gain_db", c.budget.lna_gain_db);
        maybe(b, "rx_cable_loss_db", c.budget.rx_cable_loss_db);
        maybe(b, "switch_insertion_loss_db", c.budget.switch_insertion_loss_db);
        maybe(b, "noise_density_dbm_hz", c.budget.noise_density_dbm_hz);
        maybe(b, "bandwidth_db_hz", c.budget.bandwidth_db_hz);
        maybe(b, "receiver_noise_figure_db", c.budget.receiver_noise_figure_db);
        maybe(b, "snr_threshold_db", c.budget.snr_threshold_db);
        if (b.contains("reference_db")) c.budget_reference_db = b.at("reference_db").get<double>();
    }
    if (j.contains("lidar")) {
        const auto& l = j.at("lidar");
        maybe(l, "rows", c.lidar_cfg.rows);
        maybe(l, "cols", c.lidar_cfg.cols);
        maybe(l, "frame_rate_hz", c.lidar_cfg.frame_rate_hz);
        maybe(l, "max_range_m", c.lidar_cfg.max_range_m);
        maybe(l, "range_noise_sigma_m", c.lidar_cfg.range_noise_sigma_m);
        maybe(l, "destagger_sign", c.lidar_cfg.destagger_sign);
        maybe(l, "firing_delay_s", c.lidar_cfg.firing_delay_s);
        maybe(l, "pixel_shift", c.lidar_cfg.pixel_shift);
        maybe(l, "beam_elevation_rad", c.lidar_cfg.beam_elevation_rad);
    }
    if (j.contains("camera")) {
        const auto& cam = j.at("camera");
        maybe(cam, "fx", c.camera.fx);
        maybe(cam, "fy", c.camera.fy);
        maybe(cam, "cx", c.camera.cx);
        maybe(cam, "cy", c.camera.cy);
        maybe(cam, "width", c.camera.width);
        maybe(cam, "height", c.camera.height);
        if (cam.contains("rotation_from_sensor")) {
            c.camera_from_sensor.rotation = mat3_from_json(cam.at("rotation_from_sensor"));
        }
        if (cam.contains("translation_from_sensor")) {
            c.camera_from_sensor.translation = vec3_from_json(cam.at("translation_from_sensor"));
        }
    }
    if (j.contains("clocks")) {
        for (const auto& [name, v] : j.at("clocks").items()) {
            ClockSpec spec;
            maybe(v, "offset_s", spec.offset_s);
            maybe(v, "drift", spec.drift);
            maybe(v, "jitter_s", spec.jitter_s);
            c.clocks[name] = spec;
        }
    }
    if (j.contains("processing")) {
        const auto& p = j.at("processing");
        maybe(p, "pl_window_wavelengths", c.processing.pl_window_wavelengths);
        maybe(p, "analysis_stride", c.processing.analysis_stride);
        maybe(p, "fuse_time_s", c.processing.fuse_time_s);
        if (p.contains("sage")) {
            const auto& s = p.at("sage");
            maybe(s, "max_paths", c.processing.sage.max_paths);
            maybe(s, "residual_tol", c.processing.sage.residual_tol);
            maybe(s, "max_em_iterations", c.processing.sage.max_em_iterations);
            if (s.contains("coarse_angle_step_deg")) {
                c.processing.sage.coarse_angle_step_rad = deg2rad(s.at("coarse_angle_step_deg").get<double>());
            }
            if (s.contains("elevation_min_deg")) {
                c.processing.sage.elevation_min_rad = deg2rad(s.at("elevation_min_deg").get<double>());
            }
            if (s.contains("elevation_max_deg")) {
                c.processing.sage.elevation_max_rad = deg2rad(s.at("elevation_max_deg").get<double>());
            }
            maybe(s, "detection_margin_db", c.processing.sage.detection_margin_db);
        }
        if (p.contains("cluster")) {
            const auto& cl = p.at("cluster");
            if (cl.contains("delay_gap_ns")) {
                c.processing.cluster.delay_gap_s = cl.at("delay_gap_ns").get<double>() * 1e-9;
            }
            maybe(cl, "floor_margin_db", c.processing.cluster.floor_margin_db);
            maybe(cl, "refine_centroids", c.processing.cluster.refine_centroids);
        }
    }
    return c;
}

SessionConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("config parse error in " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Presets

namespace {

void add_default_clocks(SessionConfig& c) {
    c.clocks["channel"] = {0.0, 0.0, 0.0};          // reference-locked (rubidium)
    c.clocks["lidar"] = {0.120, 2e-7, 0.0002};      // Ethernet-triggered host clock
    c.clocks["image"] = {-0.350, 5e-7, 0.001};      // Internet-synced phone time
    c.clocks["geolocation"] = {0.020, 1e-7, 0.0001};
}

SessionConfig road_preset(bool multipath) {
    SessionConfig c;
    c.name = multipath ? "v2i" : "freespace";
    // Straight road: Rx drives from 10 m to ~280 m Tx separation at 20 km/h.
    const double speed = 20.0 / 3.6;
    const double length = 270.0;
    c.duration_s = std::floor(length / speed * 10.0) / 10.0;
    c.channel_rate_hz = 50.0;
    c.lidar_rate_hz = multipath ? 10.0 : 0.0;
    c.image_rate_hz = 100.0;
    c.geolocation_rate_hz = 120.0;
    c.geolocation_noise_m = 1.5;

    c.scene.carrier_frequency_hz = 28e9;
    c.scene.tx_pose.p = Vec3(0.0, 0.0, 2.0);
    const double margin = 1.0; // trajectory outlives the capture window
    c.scene.rx_trajectory = scene::Trajectory::line(
        Vec3(10.0, 0.0, 2.0), Vec3(10.0 + speed * (c.duration_s + margin), 0.0, 2.0), 0.0,
        c.duration_s + margin);
    if (multipath) {
        // Low walls on the left, fence on the right, ground plane, a couple of
        // parked-vehicle scatterers.
        scene::Facet wall;
        wall.corners = {Vec3(-20, 6, 0), Vec3(320, 6, 0), Vec3(320, 6, 3), Vec3(-20, 6, 3)};
        wall.reflection_loss_db = 6.0;
        wall.label = "left_wall";
        c.scene.reflectors.push_back(wall);
        scene::Facet fence;
        fence.corners = {Vec3(-20, -5, 0), Vec3(320, -5, 0), Vec3(320, -5, 2), Vec3(-20, -5, 2)};
        fence.reflection_loss_db = 8.0;
        fence.label = "right_fence";
        c.scene.reflectors.push_back(fence);
        scene::Facet ground;
        ground.corners = {Vec3(-50, -40, 0), Vec3(400, -40, 0), Vec3(400, 40, 0), Vec3(-50, 40, 0)};
        ground.reflection_loss_db = 3.0;
        ground.label = "ground";
        c.scene.reflectors.push_back(ground);
        c.scene.scatterers.push_back({Vec3(60.0, 4.5, 1.0), 10.0, "parked_car_a"});
        c.scene.scatterers.push_back({Vec3(150.0, -4.0, 1.0), 8.0, "parked_car_b"});
    }

    // 1 GHz of 2N+1 tones.
    c.wave.tone_spacing_hz = 1e9 / 128.0;
    c.wave.half_tone_count = 63; // 127 tones
    c.wave.schedule = waveform::PhaseSchedule::Newman;

    c.array.kind = multipath ? ArraySpec::Kind::StackedCircular : ArraySpec::Kind::SingleIsotropic;
    c.array.rings = 2;
    c.array.ring_elements = 16;
    c.dwell_s = 8e-6;

    c.impairments.phase_offsets_deg = {0, 22, -15, 48, 9, -31, 75, 14, -8, 39, -52, 27, 5, -19, 61, -44,
                                       12, -27, 33, -6, 51, 18, -38, 70, -13, 29, -57, 8, 42, -21, 65, -3};
    c.impairments.system_ripple_db = 2.0;
    c.impairments.system_ripple_periods = 3.0;
    c.impairments.system_delay_ns = 12.0;

    c.noise_enabled = true;
    c.budget_reference_db = 128.2;

    c.lidar_cfg = lidar::LidarConfig::os1_like(256);
    c.lidar_cfg.rows = 32;
    c.lidar_cfg.firing_delay_s.resize(32);
    c.lidar_cfg.pixel_shift.resize(32);
    c.lidar_cfg.beam_elevation_rad.resize(32);
    const double dt_col = c.lidar_cfg.col_interval();
    for (int r = 0; r < 32; ++r) {
        c.lidar_cfg.firing_delay_s[static_cast<std::size_t>(r)] = (r % 4) * 3.0 * dt_col;
        c.lidar_cfg.pixel_shift[static_cast<std::size_t>(r)] = (r % 4) * 3;
        const double fov = deg2rad(45.0);
        c.lidar_cfg.beam_elevation_rad[static_cast<std::size_t>(r)] =
            kPi / 2 - fov / 2 + fov * r / 31.0;
    }

    // Camera above the LiDAR looking down the road (+x): standard camera
    // axes (z forward, x right, y down).
    c.camera.fx = 600;
    c.camera.fy = 600;
    c.camera.cx = 640;
    c.camera.cy = 360;
    c.camera.width = 1280;
    c.camera.height = 720;
    Mat3 r_cs;
    r_cs << 0, -1, 0, 0, 0, -1, 1, 0, 0; // camera row basis in sensor coordinates
    c.camera_from_sensor.rotation = r_cs;
    c.camera_from_sensor.translation = Vec3(0, 0, -0.15);

    add_default_clocks(c);

    c.processing.sage.max_paths = 6;
    c.processing.sage.elevation_min_rad = deg2rad(85.0);
    c.processing.sage.elevation_max_rad = deg2rad(175.0);
    c.processing.sage.coarse_angle_step_rad = deg2rad(2.0);
    c.processing.sage.detection_margin_db = 35.0;
    return c;
}

SessionConfig static_preset() {
    SessionConfig c;
    c.name = "static";
    c.duration_s = 10.0;
    c.channel_rate_hz = 50.0;
    c.lidar_rate_hz = 0.0;
    c.image_rate_hz = 0.0;
    c.geolocation_rate_hz = 0.0;
    c.scene.carrier_frequency_hz = 28e9;
    c.scene.tx_pose.p = Vec3(0, 0, 2);
    c.scene.rx_trajectory = scene::Trajectory::fixed(Vec3(20, 0, 2), 0.0, c.duration_s + 1.0);
    c.wave.tone_spacing_hz = 1e9 / 64.0;
    c.wave.half_tone_count = 31;
    c.array.kind = ArraySpec::Kind::UniformPlanar;
    c.array.rows = 4;
    c.array.cols = 8;
    c.impairments.phase_offsets_deg = {0, 30, 60, 90, 120, 150, 180, 210,
                                       240, 270, 300, 330, 15, 45, 75, 105,
                                       135, 165, 195, 225, 255, 285, 315, 345,
                                       10, 40, 70, 100, 130, 160, 190, 220};
    c.impairments.drift_deg_per_s =
        std::vector<double>{0, 0.5, -0.3, 0.8, -0.6, 0.2, -0.1, 0.4, 0.7, -0.2, 0.3, -0.5,
                            0.1, 0.6, -0.4, 0.05, -0.15, 0.25, -0.35, 0.45, -0.55, 0.65, -0.7, 0.15,
                            0.35, -0.25, 0.55, -0.45, 0.75, -0.65, 0.22, -0.12};
    c.impairments.system_ripple_db = 2.0;
    add_default_clocks(c);
    return c;
}

} // namespace

SessionConfig preset(const std::string& name) {
    if (name == "v2i") return road_preset(true);
    if (name == "freespace") return road_preset(false);
    if (name == "static") return static_preset();
    throw ValidationError("unknown preset '" + name + "' (available: v2i, freespace, static)");
}

std::vector<std::string> preset_names() { return {"v2i", "freespace", "static"}; }

// ---------------------------------------------------------------------------
// Stream files

namespace {

constexpr char kSnapshotTag[5] = "MSSN";
constexpr char kLidarTag[5] = "MSLD";

void write_snapshot_stream(const fs::path& file, const std::vector<sounder::Snapshot>& snaps) {
    io::Writer w(file.string());
    w.header(kSnapshotTag, 1);
    const auto m = static_cast<std::uint32_t>(snaps.empty() ? 0 : snaps.front().response.rows());
    const auto n_f = static_cast<std::uint32_t>(snaps.empty() ? 0 : snaps.front().freq_hz.size());
    w.put(m);
    w.put(n_f);
    w.put<std::uint64_t>(snaps.size());
    if (!snaps.empty()) {
        w.put<double>(snaps.front().steering_freq_hz);
        for (const double f : snaps.front().freq_hz) w.put(f);
        for (const bool b : snaps.front().in_band) w.put<std::uint8_t>(b ? 1 : 0);
    }
    for (const auto& s : snaps) {
        w.put<double>(s.timestamp);
        w.put<double>(s.noise_variance);
        for (const double t : s.element_time) w.put(t);
        for (Eigen::Index e = 0; e < s.response.rows(); ++e) {
            for (Eigen::Index f = 0; f < s.response.cols(); ++f) {
                w.put<double>(s.response(e, f).real());
                w.put<double>(s.response(e, f).imag());
            }
        }
    }
    w.close();
}

void write_lidar_stream(const fs::path& file, const std::vector<lidar::RangeImage>& frames) {
    io::Writer w(file.string());
    w.header(kLidarTag, 1);
    const auto rows = static_cast<std::uint32_t>(frames.empty() ? 0 : frames.front().rows);
    const auto cols = static_cast<std::uint32_t>(frames.empty() ? 0 : frames.front().cols);
    w.put(rows);
    w.put(cols);
    w.put<std::uint64_t>(frames.size());
    w.put<std::uint8_t>(frames.empty() ? 0 : (frames.front().staggered ? 1 : 0));
    for (const auto& frame : frames) {
        w.put<double>(frame.t0);
        w.put_array(frame.ranges.data(), frame.ranges.size());
    }
    w.close();
}

} // namespace

std::vector<sounder::Snapshot> load_snapshots(const fs::path& file) {
    io::Reader r(file.string());
    r.expect_header(kSnapshotTag, 1);
    const auto m = r.get<std::uint32_t>();
    const auto n_f = r.get<std::uint32_t>();
    const auto count = r.get<std::uint64_t>();
    std::vector<sounder::Snapshot> out;
    if (count == 0) return out;
    const double steering_freq = r.get<double>();
    std::vector<double> freq(n_f);
    for (auto& f : freq) f = r.get<double>();
    std::vector<bool> in_band(n_f);
    for (std::size_t i = 0; i < n_f; ++i) in_band[i] = r.get<std::uint8_t>() != 0;
    out.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        sounder::Snapshot s;
        s.steering_freq_hz = steering_freq;
        s.freq_hz = freq;
        s.in_band = in_band;
        s.timestamp = r.get<double>();
        s.noise_variance = r.get<double>();
        s.element_time.resize(m);
        for (auto& t : s.element_time) t = r.get<double>();
        s.response.resize(m, n_f);
        for (std::uint32_t e = 0; e < m; ++e) {
            for (std::uint32_t f = 0; f < n_f; ++f) {
                const double re = r.get<double>();
                const double im = r.get<double>();
                s.response(e, f) = {re, im};
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<lidar::RangeImage> load_lidar_frames(const fs::path& file, std::uint64_t expect_count) {
    io::Reader r(file.string());
    r.expect_header(kLidarTag, 1);
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    const auto count = r.get<std::uint64_t>();
    if (expect_count && count != expect_count) {
        throw ValidationError(file.string() + ": header count " + std::to_string(count) +
                              " != manifest count " + std::to_string(expect_count));
    }
    const auto staggered = r.get<std::uint8_t>() != 0;
    std::vector<lidar::RangeImage> frames;
    frames.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        lidar::RangeImage img;
        img.rows = static_cast<int>(rows);
        img.cols = static_cast<int>(cols);
        img.staggered = staggered;
        img.t0 = r.get<double>();
        img.ranges.resize(static_cast<std::size_t>(rows) * cols);
        r.get_array(img.ranges.data(), img.ranges.size());
        frames.push_back(std::move(img));
    }
    return frames;
}

std::vector<Pose> load_trajectory(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ValidationError("cannot open trajectory: " + file.string());
    std::vector<Pose> poses;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("t\t", 0) == 0) continue;
        Pose p;
        double qw, qx, qy, qz;
        if (std::sscanf(line.c_str(), "%lf\t%lf\t%lf\t%lf\t%lf\t%lf\t%lf\t%lf", &p.t, &p.p.x(),
                        &p.p.y(), &p.p.z(), &qw, &qx, &qy, &qz) == 8) {
            p.R = Eigen::Quaterniond(qw, qx, qy, qz).toRotationMatrix();
            poses.push_back(p);
        }
    }
    return poses;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

std::string hash_hex(const json& config_json, std::uint64_t seed) {
    const std::string dump = config_json.dump();
    std::uint64_t h = Rng::hash(dump) ^ (0x9e3779b97f4a7c15ULL * (seed + 1));
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace

SessionManifest generate_session(const SessionConfig& config, std::uint64_t seed,
                                 const fs::path& dir) {
    {
        const auto errors = config.validate();
        if (!errors.empty()) {
            std::string msg = "invalid session config:";
            for (const auto& e : errors) msg += "\n  - " + e;
            throw ValidationError(msg);
        }
    }
    fs::create_directories(dir);

    SessionManifest manifest;
    manifest.seed = seed;
    manifest.config = config;
    manifest.clock_truth = config.clocks;
    const json config_json = to_json(config);
    manifest.id = hash_hex(config_json, seed);
    manifest.created = "deterministic:" + manifest.id; // no wall clock: sessions are reproducible

    const auto array = config.array.build(config.scene.carrier_frequency_hz);
    const auto schedule =
        sounder::SwitchSchedule::sequential(array.size(), config.dwell_s, config.channel_rate_hz);

    std::vector<double> grid_freq;
    {
        std::vector<bool> in_band;
        for (int n = -config.wave.half_tone_count; n <= config.wave.half_tone_count; ++n) {
            grid_freq.push_back(config.scene.carrier_frequency_hz + n * config.wave.tone_spacing_hz);
        }
        (void)in_band;
    }
    const auto impairments = config.impairments.build(array.size(), grid_freq);

    double noise_var = config.noise_per_bin_variance;
    if (config.noise_enabled && noise_var <= 0) {
        const auto budget = sounder::max_measurable_path_loss(config.budget);
        noise_var = std::pow(10.0, -budget.max_path_loss_db / 10.0);
    }

    const auto clock_of = [&](const std::string& name) {
        const auto it = config.clocks.find(name);
        return it == config.clocks.end() ? ClockSpec{} : it->second;
    };
    const auto local_stamp = [&](const ClockSpec& spec, double true_t, Rng& jitter_rng) {
        const double jitter = spec.jitter_s > 0 ? spec.jitter_s * jitter_rng.gaussian() : 0.0;
        return true_t * (1.0 + spec.drift) + spec.offset_s + jitter;
    };

    // --- channel snapshots -------------------------------------------------
    {
        const int count = config.snapshot_count();
        std::vector<sounder::Snapshot> snaps;
        snaps.reserve(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) {
            const double t = config.start_s + static_cast<double>(i) / config.channel_rate_hz;
            sounder::NoiseSpec noise;
            noise.enabled = config.noise_enabled;
            noise.per_bin_variance = noise_var;
            noise.seed = seed;
            noise.snapshot_index = static_cast<std::uint64_t>(i);
            snaps.push_back(capture_snapshot(config.scene, array, schedule, impairments,
                                             config.wave, noise, t));
        }
        write_snapshot_stream(dir / "snapshots.bin", snaps);
        manifest.streams.push_back(
            {"channel", "snapshots.bin", static_cast<std::uint64_t>(count), config.channel_rate_hz});

        // Ground-truth Rx poses per snapshot.
        io::TableWriter table((dir / "trajectory.tsv").string());
        table.comment("units", "t s; position m; quaternion wxyz");
        table.comment("session", manifest.id);
        table.columns({"t", "px", "py", "pz", "qw", "qx", "qy", "qz"});
        for (const auto& s : snaps) {
            const Pose pose = scene::trajectory_pose(config.scene, s.timestamp);
            const Eigen::Quaterniond q(pose.R);
            table.cell(pose.t);
            table.cell(pose.p.x());
            table.cell(pose.p.y());
            table.cell(pose.p.z());
            table.cell(q.w());
            table.cell(q.x());
            table.cell(q.y());
            table.cell(q.z());
            table.end_row();
        }
        table.close();
    }

    // --- back-to-back reference captures ------------------------------------
    {
        std::vector<sounder::Snapshot> b2b;
        for (int i = 0; i < config.b2b.captures; ++i) {
            sounder::NoiseSpec noise;
            noise.enabled = config.b2b.noise && config.noise_enabled;
            noise.per_bin_variance = noise_var;
            noise.seed = Rng::hash("b2b") ^ seed;
            noise.snapshot_index = static_cast<std::uint64_t>(i);
            const double t = config.start_s + static_cast<double>(i) / config.channel_rate_hz;
            b2b.push_back(capture_b2b(array, schedule, impairments, config.wave,
                                      config.scene.carrier_frequency_hz, config.b2b.attenuation_db,
                                      config.b2b.cable_delay_ns * 1e-9, noise, t));
        }
        write_snapshot_stream(dir / "b2b.bin", b2b);
        manifest.streams.push_back({"b2b", "b2b.bin", static_cast<std::uint64_t>(config.b2b.captures),
                                    config.channel_rate_hz});
    }

    // --- LiDAR frames --------------------------------------------------------
    if (config.lidar_rate_hz > 0) {
        const int count = config.lidar_frame_count();
        const auto pose_provider = [&](double t) {
            const double lo = config.scene.rx_trajectory.t_begin();
            const double hi = config.scene.rx_trajectory.t_end();
            return config.scene.rx_trajectory.pose_at(std::clamp(t, lo, hi));
        };
        std::vector<lidar::RangeImage> frames;
        frames.reserve(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) {
            const double t0 = config.start_s + static_cast<double>(i) / config.lidar_rate_hz;
            frames.push_back(lidar::synth_staggered_frame(config.scene, pose_provider,
                                                          config.lidar_cfg, t0, seed,
                                                          static_cast<std::uint64_t>(i)));
        }
        write_lidar_stream(dir / "lidar.bin", frames);
        manifest.streams.push_back(
            {"lidar", "lidar.bin", static_cast<std::uint64_t>(count), config.lidar_rate_hz});
    }

    // --- timestamp pair log (sync input) -------------------------------------
    {
        io::TableWriter table((dir / "timestamps.tsv").string());
        table.comment("units", "seconds; local = reference*(1+drift)+offset+jitter");
        table.comment("session", manifest.id);
        table.columns({"modality", "local_t", "reference_t"});
        const auto emit = [&](const std::string& modality, double rate) {
            if (rate <= 0) return;
            Rng jitter_rng = Rng::substream(seed, "clock-jitter-" + modality);
            const ClockSpec spec = clock_of(modality);
            const int count = static_cast<int>(std::floor(config.duration_s * rate + 1e-9));
            for (int i = 0; i < count; ++i) {
                const double true_t = config.start_s + static_cast<double>(i) / rate;
                table.cell(modality);
                table.cell(local_stamp(spec, true_t, jitter_rng));
                table.cell(true_t);
                table.end_row();
            }
        };
        emit("channel", config.channel_rate_hz);
        emit("lidar", config.lidar_rate_hz);
        emit("image", config.image_rate_hz);
        emit("geolocation", config.geolocation_rate_hz);
        table.close();
    }

    // --- geolocation stream ---------------------------------------------------
    if (config.geolocation_rate_hz > 0) {
        Rng geo_rng = Rng::substream(seed, "geolocation-noise");
        Rng jitter_rng = Rng::substream(seed, "clock-jitter-geo-stream");
        const ClockSpec spec = clock_of("geolocation");
        io::TableWriter table((dir / "geolocation.tsv").string());
        table.comment("units", "local_t s; x y z m");
        table.comment("session", manifest.id);
        table.columns({"local_t", "x", "y", "z"});
        const int count =
            static_cast<int>(std::floor(config.duration_s * config.geolocation_rate_hz + 1e-9));
        for (int i = 0; i < count; ++i) {
            const double true_t =
                config.start_s + static_cast<double>(i) / config.geolocation_rate_hz;
            const Pose pose = scene::trajectory_pose(config.scene, true_t);
            table.cell(local_stamp(spec, true_t, jitter_rng));
            table.cell(pose.p.x() + config.geolocation_noise_m * geo_rng.gaussian());
            table.cell(pose.p.y() + config.geolocation_noise_m * geo_rng.gaussian());
            table.cell(pose.p.z() + config.geolocation_noise_m * geo_rng.gaussian());
            table.end_row();
        }
        table.close();
        manifest.streams.push_back({"geolocation", "geolocation.tsv",
                                    static_cast<std::uint64_t>(count), config.geolocation_rate_hz});
    }

    // --- image stamps ----------------------------------------------------------
    if (config.image_rate_hz > 0) {
        Rng jitter_rng = Rng::substream(seed, "clock-jitter-image-stream");
        const ClockSpec spec = clock_of("image");
        io::TableWriter table((dir / "image_stamps.tsv").string());
        table.comment("units", "local_t s");
        table.comment("session", manifest.id);
        table.columns({"local_t", "frame_index"});
        const int count = static_cast<int>(std::floor(config.duration_s * config.image_rate_hz + 1e-9));
        for (int i = 0; i < count; ++i) {
            const double true_t = config.start_s + static_cast<double>(i) / config.image_rate_hz;
            table.cell(local_stamp(spec, true_t, jitter_rng));
            table.cell(static_cast<long long>(i));
            table.end_row();
        }
        table.close();
        manifest.streams.push_back(
            {"image", "image_stamps.tsv", static_cast<std::uint64_t>(count), config.image_rate_hz});
    }

    // --- manifest ---------------------------------------------------------------
    json mj;
    mj["format"] = {{"name", "msense-session"}, {"version", manifest.format_version}};
    mj["session"] = {{"id", manifest.id},
                     {"created", manifest.created},
                     {"seed", seed},
                     {"start_s", config.start_s},
                     {"duration_s", config.duration_s}};
    mj["config"] = config_json;
    json clock_truth;
    for (const auto& [name, spec] : manifest.clock_truth) {
        clock_truth[name] = {{"offset_s", spec.offset_s}, {"drift", spec.drift}, {"jitter_s", spec.jitter_s}};
    }
    mj["clock_truth"] = clock_truth;
    json streams = json::array();
    for (const auto& s : manifest.streams) {
        streams.push_back(
            {{"modality", s.modality}, {"file", s.file}, {"count", s.count}, {"rate_hz", s.rate_hz}});
    }
    mj["streams"] = streams;

    // Atomic publish: write-temp-then-rename.
    const fs::path tmp = dir / "manifest.json.tmp";
    {
        std::ofstream out(tmp);
        out << mj.dump(2) << "\n";
    }
    fs::rename(tmp, dir / "manifest.json");
    return manifest;
}

// ---------------------------------------------------------------------------
// Reading and validation

SessionManifest read_session(const fs::path& dir) {
    const fs::path file = dir / "manifest.json";
    std::ifstream in(file);
    if (!in) throw ValidationError("no manifest at " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("manifest parse error: " + std::string(e.what()));
    }
    SessionManifest m;
    if (!j.contains("format") || j.at("format").value("name", "") != "msense-session") {
        throw ValidationError(file.string() + ": not an msense session manifest");
    }
    m.format_version = j.at("format").value("version", 0);
    if (m.format_version != 1) {
        throw ValidationError(file.string() + ": unsupported manifest version " +
                              std::to_string(m.format_version));
    }
    m.id = j.at("session").value("id", "");
    m.created = j.at("session").value("created", "");
    m.seed = j.at("session").value("seed", 0ULL);
    m.config = config_from_json(j.at("config"));
    if (j.contains("clock_truth")) {
        for (const auto& [name, v] : j.at("clock_truth").items()) {
            ClockSpec spec;
            spec.offset_s = v.value("offset_s", 0.0);
            spec.drift = v.value("drift", 0.0);
            spec.jitter_s = v.value("jitter_s", 0.0);
            m.clock_truth[name] = spec;
        }
    }
    for (const auto& s : j.at("streams")) {
        m.streams.push_back({s.at("modality").get<std::string>(), s.at("file").get<std::string>(),
                             s.at("count").get<std::uint64_t>(), s.at("rate_hz").get<double>()});
    }
    return m;
}

namespace {

std::size_t count_table_rows(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ValidationError("missing stream file: " + file.string());
    std::size_t rows = 0;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true; // column header
            continue;
        }
        ++rows;
    }
    return rows;
}

} // namespace

SessionManifest validate_session(const fs::path& dir) {
    SessionManifest m = read_session(dir);
    {
        const auto errors = m.config.validate();
        if (!errors.empty()) {
            std::string msg = "manifest config invalid:";
            for (const auto& e : errors) msg += "\n  - " + e;
            throw ValidationError(msg);
        }
    }
    for (const auto& stream : m.streams) {
        const fs::path file = dir / stream.file;
        if (!fs::exists(file)) {
            throw ValidationError("stream file missing: " + file.string());
        }
        if (stream.modality == "channel" || stream.modality == "b2b") {
            const auto snaps = load_snapshots(file); // throws with byte offsets on truncation
            if (snaps.size() != stream.count) {
                throw ValidationError(file.string() + ": expected " + std::to_string(stream.count) +
                                      " records, found " + std::to_string(snaps.size()));
            }
            for (std::size_t i = 1; i < snaps.size(); ++i) {
                if (!(snaps[i].timestamp > snaps[i - 1].timestamp)) {
                    throw ValidationError(file.string() + ": timestamps not strictly increasing at record " +
                                          std::to_string(i));
                }
            }
        } else if (stream.modality == "lidar") {
            const auto frames = load_lidar_frames(file, stream.count);
            if (frames.size() != stream.count) {
                throw ValidationError(file.string() + ": expected " + std::to_string(stream.count) +
                                      " frames, found " + std::to_string(frames.size()));
            }
        } else {
            const auto rows = count_table_rows(file);
            if (rows != stream.count) {
                throw ValidationError(file.string() + ": expected " + std::to_string(stream.count) +
                                      " rows, found " + std::to_string(rows));
            }
        }
    }
    return m;
}

std::vector<sounder::Snapshot> load_b2b(const SessionManifest& manifest, const fs::path& dir) {
    for (const auto& s : manifest.streams) {
        if (s.modality == "b2b") return load_snapshots(dir / s.file);
    }
    throw DependencyError("session has no b2b reference stream");
}

} // namespace msense::session
