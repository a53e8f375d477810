// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "msense/core/binio.hpp"
#include "msense/core/constants.hpp"
#include "msense/core/errors.hpp"
#include "msense/core/rng.hpp"
#include "msense/core/table.hpp"
#include "msense/session.hpp"

namespace msense::session {

namespace fs = std::filesystem;

namespace {

struct StageContext {
    fs::path session_dir;
    fs::path out_dir;
    SessionManifest manifest;
    std::string config_hash;
    bool force = false;

    fs::path record_path(const std::string& stage) const {
        return out_dir / (stage + ".stage.json");
    }

    /// Upstream hash chain: config hash + the hashes of prerequisite stages.
    std::string stage_hash(const std::string& stage,
                           const std::vector<std::string>& deps) const {
        std::string acc = config_hash + ":" + stage;
        for (const auto& d : deps) {
            std::ifstream in(record_path(d));
            if (in) {
                json j;
                in >> j;
                acc += ":" + j.value("hash", std::string());
            }
        }
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(Rng::hash(acc)));
        return buf;
    }

    bool up_to_date(const std::string& stage, const std::string& hash) const {
        if (force) return false;
        std::ifstream in(record_path(stage));
        if (!in) return false;
        json j;
        try {
            in >> j;
        } catch (...) {
            return false;
        }
        if (j.value("hash", std::string()) != hash) return false;
        for (const auto& f : j.value("outputs", std::vector<std::string>())) {
            if (!fs::exists(out_dir / f)) return false;
        }
        return true;
    }

    void write_record(const std::string& stage, const std::string& hash,
                      const std::vector<std::string>& outputs) const {
        json j;
        j["stage"] = stage;
        j["hash"] = hash;
        j["seed"] = manifest.seed;
        j["session"] = manifest.id;
        j["outputs"] = outputs;
        std::ofstream out(record_path(stage));
        out << j.dump(2) << "\n";
    }

    void require(const std::string& artifact_stage, const std::string& requested_by) const {
        if (!fs::exists(record_path(artifact_stage))) {
            throw DependencyError("stage '" + requested_by + "' requires '" + artifact_stage +
                                  "' to run first (missing " +
                                  record_path(artifact_stage).string() + ")");
        }
    }

    void provenance(io::TableWriter& table) const {
        table.comment("session", manifest.id);
        table.comment("seed", std::to_string(manifest.seed));
        table.comment("config_hash", config_hash);
    }
};

int auto_stride(const StageContext& ctx, std::size_t count) {
    int stride = ctx.manifest.config.processing.analysis_stride;
    if (stride <= 0) {
        stride = std::max<int>(1, static_cast<int>(count / 200));
    }
    return stride;
}

/// Calibrated CIR over all snapshots (system response + phase offsets).
calib::CIRMatrix build_cir(const StageContext& ctx) {
    const auto sys = calib::load_system_response((ctx.out_dir / "system_response.bin").string());
    const auto offsets = calib::load_phase_offsets((ctx.out_dir / "phase_offsets.bin").string());
    const auto snaps = load_snapshots(ctx.session_dir / "snapshots.bin");
    calib::CIRMatrix cir;
    for (const auto& s : snaps) {
        calib::CirEntry entry = calib::apply_calibration(s, sys);
        calib::apply_phase_offsets(entry, offsets);
        cir.append(std::move(entry));
    }
    return cir;
}

std::vector<double> snapshot_distances(const StageContext& ctx) {
    const auto poses = load_trajectory(ctx.session_dir / "trajectory.tsv");
    std::vector<double> d;
    d.reserve(poses.size());
    for (const auto& p : poses) d.push_back((p.p - ctx.manifest.config.scene.tx_pose.p).norm());
    return d;
}

// ---------------------------------------------------------------------------
// Stages

StageResult stage_budget(const StageContext& ctx) {
    StageResult res;
    res.name = "budget";
    const auto hash = ctx.stage_hash("budget", {});
    if (ctx.up_to_date("budget", hash)) {
        res.skipped = true;
        return res;
    }
    const auto report = sounder::max_measurable_path_loss(ctx.manifest.config.budget,
                                                          ctx.manifest.config.budget_reference_db);
    std::ofstream out(ctx.out_dir / "budget.txt");
    out << "# session: " << ctx.manifest.id << "\n# units: dB ledger\n" << report.to_text();
    out.close();
    res.outputs = {"budget.txt"};
    ctx.write_record("budget", hash, res.outputs);
    return res;
}

StageResult stage_calibrate(const StageContext& ctx) {
    StageResult res;
    res.name = "calibrate";
    const auto hash = ctx.stage_hash("calibrate", {});
    if (ctx.up_to_date("calibrate", hash)) {
        res.skipped = true;
        return res;
    }
    const auto b2b = load_b2b(ctx.manifest, ctx.session_dir);
    if (b2b.empty()) throw DependencyError("calibrate: empty b2b stream");

    // Average the captures (noise suppression), then extract.
    sounder::Snapshot mean = b2b.front();
    for (std::size_t i = 1; i < b2b.size(); ++i) mean.response += b2b[i].response;
    mean.response /= static_cast<double>(b2b.size());
    const auto sys = calib::b2b_extract(mean, ctx.manifest.config.b2b.attenuation_db,
                                        ctx.manifest.config.b2b.cable_delay_ns * 1e-9);
    calib::save_system_response(sys, (ctx.out_dir / "system_response.bin").string());

    const auto offsets = calib::estimate_phase_offsets(b2b);
    calib::save_phase_offsets(offsets, (ctx.out_dir / "phase_offsets.bin").string());

    io::TableWriter table((ctx.out_dir / "phase_offsets.tsv").string());
    ctx.provenance(table);
    table.comment("units", "offset deg; drift deg/s");
    table.columns({"channel", "offset_deg", "drift_deg_per_s"});
    for (Eigen::Index i = 0; i < offsets.offset_rad.size(); ++i) {
        table.cell(static_cast<long long>(i));
        table.cell(rad2deg(offsets.offset_rad(i)));
        table.cell(rad2deg(offsets.drift_rad_per_s(i)));
        table.end_row();
    }
    table.close();
    res.outputs = {"system_response.bin", "phase_offsets.bin", "phase_offsets.tsv"};
    ctx.write_record("calibrate", hash, res.outputs);
    return res;
}

StageResult stage_pdp(const StageContext& ctx) {
    StageResult res;
    res.name = "pdp";
    ctx.require("calibrate", "pdp");
    const auto hash = ctx.stage_hash("pdp", {"calibrate"});
    if (ctx.up_to_date("pdp", hash)) {
        res.skipped = true;
        return res;
    }
    const auto cir = build_cir(ctx);
    const int stride = auto_stride(ctx, cir.size());

    io::TableWriter table((ctx.out_dir / "pdp_waterfall.tsv").string());
    ctx.provenance(table);
    table.comment("units", "t s; delay ns; power dB");
    table.comment("layout", "one row per analyzed snapshot, one column per delay bin");
    std::vector<std::string> cols{"t"};
    {
        const estim::PDP first = estim::pdp(cir.entry(0).h.row(0).transpose(), cir.bin_spacing_hz());
        for (const double tau : first.delay_s) {
            cols.push_back(io::format_g(tau * 1e9));
        }
    }
    table.columns(cols);
    for (std::size_t i = 0; i < cir.size(); i += static_cast<std::size_t>(stride)) {
        // Element-averaged PDP.
        const auto& h = cir.entry(i).h;
        Eigen::VectorXd power = Eigen::VectorXd::Zero(h.cols());
        for (Eigen::Index m = 0; m < h.rows(); ++m) {
            const estim::PDP profile =
                estim::pdp(h.row(m).transpose(), cir.bin_spacing_hz(), cir.timestamps()[i]);
            power += profile.power_linear;
        }
        power /= static_cast<double>(h.rows());
        table.cell(cir.timestamps()[i]);
        for (Eigen::Index b = 0; b < power.size(); ++b) {
            table.cell(power(b) > 0 ? 10.0 * std::log10(power(b)) : -400.0);
        }
        table.end_row();
    }
    table.close();
    res.outputs = {"pdp_waterfall.tsv"};
    ctx.write_record("pdp", hash, res.outputs);
    return res;
}

StageResult stage_pl(const StageContext& ctx) {
    StageResult res;
    res.name = "pl";
    ctx.require("calibrate", "pl");
    const auto hash = ctx.stage_hash("pl", {"calibrate"});
    if (ctx.up_to_date("pl", hash)) {
        res.skipped = true;
        return res;
    }
    const auto cir = build_cir(ctx);
    const auto distances = snapshot_distances(ctx);
    const int window = estim::window_from_wavelengths(
        cir.wavelength_m(), distances, ctx.manifest.config.processing.pl_window_wavelengths);
    const auto series = estim::path_loss_series(cir, distances, window);
    const auto fit = estim::fit_log_distance(series);

    io::TableWriter table((ctx.out_dir / "pl_series.tsv").string());
    ctx.provenance(table);
    table.comment("units", "distance m; pl dB");
    table.comment("window_snapshots", std::to_string(window));
    table.columns({"distance_m", "pl_db"});
    for (std::size_t i = 0; i < series.pl_db.size(); ++i) {
        table.cell(series.distance_m[i]);
        table.cell(series.pl_db[i]);
        table.end_row();
    }
    table.close();

    std::ofstream fit_out(ctx.out_dir / "pl_fit.txt");
    fit_out << "# session: " << ctx.manifest.id << "\n";
    fit_out << "ple\t" << io::format_g(fit.ple) << "\n";
    fit_out << "intercept_db\t" << io::format_g(fit.intercept_db) << "\n";
    fit_out << "sigma_db\t" << io::format_g(fit.sigma_db) << "\n";
    fit_out << "d0_m\t" << io::format_g(fit.d0_m) << "\n";
    fit_out << "windows\t" << series.pl_db.size() << "\n";
    fit_out.close();
    res.outputs = {"pl_series.tsv", "pl_fit.txt"};
    ctx.write_record("pl", hash, res.outputs);
    return res;
}

StageResult stage_sage(const StageContext& ctx) {
    StageResult res;
    res.name = "sage";
    ctx.require("calibrate", "sage");
    const auto hash = ctx.stage_hash("sage", {"calibrate"});
    if (ctx.up_to_date("sage", hash)) {
        res.skipped = true;
        return res;
    }
    const auto cir = build_cir(ctx);
    const auto array =
        ctx.manifest.config.array.build(ctx.manifest.config.scene.carrier_frequency_hz);
    const int stride = auto_stride(ctx, cir.size());

    io::TableWriter table((ctx.out_dir / "sage_paths.tsv").string());
    ctx.provenance(table);
    table.comment("units", "t s; delay ns; azimuth/elevation deg; power dB rel strongest");
    table.columns({"t", "path", "delay_ns", "azimuth_deg", "elevation_deg", "power_db", "converged"});
    for (std::size_t i = 0; i < cir.size(); i += static_cast<std::size_t>(stride)) {
        const auto est = estim::sage_estimate(cir.entry(i), array, cir.carrier_hz(),
                                              ctx.manifest.config.processing.sage);
        for (std::size_t p = 0; p < est.paths.size(); ++p) {
            const auto& path = est.paths[p];
            table.cell(cir.timestamps()[i]);
            table.cell(static_cast<long long>(p));
            table.cell(path.delay_s * 1e9);
            table.cell(rad2deg(path.azimuth_rad));
            table.cell(rad2deg(path.elevation_rad));
            table.cell(path.power_db_rel);
            table.cell(std::string(est.converged ? "yes" : "no"));
            table.end_row();
        }
    }
    table.close();
    res.outputs = {"sage_paths.tsv"};
    ctx.write_record("sage", hash, res.outputs);
    return res;
}

StageResult stage_cluster(const StageContext& ctx) {
    StageResult res;
    res.name = "cluster";
    ctx.require("calibrate", "cluster");
    const auto hash = ctx.stage_hash("cluster", {"calibrate"});
    if (ctx.up_to_date("cluster", hash)) {
        res.skipped = true;
        return res;
    }
    const auto cir = build_cir(ctx);
    const int stride = auto_stride(ctx, cir.size());

    io::TableWriter table((ctx.out_dir / "clusters.tsv").string());
    ctx.provenance(table);
    table.comment("units", "t s; centroid delay ns; power dB");
    table.columns({"t", "cluster", "centroid_delay_ns", "power_db", "members"});
    for (std::size_t i = 0; i < cir.size(); i += static_cast<std::size_t>(stride)) {
        Eigen::VectorXd power = Eigen::VectorXd::Zero(cir.entry(i).h.cols());
        estim::PDP profile;
        for (Eigen::Index m = 0; m < cir.entry(i).h.rows(); ++m) {
            profile = estim::pdp(cir.entry(i).h.row(m).transpose(), cir.bin_spacing_hz(),
                                 cir.timestamps()[i]);
            power += profile.power_linear;
        }
        profile.power_linear = power / static_cast<double>(cir.entry(i).h.rows());
        const auto clusters = estim::cluster_pdp(profile, ctx.manifest.config.processing.cluster);
        for (const auto& cl : clusters.clusters) {
            table.cell(cir.timestamps()[i]);
            table.cell(static_cast<long long>(cl.id));
            table.cell(cl.centroid_delay_s * 1e9);
            table.cell(cl.centroid_power_db);
            table.cell(static_cast<long long>(cl.member_count));
            table.end_row();
        }
    }
    table.close();
    res.outputs = {"clusters.tsv"};
    ctx.write_record("cluster", hash, res.outputs);
    return res;
}

StageResult stage_destagger(const StageContext& ctx) {
    StageResult res;
    res.name = "destagger";
    const auto hash = ctx.stage_hash("destagger", {});
    if (ctx.up_to_date("destagger", hash)) {
        res.skipped = true;
        return res;
    }
    const StreamInfo* lidar_stream = nullptr;
    for (const auto& s : ctx.manifest.streams) {
        if (s.modality == "lidar") lidar_stream = &s;
    }
    if (!lidar_stream) {
        throw DependencyError("destagger: session has no lidar stream");
    }
    const auto frames = load_lidar_frames(ctx.session_dir / lidar_stream->file, lidar_stream->count);
    std::vector<lidar::RangeImage> corrected;
    corrected.reserve(frames.size());
    for (const auto& f : frames) {
        corrected.push_back(lidar::destagger(f, ctx.manifest.config.lidar_cfg));
    }
    // Whole-stream output plus a render pair of the first frame.
    {
        io::Writer w((ctx.out_dir / "lidar_destaggered.bin").string());
        w.header("MSLD", 1);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(corrected.front().rows));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(corrected.front().cols));
        w.put<std::uint64_t>(corrected.size());
        w.put<std::uint8_t>(0);
        for (const auto& f : corrected) {
            w.put<double>(f.t0);
            w.put_array(f.ranges.data(), f.ranges.size());
        }
        w.close();
    }
    lidar::write_pgm_render(frames.front(), (ctx.out_dir / "range_staggered.pgm").string());
    lidar::write_pgm_render(corrected.front(), (ctx.out_dir / "range_destaggered.pgm").string());
    res.outputs = {"lidar_destaggered.bin", "range_staggered.pgm", "range_destaggered.pgm"};
    ctx.write_record("destagger", hash, res.outputs);
    return res;
}

StageResult stage_fuse(const StageContext& ctx) {
    StageResult res;
    res.name = "fuse";
    ctx.require("sage", "fuse");
    ctx.require("destagger", "fuse");
    const auto hash = ctx.stage_hash("fuse", {"sage", "destagger"});
    if (ctx.up_to_date("fuse", hash)) {
        res.skipped = true;
        return res;
    }
    const auto& config = ctx.manifest.config;

    // Clock models fitted from the logged timestamp pairs.
    std::map<std::string, std::vector<std::pair<double, double>>> pairs;
    {
        std::ifstream in(ctx.session_dir / "timestamps.tsv");
        if (!in) throw DependencyError("fuse: missing timestamps.tsv");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#' || line.rfind("modality", 0) == 0) continue;
            char modality[64];
            double local = 0, ref = 0;
            if (std::sscanf(line.c_str(), "%63s\t%lf\t%lf", modality, &local, &ref) == 3) {
                pairs[modality].emplace_back(local, ref);
            }
        }
    }
    std::map<std::string, sync::ClockModel> clocks;
    for (const auto& [name, p] : pairs) {
        if (p.size() >= 2) clocks[name] = sync::fit_clock_model(p);
    }

    // Fuse instant: configured or session midpoint.
    const double fuse_t = config.processing.fuse_time_s >= 0
                              ? config.processing.fuse_time_s
                              : config.start_s + config.duration_s / 2.0;

    // Nearest destaggered frame / snapshot, via the aligned timeline.
    const auto frames = load_lidar_frames(ctx.out_dir / "lidar_destaggered.bin", 0);
    const auto cir = build_cir(ctx);
    std::size_t frame_idx = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (std::abs(frames[i].t0 - fuse_t) < std::abs(frames[frame_idx].t0 - fuse_t)) frame_idx = i;
    }
    std::size_t snap_idx = 0;
    for (std::size_t i = 0; i < cir.size(); ++i) {
        if (std::abs(cir.timestamps()[i] - fuse_t) < std::abs(cir.timestamps()[snap_idx] - fuse_t)) {
            snap_idx = i;
        }
    }

    // Timeline export across all streams on the channel grid.
    {
        std::vector<sync::SampledStream> streams;
        for (const auto& [name, model] : clocks) {
            sync::SampledStream s;
            s.name = name;
            s.modality = name == "channel"       ? sync::Modality::Channel
                         : name == "lidar"       ? sync::Modality::Lidar
                         : name == "image"       ? sync::Modality::Image
                         : name == "geolocation" ? sync::Modality::Geolocation
                                                 : sync::Modality::Other;
            s.clock = model;
            for (const auto& [local, ref] : pairs[name]) {
                s.local_t.push_back(local);
                (void)ref;
            }
            for (const auto& stream : ctx.manifest.streams) {
                if (stream.modality == name) s.nominal_rate_hz = stream.rate_hz;
            }
            streams.push_back(std::move(s));
        }
        std::vector<double> grid;
        for (std::size_t i = 0; i < cir.size(); ++i) grid.push_back(cir.timestamps()[i]);
        const auto timeline = sync::align(streams, grid);
        sync::write_timeline_table(timeline, (ctx.out_dir / "timeline.tsv").string(),
                                   {{"session", ctx.manifest.id},
                                    {"seed", std::to_string(ctx.manifest.seed)},
                                    {"config_hash", ctx.config_hash}});
    }

    // Depth overlay from the fused frame.
    const auto cloud = lidar::to_points(frames[frame_idx], config.lidar_cfg);
    const auto depth = fusion::overlay(cloud, config.camera_from_sensor, config.camera);
    {
        io::TableWriter table((ctx.out_dir / "overlay.tsv").string());
        ctx.provenance(table);
        table.comment("units", "pixel; depth m");
        table.comment("frame_t0", io::format_g(frames[frame_idx].t0));
        table.comment("depth_bounds",
                      io::format_g(depth.depth_min) + " " + io::format_g(depth.depth_max));
        table.columns({"u", "v", "depth_m", "point_index"});
        for (const auto& p : depth.points) {
            table.cell(p.u);
            table.cell(p.v);
            table.cell(p.depth);
            table.cell(static_cast<long long>(p.source_index));
            table.end_row();
        }
        table.close();
    }

    // Path-to-object association for the fused snapshot.
    const auto array = config.array.build(config.scene.carrier_frequency_hz);
    const auto est = estim::sage_estimate(cir.entry(snap_idx), array, cir.carrier_hz(),
                                          config.processing.sage);
    const Pose rx_pose = scene::trajectory_pose(config.scene, cir.timestamps()[snap_idx]);
    const auto assoc = fusion::associate_paths_to_objects(est, config.scene, rx_pose, {},
                                                          &config.camera_from_sensor, &config.camera);
    {
        io::TableWriter table((ctx.out_dir / "associations.tsv").string());
        ctx.provenance(table);
        table.comment("units", "delay ns; angles deg; residual m");
        table.comment("snapshot_t", io::format_g(cir.timestamps()[snap_idx]));
        table.columns({"path", "delay_ns", "azimuth_deg", "elevation_deg", "power_db", "target",
                       "delay_length_residual_m", "pixel_u", "pixel_v"});
        for (std::size_t i = 0; i < assoc.size(); ++i) {
            const auto& a = assoc[i];
            const auto& p = est.paths[static_cast<std::size_t>(a.path_index)];
            table.cell(static_cast<long long>(a.path_index));
            table.cell(p.delay_s * 1e9);
            table.cell(rad2deg(p.azimuth_rad));
            table.cell(rad2deg(p.elevation_rad));
            table.cell(p.power_db_rel);
            table.cell(a.kind == fusion::TargetKind::Unassociated ? std::string("unassociated")
                                                                  : a.label);
            table.cell(a.delay_length_residual_m);
            table.cell(a.pixel ? a.pixel->x() : -1.0);
            table.cell(a.pixel ? a.pixel->y() : -1.0);
            table.end_row();
        }
        table.close();
    }
    res.outputs = {"timeline.tsv", "overlay.tsv", "associations.tsv"};
    ctx.write_record("fuse", hash, res.outputs);
    return res;
}

StageResult stage_report(const StageContext& ctx) {
    StageResult res;
    res.name = "report";
    // The report aggregates whatever ran; it needs at least the core chain.
    ctx.require("calibrate", "report");
    ctx.require("pdp", "report");
    ctx.require("pl", "report");
    const auto hash = ctx.stage_hash("report", {"calibrate", "pdp", "pl", "sage", "cluster"});
    if (ctx.up_to_date("report", hash)) {
        res.skipped = true;
        return res;
    }
    std::ofstream out(ctx.out_dir / "report.txt");
    out << "# msense report bundle\n";
    out << "session\t" << ctx.manifest.id << "\n";
    out << "seed\t" << ctx.manifest.seed << "\n";
    out << "config_hash\t" << ctx.config_hash << "\n";
    out << "artifacts:\n";
    for (const auto& name : {"budget.txt", "phase_offsets.tsv", "pdp_waterfall.tsv",
                             "pl_series.tsv", "pl_fit.txt", "sage_paths.tsv", "clusters.tsv",
                             "range_staggered.pgm", "range_destaggered.pgm", "timeline.tsv",
                             "overlay.tsv", "associations.tsv"}) {
        if (fs::exists(ctx.out_dir / name)) out << "  " << name << "\n";
    }
    out.close();
    res.outputs = {"report.txt"};
    ctx.write_record("report", hash, res.outputs);
    return res;
}

} // namespace

std::vector<StageResult> run_pipeline(const fs::path& session_dir, const PipelineOptions& options) {
    StageContext ctx;
    ctx.session_dir = session_dir;
    ctx.manifest = read_session(session_dir);
    ctx.out_dir = options.out_dir.empty() ? session_dir / "reports" : options.out_dir;
    ctx.force = options.force;
    fs::create_directories(ctx.out_dir);
    {
        const json config_json = to_json(ctx.manifest.config);
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(
                          Rng::hash(config_json.dump()) ^ (ctx.manifest.seed * 0x9e3779b97f4a7c15ULL)));
        ctx.config_hash = buf;
    }

    static const std::vector<std::string> kOrder = {"budget", "calibrate", "pdp",  "pl",
                                                    "sage",   "cluster",   "destagger", "fuse",
                                                    "report"};
    std::set<std::string> requested(options.stages.begin(), options.stages.end());
    if (requested.empty()) {
        requested.insert(kOrder.begin(), kOrder.end());
        if (ctx.manifest.config.lidar_rate_hz <= 0) {
            requested.erase("destagger");
            requested.erase("fuse");
        }
    }
    for (const auto& name : requested) {
        if (std::find(kOrder.begin(), kOrder.end(), name) == kOrder.end()) {
            throw ValidationError("unknown pipeline stage '" + name + "'");
        }
    }

    std::vector<StageResult> results;
    for (const auto& name : kOrder) {
        if (!requested.count(name)) continue;
        if (name == "budget") results.push_back(stage_budget(ctx));
        else if (name == "calibrate") results.push_back(stage_calibrate(ctx));
        else if (name == "pdp") results.push_back(stage_pdp(ctx));
        else if (name == "pl") results.push_back(stage_pl(ctx));
        else if (name == "sage") results.push_back(stage_sage(ctx));
        else if (name == "cluster") results.push_back(stage_cluster(ctx));
        else if (name == "destagger") results.push_back(stage_destagger(ctx));
        else if (name == "fuse") results.push_back(stage_fuse(ctx));
        else if (name == "report") results.push_back(stage_report(ctx));
    }
    return results;
}

} // namespace msense::session
