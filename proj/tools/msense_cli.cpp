// SPDX-License-Identifier: Apache-2.0
//
// msense — synthetic multi-band channel sounding and multi-modal sensing
// sessions: simulate, validate, calibrate, process, destagger, fuse, budget,
// report.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "msense/core/errors.hpp"
#include "msense/session.hpp"

namespace fs = std::filesystem;
using namespace msense;

namespace {

// Exit codes: 0 success, 1 validation, 2 dependency, 3 numerical failure.
int guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const DependencyError& e) {
        std::cerr << "dependency error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

session::SessionConfig resolve_config(const std::string& config_path, const std::string& preset) {
    if (!config_path.empty()) return session::load_config(config_path);
    if (!preset.empty()) return session::preset(preset);
    throw ValidationError("provide --config FILE or --preset NAME");
}

void run_stages(const std::string& session_dir, const std::vector<std::string>& stages,
                const std::string& out, bool force) {
    session::PipelineOptions opts;
    opts.stages = stages;
    if (!out.empty()) opts.out_dir = out;
    opts.force = force;
    const auto results = session::run_pipeline(session_dir, opts);
    for (const auto& r : results) {
        std::cout << r.name << ": " << (r.skipped ? "up to date" : "done");
        if (!r.skipped && !r.outputs.empty()) {
            std::cout << " (";
            for (std::size_t i = 0; i < r.outputs.size(); ++i) {
                std::cout << (i ? ", " : "") << r.outputs[i];
            }
            std::cout << ")";
        }
        std::cout << "\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic channel-sounding and multi-modal sensing sessions"};
    app.require_subcommand(1);

    std::string config_path, preset_name, session_dir, out_dir, stage;
    std::uint64_t seed = 1;
    bool force = false;
    double budget_reference = -1.0;

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic session");
    simulate->add_option("--config", config_path, "session config JSON");
    simulate->add_option("--preset", preset_name, "built-in preset (v2i, freespace, static)");
    simulate->add_option("--seed", seed, "session seed");
    simulate->add_option("--out", out_dir, "output session directory")->required();

    auto* validate = app.add_subcommand("validate", "validate a session directory");
    validate->add_option("--session", session_dir, "session directory")->required();

    auto* calibrate = app.add_subcommand("calibrate", "extract system response and phase offsets");
    calibrate->add_option("--session", session_dir, "session directory")->required();
    calibrate->add_option("--out", out_dir, "report directory (default <session>/reports)");
    std::string import_path;
    calibrate->add_option("--import", import_path,
                          "reuse a system_response.bin from another session");
    calibrate->add_flag("--force", force, "re-run even if up to date");

    auto* process = app.add_subcommand("process", "run estimation stages");
    process->add_option("--session", session_dir, "session directory")->required();
    process->add_option("--stage", stage, "pdp|pl|sage|cluster (default: all)")
        ->check(CLI::IsMember({"pdp", "pl", "sage", "cluster", ""}));
    process->add_option("--out", out_dir, "report directory");
    process->add_flag("--force", force, "re-run even if up to date");

    auto* destagger = app.add_subcommand("destagger", "destagger the LiDAR stream");
    destagger->add_option("--session", session_dir, "session directory")->required();
    destagger->add_option("--out", out_dir, "report directory");
    destagger->add_flag("--force", force, "re-run even if up to date");

    auto* fuse = app.add_subcommand("fuse", "timeline + overlay + path association");
    fuse->add_option("--session", session_dir, "session directory")->required();
    fuse->add_option("--out", out_dir, "report directory");
    fuse->add_flag("--force", force, "re-run even if up to date");

    auto* budget = app.add_subcommand("budget", "link budget report");
    budget->add_option("--config", config_path, "session config JSON");
    budget->add_option("--preset", preset_name, "built-in preset");
    budget->add_option("--reference", budget_reference, "reference max PL to flag against (dB)");
    budget->add_option("--out", out_dir, "output file (default stdout)");

    auto* report = app.add_subcommand("report", "aggregate the report bundle");
    report->add_option("--session", session_dir, "session directory")->required();
    report->add_option("--out", out_dir, "report directory");
    report->add_flag("--force", force, "re-run even if up to date");

    CLI11_PARSE(app, argc, argv);

    if (simulate->parsed()) {
        return guarded([&] {
            const auto config = resolve_config(config_path, preset_name);
            const auto manifest = session::generate_session(config, seed, out_dir);
            std::cout << "session " << manifest.id << " written to " << out_dir << "\n";
            for (const auto& s : manifest.streams) {
                std::cout << "  " << s.modality << ": " << s.count << " records (" << s.file
                          << ")\n";
            }
        });
    }
    if (validate->parsed()) {
        return guarded([&] {
            const auto manifest = session::validate_session(session_dir);
            std::cout << "session " << manifest.id << " validates clean ("
                      << manifest.streams.size() << " streams)\n";
        });
    }
    if (calibrate->parsed()) {
        return guarded([&] {
            if (!import_path.empty()) {
                const auto sys = calib::load_system_response(import_path);
                const fs::path dest =
                    (out_dir.empty() ? fs::path(session_dir) / "reports" : fs::path(out_dir));
                fs::create_directories(dest);
                calib::save_system_response(sys, (dest / "system_response.bin").string());
                std::cout << "imported system response from " << import_path << "\n";
                return;
            }
            run_stages(session_dir, {"calibrate"}, out_dir, force);
        });
    }
    if (process->parsed()) {
        return guarded([&] {
            std::vector<std::string> stages;
            if (stage.empty()) {
                stages = {"pdp", "pl", "sage", "cluster"};
            } else {
                stages = {stage};
            }
            run_stages(session_dir, stages, out_dir, force);
        });
    }
    if (destagger->parsed()) {
        return guarded([&] { run_stages(session_dir, {"destagger"}, out_dir, force); });
    }
    if (fuse->parsed()) {
        return guarded([&] { run_stages(session_dir, {"fuse"}, out_dir, force); });
    }
    if (budget->parsed()) {
        return guarded([&] {
            const auto config = resolve_config(config_path, preset_name);
            std::optional<double> reference = config.budget_reference_db;
            if (budget_reference >= 0) reference = budget_reference;
            const auto rep = sounder::max_measurable_path_loss(config.budget, reference);
            if (out_dir.empty()) {
                std::cout << rep.to_text();
            } else {
                std::ofstream out(out_dir);
                out << rep.to_text();
            }
        });
    }
    if (report->parsed()) {
        return guarded([&] { run_stages(session_dir, {}, out_dir, force); });
    }
    return 0;
}
