// Batch front end: stabilize / retarget / metrics / check / calibrate.

#include <CLI11.hpp>

#include <atomic>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include "egokit/egokit.hpp"

namespace {

using egokit::pipeline::EpisodeManifest;
using egokit::pipeline::PipelineConfig;

struct GlobalArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;
};

PipelineConfig resolve_config(const GlobalArgs& g) {
    PipelineConfig cfg;
    if (!g.config_path.empty()) cfg = egokit::pipeline::load_config(g.config_path);
    if (!g.out_dir.empty()) cfg.output_dir = g.out_dir;
    if (g.seed_set) cfg.seed = g.seed;
    if (g.jobs > 0) cfg.jobs = g.jobs;
    return cfg;
}

int run_stabilize(const std::vector<std::string>& manifest_paths, const PipelineConfig& cfg) {
    std::vector<EpisodeManifest> manifests;
    for (const std::string& path : manifest_paths) {
        try {
            manifests.push_back(egokit::pipeline::load_manifest(path));
        } catch (const egokit::Error& e) {
            return egokit::pipeline::emit_error(std::cout, 2, "invalid_manifest", e.what());
        }
    }

    const std::size_t workers = std::max<std::size_t>(
        1, std::min<std::size_t>(manifests.size(),
                                 cfg.jobs > 0 ? std::size_t(cfg.jobs)
                                              : std::thread::hardware_concurrency()));
    std::vector<int> codes(manifests.size(), 0);
    std::vector<std::ostringstream> logs(manifests.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < manifests.size(); i = next.fetch_add(1)) {
            codes[i] = egokit::pipeline::cmd_stabilize(manifests[i], cfg, logs[i]);
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    int exit_code = 0;
    for (std::size_t i = 0; i < manifests.size(); ++i) {
        std::cout << logs[i].str();
        if (codes[i] != 0 && exit_code == 0) exit_code = codes[i];
        std::cerr << "episode " << manifests[i].episode_id << ": "
                  << (codes[i] == 0 ? "ok" : "failed") << "\n";
    }
    return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"egocentric demonstration toolkit"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "pipeline config JSON");
    app.add_option("--out", g.out_dir, "output directory (overrides config)");
    auto* seed_opt = app.add_option("--seed", g.seed, "master RNG seed (overrides config)");
    app.add_option("--jobs", g.jobs, "parallel episode workers (default: hardware)");

    auto* stab = app.add_subcommand("stabilize", "stabilize episodes from manifests");
    std::vector<std::string> manifest_paths;
    stab->add_option("--manifest", manifest_paths, "episode manifest JSON (repeatable)")
        ->required();

    auto* ret = app.add_subcommand("retarget", "hand keypoints -> joint trajectory CSV");
    std::string keypoints_path, chain_path, calibration_path, episode_id = "episode";
    double fps = 30.0;
    ret->add_option("--keypoints", keypoints_path, "keypoints JSONL")->required();
    ret->add_option("--chain", chain_path, "kinematic chain spec JSON")->required();
    ret->add_option("--calibration", calibration_path, "calibration pose JSON")->required();
    ret->add_option("--episode-id", episode_id, "output subdirectory name");
    ret->add_option("--fps", fps, "frame rate when timestamps are absent");

    auto* met = app.add_subcommand("metrics", "before/after stability report");
    std::string before_dir, after_dir, report_path = "report.json";
    met->add_option("--before", before_dir, "directory of original episodes")->required();
    met->add_option("--after", after_dir, "directory of stabilized episodes")->required();
    met->add_option("--report", report_path, "output report JSON path");

    auto* chk = app.add_subcommand("check", "run the embedded invariant suite");
    bool inject_bad_schedule = false;
    chk->add_flag("--inject-bad-schedule", inject_bad_schedule,
                  "corrupt a schedule to exercise the failure path");

    auto* cal = app.add_subcommand("calibrate", "fit (R_HR, t_HR) from paired points");
    std::string pairs_path, cal_out = "calibration.json";
    cal->add_option("--pairs", pairs_path, "CSV of hx,hy,hz,rx,ry,rz")->required();
    cal->add_option("--out-file", cal_out, "calibration JSON to write");

    CLI11_PARSE(app, argc, argv);
    g.seed_set = seed_opt->count() > 0;

    PipelineConfig cfg;
    try {
        cfg = resolve_config(g);
    } catch (const egokit::Error& e) {
        return egokit::pipeline::emit_error(std::cout, 2, "invalid_config", e.what());
    }

    if (*stab) return run_stabilize(manifest_paths, cfg);
    if (*ret) {
        return egokit::pipeline::cmd_retarget(keypoints_path, chain_path, calibration_path, cfg,
                                              episode_id, fps);
    }
    if (*met) return egokit::pipeline::cmd_metrics(before_dir, after_dir, cfg, report_path);
    if (*chk) return egokit::pipeline::cmd_check(inject_bad_schedule);
    if (*cal) return egokit::pipeline::cmd_calibrate(pairs_path, cal_out);
    return 0;
}
