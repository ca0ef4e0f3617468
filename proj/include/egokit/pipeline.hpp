#pragma once

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "egokit/errors.hpp"
#include "egokit/formats.hpp"
#include "egokit/genmath.hpp"
#include "egokit/geometry.hpp"
#include "egokit/image_io.hpp"
#include "egokit/metrics.hpp"
#include "egokit/retarget.hpp"
#include "egokit/stabilizer.hpp"
#include "egokit/vision.hpp"

namespace egokit::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// --- configuration ---

struct GripperConfig {
    double threshold = 0.6;
    int window = 5;
};

struct MetricsConfig {
    double sigma = 3.0;              // low-pass width, decoupled from the stabilizer
    bool h_rmse_normalized = false;  // divide by the image diagonal when true
};

struct PipelineConfig {
    // stabilizer
    double sigma = 7.0;
    stabilizer::RansacParams ransac;  // seed is always overridden by `seed`
    double aspect = 0.0;              // 0 = keep the input aspect ratio
    int fill_max_reach = 6;
    int mask_dilate_kernel = 5;  // export convention: kernel 5, 3 iterations
    int mask_dilate_iters = 3;
    stabilizer::VisionParams vision;
    // retarget
    retarget::IkParams ik;
    int averaged_mcps = 3;
    std::vector<double> q0;  // per-joint warm start; empty = zeros
    GripperConfig gripper;
    // metrics
    MetricsConfig metrics;
    // general
    std::string output_dir = "out";
    std::uint64_t seed = 0x5EED;
    int jobs = 0;  // 0 = available parallelism
};

inline json config_to_json(const PipelineConfig& c) {
    return json{
        {"stabilizer",
         {{"sigma", c.sigma},
          {"ransac",
           {{"threshold", c.ransac.threshold},
            {"confidence", c.ransac.confidence},
            {"max_iters", c.ransac.max_iters}}},
          {"aspect", c.aspect},
          {"fill_max_reach", c.fill_max_reach},
          {"mask_dilation", {{"kernel", c.mask_dilate_kernel}, {"iters", c.mask_dilate_iters}}}}},
        {"vision",
         {{"max_corners", c.vision.max_corners},
          {"min_distance", c.vision.min_distance},
          {"quality", c.vision.quality},
          {"patch", c.vision.patch},
          {"search_radius", c.vision.search_radius}}},
        {"ik",
         {{"w_tilt", formats::vec3_to_json(c.ik.w_tilt)},
          {"lambda", c.ik.lambda},
          {"mu", c.ik.mu},
          {"max_iters", c.ik.max_iters},
          {"pos_tol", c.ik.pos_tol},
          {"rot_tol", c.ik.rot_tol}}},
        {"retarget", {{"averaged_mcps", c.averaged_mcps}, {"q0", c.q0}}},
        {"gripper", {{"threshold", c.gripper.threshold}, {"window", c.gripper.window}}},
        {"metrics",
         {{"sigma", c.metrics.sigma}, {"h_rmse_normalized", c.metrics.h_rmse_normalized}}},
        {"output_dir", c.output_dir},
        {"seed", c.seed},
        {"jobs", c.jobs}};
}

inline PipelineConfig config_from_json(const json& j) {
    PipelineConfig c;
    if (j.contains("stabilizer")) {
        const json& s = j.at("stabilizer");
        if (s.contains("sigma")) c.sigma = s.at("sigma").get<double>();
        if (s.contains("ransac")) {
            const json& r = s.at("ransac");
            if (r.contains("threshold")) c.ransac.threshold = r.at("threshold").get<double>();
            if (r.contains("confidence")) c.ransac.confidence = r.at("confidence").get<double>();
            if (r.contains("max_iters")) c.ransac.max_iters = r.at("max_iters").get<int>();
        }
        if (s.contains("aspect")) c.aspect = s.at("aspect").get<double>();
        if (s.contains("fill_max_reach")) c.fill_max_reach = s.at("fill_max_reach").get<int>();
        if (s.contains("mask_dilation")) {
            c.mask_dilate_kernel = s.at("mask_dilation").at("kernel").get<int>();
            c.mask_dilate_iters = s.at("mask_dilation").at("iters").get<int>();
        }
    }
    if (j.contains("vision")) {
        const json& v = j.at("vision");
        if (v.contains("max_corners")) c.vision.max_corners = v.at("max_corners").get<std::size_t>();
        if (v.contains("min_distance")) c.vision.min_distance = v.at("min_distance").get<double>();
        if (v.contains("quality")) c.vision.quality = v.at("quality").get<double>();
        if (v.contains("patch")) c.vision.patch = v.at("patch").get<int>();
        if (v.contains("search_radius")) c.vision.search_radius = v.at("search_radius").get<int>();
    }
    if (j.contains("ik")) {
        const json& k = j.at("ik");
        if (k.contains("w_tilt")) c.ik.w_tilt = formats::vec3_from_json(k.at("w_tilt"));
        if (k.contains("lambda")) c.ik.lambda = k.at("lambda").get<double>();
        if (k.contains("mu")) c.ik.mu = k.at("mu").get<double>();
        if (k.contains("max_iters")) c.ik.max_iters = k.at("max_iters").get<int>();
        if (k.contains("pos_tol")) c.ik.pos_tol = k.at("pos_tol").get<double>();
        if (k.contains("rot_tol")) c.ik.rot_tol = k.at("rot_tol").get<double>();
    }
    if (j.contains("retarget")) {
        const json& r = j.at("retarget");
        if (r.contains("averaged_mcps")) c.averaged_mcps = r.at("averaged_mcps").get<int>();
        if (r.contains("q0")) c.q0 = r.at("q0").get<std::vector<double>>();
    }
    if (j.contains("gripper")) {
        const json& g = j.at("gripper");
        if (g.contains("threshold")) c.gripper.threshold = g.at("threshold").get<double>();
        if (g.contains("window")) c.gripper.window = g.at("window").get<int>();
    }
    if (j.contains("metrics")) {
        const json& m = j.at("metrics");
        if (m.contains("sigma")) c.metrics.sigma = m.at("sigma").get<double>();
        if (m.contains("h_rmse_normalized")) {
            c.metrics.h_rmse_normalized = m.at("h_rmse_normalized").get<bool>();
        }
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<int>();
    return c;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw IoError(std::string("config parse error: ") + e.what());
    }
    return config_from_json(j);
}

// --- episode manifest ---

struct EpisodeManifest {
    std::string episode_id;
    std::string frames_dir;
    std::string keypoints_path;  // optional
    double fps = 30.0;
    std::string instruction;  // optional, carried through untouched
};

inline EpisodeManifest manifest_from_json(const json& j) {
    EpisodeManifest m;
    m.episode_id = j.at("episode_id").get<std::string>();
    m.frames_dir = j.at("frames_dir").get<std::string>();
    if (j.contains("keypoints_path")) m.keypoints_path = j.at("keypoints_path").get<std::string>();
    if (j.contains("fps")) m.fps = j.at("fps").get<double>();
    if (j.contains("instruction")) m.instruction = j.at("instruction").get<std::string>();
    if (m.fps <= 0.0) throw InvalidInput("manifest fps must be positive");
    if (m.episode_id.empty()) throw InvalidInput("manifest episode_id must be non-empty");
    return m;
}

inline EpisodeManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open manifest: " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw IoError(std::string("manifest parse error: ") + e.what());
    }
    return manifest_from_json(j);
}

inline bool is_image_name(const std::string& name) {
    auto ends = [&name](const char* s) { return vision::has_suffix(name, s); };
    return ends(".pgm") || ends(".PGM") || ends(".png") || ends(".PNG");
}

/// Ordered frame listing with the naming contract enforced: lexicographic
/// order, and every stem must be a shared prefix plus a fixed-width
/// (zero-padded) frame number.
inline std::vector<fs::path> list_frames(const std::string& dir) {
    if (!fs::is_directory(dir)) throw InvalidInput("frames_dir does not exist: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && is_image_name(e.path().filename().string())) {
            files.push_back(e.path());
        }
    }
    if (files.empty()) throw InvalidInput("frames_dir has no frames: " + dir);
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        return a.filename().string() < b.filename().string();
    });

    std::string prefix;
    std::size_t digits = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const std::string stem = files[i].stem().string();
        std::size_t d = 0;
        while (d < stem.size() && std::isdigit(std::uint8_t(stem[stem.size() - 1 - d]))) ++d;
        if (d == 0) throw InvalidInput("frame name lacks a numeric suffix: " + stem);
        const std::string p = stem.substr(0, stem.size() - d);
        if (i == 0) {
            prefix = p;
            digits = d;
        } else if (p != prefix || d != digits) {
            throw InvalidInput("frame names must share a prefix and zero-padded width: " + stem);
        }
    }
    return files;
}

inline std::vector<vision::Frame> load_frames(const std::vector<fs::path>& files) {
    std::vector<vision::Frame> frames;
    frames.reserve(files.size());
    for (const fs::path& p : files) frames.push_back(vision::read_image(p.string()));
    for (const vision::Frame& f : frames) {
        if (f.width != frames[0].width || f.height != frames[0].height) {
            throw InvalidInput("frames differ in dimensions");
        }
    }
    return frames;
}

// --- error reporting ---

// exit codes: 0 ok, 1 failed check, 2 invalid input, 3 stabilization failed,
// 4 I/O failure, 5 degenerate hand
inline int emit_error(std::ostream& os, int code, const std::string& kind,
                      const std::string& message, long frame = -1) {
    json err{{"error", {{"code", code}, {"kind", kind}, {"message", message}}}};
    if (frame >= 0) err["error"]["frame"] = frame;
    os << err.dump() << "\n";
    return code;
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write: " + path.string());
    os << text;
    if (!os) throw IoError("short write: " + path.string());
}

// --- stabilize ---

inline int cmd_stabilize(const EpisodeManifest& m, const PipelineConfig& cfg,
                         std::ostream& out = std::cout) {
    std::vector<fs::path> files;
    std::vector<vision::Frame> frames;
    try {
        files = list_frames(m.frames_dir);
        frames = load_frames(files);
        if (frames.size() < 2) throw InvalidInput("episode needs at least 2 frames");
    } catch (const InvalidInput& e) {
        return emit_error(out, 2, "invalid_manifest", e.what());
    } catch (const Error& e) {
        return emit_error(out, 4, "io_failure", e.what());
    }

    stabilizer::RansacParams rp = cfg.ransac;
    rp.seed = cfg.seed;
    stabilizer::StabilizeResult result;
    try {
        result = stabilizer::stabilize_episode(frames, cfg.vision, rp, cfg.sigma, cfg.aspect,
                                               cfg.fill_max_reach);
    } catch (const StabilizationFailed& e) {
        return emit_error(out, 3, "stabilization_failed", e.what(), long(e.frame_index));
    } catch (const Error& e) {
        return emit_error(out, 3, "stabilization_failed", e.what());
    }

    try {
        const fs::path root = fs::path(cfg.output_dir) / m.episode_id;
        fs::create_directories(root / "frames");
        fs::create_directories(root / "masks");
        for (std::size_t t = 0; t < result.frames.size(); ++t) {
            const std::string name = files[t].filename().string();
            vision::write_image((root / "frames" / name).string(), result.frames[t]);
            const vision::ValidityMask dilated = vision::dilate_invalid(
                result.masks[t], cfg.mask_dilate_kernel, cfg.mask_dilate_iters);
            vision::write_mask_pgm((root / "masks" / (files[t].stem().string() + ".pgm")).string(),
                                   dilated);
        }
        std::ostringstream raw, smoothed, comp;
        geometry::write_homographies(raw, result.path.raw);
        geometry::write_homographies(smoothed, result.path.smoothed);
        geometry::write_homographies(comp, result.path.comp);
        write_text(root / "path_raw.txt", raw.str());
        write_text(root / "path_smoothed.txt", smoothed.str());
        write_text(root / "path_comp.txt", comp.str());

        json meta{{"episode_id", m.episode_id},
                  {"frames", result.frames.size()},
                  {"width", frames[0].width},
                  {"height", frames[0].height},
                  {"fps", m.fps},
                  {"instruction", m.instruction},
                  {"rect",
                   {{"x", result.rect.x},
                    {"y", result.rect.y},
                    {"w", result.rect.w},
                    {"h", result.rect.h}}},
                  {"parameters", config_to_json(cfg)}};
        write_text(root / "metadata.json", meta.dump(2) + "\n");
        write_text(root / "SUCCESS", "ok\n");
    } catch (const Error& e) {
        return emit_error(out, 4, "io_failure", e.what());
    }
    return 0;
}

// --- retarget ---

inline int cmd_retarget(const std::string& keypoints_path, const std::string& chain_path,
                        const std::string& calibration_path, const PipelineConfig& cfg,
                        const std::string& episode_id, double fps = 30.0,
                        std::ostream& out = std::cout) {
    retarget::KinematicChain chain;
    geometry::Pose cal;
    std::vector<formats::KeypointFrame> keypoints;
    try {
        chain = formats::load_chain(chain_path);
        cal = formats::load_calibration(calibration_path);
        keypoints = formats::load_keypoints(keypoints_path, fps);
        if (keypoints.empty()) throw InvalidInput("keypoints file has no frames");
    } catch (const json::exception& e) {
        return emit_error(out, 2, "parse_failure", e.what());
    } catch (const Error& e) {
        return emit_error(out, 2, "parse_failure", e.what());
    }

    const bool has_left =
        std::all_of(keypoints.begin(), keypoints.end(),
                    [](const formats::KeypointFrame& f) { return f.left.has_value(); });
    const bool has_right =
        std::all_of(keypoints.begin(), keypoints.end(),
                    [](const formats::KeypointFrame& f) { return f.right.has_value(); });
    if (!has_left && !has_right) {
        return emit_error(out, 2, "parse_failure",
                          "each arm must be present in every frame or in none");
    }

    const long n_joints = long(chain.dof());
    Eigen::VectorXd q0 = Eigen::VectorXd::Zero(n_joints);
    if (!cfg.q0.empty()) {
        if (long(cfg.q0.size()) != n_joints) {
            return emit_error(out, 2, "parse_failure", "config q0 length != chain dof");
        }
        for (long i = 0; i < n_joints; ++i) q0[i] = cfg.q0[std::size_t(i)];
    }

    struct ArmSolution {
        std::vector<Eigen::VectorXd> q;
        std::vector<retarget::IkResult> residuals;
        std::vector<double> gripper;
    };
    auto solve_arm = [&](bool use_left) -> ArmSolution {
        std::vector<retarget::HandKeypoints> seq;
        seq.reserve(keypoints.size());
        for (const auto& f : keypoints) seq.push_back(use_left ? *f.left : *f.right);
        std::vector<geometry::Pose> targets;
        targets.reserve(seq.size());
        for (std::size_t t = 0; t < seq.size(); ++t) {
            try {
                const retarget::HandKeypoints body = retarget::body_normalize(seq[t]);
                targets.push_back(retarget::to_robot_frame(
                    retarget::wrist_pose(body, cfg.averaged_mcps), cal));
            } catch (const DegenerateHand& e) {
                throw DegenerateHand(e.what(), long(t));
            }
        }
        retarget::TrajectoryResult traj =
            retarget::solve_trajectory(chain, targets, q0, cfg.ik);
        ArmSolution sol;
        sol.q = std::move(traj.q);
        sol.residuals = std::move(traj.per_frame);
        sol.gripper =
            retarget::gripper_signal(seq, cfg.gripper.threshold, cfg.gripper.window);
        return sol;
    };

    ArmSolution left, right;
    try {
        if (has_left) left = solve_arm(true);
        if (has_right) right = solve_arm(false);
    } catch (const DegenerateHand& e) {
        return emit_error(out, 5, "degenerate_hand", e.what(), e.frame_index);
    } catch (const Error& e) {
        return emit_error(out, 2, "parse_failure", e.what());
    }

    const std::size_t n = keypoints.size();
    std::vector<double> times(n);
    for (std::size_t t = 0; t < n; ++t) {
        const auto& f = keypoints[t];
        times[t] = f.left ? f.left->timestamp : f.right->timestamp;
    }

    auto action_row = [&](std::size_t t) {
        retarget::ArmAction la, ra;
        if (has_left) {
            for (int k = 0; k < 6 && k < n_joints; ++k) la.q[k] = left.q[t][k];
            la.g = left.gripper[t];
        }
        if (has_right) {
            for (int k = 0; k < 6 && k < n_joints; ++k) ra.q[k] = right.q[t][k];
            ra.g = right.gripper[t];
        }
        return retarget::assemble_action(la, ra);
    };

    try {
        const fs::path root = fs::path(cfg.output_dir) / episode_id;
        fs::create_directories(root);

        std::vector<Eigen::Matrix<double, 14, 1>> actions;
        actions.reserve(n);
        for (std::size_t t = 0; t < n; ++t) actions.push_back(action_row(t));
        std::ostringstream traj_csv;
        formats::write_trajectory_csv(traj_csv, times, actions);
        write_text(root / "trajectory.csv", traj_csv.str());

        std::ostringstream res_csv;
        res_csv << "t,pos_err_L,tilt_err_L,converged_L,pos_err_R,tilt_err_R,converged_R\n";
        char buf[64];
        for (std::size_t t = 0; t < n; ++t) {
            auto cell = [&](double v) {
                std::snprintf(buf, sizeof(buf), "%.9g", v);
                return std::string(buf);
            };
            const auto* lr = has_left ? &left.residuals[t] : nullptr;
            const auto* rr = has_right ? &right.residuals[t] : nullptr;
            res_csv << cell(times[t]) << "," << cell(lr ? lr->pos_err : 0.0) << ","
                    << cell(lr ? lr->tilt_err : 0.0) << "," << (lr && lr->converged ? 1 : lr ? 0 : 1)
                    << "," << cell(rr ? rr->pos_err : 0.0) << "," << cell(rr ? rr->tilt_err : 0.0)
                    << "," << (rr && rr->converged ? 1 : rr ? 0 : 1) << "\n";
        }
        write_text(root / "residuals.csv", res_csv.str());

        json meta{{"episode_id", episode_id},
                  {"frames", n},
                  {"arms", {{"left", has_left}, {"right", has_right}}},
                  {"chain_spec", chain_path},
                  {"calibration", calibration_path},
                  {"parameters", config_to_json(cfg)}};
        write_text(root / "metadata.json", meta.dump(2) + "\n");
        write_text(root / "SUCCESS", "ok\n");
    } catch (const Error& e) {
        return emit_error(out, 4, "io_failure", e.what());
    }
    return 0;
}

// --- metrics ---

struct EpisodeFrames {
    std::string key;       // relative dir with a trailing "frames" component stripped
    std::string category;  // first path component, or "all"
    std::vector<fs::path> files;
};

inline std::vector<EpisodeFrames> discover_episodes(const std::string& root) {
    if (!fs::is_directory(root)) throw InvalidInput("not a directory: " + root);
    std::vector<EpisodeFrames> out;
    auto consider = [&](const fs::path& dir) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_regular_file() && is_image_name(e.path().filename().string())) {
                files.push_back(e.path());
            }
        }
        if (files.size() < 2) return;
        std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
            return a.filename().string() < b.filename().string();
        });
        fs::path rel = fs::relative(dir, root);
        if (rel.filename() == "frames") rel = rel.parent_path();
        std::string key = rel.generic_string();
        if (key == "." || key.empty()) key = "episode";
        EpisodeFrames ep;
        ep.key = key;
        const auto slash = key.find('/');
        ep.category = slash == std::string::npos ? "all" : key.substr(0, slash);
        ep.files = std::move(files);
        out.push_back(std::move(ep));
    };
    consider(root);
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator();
         ++it) {
        if (it->is_directory()) consider(it->path());
    }
    std::sort(out.begin(), out.end(),
              [](const EpisodeFrames& a, const EpisodeFrames& b) { return a.key < b.key; });
    return out;
}

/// Per-video stability metrics from adjacent-frame matching: RANSAC inliers
/// feed an affine fit (view angle), the homography reprojection RMSE, and an
/// occlusion-aware MSE against the warped previous frame.
inline metrics::StabilityReport compute_video_metrics(const std::vector<vision::Frame>& frames,
                                                      const PipelineConfig& cfg,
                                                      std::size_t* skipped_pairs = nullptr) {
    metrics::StabilityReport rep;
    rep.frames = frames.size();
    for (std::size_t t = 1; t < frames.size(); ++t) {
        try {
            const auto corners = vision::detect_corners(frames[t - 1], cfg.vision.max_corners,
                                                        cfg.vision.min_distance,
                                                        cfg.vision.quality);
            const auto matches = vision::match_correspondences(
                frames[t - 1], frames[t], corners, cfg.vision.patch, cfg.vision.search_radius);
            stabilizer::RansacParams rp = cfg.ransac;
            rp.seed = stabilizer::detail::splitmix64(cfg.seed + t);
            const auto [h, inlier_idx] = stabilizer::estimate_homography_ransac(matches, rp);
            vision::CorrespondenceSet inliers;
            inliers.reserve(inlier_idx.size());
            for (std::size_t i : inlier_idx) inliers.push_back(matches[i]);

            const metrics::AffineStep a = metrics::estimate_affine(inliers);
            rep.phi.push_back(std::atan2(a.b, a.a) * 180.0 / M_PI);
            rep.h_rmse_per_step.push_back(metrics::h_rmse(h, inliers, frames[t].width,
                                                          frames[t].height,
                                                          cfg.metrics.h_rmse_normalized));
            auto [warped, wmask] = vision::warp_frame(frames[t - 1], h);
            rep.occ_mse_per_step.push_back(metrics::occ_mse(frames[t], warped, wmask));
        } catch (const Error&) {
            if (skipped_pairs) ++*skipped_pairs;
        }
    }
    rep.jitter_sq = metrics::jitter_residuals_sq(rep.phi, cfg.metrics.sigma);
    rep.jitter = metrics::jitter_rms(rep.phi, cfg.metrics.sigma);
    double sum = 0.0;
    for (double v : rep.phi) sum += v;
    rep.vc.mu = rep.phi.empty() ? 0.0 : sum / double(rep.phi.size());
    if (!rep.h_rmse_per_step.empty()) {
        double s = 0.0;
        for (double v : rep.h_rmse_per_step) s += v;
        rep.mean_h_rmse = s / double(rep.h_rmse_per_step.size());
    }
    if (!rep.occ_mse_per_step.empty()) {
        double s = 0.0;
        for (double v : rep.occ_mse_per_step) s += v;
        rep.mean_occ_mse = s / double(rep.occ_mse_per_step.size());
    }
    return rep;
}

namespace detail {

struct CategoryAccumulator {
    std::vector<std::vector<double>> phi, jitter_sq, h_rmse, occ_mse;
    std::size_t videos = 0;
    std::size_t frames = 0;
};

inline json delta_block(double before, double after, bool rms = false) {
    if (rms) {
        before = std::sqrt(before);
        after = std::sqrt(after);
    }
    json block{{"before", before}, {"after", after}};
    if (before == after) {
        block["delta_pct"] = 0.0;
        block["formatted"] = metrics::format_delta(0.0);
    } else if (before == 0.0) {
        block["delta_pct"] = nullptr;
        block["formatted"] = "n/a";
    } else {
        const auto [_, delta] = metrics::delta_report(before, after);
        block["delta_pct"] = std::round(delta * 10.0) / 10.0;
        block["formatted"] = metrics::format_delta(delta);
    }
    return block;
}

}  // namespace detail

inline int cmd_metrics(const std::string& before_dir, const std::string& after_dir,
                       const PipelineConfig& cfg, const std::string& report_path,
                       std::ostream& out = std::cout) {
    std::vector<EpisodeFrames> before, after;
    try {
        before = discover_episodes(before_dir);
        after = discover_episodes(after_dir);
    } catch (const Error& e) {
        return emit_error(out, 2, "misaligned_inputs", e.what());
    }
    if (before.size() != after.size()) {
        return emit_error(out, 2, "misaligned_inputs", "episode sets differ in size");
    }
    for (std::size_t i = 0; i < before.size(); ++i) {
        if (before[i].key != after[i].key || before[i].files.size() != after[i].files.size()) {
            return emit_error(out, 2, "misaligned_inputs",
                              "episode mismatch at key: " + before[i].key);
        }
    }

    std::map<std::string, detail::CategoryAccumulator> acc_before, acc_after;
    std::size_t skipped = 0;
    try {
        for (std::size_t i = 0; i < before.size(); ++i) {
            const auto fb = load_frames(before[i].files);
            const auto fa = load_frames(after[i].files);
            const metrics::StabilityReport rb = compute_video_metrics(fb, cfg, &skipped);
            const metrics::StabilityReport ra = compute_video_metrics(fa, cfg, &skipped);
            if (rb.phi.empty() || ra.phi.empty()) {
                ++skipped;
                continue;
            }
            auto push = [](detail::CategoryAccumulator& acc, const metrics::StabilityReport& rep) {
                acc.phi.push_back(rep.phi);
                acc.jitter_sq.push_back(rep.jitter_sq);
                acc.h_rmse.push_back(rep.h_rmse_per_step);
                acc.occ_mse.push_back(rep.occ_mse_per_step);
                acc.videos += 1;
                acc.frames += rep.frames;
            };
            push(acc_before[before[i].category], rb);
            push(acc_after[after[i].category], ra);
        }
    } catch (const Error& e) {
        return emit_error(out, 4, "io_failure", e.what());
    }

    json categories = json::object();
    for (const auto& [cat, b] : acc_before) {
        const auto& a = acc_after.at(cat);
        if (b.videos == 0) continue;
        using metrics::aggregate;
        using metrics::AggregateMode;
        auto both = [&](const std::vector<std::vector<double>>& vb,
                        const std::vector<std::vector<double>>& va, AggregateMode mode,
                        bool rms = false) {
            return detail::delta_block(aggregate(vb, mode), aggregate(va, mode), rms);
        };
        const AggregateMode fw = AggregateMode::frame_weighted;
        const AggregateMode pv = AggregateMode::per_video_equal;
        categories[cat] = json{
            {"videos", b.videos},
            {"frames", b.frames},
            {"stability", both(b.phi, a.phi, fw)},
            {"jitter_rms", both(b.jitter_sq, a.jitter_sq, fw, true)},
            {"h_rmse", both(b.h_rmse, a.h_rmse, fw)},
            {"occ_mse", both(b.occ_mse, a.occ_mse, fw)},
            {"per_video_equal",
             {{"stability", both(b.phi, a.phi, pv)},
              {"jitter_rms", both(b.jitter_sq, a.jitter_sq, pv, true)},
              {"h_rmse", both(b.h_rmse, a.h_rmse, pv)},
              {"occ_mse", both(b.occ_mse, a.occ_mse, pv)}}}};
    }
    json report{{"categories", categories},
                {"metadata",
                 {{"metric_sigma", cfg.metrics.sigma},
                  {"percentile", "linear interpolation between order statistics"},
                  {"h_rmse_reference", "adjacent (t-1 -> t)"},
                  {"h_rmse_normalized", cfg.metrics.h_rmse_normalized},
                  {"stability_definition", "mean per-step view angle (degrees)"},
                  {"aggregation", "frame_weighted (per_video_equal reported alongside)"},
                  {"skipped_pairs_or_videos", skipped}}}};
    try {
        write_text(report_path, report.dump(2) + "\n");
    } catch (const Error& e) {
        return emit_error(out, 4, "io_failure", e.what());
    }
    for (const auto& [cat, block] : categories.items()) {
        out << cat << ": stability " << block["stability"]["before"].dump() << " -> "
            << block["stability"]["after"].dump() << " ("
            << block["stability"]["formatted"].get<std::string>() << "), jitter_rms "
            << block["jitter_rms"]["before"].dump() << " -> "
            << block["jitter_rms"]["after"].dump() << " ("
            << block["jitter_rms"]["formatted"].get<std::string>() << ")\n";
    }
    return 0;
}

// --- check ---

/// Embedded invariant suite; prints one PASS/FAIL line per property.
/// `inject_bad_schedule` corrupts a schedule to exercise the failure path.
inline int cmd_check(bool inject_bad_schedule = false, std::ostream& out = std::cout) {
    int failures = 0;
    auto check = [&](const std::string& name, auto&& fn) {
        try {
            fn();
            out << "PASS " << name << "\n";
        } catch (const std::exception& e) {
            out << "FAIL " << name << ": " << e.what() << "\n";
            ++failures;
        }
    };
    auto expect = [](bool cond, const std::string& why) {
        if (!cond) throw Error(why);
    };

    std::mt19937_64 rng(12345);
    auto uniform = [&rng](double lo, double hi) {
        return lo + (hi - lo) * double(rng() >> 11) / double(1ULL << 53);
    };
    auto random_rotation = [&]() {
        const Eigen::Vector3d axis =
            Eigen::Vector3d(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1)).normalized();
        return geometry::so3_exp(axis * uniform(-M_PI + 1e-3, M_PI - 1e-3));
    };

    check("flow_schedule_endpoints_linear",
          [] { genmath::validate_schedule(genmath::linear_schedule()); });
    check("flow_schedule_endpoints_trig",
          [] { genmath::validate_schedule(genmath::trig_schedule()); });
    if (inject_bad_schedule) {
        check("flow_schedule_endpoints_injected", [] {
            genmath::FlowSchedule bad;
            bad.name = "injected";
            bad.alpha = [](double t) { return t; };
            bad.sigma = [](double t) { return 1.0 - t + 0.1; };  // sigma(1) = 0.1
            bad.alpha_dot = [](double) { return 1.0; };
            bad.sigma_dot = [](double) { return -1.0; };
            genmath::validate_schedule(bad);
        });
    }
    check("so3_exp_log_roundtrip", [&] {
        for (int i = 0; i < 200; ++i) {
            const Eigen::Matrix3d r = random_rotation();
            const Eigen::Matrix3d rr = geometry::so3_exp(geometry::so3_log(r));
            expect((rr - r).norm() < 1e-9, "exp(log(R)) drifted beyond 1e-9");
        }
    });
    check("homography_apply_roundtrip", [&] {
        for (int i = 0; i < 100; ++i) {
            Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
            m(0, 0) = uniform(0.8, 1.2);
            m(1, 1) = uniform(0.8, 1.2);
            m(0, 1) = uniform(-0.1, 0.1);
            m(1, 0) = uniform(-0.1, 0.1);
            m(0, 2) = uniform(-20, 20);
            m(1, 2) = uniform(-20, 20);
            m(2, 0) = uniform(-1e-4, 1e-4);
            m(2, 1) = uniform(-1e-4, 1e-4);
            const geometry::Homography h(m);
            const Eigen::Vector2d x(uniform(0, 640), uniform(0, 480));
            const Eigen::Vector2d back =
                geometry::homography_apply(h.inverse(), geometry::homography_apply(h, x));
            expect((back - x).norm() < 1e-9, "h^-1(h(x)) drifted beyond 1e-9 px");
        }
    });
    check("jacobian_finite_difference", [&] {
        retarget::KinematicChain chain;
        for (int i = 0; i < 4; ++i) {
            retarget::Joint j;
            j.axis = Eigen::Vector3d(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1)).normalized();
            j.origin = geometry::Pose(random_rotation(),
                                      Eigen::Vector3d(uniform(-0.3, 0.3), uniform(-0.3, 0.3),
                                                      uniform(-0.3, 0.3)));
            j.lower = -3.0;
            j.upper = 3.0;
            chain.joints.push_back(j);
        }
        chain.validate();
        Eigen::VectorXd q(4);
        for (int i = 0; i < 4; ++i) q[i] = uniform(-1.5, 1.5);
        const Eigen::MatrixXd j = retarget::jacobian(chain, q);
        const double h = 1e-6;
        for (int i = 0; i < 4; ++i) {
            Eigen::VectorXd qp = q, qm = q;
            qp[i] += h;
            qm[i] -= h;
            const geometry::Pose fp = retarget::forward_kinematics(chain, qp);
            const geometry::Pose fm = retarget::forward_kinematics(chain, qm);
            const Eigen::Vector3d dlin = (fp.t - fm.t) / (2 * h);
            const Eigen::Matrix3d dr = (fp.r - fm.r) / (2 * h);
            const Eigen::Matrix3d wx = dr * retarget::forward_kinematics(chain, q).r.transpose();
            const Eigen::Vector3d dang(wx(2, 1), wx(0, 2), wx(1, 0));
            expect((j.block<3, 1>(0, i) - dlin).cwiseAbs().maxCoeff() < 1e-5,
                   "linear Jacobian column mismatch");
            expect((j.block<3, 1>(3, i) - dang).cwiseAbs().maxCoeff() < 1e-5,
                   "angular Jacobian column mismatch");
        }
    });
    check("cfm_derivative_consistency", [&] {
        for (const auto& s : {genmath::linear_schedule(), genmath::trig_schedule()}) {
            const genmath::Tensor a({4}, {0.3, -1.2, 2.0, 0.7});
            const genmath::Tensor eps({4}, {1.1, 0.4, -0.8, -0.2});
            for (double t : {0.1, 0.5, 0.9}) {
                const double h = 1e-6;
                const auto yp = genmath::cfm_interpolant(a, eps, t + h, s);
                const auto ym = genmath::cfm_interpolant(a, eps, t - h, s);
                const auto u = genmath::cfm_target_velocity(a, eps, t, s);
                for (std::size_t i = 0; i < 4; ++i) {
                    const double fd = (yp.data[i] - ym.data[i]) / (2 * h);
                    expect(std::abs(fd - u.data[i]) < 1e-4,
                           "d/dt interpolant != target velocity");
                }
            }
        }
    });
    check("ddpm_endpoint_identity", [] {
        const genmath::Tensor z({3}, {1.0, -2.0, 0.5});
        const genmath::Tensor eps({3}, {0.3, 0.9, -1.4});
        const auto at_one = genmath::ddpm_noise(z, eps, 1.0);
        for (std::size_t i = 0; i < 3; ++i) {
            if (at_one.data[i] != z.data[i]) throw Error("alpha_bar=1 must return z exactly");
        }
        const auto near_zero = genmath::ddpm_noise(z, eps, 1e-12);
        for (std::size_t i = 0; i < 3; ++i) {
            const double tol = 1e-6 * (std::abs(eps.data[i]) + std::abs(z.data[i]));
            if (std::abs(near_zero.data[i] - eps.data[i]) > tol) {
                throw Error("alpha_bar->0 must approach eps");
            }
        }
    });
    check("rigid_fit_recovers_known_transform", [&] {
        const Eigen::Matrix3d r = random_rotation();
        const Eigen::Vector3d t(0.4, -0.2, 1.1);
        std::vector<Eigen::Vector3d> src, dst;
        for (int i = 0; i < 6; ++i) {
            src.emplace_back(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
            dst.push_back(r * src.back() + t);
        }
        const geometry::Pose fit = geometry::rigid_fit(src, dst);
        expect((fit.r - r).norm() < 1e-9 && (fit.t - t).norm() < 1e-9,
               "rigid_fit missed the known transform");
    });

    return failures == 0 ? 0 : 1;
}

// --- calibrate ---

/// Fits (R_HR, t_HR) from paired points "hx,hy,hz,rx,ry,rz" per CSV line.
inline int cmd_calibrate(const std::string& pairs_path, const std::string& out_path,
                         std::ostream& out = std::cout) {
    std::vector<Eigen::Vector3d> src, dst;
    try {
        std::ifstream is(pairs_path);
        if (!is) throw IoError("cannot open pairs: " + pairs_path);
        std::string line;
        while (std::getline(is, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream iss(line);
            Eigen::Vector3d a, b;
            if (!(iss >> a.x() >> a.y() >> a.z() >> b.x() >> b.y() >> b.z())) {
                throw InvalidInput("bad pair line: " + line);
            }
            src.push_back(a);
            dst.push_back(b);
        }
    } catch (const Error& e) {
        return emit_error(out, 2, "parse_failure", e.what());
    }
    try {
        const geometry::Pose cal = geometry::rigid_fit(src, dst);
        formats::save_calibration(out_path, cal);
        double rmse = 0.0;
        for (std::size_t i = 0; i < src.size(); ++i) {
            rmse += (cal.apply(src[i]) - dst[i]).squaredNorm();
        }
        rmse = std::sqrt(rmse / double(src.size()));
        out << "calibration rmse: " << rmse << " m over " << src.size() << " pairs\n";
    } catch (const DegenerateConfiguration& e) {
        return emit_error(out, 2, "degenerate_configuration", e.what());
    } catch (const Error& e) {
        return emit_error(out, 4, "io_failure", e.what());
    }
    return 0;
}

}  // namespace egokit::pipeline
