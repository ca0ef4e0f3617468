// Generates a synthetic episode (jittered frames, keypoints, chain spec,
// calibration, manifest, config) so the pipeline can be exercised without
// real capture data.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "egokit/egokit.hpp"
#include "egokit/synth.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"synthetic episode generator"};
    std::string out_dir = "demo";
    int frames = 120, width = 192, height = 144;
    std::uint64_t seed = 7;
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--frames", frames, "frame count");
    app.add_option("--width", width, "frame width");
    app.add_option("--height", height, "frame height");
    app.add_option("--seed", seed, "jitter seed");
    CLI11_PARSE(app, argc, argv);

    try {
        const fs::path root(out_dir);
        fs::create_directories(root / "frames");

        const auto canvas =
            egokit::synth::textured_canvas(width + 40, height + 40, seed ^ 0xC0FFEE);
        egokit::synth::JitterSpec spec;
        spec.seed = seed;
        const auto episode =
            egokit::synth::jittered_episode(canvas, width, height, frames, spec);
        char name[64];
        for (int t = 0; t < frames; ++t) {
            std::snprintf(name, sizeof(name), "frame_%05d.pgm", t);
            egokit::vision::write_pgm((root / "frames" / name).string(),
                                      episode.frames[std::size_t(t)]);
        }

        const auto chain = egokit::synth::demo_arm();
        {
            std::ofstream os(root / "chain.json");
            os << egokit::formats::chain_to_json(chain).dump(2) << "\n";
        }
        egokit::formats::save_calibration((root / "calibration.json").string(),
                                          egokit::geometry::Pose::identity());

        const auto qs = egokit::synth::demo_joint_trajectory(frames);
        {
            std::ofstream os(root / "keypoints.jsonl");
            for (int t = 0; t < frames; ++t) {
                const auto pose = egokit::retarget::forward_kinematics(chain, qs[std::size_t(t)]);
                const auto hand = egokit::synth::hand_from_pose(pose);
                nlohmann::json line{{"right", egokit::formats::hand_to_json(hand)}};
                line["right"]["timestamp"] = double(t) / 30.0;
                os << line.dump() << "\n";
            }
        }

        nlohmann::json manifest{{"episode_id", "demo"},
                                {"frames_dir", (root / "frames").string()},
                                {"keypoints_path", (root / "keypoints.jsonl").string()},
                                {"fps", 30.0},
                                {"instruction", "demo: pick up the object"}};
        {
            std::ofstream os(root / "manifest.json");
            os << manifest.dump(2) << "\n";
        }
        egokit::pipeline::PipelineConfig cfg;
        cfg.output_dir = (root / "out").string();
        {
            std::ofstream os(root / "config.json");
            os << egokit::pipeline::config_to_json(cfg).dump(2) << "\n";
        }
        std::cout << "wrote synthetic episode under " << out_dir << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
