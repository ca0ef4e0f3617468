#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "egokit/geometry.hpp"
#include "egokit/retarget.hpp"
#include "egokit/vision.hpp"

// Synthetic inputs: textured scenes with controlled camera jitter and hand
// keypoint streams generated from a known joint trajectory. Used by the demo
// data generator and the test suite.

namespace egokit::synth {

using Eigen::Matrix3d;
using Eigen::Vector3d;
using geometry::Homography;
using geometry::Pose;
using vision::Frame;

/// Textured canvas: random smooth blobs over a shallow gradient.
inline Frame textured_canvas(int width, int height, std::uint64_t seed, int blobs = 220) {
    std::mt19937_64 rng(seed);
    auto uniform = [&rng](double lo, double hi) {
        return lo + (hi - lo) * double(rng() >> 11) / double(1ULL << 53);
    };
    std::vector<double> img(std::size_t(width) * height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            img[std::size_t(y) * width + x] = 90.0 + 30.0 * double(x) / width +
                                              20.0 * double(y) / height;
        }
    }
    for (int b = 0; b < blobs; ++b) {
        const double cx = uniform(0, width), cy = uniform(0, height);
        const double amp = uniform(-70, 70);
        const double s = uniform(1.5, 6.0);
        const int r = int(3 * s) + 1;
        for (int y = std::max(0, int(cy) - r); y < std::min(height, int(cy) + r); ++y) {
            for (int x = std::max(0, int(cx) - r); x < std::min(width, int(cx) + r); ++x) {
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                img[std::size_t(y) * width + x] += amp * std::exp(-0.5 * d2 / (s * s));
            }
        }
    }
    Frame f(width, height);
    for (std::size_t i = 0; i < img.size(); ++i) {
        f.data[i] = std::uint8_t(std::lround(std::clamp(img[i], 0.0, 255.0)));
    }
    return f;
}

/// Sample a (width x height) view of the canvas through `view` (a map from
/// view pixel coordinates into canvas coordinates). The view must stay
/// inside the canvas, so frames carry no invalid border.
inline Frame render_view(const Frame& canvas, const Matrix3d& view, int width, int height) {
    Frame out(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Vector3d s = view * Vector3d(x, y, 1.0);
            const double sx = std::clamp(s.x() / s.z(), 0.0, canvas.width - 1.0);
            const double sy = std::clamp(s.y() / s.z(), 0.0, canvas.height - 1.0);
            out.at(x, y) = std::uint8_t(std::lround(vision::detail::bilinear(canvas, sx, sy)));
        }
    }
    return out;
}

struct JitterSpec {
    double max_translation = 4.0;  // pixels, per axis
    double max_rotation_deg = 1.0;
    std::uint64_t seed = 7;
    // alternating component keeps the jitter high-frequency so a temporal
    // low-pass removes most of it
    double alternating_fraction = 0.8;
};

struct JitteredEpisode {
    std::vector<Frame> frames;
    std::vector<Matrix3d> view_maps;  // frame pixel -> canvas pixel
};

/// Episode of `count` frames sampled from one canvas with per-frame jitter
/// (translation within +-max_translation px, rotation within
/// +-max_rotation_deg about the view center).
inline JitteredEpisode jittered_episode(const Frame& canvas, int width, int height, int count,
                                        const JitterSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    auto uniform = [&rng](double lo, double hi) {
        return lo + (hi - lo) * double(rng() >> 11) / double(1ULL << 53);
    };
    const double margin_x = (canvas.width - width) / 2.0;
    const double margin_y = (canvas.height - height) / 2.0;
    JitteredEpisode ep;
    for (int t = 0; t < count; ++t) {
        const double sgn = (t % 2 == 0) ? 1.0 : -1.0;
        const double af = spec.alternating_fraction;
        const double tx = spec.max_translation * (af * sgn + (1.0 - af) * uniform(-1, 1));
        const double ty = spec.max_translation * (-af * sgn + (1.0 - af) * uniform(-1, 1));
        const double theta = (spec.max_rotation_deg * M_PI / 180.0) *
                             (af * sgn + (1.0 - af) * uniform(-1, 1));
        // rotate about the view center, then place the view inside the canvas
        const double cx = width / 2.0, cy = height / 2.0;
        Matrix3d rot = Matrix3d::Identity();
        const double c = std::cos(theta), s = std::sin(theta);
        rot(0, 0) = c;
        rot(0, 1) = -s;
        rot(1, 0) = s;
        rot(1, 1) = c;
        rot(0, 2) = cx - (c * cx - s * cy);
        rot(1, 2) = cy - (s * cx + c * cy);
        Matrix3d place = Matrix3d::Identity();
        place(0, 2) = margin_x + tx;
        place(1, 2) = margin_y + ty;
        const Matrix3d view = place * rot;
        ep.frames.push_back(render_view(canvas, view, width, height));
        ep.view_maps.push_back(view);
    }
    return ep;
}

/// Six-joint demo arm with a roughly anthropomorphic layout.
inline retarget::KinematicChain demo_arm() {
    retarget::KinematicChain chain;
    auto add = [&chain](const Vector3d& axis, const Vector3d& offset) {
        retarget::Joint j;
        j.axis = axis.normalized();
        j.origin = Pose(Matrix3d::Identity(), offset);
        j.lower = -2.9;
        j.upper = 2.9;
        chain.joints.push_back(j);
    };
    add({0, 0, 1}, {0, 0, 0.15});
    add({0, 1, 0}, {0, 0, 0.10});
    add({0, 1, 0}, {0.30, 0, 0});
    add({1, 0, 0}, {0.25, 0, 0});
    add({0, 1, 0}, {0.10, 0, 0});
    add({1, 0, 0}, {0.08, 0, 0});
    chain.tool = Pose(Matrix3d::Identity(), Vector3d(0.06, 0, 0));
    chain.validate();
    return chain;
}

/// Hand whose wrist frame reproduces `pose` exactly through wrist_pose with
/// averaged_mcps = 3 (the first three knuckle offsets are symmetric).
inline retarget::HandKeypoints hand_from_pose(const Pose& pose, double scale = 0.1) {
    retarget::HandKeypoints k;
    k.wrist = pose.t;
    const double ys[5] = {-0.5, 0.0, 0.5, 0.8, 1.2};
    for (int i = 0; i < 5; ++i) {
        k.mcp[std::size_t(i)] = pose.apply(Vector3d(scale, scale * ys[i] * 0.4, 0));
    }
    // thumb and index tips set a wide-open grip (openness 1.2)
    k.tips[0] = pose.apply(Vector3d(scale * 1.5, -scale * 0.6, scale * 0.2));
    k.tips[1] = pose.apply(Vector3d(scale * 1.5, scale * 0.6, scale * 0.2));
    k.tips[2] = pose.apply(Vector3d(scale * 1.8, 0, scale * 0.1));
    k.tips[3] = pose.apply(Vector3d(scale * 1.7, scale * 0.3, scale * 0.1));
    k.tips[4] = pose.apply(Vector3d(scale * 1.5, scale * 0.5, scale * 0.1));
    return k;
}

/// Smooth in-limit joint trajectory for the demo arm.
inline std::vector<Eigen::VectorXd> demo_joint_trajectory(int frames) {
    std::vector<Eigen::VectorXd> qs;
    qs.reserve(std::size_t(frames));
    for (int t = 0; t < frames; ++t) {
        const double u = double(t) / std::max(1, frames - 1);
        Eigen::VectorXd q(6);
        q << 0.3 * std::sin(2 * M_PI * u), 0.5 + 0.2 * std::cos(2 * M_PI * u),
            -0.6 + 0.25 * std::sin(4 * M_PI * u), 0.2 * std::sin(2 * M_PI * u + 0.7),
            0.4 + 0.15 * std::cos(4 * M_PI * u), 0.1 * std::sin(2 * M_PI * u);
        qs.push_back(q);
    }
    return qs;
}

}  // namespace egokit::synth
