#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "egokit/errors.hpp"
#include "egokit/filtering.hpp"
#include "egokit/geometry.hpp"
#include "egokit/vision.hpp"

namespace egokit::metrics {

using Eigen::Vector2d;
using geometry::Homography;
using vision::CorrespondenceSet;
using vision::Frame;
using vision::ValidityMask;

/// 2x3 affine step [a b tx; c d ty] between adjacent frames.
struct AffineStep {
    double a = 1, b = 0, c = 0, d = 1;
    double tx = 0, ty = 0;
};

/// Ordinary least squares on the six affine parameters.
inline AffineStep estimate_affine(const CorrespondenceSet& c) {
    if (c.size() < 3) throw DegenerateConfiguration("affine fit needs >= 3 pairs");
    // shared 3x3 normal matrix for the two rows of the affine
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    Eigen::Vector3d bu = Eigen::Vector3d::Zero(), bv = Eigen::Vector3d::Zero();
    for (const auto& p : c) {
        const Eigen::Vector3d x(p.a.x(), p.a.y(), 1.0);
        m += x * x.transpose();
        bu += x * p.b.x();
        bv += x * p.b.y();
    }
    Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
    if (!lu.isInvertible()) {
        throw DegenerateConfiguration("correspondences are collinear");
    }
    const Eigen::Vector3d row_u = lu.solve(bu);
    const Eigen::Vector3d row_v = lu.solve(bv);
    AffineStep s{row_u(0), row_u(1), row_v(0), row_v(1), row_u(2), row_v(2)};
    if (std::abs(s.a * s.d - s.b * s.c) <= 1e-12) {
        throw DegenerateConfiguration("fitted affine is singular");
    }
    return s;
}

struct ViewConsistency {
    double mu = 0.0;      // mean per-step angle, degrees (signed)
    double p95 = 0.0;     // 95th percentile, linear interpolation
    double sigma = 0.0;   // sample standard deviation
    bool sigma_defined = false;
};

/// Per-step view angle phi_t = atan2(b, a) in degrees, one per adjacent-frame
/// step, with mean / P95 / sample standard deviation over the steps.
inline ViewConsistency view_consistency(const std::vector<AffineStep>& steps) {
    ViewConsistency out;
    if (steps.empty()) return out;
    std::vector<double> phi(steps.size());
    for (std::size_t i = 0; i < steps.size(); ++i) {
        phi[i] = std::atan2(steps[i].b, steps[i].a) * 180.0 / M_PI;
    }
    const std::size_t n = phi.size();
    double sum = 0.0;
    for (double v : phi) sum += v;
    out.mu = sum / double(n);

    std::vector<double> sorted = phi;
    std::sort(sorted.begin(), sorted.end());
    const double rank = 0.95 * double(n - 1);
    const std::size_t lo = std::size_t(rank);
    out.p95 = lo + 1 < n ? sorted[lo] + (rank - double(lo)) * (sorted[lo + 1] - sorted[lo])
                         : sorted[lo];

    if (n >= 2) {
        double ss = 0.0;
        for (double v : phi) ss += (v - out.mu) * (v - out.mu);
        out.sigma = std::sqrt(ss / double(n - 1));
        out.sigma_defined = true;
    }
    return out;
}

/// Per-step view angles (degrees) for reuse by jitter_rms and aggregation.
inline std::vector<double> view_angles(const std::vector<AffineStep>& steps) {
    std::vector<double> phi(steps.size());
    for (std::size_t i = 0; i < steps.size(); ++i) {
        phi[i] = std::atan2(steps[i].b, steps[i].a) * 180.0 / M_PI;
    }
    return phi;
}

/// RMS of the high-frequency residual after the truncated-Gaussian low-pass
/// (radius 3*sigma, edge-renormalized; the same kernel the stabilizer uses).
inline double jitter_rms(const std::vector<double>& phi, double sigma) {
    if (sigma <= 0.0) throw InvalidInput("sigma must be positive");
    if (phi.empty()) return 0.0;
    const std::vector<double> low = filtering::gaussian_smooth(phi, sigma);
    double ss = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double r = phi[i] - low[i];
        ss += r * r;
    }
    return std::sqrt(ss / double(phi.size()));
}

/// Squared high-frequency residuals, for frame-level dataset aggregation.
inline std::vector<double> jitter_residuals_sq(const std::vector<double>& phi, double sigma) {
    const std::vector<double> low = filtering::gaussian_smooth(phi, sigma);
    std::vector<double> out(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double r = phi[i] - low[i];
        out[i] = r * r;
    }
    return out;
}

/// RMSE of homography reprojection over inlier correspondences, optionally
/// normalized by the image diagonal sqrt(W^2 + H^2).
inline double h_rmse(const Homography& h, const CorrespondenceSet& c, int width, int height,
                     bool normalized) {
    if (c.empty()) throw EmptySet("h_rmse: empty correspondence set");
    double ss = 0.0;
    for (const auto& p : c) {
        const Vector2d proj = geometry::homography_apply(h, p.a);
        ss += (proj - p.b).squaredNorm();
    }
    double rmse = std::sqrt(ss / double(c.size()));
    if (normalized) rmse /= std::sqrt(double(width) * width + double(height) * height);
    return rmse;
}

/// Mean squared photometric difference over the valid pixel set only.
inline double occ_mse(const Frame& frame_t, const Frame& warped_ref,
                      const ValidityMask& omega) {
    if (frame_t.width != warped_ref.width || frame_t.height != warped_ref.height ||
        frame_t.width != omega.width || frame_t.height != omega.height) {
        throw InvalidInput("occ_mse: dimensions differ");
    }
    double ss = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < frame_t.data.size(); ++i) {
        if (!omega.bits[i]) continue;
        const double d = double(frame_t.data[i]) - double(warped_ref.data[i]);
        ss += d * d;
        ++count;
    }
    if (count == 0) throw EmptyMask("occ_mse: no valid pixels");
    return ss / double(count);
}

enum class AggregateMode { frame_weighted, per_video_equal };

/// Dataset-level aggregation of per-frame metric sequences.
inline double aggregate(const std::vector<std::vector<double>>& per_video,
                        AggregateMode mode) {
    if (per_video.empty()) throw EmptyInput("aggregate: no videos");
    for (const auto& v : per_video) {
        if (v.empty()) throw EmptyInput("aggregate: empty per-frame sequence");
    }
    if (mode == AggregateMode::frame_weighted) {
        double sum = 0.0;
        std::size_t frames = 0;
        for (const auto& v : per_video) {
            for (double m : v) sum += m;
            frames += v.size();
        }
        return sum / double(frames);
    }
    double sum = 0.0;
    for (const auto& v : per_video) {
        double s = 0.0;
        for (double m : v) s += m;
        sum += s / double(v.size());
    }
    return sum / double(per_video.size());
}

/// Before -> after with the relative change in percent.
inline std::pair<double, double> delta_report(double before, double after) {
    if (before == 0.0) throw ZeroBaseline("delta_report: zero baseline");
    return {after, 100.0 * (after - before) / before};
}

/// "-8.2%" style rendering of a relative delta, one decimal.
inline std::string format_delta(double delta_pct) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f%%", delta_pct);
    return buf;
}

/// Per-frame and aggregated stability metrics for one video.
struct StabilityReport {
    std::vector<double> phi;             // per-step view angle, degrees
    std::vector<double> jitter_sq;       // per-step squared high-frequency residual
    std::vector<double> h_rmse_per_step; // per adjacent-frame-pair reprojection RMSE
    std::vector<double> occ_mse_per_step;
    ViewConsistency vc;
    double jitter = 0.0;                 // JitterRMS over the video
    double mean_h_rmse = 0.0;
    double mean_occ_mse = 0.0;
    std::size_t frames = 0;
};

}  // namespace egokit::metrics
