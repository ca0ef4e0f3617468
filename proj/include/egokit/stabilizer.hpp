#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "egokit/errors.hpp"
#include "egokit/filtering.hpp"
#include "egokit/geometry.hpp"
#include "egokit/vision.hpp"

namespace egokit::stabilizer {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;
using geometry::Homography;
using vision::CorrespondenceSet;
using vision::Frame;
using vision::ValidityMask;

struct RansacParams {
    double threshold = 2.0;       // inlier reprojection bound, pixels
    double confidence = 0.995;
    int max_iters = 2000;
    std::uint64_t seed = 0x5EED;
};

/// Accumulated (raw), smoothed, and compensation homography sequences.
/// comp[t] * raw[t] == smoothed[t] by construction.
struct CameraPath {
    std::vector<Homography> raw;
    std::vector<Homography> smoothed;
    std::vector<Homography> comp;
};

struct VisionParams {
    std::size_t max_corners = 400;
    double min_distance = 8.0;
    double quality = 0.01;
    int patch = 11;
    int search_radius = 24;
};

struct Rect {
    double x = 0, y = 0, w = 0, h = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Hartley normalization: centroid to origin, mean distance sqrt(2).
inline Matrix3d normalize_points(const std::vector<Vector2d>& pts,
                                 std::vector<Vector2d>& out) {
    Vector2d c = Vector2d::Zero();
    for (const auto& p : pts) c += p;
    c /= double(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += (p - c).norm();
    mean_dist /= double(pts.size());
    const double s = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
    Matrix3d t;
    t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
    out.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = s * (pts[i] - c);
    return t;
}

// Direct linear transform on normalized coordinates. Returns nullopt when
// the solution is numerically unusable (degenerate sample).
inline std::optional<Matrix3d> dlt_homography(const std::vector<Vector2d>& src,
                                              const std::vector<Vector2d>& dst) {
    std::vector<Vector2d> ns, nd;
    const Matrix3d t1 = normalize_points(src, ns);
    const Matrix3d t2 = normalize_points(dst, nd);
    const std::size_t n = src.size();
    Eigen::MatrixXd a(2 * n, 9);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = ns[i].x(), y = ns[i].y();
        const double u = nd[i].x(), v = nd[i].y();
        a.row(long(2 * i)) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
        a.row(long(2 * i + 1)) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd h = svd.matrixV().col(8);
    Matrix3d hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    const Matrix3d hm = t2.inverse() * hn * t1;
    if (std::abs(hm(2, 2)) <= 1e-12 || !hm.allFinite()) return std::nullopt;
    const Matrix3d norm = hm / hm(2, 2);
    if (std::abs(norm.determinant()) <= 1e-12) return std::nullopt;
    return norm;
}

inline bool any_three_collinear(const std::vector<Vector2d>& p) {
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = i + 1; j < p.size(); ++j)
            for (std::size_t k = j + 1; k < p.size(); ++k) {
                const Vector2d u = p[j] - p[i], v = p[k] - p[i];
                const double cross = u.x() * v.y() - u.y() * v.x();
                if (std::abs(cross) <= 1e-9 * (u.norm() * v.norm() + 1e-12)) return true;
            }
    return false;
}

inline double reprojection_error(const Matrix3d& h, const Vector2d& a, const Vector2d& b) {
    const Vector3d p = h * Vector3d(a.x(), a.y(), 1.0);
    if (std::abs(p.z()) <= 1e-12) return std::numeric_limits<double>::infinity();
    return (Vector2d(p.x() / p.z(), p.y() / p.z()) - b).norm();
}

}  // namespace detail

/// Robust homography estimation: 4-point DLT hypotheses with Hartley
/// normalization, adaptive iteration count, and a final normalized-DLT refit
/// on all inliers. Deterministic for a fixed seed.
inline std::pair<Homography, std::vector<std::size_t>> estimate_homography_ransac(
    const CorrespondenceSet& c, const RansacParams& p) {
    const std::size_t n = c.size();
    if (n < 4) throw TooFewCorrespondences("RANSAC needs at least 4 correspondences");

    std::mt19937_64 rng(p.seed);
    auto draw = [&rng](std::size_t m) { return std::size_t(rng() % m); };

    std::vector<std::size_t> best_inliers;
    Matrix3d best_h = Matrix3d::Identity();
    double max_needed = double(p.max_iters);

    std::vector<Vector2d> src4(4), dst4(4);
    for (int iter = 0; iter < p.max_iters && double(iter) < max_needed; ++iter) {
        // sample 4 distinct indices
        std::size_t idx[4];
        int filled = 0;
        while (filled < 4) {
            const std::size_t cand = draw(n);
            bool dup = false;
            for (int k = 0; k < filled; ++k) dup = dup || idx[k] == cand;
            if (!dup) idx[filled++] = cand;
        }
        for (int k = 0; k < 4; ++k) {
            src4[std::size_t(k)] = c[idx[k]].a;
            dst4[std::size_t(k)] = c[idx[k]].b;
        }
        if (detail::any_three_collinear(src4) || detail::any_three_collinear(dst4)) continue;

        const auto h = detail::dlt_homography(src4, dst4);
        if (!h) continue;

        std::vector<std::size_t> inliers;
        inliers.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (detail::reprojection_error(*h, c[i].a, c[i].b) < p.threshold) {
                inliers.push_back(i);
            }
        }
        if (inliers.size() > best_inliers.size()) {
            best_inliers = std::move(inliers);
            best_h = *h;
            const double w = double(best_inliers.size()) / double(n);
            const double p_good = std::pow(w, 4);
            if (p_good >= 1.0 - 1e-15) {
                max_needed = 0.0;
            } else if (p_good > 1e-15) {
                max_needed = std::log(1.0 - p.confidence) / std::log(1.0 - p_good);
            }
        }
    }
    if (best_inliers.size() < 4) {
        throw NoConsensus("RANSAC found no 4-point consensus");
    }

    // refit on all inliers, then recompute the inlier list with the refit model
    std::vector<Vector2d> src, dst;
    src.reserve(best_inliers.size());
    dst.reserve(best_inliers.size());
    for (std::size_t i : best_inliers) {
        src.push_back(c[i].a);
        dst.push_back(c[i].b);
    }
    if (const auto refit = detail::dlt_homography(src, dst)) best_h = *refit;

    std::vector<std::size_t> final_inliers;
    for (std::size_t i = 0; i < n; ++i) {
        if (detail::reprojection_error(best_h, c[i].a, c[i].b) < p.threshold) {
            final_inliers.push_back(i);
        }
    }
    if (final_inliers.size() < 4) throw NoConsensus("refit lost consensus");
    return {Homography(best_h), std::move(final_inliers)};
}

/// raw[0] = identity, raw[t] = per_step[t-1] * raw[t-1]; per_step[i] maps
/// frame i to frame i+1, so raw[t] maps frame 0 to frame t.
inline std::vector<Homography> accumulate_path(const std::vector<Homography>& per_step) {
    std::vector<Homography> raw;
    raw.reserve(per_step.size() + 1);
    raw.push_back(Homography::identity());
    for (const Homography& s : per_step) {
        if (std::abs(s.matrix().determinant()) <= 1e-12) {
            throw SingularStep("per-step homography is singular");
        }
        raw.push_back(s * raw.back());
    }
    return raw;
}

namespace detail {

struct SimilarityParams {
    double tx, ty, theta, log_scale;
};

// Closest similarity (Procrustes on the 2x2 block) plus the leftover
// projective residual: h == similarity(params) * residual.
inline std::pair<SimilarityParams, Matrix3d> split_similarity(const Matrix3d& h) {
    const double a = h(0, 0), b = h(0, 1), cc = h(1, 0), d = h(1, 1);
    const double theta = std::atan2(cc - b, a + d);
    double s = 0.5 * std::hypot(a + d, cc - b);
    if (s < 1e-12) s = 1.0;  // fully degenerate block, push everything to the residual
    SimilarityParams p{h(0, 2), h(1, 2), theta, std::log(s)};
    Matrix3d sim;
    const double cs = std::cos(theta) * s, sn = std::sin(theta) * s;
    sim << cs, -sn, p.tx, sn, cs, p.ty, 0, 0, 1;
    return {p, Matrix3d(sim.inverse() * h)};
}

inline Matrix3d compose_similarity(const SimilarityParams& p) {
    const double s = std::exp(p.log_scale);
    const double cs = std::cos(p.theta) * s, sn = std::sin(p.theta) * s;
    Matrix3d sim;
    sim << cs, -sn, p.tx, sn, cs, p.ty, 0, 0, 1;
    return sim;
}

}  // namespace detail

/// Temporal low-pass of an accumulated camera path. Each map is decomposed
/// into similarity parameters (tx, ty, theta, log scale) and a projective
/// residual; the similarity parameters are independently filtered with a
/// truncated Gaussian (radius 3*sigma, edge-renormalized) while the residual
/// passes through unchanged.
inline std::vector<Homography> smooth_path(const std::vector<Homography>& raw, double sigma) {
    if (sigma <= 0.0) throw InvalidInput("sigma must be positive");
    if (raw.empty()) return {};
    const std::size_t n = raw.size();
    std::vector<double> tx(n), ty(n), theta(n), ls(n);
    std::vector<Matrix3d> residual(n);
    for (std::size_t t = 0; t < n; ++t) {
        auto [p, res] = detail::split_similarity(raw[t].matrix());
        tx[t] = p.tx;
        ty[t] = p.ty;
        theta[t] = p.theta;
        ls[t] = p.log_scale;
        residual[t] = res;
    }
    // unwrap the angle so the convolution never averages across a 2*pi jump
    for (std::size_t t = 1; t < n; ++t) {
        while (theta[t] - theta[t - 1] > M_PI) theta[t] -= 2.0 * M_PI;
        while (theta[t] - theta[t - 1] < -M_PI) theta[t] += 2.0 * M_PI;
    }
    tx = filtering::gaussian_smooth(tx, sigma);
    ty = filtering::gaussian_smooth(ty, sigma);
    theta = filtering::gaussian_smooth(theta, sigma);
    ls = filtering::gaussian_smooth(ls, sigma);

    std::vector<Homography> out;
    out.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        const Matrix3d sim =
            detail::compose_similarity({tx[t], ty[t], theta[t], ls[t]});
        out.emplace_back(Matrix3d(sim * residual[t]));
    }
    return out;
}

/// W_t = smoothed[t] * raw[t]^-1.
inline std::vector<Homography> compensation(const std::vector<Homography>& raw,
                                            const std::vector<Homography>& smoothed) {
    if (raw.size() != smoothed.size()) {
        throw LengthMismatch("compensation: sequences differ in length");
    }
    std::vector<Homography> out;
    out.reserve(raw.size());
    for (std::size_t t = 0; t < raw.size(); ++t) {
        if (std::abs(raw[t].matrix().determinant()) <= 1e-12) {
            throw SingularStep("raw path entry is singular");
        }
        out.push_back(smoothed[t] * raw[t].inverse());
    }
    return out;
}

namespace detail {

using Polygon = std::vector<Vector2d>;

inline double polygon_area(const Polygon& p) {
    double a = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Vector2d& u = p[i];
        const Vector2d& v = p[(i + 1) % p.size()];
        a += u.x() * v.y() - v.x() * u.y();
    }
    return 0.5 * a;
}

inline Vector2d polygon_centroid(const Polygon& p) {
    double a = 0.0;
    Vector2d c = Vector2d::Zero();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Vector2d& u = p[i];
        const Vector2d& v = p[(i + 1) % p.size()];
        const double w = u.x() * v.y() - v.x() * u.y();
        a += w;
        c += w * (u + v);
    }
    if (std::abs(a) < 1e-12) throw EmptyIntersection("intersection polygon is degenerate");
    return c / (3.0 * a);
}

// Sutherland-Hodgman clip of a polygon against one directed edge (keep the
// left side of a->b for CCW clip polygons).
inline Polygon clip_against_edge(const Polygon& poly, const Vector2d& a, const Vector2d& b) {
    Polygon out;
    const Vector2d e = b - a;
    auto side = [&](const Vector2d& p) {
        return e.x() * (p.y() - a.y()) - e.y() * (p.x() - a.x());
    };
    const double eps = -1e-9;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vector2d& cur = poly[i];
        const Vector2d& nxt = poly[(i + 1) % poly.size()];
        const double sc = side(cur), sn = side(nxt);
        if (sc >= eps) out.push_back(cur);
        if ((sc >= eps) != (sn >= eps)) {
            const double t = sc / (sc - sn);
            out.push_back(cur + t * (nxt - cur));
        }
    }
    return out;
}

inline Polygon clip_convex(Polygon subject, const Polygon& clip) {
    for (std::size_t i = 0; i < clip.size() && subject.size() >= 3; ++i) {
        subject = clip_against_edge(subject, clip[i], clip[(i + 1) % clip.size()]);
    }
    return subject;
}

inline bool point_in_convex(const Polygon& poly, const Vector2d& p) {
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vector2d& a = poly[i];
        const Vector2d& b = poly[(i + 1) % poly.size()];
        const Vector2d e = b - a;
        if (e.x() * (p.y() - a.y()) - e.y() * (p.x() - a.x()) < -1e-9) return false;
    }
    return true;
}

inline Polygon warp_quad(const Homography& w, double width, double height) {
    const Vector2d corners[4] = {{0, 0}, {width, 0}, {width, height}, {0, height}};
    Polygon quad(4);
    for (int i = 0; i < 4; ++i) {
        try {
            quad[std::size_t(i)] = geometry::homography_apply(w, corners[i]);
        } catch (const DegeneratePoint&) {
            throw EmptyIntersection("frame corner maps to infinity");
        }
    }
    if (polygon_area(quad) < 0.0) std::reverse(quad.begin(), quad.end());
    // convexity required for Sutherland-Hodgman clipping
    for (std::size_t i = 0; i < 4; ++i) {
        const Vector2d e1 = quad[(i + 1) % 4] - quad[i];
        const Vector2d e2 = quad[(i + 2) % 4] - quad[(i + 1) % 4];
        if (e1.x() * e2.y() - e1.y() * e2.x() < 0.0) {
            throw EmptyIntersection("warped frame quad is not convex");
        }
    }
    return quad;
}

}  // namespace detail

/// Largest axis-aligned rectangle of the requested aspect ratio (w/h),
/// centered at the centroid of the intersection of all warped frame quads.
/// The scale is found by 40 bisection steps, testing containment of the
/// four rectangle corners.
inline Rect common_visible_rect(const std::vector<Homography>& warps, int width, int height,
                                double aspect) {
    if (warps.empty()) throw InvalidInput("common_visible_rect: empty warp sequence");
    detail::Polygon poly = detail::warp_quad(warps[0], width, height);
    for (std::size_t t = 1; t < warps.size(); ++t) {
        poly = detail::clip_convex(std::move(poly),
                                   detail::warp_quad(warps[t], width, height));
        if (poly.size() < 3) throw EmptyIntersection("warped quads have no common region");
    }
    if (std::abs(detail::polygon_area(poly)) < 1e-9) {
        throw EmptyIntersection("intersection polygon is degenerate");
    }
    const Vector2d c = detail::polygon_centroid(poly);

    auto contained = [&](double k) {
        const double hw = 0.5 * k * aspect, hh = 0.5 * k;
        const Vector2d corners[4] = {{c.x() - hw, c.y() - hh},
                                     {c.x() + hw, c.y() - hh},
                                     {c.x() + hw, c.y() + hh},
                                     {c.x() - hw, c.y() + hh}};
        for (const auto& p : corners)
            if (!detail::point_in_convex(poly, p)) return false;
        return true;
    };

    double lo = 0.0, hi = 1.0;
    int guard = 0;
    while (contained(hi) && guard++ < 64) {
        lo = hi;
        hi *= 2.0;
    }
    for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (contained(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double rh = lo, rw = lo * aspect;
    return {c.x() - 0.5 * rw, c.y() - 0.5 * rh, rw, rh};
}

/// Temporal-donor hole filling with a diffusion fallback. Invalid pixels in
/// frame t are looked up in neighbors t-1, t+1, t-2, ... (nearest first) by
/// mapping through path[n] * path[t]^-1 and bilinearly sampling where the
/// neighbor is fully valid. Pixels with no temporal donor are completed by
/// iterative 3x3 masked-mean diffusion (Jacobi sweeps, max 500).
inline std::vector<Frame> fill_holes(const std::vector<Frame>& frames,
                                     const std::vector<ValidityMask>& masks,
                                     const std::vector<Homography>& path, int max_reach) {
    const std::size_t n = frames.size();
    if (masks.size() != n || path.size() != n) {
        throw LengthMismatch("fill_holes: sequence lengths differ");
    }
    std::vector<Frame> out = frames;
    for (std::size_t t = 0; t < n; ++t) {
        if (masks[t].all_valid()) continue;
        const int w = frames[t].width, h = frames[t].height;
        ValidityMask filled = masks[t];

        // temporal donors, nearest neighbor frames first
        for (int d = 1; d <= max_reach; ++d) {
            for (const long sign : {-1L, +1L}) {
                const long nn = long(t) + sign * d;
                if (nn < 0 || nn >= long(n)) continue;
                if (filled.all_valid()) break;
                const Matrix3d rel =
                    path[std::size_t(nn)].matrix() * path[t].matrix().inverse();
                for (int y = 0; y < h; ++y) {
                    for (int x = 0; x < w; ++x) {
                        if (filled.at(x, y)) continue;
                        const Vector3d s = rel * Vector3d(x, y, 1.0);
                        if (std::abs(s.z()) <= 1e-12) continue;
                        const double sx = s.x() / s.z(), sy = s.y() / s.z();
                        if (sx < 0.0 || sy < 0.0 || sx > w - 1.0 || sy > h - 1.0) continue;
                        if (vision::detail::bilinear_mask(masks[std::size_t(nn)], sx, sy) <
                            1.0 - 1e-9) {
                            continue;
                        }
                        out[t].at(x, y) = std::uint8_t(std::lround(
                            vision::detail::bilinear(frames[std::size_t(nn)], sx, sy)));
                        filled.set(x, y, true);
                    }
                }
            }
        }
        if (filled.all_valid()) continue;

        // diffusion fallback on the remaining pixels
        std::vector<double> vals(std::size_t(w) * h);
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = out[t].data[i];
        for (int sweep = 0; sweep < 500 && !filled.all_valid(); ++sweep) {
            const std::vector<double> prev = vals;
            const ValidityMask snapshot = filled;
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    if (snapshot.at(x, y)) continue;
                    double acc = 0.0;
                    int cnt = 0;
                    for (int dy = -1; dy <= 1; ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            if (dx == 0 && dy == 0) continue;
                            const int xx = x + dx, yy = y + dy;
                            if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
                            if (!snapshot.at(xx, yy)) continue;
                            acc += prev[std::size_t(yy) * w + xx];
                            ++cnt;
                        }
                    }
                    if (cnt > 0) {
                        vals[std::size_t(y) * w + x] = acc / cnt;
                        filled.set(x, y, true);
                    }
                }
            }
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!masks[t].at(x, y)) {
                    out[t].at(x, y) =
                        std::uint8_t(std::lround(std::clamp(vals[std::size_t(y) * w + x],
                                                            0.0, 255.0)));
                }
            }
        }
    }
    return out;
}

namespace detail {

// Crop `rect` out of a frame and rescale to (out_w, out_h). Output pixel
// centers sample the rect uniformly; mask samples count as valid only when
// every contributing pixel is valid.
inline std::pair<Frame, ValidityMask> resample_rect(const Frame& f, const ValidityMask& m,
                                                    const Rect& rect, int out_w, int out_h) {
    Frame out(out_w, out_h, 0);
    ValidityMask mask(out_w, out_h, false);
    const double sx = rect.w / out_w, sy = rect.h / out_h;
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const double src_x = rect.x + (x + 0.5) * sx - 0.5;
            const double src_y = rect.y + (y + 0.5) * sy - 0.5;
            if (src_x < 0.0 || src_y < 0.0 || src_x > f.width - 1.0 ||
                src_y > f.height - 1.0) {
                continue;
            }
            out.at(x, y) = std::uint8_t(std::lround(vision::detail::bilinear(f, src_x, src_y)));
            mask.set(x, y, vision::detail::bilinear_mask(m, src_x, src_y) >= 1.0 - 1e-9);
        }
    }
    return {std::move(out), std::move(mask)};
}

// Map from stabilized full-frame coordinates into the cropped/rescaled output.
inline Matrix3d crop_rescale_map(const Rect& rect, int out_w, int out_h) {
    const double sx = out_w / rect.w, sy = out_h / rect.h;
    Matrix3d c = Matrix3d::Identity();
    c(0, 0) = sx;
    c(0, 2) = -(rect.x - 0.5) * sx - 0.5;
    c(1, 1) = sy;
    c(1, 2) = -(rect.y - 0.5) * sy - 0.5;
    return c;
}

}  // namespace detail

struct StabilizeResult {
    std::vector<Frame> frames;         // stabilized, cropped, hole-filled
    std::vector<ValidityMask> masks;   // pre-fill masks of the cropped frames
    CameraPath path;
    Rect rect;
};

/// Full episode stabilization: adjacent-frame matching, robust per-step
/// homographies, path accumulation and smoothing, compensation warping,
/// common-visible-region cropping back to the input size, and temporal hole
/// filling. The returned masks are the pre-fill masks so callers can hand
/// them to an external inpainter instead.
inline StabilizeResult stabilize_episode(const std::vector<Frame>& frames,
                                         const VisionParams& vp, const RansacParams& rp,
                                         double sigma, double aspect = 0.0,
                                         int fill_max_reach = 6) {
    if (frames.size() < 2) throw InvalidInput("stabilize_episode needs at least 2 frames");
    const int w = frames[0].width, h = frames[0].height;
    for (const Frame& f : frames) {
        if (f.width != w || f.height != h) {
            throw InvalidInput("stabilize_episode: frames must share dimensions");
        }
    }
    if (aspect <= 0.0) aspect = double(w) / double(h);

    std::vector<Homography> per_step;
    per_step.reserve(frames.size() - 1);
    for (std::size_t t = 1; t < frames.size(); ++t) {
        const auto corners =
            vision::detect_corners(frames[t - 1], vp.max_corners, vp.min_distance, vp.quality);
        const auto matches = vision::match_correspondences(frames[t - 1], frames[t], corners,
                                                           vp.patch, vp.search_radius);
        RansacParams step_params = rp;
        step_params.seed = detail::splitmix64(rp.seed + t);
        try {
            per_step.push_back(estimate_homography_ransac(matches, step_params).first);
        } catch (const Error& e) {
            throw StabilizationFailed(
                std::string("homography estimation failed: ") + e.what(), t);
        }
    }

    CameraPath path;
    path.raw = accumulate_path(per_step);
    path.smoothed = smooth_path(path.raw, sigma);
    path.comp = compensation(path.raw, path.smoothed);

    const Rect rect = common_visible_rect(path.comp, w, h, aspect);
    const Matrix3d crop = detail::crop_rescale_map(rect, w, h);

    std::vector<Frame> warped(frames.size());
    std::vector<ValidityMask> masks(frames.size());
    std::vector<Homography> fill_path;
    fill_path.reserve(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
        auto [wf, wm] = vision::warp_frame(frames[t], path.comp[t]);
        auto [cf, cm] = detail::resample_rect(wf, wm, rect, w, h);
        warped[t] = std::move(cf);
        masks[t] = std::move(cm);
        fill_path.emplace_back(Matrix3d(crop * path.smoothed[t].matrix()));
    }

    StabilizeResult result;
    result.frames = fill_holes(warped, masks, fill_path, fill_max_reach);
    result.masks = std::move(masks);
    result.path = std::move(path);
    result.rect = rect;
    return result;
}

}  // namespace egokit::stabilizer
