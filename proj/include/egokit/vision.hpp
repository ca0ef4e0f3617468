#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "egokit/errors.hpp"
#include "egokit/geometry.hpp"

namespace egokit::vision {

using Eigen::Vector2d;
using geometry::Homography;

/// Single-channel 8-bit image, row-major.
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Frame() = default;
    Frame(int w, int h, std::uint8_t fill = 0) : width(w), height(h) {
        check_dims(w, h);
        data.assign(std::size_t(w) * std::size_t(h), fill);
    }
    Frame(int w, int h, std::vector<std::uint8_t> d) : width(w), height(h), data(std::move(d)) {
        check_dims(w, h);
        if (data.size() != std::size_t(w) * std::size_t(h)) {
            throw InvalidInput("frame data length does not match dimensions");
        }
    }

    std::uint8_t at(int x, int y) const { return data[std::size_t(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return data[std::size_t(y) * width + x]; }

private:
    static void check_dims(int w, int h) {
        if (w < 16 || h < 16) throw InvalidInput("frame dimensions must be at least 16x16");
    }
};

/// Per-pixel validity flags for a Frame (true = valid).
struct ValidityMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // 0 or 1

    ValidityMask() = default;
    ValidityMask(int w, int h, bool valid = true)
        : width(w), height(h), bits(std::size_t(w) * std::size_t(h), valid ? 1 : 0) {}

    bool at(int x, int y) const { return bits[std::size_t(y) * width + x] != 0; }
    void set(int x, int y, bool v) { bits[std::size_t(y) * width + x] = v ? 1 : 0; }
    bool all_valid() const {
        return std::all_of(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; });
    }
    std::size_t count_valid() const {
        return std::size_t(std::count_if(bits.begin(), bits.end(),
                                         [](std::uint8_t b) { return b != 0; }));
    }
};

struct Correspondence {
    Vector2d a;      // point in the first frame
    Vector2d b;      // matched point in the second frame
    double weight;   // confidence in (0, 1]
};

using CorrespondenceSet = std::vector<Correspondence>;

/// ITU-R BT.601 luma, rounded to nearest.
inline std::uint8_t rgb_to_luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return std::uint8_t(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
}

namespace detail {

// Minimum eigenvalue of the 3x3-window gradient covariance (Shi-Tomasi score).
inline std::vector<double> min_eig_scores(const Frame& f) {
    const int w = f.width, h = f.height;
    std::vector<double> ix(std::size_t(w) * h, 0.0), iy(std::size_t(w) * h, 0.0);
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            const std::size_t i = std::size_t(y) * w + x;
            ix[i] = 0.5 * (double(f.at(x + 1, y)) - double(f.at(x - 1, y)));
            iy[i] = 0.5 * (double(f.at(x, y + 1)) - double(f.at(x, y - 1)));
        }
    }
    std::vector<double> score(std::size_t(w) * h, 0.0);
    for (int y = 2; y < h - 2; ++y) {
        for (int x = 2; x < w - 2; ++x) {
            double sxx = 0.0, sxy = 0.0, syy = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const std::size_t i = std::size_t(y + dy) * w + (x + dx);
                    sxx += ix[i] * ix[i];
                    sxy += ix[i] * iy[i];
                    syy += iy[i] * iy[i];
                }
            }
            const double d = sxx - syy;
            score[std::size_t(y) * w + x] =
                0.5 * (sxx + syy - std::sqrt(d * d + 4.0 * sxy * sxy));
        }
    }
    return score;
}

}  // namespace detail

/// Shi-Tomasi style corner detection with 3x3 non-max suppression and a
/// greedy minimum-distance filter. Returns pixel centers (x+0.5, y+0.5)
/// sorted by descending score; no subpixel refinement.
inline std::vector<Vector2d> detect_corners(const Frame& f, std::size_t max_corners,
                                            double min_distance, double quality) {
    if (quality <= 0.0 || quality > 1.0) throw InvalidInput("quality must be in (0,1]");
    if (min_distance < 1.0) throw InvalidInput("min_distance must be >= 1");

    const int w = f.width, h = f.height;
    const std::vector<double> score = detail::min_eig_scores(f);
    const double max_score = *std::max_element(score.begin(), score.end());
    if (max_score <= 0.0) return {};
    const double threshold = quality * max_score;

    struct Candidate {
        double score;
        int x, y;
    };
    std::vector<Candidate> cands;
    for (int y = 2; y < h - 2; ++y) {
        for (int x = 2; x < w - 2; ++x) {
            const double s = score[std::size_t(y) * w + x];
            if (s < threshold) continue;
            // 3x3 non-max suppression; on plateaus keep the first pixel in
            // scan order
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const double sn = score[std::size_t(y + dy) * w + (x + dx)];
                    if (sn > s || (sn == s && (dy < 0 || (dy == 0 && dx < 0)))) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (is_max) cands.push_back({s, x, y});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });

    const double min_d2 = min_distance * min_distance;
    std::vector<Vector2d> out;
    std::vector<std::pair<int, int>> accepted;
    for (const Candidate& c : cands) {
        if (out.size() >= max_corners) break;
        bool ok = true;
        for (const auto& [ax, ay] : accepted) {
            const double dx = c.x - ax, dy = c.y - ay;
            if (dx * dx + dy * dy < min_d2) {
                ok = false;
                break;
            }
        }
        if (ok) {
            accepted.emplace_back(c.x, c.y);
            out.emplace_back(c.x + 0.5, c.y + 0.5);
        }
    }
    return out;
}

namespace detail {

// Displacement search order: by radius, then scan order. Center first, so
// exact self-matches resolve to (0,0).
inline std::vector<std::pair<int, int>> search_offsets(int radius) {
    std::vector<std::pair<int, int>> offs;
    offs.reserve(std::size_t(2 * radius + 1) * std::size_t(2 * radius + 1));
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) offs.emplace_back(dx, dy);
    std::stable_sort(offs.begin(), offs.end(),
                     [](const std::pair<int, int>& a, const std::pair<int, int>& b) {
                         return a.first * a.first + a.second * a.second <
                                b.first * b.first + b.second * b.second;
                     });
    return offs;
}

}  // namespace detail

/// Zero-normalized cross-correlation block matching over integer
/// displacements. Pairs with peak correlation below 0.5 are dropped; the
/// surviving pair's weight is its peak correlation.
inline CorrespondenceSet match_correspondences(const Frame& a, const Frame& b,
                                               const std::vector<Vector2d>& corners,
                                               int patch, int search_radius) {
    if (patch < 5 || patch % 2 == 0) throw InvalidInput("patch must be odd and >= 5");
    if (a.width != b.width || a.height != b.height) {
        throw InvalidInput("match_correspondences: frame dimensions differ");
    }
    const int half = patch / 2;
    const auto offsets = detail::search_offsets(search_radius);
    CorrespondenceSet out;
    out.reserve(corners.size());

    std::vector<double> pa(std::size_t(patch) * patch);
    for (const Vector2d& corner : corners) {
        const int cx = int(std::floor(corner.x()));
        const int cy = int(std::floor(corner.y()));
        if (cx - half < 0 || cy - half < 0 || cx + half >= a.width || cy + half >= a.height) {
            continue;
        }
        // reference patch statistics
        double sum_a = 0.0;
        for (int dy = -half; dy <= half; ++dy)
            for (int dx = -half; dx <= half; ++dx) {
                const double v = a.at(cx + dx, cy + dy);
                pa[std::size_t(dy + half) * patch + (dx + half)] = v;
                sum_a += v;
            }
        const double n = double(patch) * patch;
        const double mean_a = sum_a / n;
        double var_a = 0.0;
        for (double& v : pa) {
            v -= mean_a;
            var_a += v * v;
        }
        if (var_a <= 0.0) continue;  // flat patch, unmatched

        double best = -2.0;
        int best_dx = 0, best_dy = 0;
        for (const auto& [ox, oy] : offsets) {
            const int bx = cx + ox, by = cy + oy;
            if (bx - half < 0 || by - half < 0 || bx + half >= b.width ||
                by + half >= b.height) {
                continue;
            }
            double sum_b = 0.0, sum_bb = 0.0, sum_ab = 0.0;
            const double* pav = pa.data();
            for (int dy = -half; dy <= half; ++dy) {
                const std::uint8_t* row = &b.data[std::size_t(by + dy) * b.width + (bx - half)];
                for (int dx = 0; dx < patch; ++dx) {
                    const double v = row[dx];
                    sum_b += v;
                    sum_bb += v * v;
                    sum_ab += v * pav[std::size_t(dy + half) * patch + dx];
                }
            }
            const double var_b = sum_bb - sum_b * sum_b / n;
            if (var_b <= 0.0) continue;
            // pa is already zero-mean, so sum_ab is the zero-normalized cross term
            const double corr = sum_ab / std::sqrt(var_a * var_b);
            if (corr > best) {
                best = corr;
                best_dx = ox;
                best_dy = oy;
            }
        }
        if (best < 0.5) continue;
        out.push_back({corner, corner + Vector2d(best_dx, best_dy), std::min(best, 1.0)});
    }
    return out;
}

namespace detail {

// Bilinear sample at (x, y) in integer-center coordinates; caller guarantees
// 0 <= x <= w-1 and 0 <= y <= h-1.
inline double bilinear(const Frame& f, double x, double y) {
    const int x0 = std::min(int(x), f.width - 2 >= 0 ? f.width - 2 : 0);
    const int y0 = std::min(int(y), f.height - 2 >= 0 ? f.height - 2 : 0);
    const double fx = x - x0, fy = y - y0;
    const double v00 = f.at(x0, y0), v10 = f.at(x0 + 1, y0);
    const double v01 = f.at(x0, y0 + 1), v11 = f.at(x0 + 1, y0 + 1);
    return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
}

inline double bilinear_mask(const ValidityMask& m, double x, double y) {
    const int x0 = std::min(int(x), m.width - 2 >= 0 ? m.width - 2 : 0);
    const int y0 = std::min(int(y), m.height - 2 >= 0 ? m.height - 2 : 0);
    const double fx = x - x0, fy = y - y0;
    const double v00 = m.at(x0, y0), v10 = m.at(x0 + 1, y0);
    const double v01 = m.at(x0, y0 + 1), v11 = m.at(x0 + 1, y0 + 1);
    return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
}

}  // namespace detail

/// Inverse-mapped bilinear warp. Destination pixels whose source coordinate
/// falls outside [0, w-1] x [0, h-1] become 0 with mask = false.
inline std::pair<Frame, ValidityMask> warp_frame(const Frame& f, const Homography& w) {
    if (std::abs(w.matrix().determinant()) <= 1e-12) {
        throw SingularWarp("warp homography is singular");
    }
    const Eigen::Matrix3d inv = w.matrix().inverse();
    Frame out(f.width, f.height, 0);
    ValidityMask mask(f.width, f.height, false);
    for (int y = 0; y < f.height; ++y) {
        for (int x = 0; x < f.width; ++x) {
            const Eigen::Vector3d s = inv * Eigen::Vector3d(x, y, 1.0);
            if (std::abs(s.z()) <= 1e-12) continue;
            const double sx = s.x() / s.z();
            const double sy = s.y() / s.z();
            if (sx < 0.0 || sy < 0.0 || sx > f.width - 1.0 || sy > f.height - 1.0) continue;
            out.at(x, y) = std::uint8_t(std::lround(detail::bilinear(f, sx, sy)));
            mask.set(x, y, true);
        }
    }
    return {std::move(out), std::move(mask)};
}

/// Grow the invalid region with a square kernel (the paper's export
/// convention uses kernel 5, 3 iterations).
inline ValidityMask dilate_invalid(const ValidityMask& m, int kernel, int iterations) {
    if (kernel < 1 || kernel % 2 == 0) throw InvalidInput("dilation kernel must be odd");
    const int r = kernel / 2;
    ValidityMask cur = m;
    for (int it = 0; it < iterations; ++it) {
        ValidityMask next = cur;
        for (int y = 0; y < m.height; ++y) {
            for (int x = 0; x < m.width; ++x) {
                if (!cur.at(x, y)) continue;
                bool near_invalid = false;
                for (int dy = -r; dy <= r && !near_invalid; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= m.height) continue;
                    for (int dx = -r; dx <= r; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= m.width) continue;
                        if (!cur.at(xx, yy)) {
                            near_invalid = true;
                            break;
                        }
                    }
                }
                if (near_invalid) next.set(x, y, false);
            }
        }
        cur = std::move(next);
    }
    return cur;
}

}  // namespace egokit::vision
