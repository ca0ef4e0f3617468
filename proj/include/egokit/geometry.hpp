#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "egokit/errors.hpp"

namespace egokit::geometry {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

// Axis-angle rotation vector, principal branch (norm <= pi after log).
using RotVec = Eigen::Vector3d;

inline Matrix3d skew(const Vector3d& v) {
    Matrix3d m;
    m << 0, -v.z(), v.y(),
         v.z(), 0, -v.x(),
        -v.y(), v.x(), 0;
    return m;
}

/// 3x3 projective map in pixel coordinates, stored normalized (m(2,2) == 1).
class Homography {
public:
    Homography() : m_(Matrix3d::Identity()) {}

    // Normalizes by m(2,2) at construction; requires the normalized
    // matrix to be invertible (|det| > 1e-12).
    explicit Homography(const Matrix3d& m) : m_(m) {
        const double w = m_(2, 2);
        if (std::abs(w) <= 1e-300 || !std::isfinite(w)) {
            throw SingularStep("homography has (2,2) entry too close to zero");
        }
        m_ /= w;
        if (std::abs(m_.determinant()) <= 1e-12) {
            throw SingularStep("homography is singular after normalization");
        }
    }

    static Homography identity() { return Homography(); }

    static Homography translation(double tx, double ty) {
        Matrix3d m = Matrix3d::Identity();
        m(0, 2) = tx;
        m(1, 2) = ty;
        return Homography(m);
    }

    // Similarity about an arbitrary center: rotate by theta, scale, translate.
    static Homography similarity(double theta, double scale, double tx, double ty,
                                 double cx = 0.0, double cy = 0.0) {
        const double c = std::cos(theta) * scale;
        const double s = std::sin(theta) * scale;
        Matrix3d m = Matrix3d::Identity();
        m(0, 0) = c;
        m(0, 1) = -s;
        m(1, 0) = s;
        m(1, 1) = c;
        m(0, 2) = tx + cx - (c * cx - s * cy);
        m(1, 2) = ty + cy - (s * cx + c * cy);
        return Homography(m);
    }

    const Matrix3d& matrix() const { return m_; }

    Homography inverse() const { return Homography(Matrix3d(m_.inverse())); }

    // Composition: (a * b) maps x through b first, then a.
    friend Homography operator*(const Homography& a, const Homography& b) {
        return Homography(Matrix3d(a.m_ * b.m_));
    }

private:
    Matrix3d m_;
};

/// Projective application h * [x, 1]^T with the homogeneous division.
inline Vector2d homography_apply(const Homography& h, const Vector2d& x) {
    const Vector3d p = h.matrix() * Vector3d(x.x(), x.y(), 1.0);
    if (std::abs(p.z()) <= 1e-12) {
        throw DegeneratePoint("point maps to the line at infinity");
    }
    return {p.x() / p.z(), p.y() / p.z()};
}

/// Rigid transform: x_out = r * x + t (translation in meters).
struct Pose {
    Matrix3d r = Matrix3d::Identity();
    Vector3d t = Vector3d::Zero();

    Pose() = default;
    Pose(const Matrix3d& rot, const Vector3d& trans) : r(rot), t(trans) {}

    static Pose identity() { return {}; }

    bool rotation_valid(double tol = 1e-9) const {
        return (r.transpose() * r - Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
               std::abs(r.determinant() - 1.0) <= tol;
    }

    Vector3d apply(const Vector3d& p) const { return r * p + t; }

    Pose compose(const Pose& other) const {
        // this after other: x -> this.r * (other.r * x + other.t) + this.t
        return {Matrix3d(r * other.r), Vector3d(r * other.t + t)};
    }

    Pose inverse() const {
        Matrix3d rt = r.transpose();
        return {rt, Vector3d(-(rt * t))};
    }
};

inline void require_rotation(const Matrix3d& r, double tol = 1e-9) {
    const double ortho = (r.transpose() * r - Matrix3d::Identity()).cwiseAbs().maxCoeff();
    const double det_err = std::abs(r.determinant() - 1.0);
    if (ortho > tol || det_err > tol) {
        std::ostringstream oss;
        oss << "matrix is not a rotation (orthogonality error " << ortho
            << ", det error " << det_err << ")";
        throw NotARotation(oss.str());
    }
}

/// Rodrigues exponential. Small angles use the 2nd-order Taylor coefficients.
inline Matrix3d so3_exp(const RotVec& phi) {
    const double theta = phi.norm();
    const Matrix3d k = skew(phi);
    double a, b;  // R = I + a*K + b*K^2 with K unscaled by theta
    if (theta < 1e-8) {
        a = 1.0 - theta * theta / 6.0;
        b = 0.5 - theta * theta / 24.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / (theta * theta);
    }
    return Matrix3d::Identity() + a * k + b * (k * k);
}

/// Principal-branch rotation logarithm, angle in [0, pi].
/// Near 0 the 2nd-order series is used; near pi the axis is recovered
/// from the largest diagonal entry.
inline RotVec so3_log(const Matrix3d& r) {
    require_rotation(r);
    const double cos_theta = std::min(1.0, std::max(-1.0, (r.trace() - 1.0) * 0.5));
    const double theta = std::acos(cos_theta);
    const Vector3d w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));

    if (theta < 1e-7) {
        // log(R) ~ 0.5 * (1 + theta^2/6) * vee(R - R^T)
        return 0.5 * (1.0 + theta * theta / 6.0) * w;
    }
    if (theta > M_PI - 1e-3) {
        // R = I + sin(t) K + (1 - cos(t)) K^2; near pi extract the axis from
        // the dominant diagonal of the symmetric part.
        const double one_minus_cos = 1.0 - cos_theta;
        int i = 0;
        if (r(1, 1) > r(i, i)) i = 1;
        if (r(2, 2) > r(i, i)) i = 2;
        const int j = (i + 1) % 3, k = (i + 2) % 3;
        Vector3d axis;
        axis[i] = std::sqrt(std::max(0.0, (r(i, i) - cos_theta) / one_minus_cos));
        // off-diagonals of the symmetric part give the remaining components
        axis[j] = 0.5 * (r(i, j) + r(j, i)) / (one_minus_cos * axis[i]);
        axis[k] = 0.5 * (r(i, k) + r(k, i)) / (one_minus_cos * axis[i]);
        axis.normalize();
        // fix the sign from the skew part; at exactly pi either sign is valid,
        // pick the one making the largest component positive
        const double proj = axis.dot(w);
        if (proj < 0.0) {
            axis = -axis;
        } else if (proj == 0.0) {
            int m = 0;
            for (int d = 1; d < 3; ++d)
                if (std::abs(axis[d]) > std::abs(axis[m])) m = d;
            if (axis[m] < 0.0) axis = -axis;
        }
        return theta * axis;
    }
    return (theta / (2.0 * std::sin(theta))) * w;
}

/// Least-squares rigid fit (no scale): minimizes sum |R*src_i + t - dst_i|^2.
/// SVD-based orthogonal Procrustes with reflection correction.
inline Pose rigid_fit(const std::vector<Vector3d>& src, const std::vector<Vector3d>& dst) {
    if (src.size() != dst.size()) {
        throw LengthMismatch("rigid_fit: point lists differ in length");
    }
    const std::size_t n = src.size();
    if (n < 3) {
        throw DegenerateConfiguration("rigid_fit: need at least 3 point pairs");
    }
    Vector3d cs = Vector3d::Zero(), cd = Vector3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        cs += src[i];
        cd += dst[i];
    }
    cs /= double(n);
    cd /= double(n);

    Matrix3d h = Matrix3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        h += (src[i] - cs) * (dst[i] - cd).transpose();
    }
    Eigen::JacobiSVD<Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector3d sv = svd.singularValues();
    // Rotation is only determined when the cross-covariance has rank >= 2.
    if (sv(0) <= 1e-12 || sv(1) <= std::max(1e-12, 1e-9 * sv(0))) {
        throw DegenerateConfiguration("rigid_fit: points are collinear or coincident");
    }
    Matrix3d d = Matrix3d::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) {
        d(2, 2) = -1.0;
    }
    const Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();
    return {r, Vector3d(cd - r * cs)};
}

// --- homography line format: 9 ASCII decimals, row-major, one per line ---

inline std::string homography_to_line(const Homography& h) {
    char buf[512];
    const Matrix3d& m = h.matrix();
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g",
                  m(0, 0), m(0, 1), m(0, 2), m(1, 0), m(1, 1), m(1, 2), m(2, 0), m(2, 1),
                  m(2, 2));
    return buf;
}

inline Homography homography_from_line(const std::string& line) {
    std::istringstream iss(line);
    Matrix3d m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            if (!(iss >> m(r, c))) {
                throw IoError("homography line needs 9 numbers: " + line);
            }
    return Homography(m);
}

inline void write_homographies(std::ostream& os, const std::vector<Homography>& hs) {
    for (const auto& h : hs) os << homography_to_line(h) << "\n";
}

inline std::vector<Homography> read_homographies(std::istream& is) {
    std::vector<Homography> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(homography_from_line(line));
    }
    return out;
}

}  // namespace egokit::geometry
