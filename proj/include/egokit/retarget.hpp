#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <vector>

#include "egokit/errors.hpp"
#include "egokit/filtering.hpp"
#include "egokit/geometry.hpp"

namespace egokit::retarget {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;
using geometry::Pose;

struct Joint {
    Vector3d axis;   // unit rotation axis in the joint's local frame
    Pose origin;     // fixed transform from the parent link
    double lower;    // joint limit, radians
    double upper;
};

/// Serial revolute chain: base -> (origin_i, rot(axis_i, q_i))* -> tool.
struct KinematicChain {
    std::vector<Joint> joints;
    Pose base;
    Pose tool;

    std::size_t dof() const { return joints.size(); }

    void validate() const {
        if (joints.empty() || joints.size() > 12) {
            throw InvalidInput("chain must have between 1 and 12 joints");
        }
        for (const Joint& j : joints) {
            if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
                throw InvalidInput("joint axis must be unit length");
            }
            if (!(j.lower < j.upper)) {
                throw InvalidInput("joint limits must satisfy lower < upper");
            }
        }
    }

    VectorXd clamp(const VectorXd& q) const {
        VectorXd out = q;
        for (std::size_t i = 0; i < joints.size(); ++i) {
            out[long(i)] = std::clamp(q[long(i)], joints[i].lower, joints[i].upper);
        }
        return out;
    }
};

/// One hand observation, meters. Finger order is anatomical:
/// 0 thumb, 1 index, 2 middle, 3 ring, 4 pinky.
struct HandKeypoints {
    Vector3d wrist = Vector3d::Zero();
    std::array<Vector3d, 5> mcp{};
    std::array<Vector3d, 5> tips{};
    Vector3d body_origin = Vector3d::Zero();
    Matrix3d body_rot = Matrix3d::Identity();
    double timestamp = 0.0;
};

struct ArmAction {
    Eigen::Matrix<double, 6, 1> q = Eigen::Matrix<double, 6, 1>::Zero();
    double g = 0.0;
};

struct IkParams {
    Vector3d w_tilt{1.0, 1.0, 0.05};  // tool-frame tilt weights, w_z <= w_x, w_y
    double lambda = 0.01;             // pull toward the previous trajectory solution
    double mu = 0.05;                 // DLS damping
    int max_iters = 100;
    double pos_tol = 1e-4;            // meters
    double rot_tol = 1e-3;            // weighted tilt norm, radians

    void validate() const {
        if (!(w_tilt.z() <= w_tilt.x() && w_tilt.z() <= w_tilt.y()) || w_tilt.minCoeff() < 0) {
            throw InvalidInput("tilt weights must be nonnegative with w_z <= w_x, w_y");
        }
        if (mu <= 0.0) throw InvalidInput("damping mu must be positive");
        if (lambda < 0.0) throw InvalidInput("lambda must be nonnegative");
    }
};

/// Express all keypoints in the body frame: p_B = R_B^T (p - o_B).
inline HandKeypoints body_normalize(const HandKeypoints& k) {
    geometry::require_rotation(k.body_rot);
    const Matrix3d rt = k.body_rot.transpose();
    HandKeypoints out = k;
    out.wrist = rt * (k.wrist - k.body_origin);
    for (int i = 0; i < 5; ++i) {
        out.mcp[std::size_t(i)] = rt * (k.mcp[std::size_t(i)] - k.body_origin);
        out.tips[std::size_t(i)] = rt * (k.tips[std::size_t(i)] - k.body_origin);
    }
    out.body_origin = Vector3d::Zero();
    out.body_rot = Matrix3d::Identity();
    return out;
}

/// Wrist pose from anatomical axes. x points from the wrist toward the mean
/// of the first `averaged_mcps` knuckles; the palm normal (index x pinky)
/// is orthogonalized against x to give z; y completes the frame.
inline Pose wrist_pose(const HandKeypoints& k, int averaged_mcps = 3) {
    if (averaged_mcps < 1 || averaged_mcps > 5) {
        throw InvalidInput("averaged_mcps must be in [1,5]");
    }
    Vector3d mean = Vector3d::Zero();
    for (int i = 0; i < averaged_mcps; ++i) mean += k.mcp[std::size_t(i)];
    mean /= double(averaged_mcps);

    Vector3d x = mean - k.wrist;
    if (x.norm() < 1e-9) throw DegenerateHand("knuckle centroid coincides with the wrist");
    x.normalize();

    const Vector3d n = (k.mcp[1] - k.wrist).cross(k.mcp[4] - k.wrist);
    if (n.norm() < 1e-9) throw DegenerateHand("hand landmarks are collinear");
    Vector3d z = n.normalized();
    z -= z.dot(x) * x;
    if (z.norm() < 1e-9) throw DegenerateHand("palm normal is parallel to the hand axis");
    z.normalize();
    const Vector3d y = z.cross(x);

    Matrix3d r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    return {r, k.wrist};
}

/// Registration into the robot base frame: p* = R_HR p + t_HR, R* = R_HR R.
inline Pose to_robot_frame(const Pose& p, const Pose& cal) {
    return cal.compose(p);
}

inline Pose forward_kinematics(const KinematicChain& chain, const VectorXd& q) {
    if (std::size_t(q.size()) != chain.dof()) {
        throw DimensionMismatch("q dimension does not match chain");
    }
    Pose t = chain.base;
    for (std::size_t i = 0; i < chain.dof(); ++i) {
        t = t.compose(chain.joints[i].origin);
        t = t.compose(Pose(geometry::so3_exp(chain.joints[i].axis * q[long(i)]),
                           Vector3d::Zero()));
    }
    return t.compose(chain.tool);
}

/// Geometric Jacobian, rows 0-2 linear (m/rad) and 3-5 angular (rad/rad),
/// both in the world frame. Column i = (z_i x (p_EE - p_i), z_i).
inline MatrixXd jacobian(const KinematicChain& chain, const VectorXd& q) {
    if (std::size_t(q.size()) != chain.dof()) {
        throw DimensionMismatch("q dimension does not match chain");
    }
    const std::size_t n = chain.dof();
    std::vector<Vector3d> axis_world(n), origin_world(n);
    Pose t = chain.base;
    for (std::size_t i = 0; i < n; ++i) {
        t = t.compose(chain.joints[i].origin);
        axis_world[i] = t.r * chain.joints[i].axis;
        origin_world[i] = t.t;
        t = t.compose(Pose(geometry::so3_exp(chain.joints[i].axis * q[long(i)]),
                           Vector3d::Zero()));
    }
    const Vector3d p_ee = t.compose(chain.tool).t;

    MatrixXd j(6, long(n));
    for (std::size_t i = 0; i < n; ++i) {
        j.block<3, 1>(0, long(i)) = axis_world[i].cross(p_ee - origin_world[i]);
        j.block<3, 1>(3, long(i)) = axis_world[i];
    }
    return j;
}

struct TiltError {
    Vector3d phi;          // world-frame rotation log of r_target * r_ee^T
    double weighted_norm;  // tilt norm with the weights applied in the tool frame
};

/// Orientation error with the roll channel softly masked: the log of the
/// error rotation is re-expressed in the EE tool frame before weighting, so
/// w_z always acts on roll about the tool z-axis.
inline TiltError tilt_error(const Matrix3d& r_target, const Matrix3d& r_ee,
                            const Vector3d& w) {
    const Vector3d phi = geometry::so3_log(r_target * r_ee.transpose());
    const Vector3d phi_tool = r_ee.transpose() * phi;
    const double norm = std::sqrt(phi_tool.dot(w.cwiseProduct(phi_tool)));
    return {phi, norm};
}

/// One damped-least-squares update with the smoothness pull and hard limit
/// clipping: dq = J^T (J J^T + mu^2 I)^-1 e - lambda (q - q_prev), then
/// q' = clip(q + dq).
inline VectorXd ik_step(const KinematicChain& chain, const VectorXd& q, const Pose& target,
                        const VectorXd& q_prev, const IkParams& p) {
    if (q.size() != q_prev.size() || std::size_t(q.size()) != chain.dof()) {
        throw DimensionMismatch("ik_step: inconsistent dimensions");
    }
    const Pose fk = forward_kinematics(chain, q);
    const MatrixXd j = jacobian(chain, q);

    const Vector3d w_sqrt = p.w_tilt.cwiseSqrt();
    const Vector3d phi_world = geometry::so3_log(target.r * fk.r.transpose());
    const Vector3d phi_tool = fk.r.transpose() * phi_world;

    Eigen::Matrix<double, 6, 1> e;
    e.head<3>() = target.t - fk.t;
    e.tail<3>() = w_sqrt.cwiseProduct(phi_tool);

    MatrixXd jw(6, j.cols());
    jw.topRows(3) = j.topRows(3);
    jw.bottomRows(3) = w_sqrt.asDiagonal() * (fk.r.transpose() * j.bottomRows(3));

    const Eigen::Matrix<double, 6, 6> a =
        jw * jw.transpose() + p.mu * p.mu * Eigen::Matrix<double, 6, 6>::Identity();
    const VectorXd dq = jw.transpose() * a.ldlt().solve(e) - p.lambda * (q - q_prev);
    return chain.clamp(q + dq);
}

struct IkResult {
    VectorXd q;
    bool converged = false;
    double pos_err = 0.0;
    double tilt_err = 0.0;  // weighted tilt norm
    int iterations = 0;
};

/// Iterated DLS from the warm start q_prev. Stops on tolerance, a stalled
/// step (inf-norm < 1e-10), or max_iters; `converged` reflects only the
/// tolerance branch.
inline IkResult solve_ik(const KinematicChain& chain, const Pose& target,
                         const VectorXd& q_prev, const IkParams& p) {
    p.validate();
    IkResult res;
    res.q = chain.clamp(q_prev);

    auto residuals = [&](const VectorXd& q) {
        const Pose fk = forward_kinematics(chain, q);
        res.pos_err = (target.t - fk.t).norm();
        res.tilt_err = tilt_error(target.r, fk.r, p.w_tilt).weighted_norm;
    };

    for (int iter = 0; iter < p.max_iters; ++iter) {
        residuals(res.q);
        if (res.pos_err < p.pos_tol && res.tilt_err < p.rot_tol) {
            res.converged = true;
            res.iterations = iter;
            return res;
        }
        const VectorXd next = ik_step(chain, res.q, target, q_prev, p);
        const double step = (next - res.q).lpNorm<Eigen::Infinity>();
        res.q = next;
        res.iterations = iter + 1;
        if (step < 1e-10) break;
    }
    residuals(res.q);
    res.converged = res.pos_err < p.pos_tol && res.tilt_err < p.rot_tol;
    return res;
}

struct TrajectoryResult {
    std::vector<VectorXd> q;
    std::vector<IkResult> per_frame;
    std::vector<double> step_norms;  // |q_t - q_{t-1}| per step
};

/// Sequential IK over a target sequence, each solution warm-starting the next.
inline TrajectoryResult solve_trajectory(const KinematicChain& chain,
                                         const std::vector<Pose>& targets,
                                         const VectorXd& q0, const IkParams& p) {
    if (targets.empty()) throw InvalidInput("solve_trajectory: empty target sequence");
    TrajectoryResult out;
    out.q.reserve(targets.size());
    VectorXd q_prev = chain.clamp(q0);
    for (const Pose& target : targets) {
        IkResult r = solve_ik(chain, target, q_prev, p);
        out.step_norms.push_back((r.q - q_prev).norm());
        q_prev = r.q;
        out.q.push_back(r.q);
        out.per_frame.push_back(std::move(r));
    }
    return out;
}

/// Binary open/close command from hand openness
/// |thumb_tip - index_tip| / |middle_mcp - wrist|, thresholded (>= is open)
/// and cleaned up with a short median filter.
inline std::vector<double> gripper_signal(const std::vector<HandKeypoints>& seq,
                                          double threshold, int window) {
    if (window < 1 || window % 2 == 0) throw InvalidInput("window must be odd and >= 1");
    std::vector<double> g(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t) {
        const double palm = (seq[t].mcp[2] - seq[t].wrist).norm();
        if (palm < 1e-3) {
            throw DegenerateHand("palm length below 1 mm", long(t));
        }
        const double openness = (seq[t].tips[0] - seq[t].tips[1]).norm() / palm;
        g[t] = openness >= threshold ? 1.0 : 0.0;
    }
    return filtering::sliding_median(g, window);
}

/// Bimanual action layout [qL1..qL6, gL, qR1..qR6, gR].
inline Eigen::Matrix<double, 14, 1> assemble_action(const ArmAction& left,
                                                    const ArmAction& right) {
    Eigen::Matrix<double, 14, 1> a;
    a.segment<6>(0) = left.q;
    a[6] = left.g;
    a.segment<6>(7) = right.q;
    a[13] = right.g;
    return a;
}

}  // namespace egokit::retarget
