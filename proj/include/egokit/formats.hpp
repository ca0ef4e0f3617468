#pragma once

#include <json.hpp>

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "egokit/errors.hpp"
#include "egokit/geometry.hpp"
#include "egokit/metrics.hpp"
#include "egokit/retarget.hpp"
#include "egokit/stabilizer.hpp"

namespace egokit::formats {

using nlohmann::json;

// --- small helpers ---

inline json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Eigen::Vector3d vec3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw IoError("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json mat3_to_json(const Eigen::Matrix3d& m) {
    json a = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
    return a;
}

inline Eigen::Matrix3d mat3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 9) throw IoError("expected 9 row-major matrix entries");
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = j[std::size_t(3 * r + c)].get<double>();
    return m;
}

inline json pose_to_json(const geometry::Pose& p) {
    return json{{"r", mat3_to_json(p.r)}, {"t", vec3_to_json(p.t)}};
}

inline geometry::Pose pose_from_json(const json& j) {
    return {mat3_from_json(j.at("r")), vec3_from_json(j.at("t"))};
}

// --- kinematic chain spec ---

inline retarget::KinematicChain chain_from_json(const json& j) {
    retarget::KinematicChain chain;
    for (const json& joint : j.at("joints")) {
        retarget::Joint out;
        out.axis = vec3_from_json(joint.at("axis"));
        out.origin = pose_from_json(joint.at("origin"));
        out.lower = joint.at("lower").get<double>();
        out.upper = joint.at("upper").get<double>();
        chain.joints.push_back(out);
    }
    if (j.contains("base")) chain.base = pose_from_json(j.at("base"));
    if (j.contains("tool")) chain.tool = pose_from_json(j.at("tool"));
    chain.validate();
    return chain;
}

inline json chain_to_json(const retarget::KinematicChain& chain) {
    json joints = json::array();
    for (const retarget::Joint& jt : chain.joints) {
        joints.push_back(json{{"axis", vec3_to_json(jt.axis)},
                              {"origin", pose_to_json(jt.origin)},
                              {"lower", jt.lower},
                              {"upper", jt.upper}});
    }
    return json{{"joints", joints},
                {"base", pose_to_json(chain.base)},
                {"tool", pose_to_json(chain.tool)}};
}

inline retarget::KinematicChain load_chain(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open chain spec: " + path);
    json j;
    is >> j;
    return chain_from_json(j);
}

// --- calibration (R_HR, t_HR) ---

inline geometry::Pose load_calibration(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open calibration: " + path);
    json j;
    is >> j;
    geometry::Pose cal = pose_from_json(j);
    if (!cal.rotation_valid()) throw NotARotation("calibration rotation is invalid");
    return cal;
}

inline void save_calibration(const std::string& path, const geometry::Pose& cal) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write calibration: " + path);
    os << pose_to_json(cal).dump(2) << "\n";
}

// --- hand keypoints, JSON-lines, one frame per line ---

inline retarget::HandKeypoints hand_from_json(const json& j) {
    retarget::HandKeypoints k;
    k.wrist = vec3_from_json(j.at("wrist"));
    const json& mcp = j.at("mcp");
    const json& tips = j.at("tips");
    if (mcp.size() != 5 || tips.size() != 5) {
        throw IoError("keypoints need 5 mcp and 5 tip entries");
    }
    for (std::size_t i = 0; i < 5; ++i) {
        k.mcp[i] = vec3_from_json(mcp[i]);
        k.tips[i] = vec3_from_json(tips[i]);
    }
    if (j.contains("body_origin")) k.body_origin = vec3_from_json(j.at("body_origin"));
    if (j.contains("body_rot")) k.body_rot = mat3_from_json(j.at("body_rot"));
    if (j.contains("timestamp")) k.timestamp = j.at("timestamp").get<double>();
    return k;
}

inline json hand_to_json(const retarget::HandKeypoints& k) {
    json mcp = json::array(), tips = json::array();
    for (std::size_t i = 0; i < 5; ++i) {
        mcp.push_back(vec3_to_json(k.mcp[i]));
        tips.push_back(vec3_to_json(k.tips[i]));
    }
    return json{{"wrist", vec3_to_json(k.wrist)}, {"mcp", mcp},
                {"tips", tips},                   {"body_origin", vec3_to_json(k.body_origin)},
                {"body_rot", mat3_to_json(k.body_rot)}, {"timestamp", k.timestamp}};
}

/// One bimanual observation; either hand may be absent.
struct KeypointFrame {
    std::optional<retarget::HandKeypoints> left;
    std::optional<retarget::HandKeypoints> right;
};

/// Reads JSON-lines keypoints. Frames without timestamps are stamped at
/// 30 fps intervals unless `fps` overrides it.
inline std::vector<KeypointFrame> load_keypoints(const std::string& path, double fps = 30.0) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open keypoints: " + path);
    std::vector<KeypointFrame> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError("keypoints line " + std::to_string(line_no) + ": " + e.what());
        }
        KeypointFrame f;
        if (j.contains("left")) f.left = hand_from_json(j.at("left"));
        if (j.contains("right")) f.right = hand_from_json(j.at("right"));
        if (!f.left && !f.right) {
            throw IoError("keypoints line " + std::to_string(line_no) +
                          ": needs a \"left\" or \"right\" hand");
        }
        const bool has_ts = (f.left && j.at("left").contains("timestamp")) ||
                            (f.right && j.at("right").contains("timestamp"));
        if (!has_ts) {
            const double t = double(out.size()) / fps;
            if (f.left) f.left->timestamp = t;
            if (f.right) f.right->timestamp = t;
        }
        out.push_back(std::move(f));
    }
    return out;
}

// --- trajectory CSV: t,qL1..qL6,gL,qR1..qR6,gR at 9 significant digits ---

inline void write_trajectory_csv(std::ostream& os,
                                 const std::vector<double>& times,
                                 const std::vector<Eigen::Matrix<double, 14, 1>>& actions) {
    os << "t,qL1,qL2,qL3,qL4,qL5,qL6,gL,qR1,qR2,qR3,qR4,qR5,qR6,gR\n";
    char buf[64];
    for (std::size_t i = 0; i < actions.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9g", times[i]);
        os << buf;
        for (int k = 0; k < 14; ++k) {
            std::snprintf(buf, sizeof(buf), "%.9g", actions[i][k]);
            os << "," << buf;
        }
        os << "\n";
    }
}

inline std::pair<std::vector<double>, std::vector<Eigen::Matrix<double, 14, 1>>>
read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("trajectory CSV is empty");
    std::vector<double> times;
    std::vector<Eigen::Matrix<double, 14, 1>> actions;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream iss(line);
        double t;
        Eigen::Matrix<double, 14, 1> a;
        if (!(iss >> t)) throw IoError("bad trajectory line: " + line);
        for (int k = 0; k < 14; ++k) {
            if (!(iss >> a[k])) throw IoError("bad trajectory line: " + line);
        }
        times.push_back(t);
        actions.push_back(a);
    }
    return {std::move(times), std::move(actions)};
}

}  // namespace egokit::formats
