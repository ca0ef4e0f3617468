#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "egokit/errors.hpp"

namespace egokit::genmath {

/// Dense row-major tensor of doubles.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (element_count(shape) != data.size()) {
            throw ShapeMismatch("tensor data length does not match shape");
        }
        for (double v : data) {
            if (!std::isfinite(v)) throw InvalidInput("tensor data must be finite");
        }
    }
    static Tensor zeros(std::vector<std::size_t> s) {
        const std::size_t n = element_count(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static std::size_t element_count(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t(1),
                               std::multiplies<std::size_t>());
    }
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) throw ShapeMismatch(std::string(op) + ": tensor shapes differ");
}

/// Interpolation schedule with analytic derivatives; the endpoint
/// constraints are alpha(0) = 0, alpha(1) = 1, sigma(1) = 0.
struct FlowSchedule {
    std::string name;
    std::function<double(double)> alpha;
    std::function<double(double)> sigma;
    std::function<double(double)> alpha_dot;
    std::function<double(double)> sigma_dot;
};

inline void validate_schedule(const FlowSchedule& s, double tol = 1e-12) {
    if (std::abs(s.alpha(0.0)) > tol) {
        throw BadSchedule(s.name + ": alpha(0) != 0");
    }
    if (std::abs(s.alpha(1.0) - 1.0) > tol) {
        throw BadSchedule(s.name + ": alpha(1) != 1");
    }
    if (std::abs(s.sigma(1.0)) > tol) {
        throw BadSchedule(s.name + ": sigma(1) != 0");
    }
}

inline FlowSchedule linear_schedule() {
    FlowSchedule s;
    s.name = "linear";
    s.alpha = [](double t) { return t; };
    s.sigma = [](double t) { return 1.0 - t; };
    s.alpha_dot = [](double) { return 1.0; };
    s.sigma_dot = [](double) { return -1.0; };
    validate_schedule(s);
    return s;
}

inline FlowSchedule trig_schedule() {
    FlowSchedule s;
    s.name = "trig";
    s.alpha = [](double t) { return std::sin(M_PI_2 * t); };
    s.sigma = [](double t) { return std::cos(M_PI_2 * t); };
    s.alpha_dot = [](double t) { return M_PI_2 * std::cos(M_PI_2 * t); };
    s.sigma_dot = [](double t) { return -M_PI_2 * std::sin(M_PI_2 * t); };
    validate_schedule(s);
    return s;
}

/// y_t = alpha(t) a + sigma(t) eps.
inline Tensor cfm_interpolant(const Tensor& a, const Tensor& eps, double t,
                              const FlowSchedule& s) {
    require_same_shape(a, eps, "cfm_interpolant");
    if (t < 0.0 || t > 1.0) throw InvalidInput("t must be in [0,1]");
    const double ca = s.alpha(t), ce = s.sigma(t);
    Tensor out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = ca * a.data[i] + ce * eps.data[i];
    }
    return out;
}

/// u*(y_t | a, eps, t) = alpha_dot(t) a + sigma_dot(t) eps.
inline Tensor cfm_target_velocity(const Tensor& a, const Tensor& eps, double t,
                                  const FlowSchedule& s) {
    require_same_shape(a, eps, "cfm_target_velocity");
    if (t < 0.0 || t > 1.0) throw InvalidInput("t must be in [0,1]");
    const double ca = s.alpha_dot(t), ce = s.sigma_dot(t);
    Tensor out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = ca * a.data[i] + ce * eps.data[i];
    }
    return out;
}

/// Mean squared elementwise difference (the batch-mean form of the
/// flow-matching objective; the velocity predictor is caller-supplied).
inline double cfm_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "cfm_loss");
    double ss = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        ss += d * d;
    }
    return ss / double(pred.data.size());
}

/// Cumulative noise products for the forward diffusion corruption,
/// each in (0, 1] and nonincreasing.
struct DiffusionSchedule {
    std::vector<double> alpha_bar;

    explicit DiffusionSchedule(std::vector<double> ab) : alpha_bar(std::move(ab)) {
        if (alpha_bar.empty()) throw BadSchedule("alpha_bar sequence is empty");
        double prev = 1.0 + 1e-15;
        for (double v : alpha_bar) {
            if (!(v > 0.0 && v <= 1.0)) throw BadSchedule("alpha_bar must lie in (0,1]");
            if (v > prev) throw BadSchedule("alpha_bar must be nonincreasing");
            prev = v;
        }
    }

    // cumulative product of (1 - beta_t) for a linear beta ramp
    static DiffusionSchedule linear_beta(std::size_t steps, double beta_start = 1e-4,
                                         double beta_end = 0.02) {
        std::vector<double> ab(steps);
        double prod = 1.0;
        for (std::size_t t = 0; t < steps; ++t) {
            const double beta =
                steps > 1 ? beta_start + (beta_end - beta_start) * double(t) / double(steps - 1)
                          : beta_start;
            prod *= 1.0 - beta;
            ab[t] = prod;
        }
        return DiffusionSchedule(std::move(ab));
    }
};

/// sqrt(alpha_bar) z + sqrt(1 - alpha_bar) eps.
inline Tensor ddpm_noise(const Tensor& z, const Tensor& eps, double alpha_bar_t) {
    require_same_shape(z, eps, "ddpm_noise");
    if (!(alpha_bar_t > 0.0 && alpha_bar_t <= 1.0)) {
        throw BadSchedule("alpha_bar_t must lie in (0,1]");
    }
    const double cz = std::sqrt(alpha_bar_t);
    const double ce = std::sqrt(1.0 - alpha_bar_t);
    Tensor out = z;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = cz * z.data[i] + ce * eps.data[i];
    }
    return out;
}

/// Concatenate along `channel_axis`; all other extents must match and the
/// caller's ordering is preserved ([target, scene, sim] in the pipeline).
inline Tensor concat_channels(const std::vector<Tensor>& parts, std::size_t channel_axis = 0) {
    if (parts.empty()) throw ShapeMismatch("concat_channels: no parts");
    const std::vector<std::size_t>& ref = parts[0].shape;
    if (channel_axis >= ref.size()) throw ShapeMismatch("channel axis out of range");
    std::size_t total_channels = 0;
    for (const Tensor& p : parts) {
        if (p.shape.size() != ref.size()) {
            throw ShapeMismatch("concat_channels: rank differs");
        }
        for (std::size_t d = 0; d < ref.size(); ++d) {
            if (d != channel_axis && p.shape[d] != ref[d]) {
                throw ShapeMismatch("concat_channels: non-channel extents differ");
            }
        }
        total_channels += p.shape[channel_axis];
    }

    std::vector<std::size_t> out_shape = ref;
    out_shape[channel_axis] = total_channels;
    Tensor out = Tensor::zeros(out_shape);

    // outer = extents before the axis, inner = extents after it
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < channel_axis; ++d) outer *= ref[d];
    for (std::size_t d = channel_axis + 1; d < ref.size(); ++d) inner *= ref[d];

    std::size_t channel_offset = 0;
    for (const Tensor& p : parts) {
        const std::size_t pc = p.shape[channel_axis];
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t ch = 0; ch < pc; ++ch) {
                const double* src = p.data.data() + (o * pc + ch) * inner;
                double* dst =
                    out.data.data() + (o * total_channels + channel_offset + ch) * inner;
                std::copy(src, src + inner, dst);
            }
        }
        channel_offset += pc;
    }
    return out;
}

/// Slice channels [begin, begin+count) back out of a concatenated tensor.
inline Tensor split_channels(const Tensor& t, std::size_t channel_axis, std::size_t begin,
                             std::size_t count) {
    if (channel_axis >= t.shape.size()) throw ShapeMismatch("channel axis out of range");
    const std::size_t channels = t.shape[channel_axis];
    if (begin + count > channels) throw ShapeMismatch("split_channels: slice out of range");

    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < channel_axis; ++d) outer *= t.shape[d];
    for (std::size_t d = channel_axis + 1; d < t.shape.size(); ++d) inner *= t.shape[d];

    std::vector<std::size_t> out_shape = t.shape;
    out_shape[channel_axis] = count;
    Tensor out = Tensor::zeros(out_shape);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t ch = 0; ch < count; ++ch) {
            const double* src = t.data.data() + (o * channels + begin + ch) * inner;
            double* dst = out.data.data() + (o * count + ch) * inner;
            std::copy(src, src + inner, dst);
        }
    }
    return out;
}

// --- tensor text format: one line of shape extents, then flat values ---

inline void write_tensor(std::ostream& os, const Tensor& t) {
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        os << (i ? " " : "") << t.shape[i];
    }
    os << "\n";
    char buf[64];
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", t.data[i]);
        os << buf << (i + 1 == t.data.size() ? "" : " ");
    }
    os << "\n";
}

inline Tensor read_tensor(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("tensor stream is empty");
    std::istringstream shape_in(line);
    std::vector<std::size_t> shape;
    std::size_t e;
    while (shape_in >> e) shape.push_back(e);
    const std::size_t n = Tensor::element_count(shape);
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(is >> data[i])) throw IoError("tensor stream truncated");
    }
    return Tensor(std::move(shape), std::move(data));
}

}  // namespace egokit::genmath
