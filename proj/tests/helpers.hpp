#pragma once

#include <Eigen/Dense>
#include <random>

#include "egokit/geometry.hpp"
#include "egokit/vision.hpp"

namespace testutil {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * double(rng() >> 11) / double(1ULL << 53);
}

inline Eigen::Vector3d random_unit(std::mt19937_64& rng) {
    Eigen::Vector3d v;
    do {
        v = {uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
    } while (v.norm() < 1e-3);
    return v.normalized();
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng,
                                       double max_angle = M_PI - 1e-6) {
    return egokit::geometry::so3_exp(random_unit(rng) * uniform(rng, -max_angle, max_angle));
}

// Hard-edged checkerboard with `cells` squares per side of `cell` pixels.
inline egokit::vision::Frame checkerboard(int cells, int cell) {
    const int side = cells * cell;
    egokit::vision::Frame f(side, side);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            f.at(x, y) = ((x / cell + y / cell) % 2 == 0) ? 220 : 30;
        }
    }
    return f;
}

// Naive truncated-Gaussian convolution, independent of the library path.
inline std::vector<double> smooth_oracle(const std::vector<double>& x, double sigma) {
    const int radius = int(std::ceil(3.0 * sigma));
    std::vector<double> out(x.size());
    for (int t = 0; t < int(x.size()); ++t) {
        double acc = 0.0, wsum = 0.0;
        for (int s = -radius; s <= radius; ++s) {
            const int i = t + s;
            if (i < 0 || i >= int(x.size())) continue;
            const double w = std::exp(-0.5 * s * s / (sigma * sigma));
            acc += w * x[std::size_t(i)];
            wsum += w;
        }
        out[std::size_t(t)] = acc / wsum;
    }
    return out;
}

}  // namespace testutil
