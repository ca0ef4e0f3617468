#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace egokit::filtering {

/// Truncated Gaussian kernel, radius = ceil(3*sigma), normalized to sum 1.
inline std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(0, int(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[std::size_t(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

/// Low-pass filter with a truncated Gaussian. At the sequence ends the
/// kernel is clipped to the available samples and renormalized, so no
/// padding values are invented and constants pass through unchanged.
inline std::vector<double> gaussian_smooth(const std::vector<double>& x, double sigma) {
    if (x.empty()) return {};
    const std::vector<double> k = gaussian_kernel(sigma);
    const int radius = (int(k.size()) - 1) / 2;
    const int n = int(x.size());
    std::vector<double> out(x.size());
    for (int t = 0; t < n; ++t) {
        double acc = 0.0, wsum = 0.0;
        const int lo = std::max(0, t - radius);
        const int hi = std::min(n - 1, t + radius);
        for (int s = lo; s <= hi; ++s) {
            const double w = k[std::size_t(s - t + radius)];
            acc += w * x[std::size_t(s)];
            wsum += w;
        }
        out[std::size_t(t)] = acc / wsum;
    }
    return out;
}

/// Sliding median with an edge-truncated window (window odd; at the ends the
/// window is clipped to the sequence). Even-size clipped windows take the
/// upper median.
inline std::vector<double> sliding_median(const std::vector<double>& x, int window) {
    const int n = int(x.size());
    const int radius = window / 2;
    std::vector<double> out(x.size());
    std::vector<double> buf;
    for (int t = 0; t < n; ++t) {
        const int lo = std::max(0, t - radius);
        const int hi = std::min(n - 1, t + radius);
        buf.assign(x.begin() + lo, x.begin() + hi + 1);
        auto mid = buf.begin() + long(buf.size() / 2);
        std::nth_element(buf.begin(), mid, buf.end());
        out[std::size_t(t)] = *mid;
    }
    return out;
}

}  // namespace egokit::filtering
