#include "uscd/occlusion.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace uscd {

float sample_depth(const DepthMap& depth, const Eigen::Vector2d& p) {
    if (!(p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= depth.width() - 1 && p.y() <= depth.height() - 1)) {
        throw std::out_of_range("sample_depth: coordinate outside the depth map");
    }
    const Eigen::Vector2i q = nearest_pixel(p);
    return depth(q.x(), q.y());
}

double median(std::span<const double> values) {
    if (values.empty()) throw ValidationError("median of an empty sequence");
    std::vector<double> v(values.begin(), values.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
        m = 0.5 * (m + lower);
    }
    return m;
}

AdaptiveTau adaptive_tau(const DepthMap& depth_other, std::span<const double> delta, double alpha, double kappa) {
    if (!(alpha > 0.0) || !(kappa > 0.0)) throw ValidationError("alpha and kappa must be positive");
    if (delta.empty()) throw ValidationError("no overlap; occlusion undefined");

    std::vector<double> depths;
    depths.reserve(depth_other.size());
    for (float d : depth_other.values()) {
        if (d > 0.0f && std::isfinite(d)) depths.push_back(d);
    }
    if (depths.empty()) throw ValidationError("other view has no valid depth");

    AdaptiveTau out;
    out.depth_median = median(depths);
    out.delta.median = median(delta);
    std::vector<double> dev(delta.size());
    std::transform(delta.begin(), delta.end(), dev.begin(),
                   [m = out.delta.median](double x) { return std::abs(x - m); });
    out.delta.mad = median(dev);
    out.tau = std::max(alpha * out.depth_median, out.delta.median + kappa * out.delta.mad);
    return out;
}

OcclusionMask occlusion_mask(const CorrespondenceField& field, const DepthMap& depth_other, double alpha,
                             double kappa) {
    if (!depth_other.same_shape(field.target_height, field.target_width)) {
        throw ValidationError("other-view depth does not match the correspondence target size");
    }
    const int h = field.height();
    const int w = field.width();

    std::vector<double> delta;
    Grid<double> delta_map(h, w, 1, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!field.valid(x, y)) continue;
            const float other = sample_depth(depth_other, field.at(x, y));
            // No surface in the other view: the comparison is undefined, never an occlusion.
            if (!(other > 0.0f) || !std::isfinite(other)) continue;
            const double d = static_cast<double>(field.depth_in_target(x, y)) - static_cast<double>(other);
            delta_map(x, y) = d;
            delta.push_back(d);
        }
    }

    OcclusionMask out;
    out.threshold = adaptive_tau(depth_other, delta, alpha, kappa);
    out.mask = Mask(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (field.valid(x, y) && delta_map(x, y) > out.threshold.tau) out.mask(x, y) = 1;
        }
    }
    return out;
}

}  // namespace uscd
