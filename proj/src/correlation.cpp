#include "uscd/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace uscd {

FeatureTensor::FeatureTensor(int heads, int height, int width, int dim)
    : heads(heads), height(height), width(width), dim(dim) {
    if (heads < 1 || height < 0 || width < 0 || dim < 1) throw ValidationError("invalid feature tensor dimensions");
    data.assign(static_cast<std::size_t>(heads) * height * width * dim, 0.0f);
}

void FeatureTensor::validate() const {
    if (heads < 1 || height < 1 || width < 1 || dim < 1) throw ValidationError("invalid feature tensor dimensions");
    if (data.size() != static_cast<std::size_t>(heads) * height * width * dim) {
        throw ValidationError("feature tensor payload does not match its dimensions");
    }
    for (float v : data) {
        if (!std::isfinite(v)) throw ValidationError("feature tensor holds non-finite values");
    }
}

FeatureTensor resize_features(const FeatureTensor& raw, int height, int width) {
    raw.validate();
    if (raw.height < 2 || raw.width < 2) throw ValidationError("resize_features: source grid must be at least 2×2");
    if (height < 1 || width < 1) throw ValidationError("resize_features: target size must be positive");
    if (raw.height == height && raw.width == width) return raw;

    FeatureTensor out(raw.heads, height, width, raw.dim);
    auto source_coord = [](int dst, int dst_len, int src_len) {
        return dst_len > 1 ? static_cast<double>(dst) * (src_len - 1) / (dst_len - 1) : 0.0;
    };
    for (int y = 0; y < height; ++y) {
        const double sy = source_coord(y, height, raw.height);
        const int y0 = std::min(static_cast<int>(std::floor(sy)), raw.height - 2);
        const double fy = sy - y0;
        for (int x = 0; x < width; ++x) {
            const double sx = source_coord(x, width, raw.width);
            const int x0 = std::min(static_cast<int>(std::floor(sx)), raw.width - 2);
            const double fx = sx - x0;
            for (int h = 0; h < raw.heads; ++h) {
                auto a = raw.at(h, x0, y0);
                auto b = raw.at(h, x0 + 1, y0);
                auto c = raw.at(h, x0, y0 + 1);
                auto d = raw.at(h, x0 + 1, y0 + 1);
                auto o = out.at(h, x, y);
                for (int k = 0; k < raw.dim; ++k) {
                    const double top = a[k] + fx * (b[k] - a[k]);
                    const double bottom = c[k] + fx * (d[k] - c[k]);
                    o[k] = static_cast<float>(top + fy * (bottom - top));
                }
            }
        }
    }
    return out;
}

double cosine(std::span<const float> a, std::span<const float> b) {
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

SimilarityMap similarity_map(const FeatureTensor& keys_src, const FeatureTensor& keys_dst,
                             const CorrespondenceField& field) {
    if (keys_src.heads != keys_dst.heads || keys_src.dim != keys_dst.dim) {
        throw ValidationError("similarity_map: feature heads/dims differ between views");
    }
    if (keys_src.height != field.height() || keys_src.width != field.width()) {
        throw ValidationError("similarity_map: source features do not match the field size");
    }
    if (keys_dst.height != field.target_height || keys_dst.width != field.target_width) {
        throw ValidationError("similarity_map: destination features do not match the field target size");
    }
    const int h = field.height();
    const int w = field.width();
    SimilarityMap s{Grid<float>(h, w, 1, std::numeric_limits<float>::quiet_NaN()), Mask(h, w)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!field.valid(x, y)) continue;
            const Eigen::Vector2i q = nearest_pixel(field.at(x, y));
            double acc = 0.0;
            for (int head = 0; head < keys_src.heads; ++head) {
                acc += cosine(keys_src.at(head, x, y), keys_dst.at(head, q.x(), q.y()));
            }
            s.values(x, y) = static_cast<float>(std::clamp(acc / keys_src.heads, -1.0, 1.0));
            s.defined(x, y) = 1;
        }
    }
    return s;
}

ThresholdStats adaptive_threshold_stats(const SimilarityMap& s) {
    if (!s.values.same_shape(s.defined)) throw ValidationError("similarity map values/defined shape mismatch");
    // Sequential summation in pixel order keeps the threshold reproducible.
    std::size_t n = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < s.defined.size(); ++i) {
        if (!s.defined[i]) continue;
        sum += s.values[i];
        ++n;
    }
    if (n < kMinThresholdPixels) throw ValidationError("overlap too small for thresholding");
    ThresholdStats st;
    st.mean = sum / static_cast<double>(n);
    double m2 = 0.0;
    double m3 = 0.0;
    for (std::size_t i = 0; i < s.defined.size(); ++i) {
        if (!s.defined[i]) continue;
        const double d = s.values[i] - st.mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    st.stddev = std::sqrt(m2);
    st.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    st.lambda = st.skewness < 0.0 ? 1.5 : 1.0;
    st.threshold = std::clamp(st.mean - st.lambda * st.stddev, -1.0, 1.0);
    return st;
}

double adaptive_threshold(const SimilarityMap& s) { return adaptive_threshold_stats(s).threshold; }

ChangeProposal threshold_similarity(const SimilarityMap& s, double threshold) {
    ChangeProposal p{Mask(s.defined.height(), s.defined.width()), threshold, ProposalStage::initial};
    for (std::size_t i = 0; i < s.defined.size(); ++i) {
        p.mask[i] = (s.defined[i] && s.values[i] < threshold) ? 1 : 0;
    }
    return p;
}

ChangeProposal initial_proposal(const SimilarityMap& s) { return threshold_similarity(s, adaptive_threshold(s)); }

ChangeProposal refine_with_occlusion(const ChangeProposal& p, const OcclusionMask& occ) {
    if (p.stage != ProposalStage::initial) throw ValidationError("refine_with_occlusion expects an initial proposal");
    require_same_shape(p.mask, occ.mask, "refine_with_occlusion");
    return {mask_and_not(p.mask, occ.mask), p.threshold_used, ProposalStage::refined};
}

}  // namespace uscd
