#pragma once

#include <span>
#include <vector>

#include "uscd/geometry.hpp"
#include "uscd/occlusion.hpp"

namespace uscd {

inline constexpr int kDefaultFeatureLayer = 17;
inline constexpr std::size_t kMinThresholdPixels = 64;

/// heads×H×W×dim float features, C order. Embeddings use heads = 1.
struct FeatureTensor {
    int heads = 1;
    int height = 0;
    int width = 0;
    int dim = 0;
    std::vector<float> data;

    FeatureTensor() = default;
    FeatureTensor(int heads, int height, int width, int dim);

    std::span<float> at(int head, int x, int y) {
        return {data.data() + offset(head, x, y), static_cast<std::size_t>(dim)};
    }
    std::span<const float> at(int head, int x, int y) const {
        return {data.data() + offset(head, x, y), static_cast<std::size_t>(dim)};
    }

    /// Throws ValidationError on bad sizes or non-finite values.
    void validate() const;

private:
    std::size_t offset(int head, int x, int y) const {
        return ((static_cast<std::size_t>(head) * height + y) * width + x) * dim;
    }
};

/// Layer keys and final embedding of one view at image resolution.
struct FeatureMapSet {
    FeatureTensor keys;
    FeatureTensor embed;
    int layer = kDefaultFeatureLayer;
};

/// Bilinear resize per head and channel, align-corners sampling.
FeatureTensor resize_features(const FeatureTensor& raw, int height, int width);

/// Cosine similarity, 0 when either vector has zero norm.
double cosine(std::span<const float> a, std::span<const float> b);

struct SimilarityMap {
    Grid<float> values;  ///< head-averaged cosine in [-1, 1]; NaN where undefined
    Mask defined;        ///< overlap pixels
};

SimilarityMap similarity_map(const FeatureTensor& keys_src, const FeatureTensor& keys_dst,
                             const CorrespondenceField& field);

struct ThresholdStats {
    double mean = 0.0;
    double stddev = 0.0;
    double skewness = 0.0;
    double lambda = 1.0;
    double threshold = 0.0;
};

/// mean - lambda·stddev over defined values, lambda = 1.5 for a negatively
/// skewed distribution and 1.0 otherwise, clamped to [-1, 1].
ThresholdStats adaptive_threshold_stats(const SimilarityMap& s);
double adaptive_threshold(const SimilarityMap& s);

enum class ProposalStage { initial, refined };

struct ChangeProposal {
    Mask mask;
    double threshold_used = 0.0;
    ProposalStage stage = ProposalStage::initial;
};

/// Defined pixels with similarity strictly below `threshold`.
ChangeProposal threshold_similarity(const SimilarityMap& s, double threshold);
ChangeProposal initial_proposal(const SimilarityMap& s);

/// Removes occluded pixels from an initial proposal.
ChangeProposal refine_with_occlusion(const ChangeProposal& p, const OcclusionMask& occ);

}  // namespace uscd
