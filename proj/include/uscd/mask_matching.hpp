#pragma once

#include <cstdint>
#include <vector>

#include "uscd/correlation.hpp"

namespace uscd {

/// Class-agnostic segmentation masks of one view.
class SegMaskSet {
public:
    SegMaskSet() = default;
    /// Throws ValidationError when a mask is empty or shapes disagree.
    explicit SegMaskSet(std::vector<Mask> masks);

    const std::vector<Mask>& masks() const noexcept { return masks_; }
    const std::vector<std::size_t>& areas() const noexcept { return areas_; }
    std::size_t size() const noexcept { return masks_.size(); }
    bool empty() const noexcept { return masks_.empty(); }

private:
    std::vector<Mask> masks_;
    std::vector<std::size_t> areas_;
};

struct GsmParams {
    double rho_overlap = 0.5;  ///< minimum |m ∩ P_ref| / |m|
    double theta_sem = 0.6;    ///< cross-view embedding similarity must fall below this
    double rho_max = 0.8;      ///< masks larger than this fraction of the image are ignored
};

struct MaskDecision {
    std::size_t index = 0;
    double area_fraction = 0.0;
    double overlap_ratio = 0.0;
    double semantic_similarity = 1.0;  ///< mean embedding cosine over the mask's overlap pixels
    bool has_overlap = false;
    bool selected = false;
};

struct GsmResult {
    Mask mask;
    std::vector<MaskDecision> decisions;
    bool fallback = false;  ///< no segmentation masks: the refined proposal was returned as is

    std::vector<std::size_t> selected_indices() const;
};

/// Union of segmentation masks that the refined proposal substantially covers
/// and whose content disagrees across views.
GsmResult gsm_match(const ChangeProposal& p_ref, const SegMaskSet& segs, const FeatureTensor& embed_src,
                    const FeatureTensor& embed_dst, const CorrespondenceField& field,
                    const GsmParams& params = {});

/// Pulls a mask of the other view back into this view through `field`
/// (this view → other view): out(p) = valid(p) ∧ mask_other(nearest(target(p))).
Mask warp_mask(const Mask& mask_other, const CorrespondenceField& field);

enum Contribution : std::uint8_t { kNone = 0, kView1 = 1, kView2 = 2, kBoth = 3 };

struct FinalChangeMask {
    Mask mask;
    Grid<std::uint8_t> contributions;  ///< Contribution per pixel
};

FinalChangeMask fuse(const Mask& m1, const Mask& m2_warped);

}  // namespace uscd
