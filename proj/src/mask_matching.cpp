#include "uscd/mask_matching.hpp"

namespace uscd {

SegMaskSet::SegMaskSet(std::vector<Mask> masks) : masks_(std::move(masks)) {
    areas_.reserve(masks_.size());
    for (std::size_t i = 0; i < masks_.size(); ++i) {
        if (i > 0 && !masks_[i].same_shape(masks_[0])) throw ValidationError("segmentation masks differ in shape");
        const std::size_t area = count(masks_[i]);
        if (area == 0) throw ValidationError("segmentation mask " + std::to_string(i) + " is empty");
        areas_.push_back(area);
    }
}

std::vector<std::size_t> GsmResult::selected_indices() const {
    std::vector<std::size_t> out;
    for (const auto& d : decisions) {
        if (d.selected) out.push_back(d.index);
    }
    return out;
}

GsmResult gsm_match(const ChangeProposal& p_ref, const SegMaskSet& segs, const FeatureTensor& embed_src,
                    const FeatureTensor& embed_dst, const CorrespondenceField& field, const GsmParams& params) {
    if (p_ref.stage != ProposalStage::refined) throw ValidationError("gsm_match expects a refined proposal");
    require_same_shape(p_ref.mask, field.valid, "gsm_match");
    GsmResult result;
    if (segs.empty()) {
        result.mask = p_ref.mask;
        result.fallback = true;
        return result;
    }
    require_same_shape(segs.masks().front(), p_ref.mask, "gsm_match");

    // Per-pixel cross-view embedding similarity, shared by every candidate mask.
    const SimilarityMap semantic = similarity_map(embed_src, embed_dst, field);
    const double image_area = static_cast<double>(p_ref.mask.pixels());

    result.mask = Mask(p_ref.mask.height(), p_ref.mask.width());
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const Mask& m = segs.masks()[i];
        MaskDecision d;
        d.index = i;
        d.area_fraction = static_cast<double>(segs.areas()[i]) / image_area;

        std::size_t inter = 0;
        std::size_t n_valid = 0;
        double sem_sum = 0.0;
        for (std::size_t k = 0; k < m.size(); ++k) {
            if (!m[k]) continue;
            inter += p_ref.mask[k] != 0;
            if (semantic.defined[k]) {
                sem_sum += semantic.values[k];
                ++n_valid;
            }
        }
        d.overlap_ratio = static_cast<double>(inter) / static_cast<double>(segs.areas()[i]);
        d.has_overlap = n_valid > 0;
        if (d.has_overlap) d.semantic_similarity = sem_sum / static_cast<double>(n_valid);

        d.selected = d.area_fraction <= params.rho_max && d.overlap_ratio >= params.rho_overlap && d.has_overlap &&
                     d.semantic_similarity < params.theta_sem;
        if (d.selected) {
            for (std::size_t k = 0; k < m.size(); ++k) {
                if (m[k]) result.mask[k] = 1;
            }
        }
        result.decisions.push_back(d);
    }
    return result;
}

Mask warp_mask(const Mask& mask_other, const CorrespondenceField& field) {
    if (!mask_other.same_shape(field.target_height, field.target_width)) {
        throw ValidationError("warp_mask: mask does not match the field target size");
    }
    Mask out(field.height(), field.width());
    for (int y = 0; y < field.height(); ++y) {
        for (int x = 0; x < field.width(); ++x) {
            if (!field.valid(x, y)) continue;
            const Eigen::Vector2i q = nearest_pixel(field.at(x, y));
            out(x, y) = mask_other(q.x(), q.y()) ? 1 : 0;
        }
    }
    return out;
}

FinalChangeMask fuse(const Mask& m1, const Mask& m2_warped) {
    require_same_shape(m1, m2_warped, "fuse");
    FinalChangeMask f{Mask(m1.height(), m1.width()), Grid<std::uint8_t>(m1.height(), m1.width())};
    for (std::size_t i = 0; i < m1.size(); ++i) {
        const std::uint8_t tag = (m1[i] ? kView1 : kNone) | (m2_warped[i] ? kView2 : kNone);
        f.contributions[i] = tag;
        f.mask[i] = tag != kNone ? 1 : 0;
    }
    return f;
}

}  // namespace uscd
