#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "uscd/grid.hpp"

namespace uscd {

struct Confusion {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
    Confusion& operator+=(const Confusion& o) noexcept {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
    bool operator==(const Confusion&) const = default;
};

struct Scores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double iou_change = 0.0;
    double iou_nochange = 0.0;
    double miou = 0.0;
};

/// 0/0 ratios are 0, except that an empty prediction on an empty ground
/// truth scores f1 = 1 and IoU_change = 1.
Scores scores_from(const Confusion& c);

Mask mask_gt_outside_overlap(const Mask& gt, const Mask& overlap);

struct PairScore {
    std::string id;
    std::string group;
    Confusion confusion;
    Scores scores;
};

/// Counts pixels inside `region` only. Throws on an empty region.
PairScore score(const Mask& pred, const Mask& gt, const Mask& region);
PairScore score(const Mask& pred, const Mask& gt);

struct EvalReport {
    std::vector<PairScore> per_pair;
    Confusion micro;       ///< pooled counts
    Scores micro_scores;
    double macro_f1 = 0.0;  ///< mean of per-pair f1
    double macro_miou = 0.0;
};

EvalReport aggregate(std::span<const PairScore> pairs);
/// One report per distinct PairScore::group.
std::map<std::string, EvalReport> aggregate_by_group(std::span<const PairScore> pairs);

}  // namespace uscd
