#include "uscd/metrics.hpp"

namespace uscd {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Scores scores_from(const Confusion& c) {
    Scores s;
    s.precision = ratio(c.tp, c.tp + c.fp);
    s.recall = ratio(c.tp, c.tp + c.fn);
    const bool both_empty = c.tp == 0 && c.fp == 0 && c.fn == 0;
    if (both_empty) {
        s.f1 = 1.0;
        s.iou_change = 1.0;
    } else {
        const double pr = s.precision + s.recall;
        s.f1 = pr > 0.0 ? 2.0 * s.precision * s.recall / pr : 0.0;
        s.iou_change = ratio(c.tp, c.tp + c.fp + c.fn);
    }
    s.iou_nochange = ratio(c.tn, c.tn + c.fp + c.fn);
    s.miou = 0.5 * (s.iou_change + s.iou_nochange);
    return s;
}

Mask mask_gt_outside_overlap(const Mask& gt, const Mask& overlap) { return mask_and(gt, overlap); }

PairScore score(const Mask& pred, const Mask& gt, const Mask& region) {
    require_same_shape(pred, gt, "score");
    require_same_shape(pred, region, "score");
    PairScore out;
    Confusion& c = out.confusion;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!region[i]) continue;
        const bool p = pred[i] != 0;
        const bool g = gt[i] != 0;
        if (p && g) ++c.tp;
        else if (p) ++c.fp;
        else if (g) ++c.fn;
        else ++c.tn;
    }
    if (c.total() == 0) throw ValidationError("score: empty evaluation region");
    out.scores = scores_from(c);
    return out;
}

PairScore score(const Mask& pred, const Mask& gt) { return score(pred, gt, Mask(pred.height(), pred.width(), 1, 1)); }

EvalReport aggregate(std::span<const PairScore> pairs) {
    if (pairs.empty()) throw ValidationError("aggregate: no pairs");
    EvalReport r;
    r.per_pair.assign(pairs.begin(), pairs.end());
    for (const auto& p : pairs) {
        r.micro += p.confusion;
        r.macro_f1 += p.scores.f1;
        r.macro_miou += p.scores.miou;
    }
    r.macro_f1 /= static_cast<double>(pairs.size());
    r.macro_miou /= static_cast<double>(pairs.size());
    r.micro_scores = scores_from(r.micro);
    return r;
}

std::map<std::string, EvalReport> aggregate_by_group(std::span<const PairScore> pairs) {
    std::map<std::string, std::vector<PairScore>> groups;
    for (const auto& p : pairs) groups[p.group].push_back(p);
    std::map<std::string, EvalReport> out;
    for (auto& [key, members] : groups) out.emplace(key, aggregate(members));
    return out;
}

}  // namespace uscd
