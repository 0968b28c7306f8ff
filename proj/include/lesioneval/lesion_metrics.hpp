#pragma once

// Lesion-level detection under two families of definitions.
//
// Symmetric (object-detection style): every (prediction, ground-truth) pair
// is scored by IoU; pairs are accepted greedily from the highest IoU down,
// each lesion at most once, and only while IoU > threshold.
//
// Asymmetric: a ground-truth lesion is detected when the fraction of its
// voxels covered by any prediction exceeds s_gt (false positives undefined);
// a predicted lesion is correct when the fraction of its voxels inside any
// ground-truth lesion exceeds s_pred (false negatives undefined).

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "components.hpp"
#include "error.hpp"

namespace lesioneval {

/// Disjoint, non-empty voxel-index sets (one per lesion), each ascending.
struct LesionSet {
    std::vector<std::vector<std::size_t>> lesions;
    Spacing spacing{1.0, 1.0, 1.0};

    LesionSet() = default;
    explicit LesionSet(std::vector<std::vector<std::size_t>> sets, Spacing sp = {1.0, 1.0, 1.0})
        : lesions(std::move(sets)), spacing(sp) {
        for (auto& l : lesions) {
            if (l.empty()) throw ValueError("empty lesion");
            std::sort(l.begin(), l.end());
            if (std::adjacent_find(l.begin(), l.end()) != l.end()) throw ValueError("lesion lists a voxel twice");
        }
        std::vector<std::size_t> all;
        for (const auto& l : lesions) all.insert(all.end(), l.begin(), l.end());
        std::sort(all.begin(), all.end());
        if (std::adjacent_find(all.begin(), all.end()) != all.end()) throw ValueError("lesions overlap");
    }

    static LesionSet from_labeling(const ComponentLabeling& labeling) {
        LesionSet s;
        s.lesions = labeling.voxel_lists;
        s.spacing = labeling.grid.spacing;
        return s;
    }

    [[nodiscard]] std::size_t size() const { return lesions.size(); }
    [[nodiscard]] std::size_t voxels(std::size_t k) const { return lesions[k].size(); }
};

enum class MatchScheme { iou, gt_based, pred_based };

inline std::string_view to_string(MatchScheme s) {
    switch (s) {
        case MatchScheme::iou: return "iou";
        case MatchScheme::gt_based: return "gt";
        case MatchScheme::pred_based: return "pred";
    }
    return "unknown";
}

struct Assignment {
    std::size_t pred = 0;
    std::size_t gt = 0;
    double overlap = 0.0;

    friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct MatchOutcome {
    MatchScheme scheme = MatchScheme::iou;
    double threshold = 0.0;
    std::size_t tp = 0;
    std::optional<std::size_t> fp;
    std::optional<std::size_t> fn;
    std::vector<Assignment> assignments;      // iou scheme only
    std::vector<double> per_lesion_scores;    // per GT (gt_based) or per prediction (pred_based)
};

struct DetectionSummary {
    std::optional<double> precision;
    std::optional<double> recall;
    std::size_t tp = 0;
    std::optional<std::size_t> fp;
    std::optional<std::size_t> fn;
};

/// Voxel counts |P_m ∩ G_n| for every pair that overlaps at all.
struct PairOverlap {
    std::size_t pred = 0;
    std::size_t gt = 0;
    std::size_t voxels = 0;
};

inline std::vector<PairOverlap> pair_overlaps(const LesionSet& pred, const LesionSet& gt) {
    using Tagged = std::pair<std::size_t, std::size_t>;  // (voxel, lesion)
    const auto flatten = [](const LesionSet& s) {
        std::vector<Tagged> out;
        for (std::size_t k = 0; k < s.size(); ++k) {
            for (auto v : s.lesions[k]) out.emplace_back(v, k);
        }
        std::sort(out.begin(), out.end());
        return out;
    };
    const auto p = flatten(pred);
    const auto g = flatten(gt);
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < p.size() && j < g.size()) {
        if (p[i].first < g[j].first) {
            ++i;
        } else if (g[j].first < p[i].first) {
            ++j;
        } else {
            ++counts[{p[i].second, g[j].second}];
            ++i;
            ++j;
        }
    }
    std::vector<PairOverlap> out;
    out.reserve(counts.size());
    for (const auto& [key, n] : counts) out.push_back({key.first, key.second, n});
    return out;
}

namespace lesion_detail {

inline void require_threshold(double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw ValueError("overlap threshold must lie in [0,1]");
}

inline std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace lesion_detail

/// Greedy one-to-one IoU matching. Pairs are visited by IoU descending, ties
/// by (gt index, pred index) ascending; a pair is accepted when both lesions
/// are still free and IoU > s_iou.
inline MatchOutcome match_iou(const LesionSet& pred, const LesionSet& gt, double s_iou) {
    lesion_detail::require_threshold(s_iou);
    struct Candidate {
        double iou;
        std::size_t gt;
        std::size_t pred;
    };
    std::vector<Candidate> candidates;
    for (const auto& o : pair_overlaps(pred, gt)) {
        const std::size_t uni = pred.voxels(o.pred) + gt.voxels(o.gt) - o.voxels;
        candidates.push_back({static_cast<double>(o.voxels) / static_cast<double>(uni), o.gt, o.pred});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        return std::tie(a.gt, a.pred) < std::tie(b.gt, b.pred);
    });

    MatchOutcome out;
    out.scheme = MatchScheme::iou;
    out.threshold = s_iou;
    std::vector<bool> pred_used(pred.size(), false);
    std::vector<bool> gt_used(gt.size(), false);
    for (const auto& c : candidates) {
        if (!(c.iou > s_iou)) break;
        if (pred_used[c.pred] || gt_used[c.gt]) continue;
        pred_used[c.pred] = gt_used[c.gt] = true;
        out.assignments.push_back({c.pred, c.gt, c.iou});
    }
    out.tp = out.assignments.size();
    out.fp = pred.size() - out.tp;
    out.fn = gt.size() - out.tp;
    return out;
}

/// Fraction of each ground-truth lesion covered by predicted lesions.
inline std::vector<double> score_gt(const LesionSet& pred, const LesionSet& gt) {
    std::vector<std::size_t> covered(gt.size(), 0);
    for (const auto& o : pair_overlaps(pred, gt)) covered[o.gt] += o.voxels;
    std::vector<double> out(gt.size());
    for (std::size_t n = 0; n < gt.size(); ++n) {
        out[n] = static_cast<double>(covered[n]) / static_cast<double>(gt.voxels(n));
    }
    return out;
}

/// Fraction of each predicted lesion lying inside ground-truth lesions.
inline std::vector<double> score_pred(const LesionSet& pred, const LesionSet& gt) {
    std::vector<std::size_t> inside(pred.size(), 0);
    for (const auto& o : pair_overlaps(pred, gt)) inside[o.pred] += o.voxels;
    std::vector<double> out(pred.size());
    for (std::size_t m = 0; m < pred.size(); ++m) {
        out[m] = static_cast<double>(inside[m]) / static_cast<double>(pred.voxels(m));
    }
    return out;
}

inline MatchOutcome match_gt(const LesionSet& pred, const LesionSet& gt, double s_gt) {
    lesion_detail::require_threshold(s_gt);
    MatchOutcome out;
    out.scheme = MatchScheme::gt_based;
    out.threshold = s_gt;
    out.per_lesion_scores = score_gt(pred, gt);
    out.tp = static_cast<std::size_t>(std::count_if(out.per_lesion_scores.begin(), out.per_lesion_scores.end(),
                                                    [s_gt](double s) { return s > s_gt; }));
    out.fn = gt.size() - out.tp;
    return out;
}

inline MatchOutcome match_pred(const LesionSet& pred, const LesionSet& gt, double s_pred) {
    lesion_detail::require_threshold(s_pred);
    MatchOutcome out;
    out.scheme = MatchScheme::pred_based;
    out.threshold = s_pred;
    out.per_lesion_scores = score_pred(pred, gt);
    out.tp = static_cast<std::size_t>(std::count_if(out.per_lesion_scores.begin(), out.per_lesion_scores.end(),
                                                    [s_pred](double s) { return s > s_pred; }));
    out.fp = pred.size() - out.tp;
    return out;
}

/// Precision/recall from whichever counts the scheme defines.
inline DetectionSummary summarize(const MatchOutcome& m) {
    DetectionSummary d;
    d.tp = m.tp;
    d.fp = m.fp;
    d.fn = m.fn;
    if (m.fp) d.precision = lesion_detail::ratio(m.tp, m.tp + *m.fp);
    if (m.fn) d.recall = lesion_detail::ratio(m.tp, m.tp + *m.fn);
    return d;
}

inline DetectionSummary detect_iou(const LesionSet& pred, const LesionSet& gt, double s_iou) {
    return summarize(match_iou(pred, gt, s_iou));
}

inline DetectionSummary detect_gt(const LesionSet& pred, const LesionSet& gt, double s_gt) {
    return summarize(match_gt(pred, gt, s_gt));
}

inline DetectionSummary detect_pred(const LesionSet& pred, const LesionSet& gt, double s_pred) {
    return summarize(match_pred(pred, gt, s_pred));
}

}  // namespace lesioneval
