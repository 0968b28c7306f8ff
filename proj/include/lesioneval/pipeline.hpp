#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "components.hpp"
#include "lesion_metrics.hpp"
#include "volume.hpp"
#include "voxel_metrics.hpp"

namespace lesioneval {

/// Overlap thresholds for the three lesion-level schemes.
struct Thresholds {
    double s_iou = 0.3;
    double s_gt = 0.3;
    double s_pred = 0.3;
};

struct EvalOptions {
    Thresholds thresholds;
    std::size_t min_voxels = 8;
};

struct CaseMetrics {
    std::string case_id;
    double cutoff = 0.5;
    VoxelMetrics voxel;
    std::size_t n_gt_lesions = 0;
    std::size_t n_pred_lesions = 0;
    DetectionSummary iou_summary;
    DetectionSummary gt_summary;
    DetectionSummary pred_summary;
    bool gt_empty = false;
    bool pred_empty = false;
};

/// Foreground where probability >= cutoff.
inline std::vector<std::uint8_t> binarize_mask(const Volume& prob, double cutoff) {
    const auto values = prob.data();
    std::vector<std::uint8_t> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<double>(values[i]) >= cutoff ? 1 : 0;
    return out;
}

inline Volume binarize(const Volume& prob, double cutoff) {
    if (!(cutoff >= 0.0 && cutoff <= 1.0)) throw ValueError("cut-off must lie in [0,1]");
    return Volume::from_mask(prob.grid(), binarize_mask(prob, cutoff));
}

/// Ground-truth side of a case, computed once and reused across cut-offs.
struct PreparedTruth {
    Grid grid;
    std::vector<std::uint8_t> mask;
    LesionSet lesions;
};

inline PreparedTruth prepare_truth(const Volume& gt) {
    if (gt.kind() != VolumeKind::binary) throw ValueError("ground truth is not binary");
    PreparedTruth t;
    t.grid = gt.grid();
    t.mask = gt.mask();
    t.lesions = LesionSet::from_labeling(label_components(t.grid, t.mask));
    return t;
}

/// Scores one prediction mask against prepared ground truth. `filter` drops
/// predicted components smaller than opts.min_voxels before anything is
/// measured, so voxel and lesion metrics see the same segmentation.
inline CaseMetrics evaluate_mask(const std::string& case_id, double cutoff, const PreparedTruth& truth,
                                 std::span<const std::uint8_t> pred_mask, bool filter, const EvalOptions& opts) {
    auto labeling = label_components(truth.grid, pred_mask);
    if (filter) labeling = filter_small(labeling, opts.min_voxels);
    std::vector<std::uint8_t> kept(labeling.labels.size());
    for (std::size_t i = 0; i < kept.size(); ++i) kept[i] = labeling.labels[i] > 0 ? 1 : 0;
    const auto pred = LesionSet::from_labeling(labeling);

    CaseMetrics m;
    m.case_id = case_id;
    m.cutoff = cutoff;
    m.voxel = voxel_metrics(truth.grid, kept, truth.mask);
    m.n_gt_lesions = truth.lesions.size();
    m.n_pred_lesions = pred.size();
    m.iou_summary = detect_iou(pred, truth.lesions, opts.thresholds.s_iou);
    m.gt_summary = detect_gt(pred, truth.lesions, opts.thresholds.s_gt);
    m.pred_summary = detect_pred(pred, truth.lesions, opts.thresholds.s_pred);
    m.gt_empty = std::none_of(truth.mask.begin(), truth.mask.end(), [](std::uint8_t v) { return v != 0; });
    m.pred_empty = labeling.count() == 0;
    return m;
}

/// Full evaluation of one case at one cut-off. Binary predictions are used
/// as given (cut-off ignored, no size filter); probability maps are
/// thresholded and then filtered.
inline CaseMetrics evaluate_case(const CasePair& c, double cutoff, const EvalOptions& opts = {}) {
    require_same_grid(c.gt.grid(), c.pred.grid());
    if (!(cutoff >= 0.0 && cutoff <= 1.0)) throw ValueError("cut-off must lie in [0,1]");
    const auto truth = prepare_truth(c.gt);
    if (c.pred.kind() == VolumeKind::binary) return evaluate_mask(c.case_id, cutoff, truth, c.pred.mask(), false, opts);
    return evaluate_mask(c.case_id, cutoff, truth, binarize_mask(c.pred, cutoff), true, opts);
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
    std::size_t n = 0;
};

/// Mean and population standard deviation, summed in ascending value order
/// so the result does not depend on input order.
inline std::optional<MeanStd> mean_std(std::vector<double> values) {
    if (values.empty()) return std::nullopt;
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - mean) * (values[i] - mean);
    std::sort(sq.begin(), sq.end());
    double ss = 0.0;
    for (double v : sq) ss += v;
    return MeanStd{mean, std::sqrt(ss / static_cast<double>(values.size())), values.size()};
}

struct SweepRow {
    double cutoff = 0.0;
    std::optional<double> precision_pred;
    std::optional<double> recall_gt;
    std::optional<double> precision_iou;
    std::optional<double> recall_iou;
    std::optional<MeanStd> dsc;
    std::optional<MeanStd> hd95;
    std::size_t tp_gt = 0, fn_gt = 0;
    std::size_t tp_pred = 0, fp_pred = 0;
    std::size_t tp_iou = 0, fp_iou = 0, fn_iou = 0;
    std::size_t n_cases = 0;
    std::size_t n_cases_dsc_undefined = 0;
    std::size_t n_cases_hd95_undefined = 0;
};

struct SweepTable {
    std::vector<SweepRow> rows;
};

/// Micro-averaged row over every case evaluated at one cut-off.
inline SweepRow aggregate(double cutoff, std::span<const CaseMetrics> cases) {
    SweepRow row;
    row.cutoff = cutoff;
    row.n_cases = cases.size();
    std::vector<double> dscs;
    std::vector<double> hds;
    for (const auto& c : cases) {
        row.tp_gt += c.gt_summary.tp;
        row.fn_gt += c.gt_summary.fn.value_or(0);
        row.tp_pred += c.pred_summary.tp;
        row.fp_pred += c.pred_summary.fp.value_or(0);
        row.tp_iou += c.iou_summary.tp;
        row.fp_iou += c.iou_summary.fp.value_or(0);
        row.fn_iou += c.iou_summary.fn.value_or(0);
        if (c.voxel.dsc.defined()) {
            dscs.push_back(c.voxel.dsc.value);
        } else {
            ++row.n_cases_dsc_undefined;
        }
        if (c.voxel.hd95_mm.defined()) {
            hds.push_back(c.voxel.hd95_mm.value);
        } else {
            ++row.n_cases_hd95_undefined;
        }
    }
    row.precision_pred = lesion_detail::ratio(row.tp_pred, row.tp_pred + row.fp_pred);
    row.recall_gt = lesion_detail::ratio(row.tp_gt, row.tp_gt + row.fn_gt);
    row.precision_iou = lesion_detail::ratio(row.tp_iou, row.tp_iou + row.fp_iou);
    row.recall_iou = lesion_detail::ratio(row.tp_iou, row.tp_iou + row.fn_iou);
    row.dsc = mean_std(std::move(dscs));
    row.hd95 = mean_std(std::move(hds));
    return row;
}

/// Runs `task(i)` for i in [0, n) on up to `threads` workers. The first
/// exception thrown by any task is rethrown after all workers stop.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& task) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    const std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

struct SweepResult {
    SweepTable table;
    /// One record per (case, cut-off), case-major in input order.
    std::vector<CaseMetrics> records;
};

inline SweepResult sweep(std::span<const CasePair> cases, std::span<const double> cutoffs, const EvalOptions& opts = {},
                         std::size_t threads = 1) {
    if (cases.empty()) throw ValueError("sweep needs at least one case");
    if (cutoffs.empty()) throw ValueError("sweep needs at least one cut-off");
    for (double c : cutoffs) {
        if (!(c >= 0.0 && c <= 1.0)) throw ValueError("cut-off must lie in [0,1]");
    }
    const std::size_t k = cutoffs.size();
    std::vector<CaseMetrics> records(cases.size() * k);
    parallel_for(cases.size(), threads, [&](std::size_t i) {
        const auto& c = cases[i];
        require_same_grid(c.gt.grid(), c.pred.grid());
        const auto truth = prepare_truth(c.gt);
        const bool binary = c.pred.kind() == VolumeKind::binary;
        const auto fixed = binary ? c.pred.mask() : std::vector<std::uint8_t>{};
        for (std::size_t j = 0; j < k; ++j) {
            records[i * k + j] = binary ? evaluate_mask(c.case_id, cutoffs[j], truth, fixed, false, opts)
                                        : evaluate_mask(c.case_id, cutoffs[j], truth,
                                                        binarize_mask(c.pred, cutoffs[j]), true, opts);
        }
    });

    SweepResult out;
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<CaseMetrics> at_cutoff;
        at_cutoff.reserve(cases.size());
        for (std::size_t i = 0; i < cases.size(); ++i) at_cutoff.push_back(records[i * k + j]);
        out.table.rows.push_back(aggregate(cutoffs[j], at_cutoff));
    }
    out.records = std::move(records);
    return out;
}

/// Cut-offs lo, lo+step, ... up to hi (inclusive within 1e-9), each rounded
/// to 1e-9 so that 0.1:0.9:0.1 yields exactly 0.1, 0.2, ... 0.9.
inline std::vector<double> cutoff_range(double lo, double hi, double step) {
    if (!(step > 0.0)) throw ValueError("cut-off step must be positive");
    if (lo > hi) throw ValueError("cut-off range is empty");
    std::vector<double> out;
    for (std::size_t i = 0;; ++i) {
        const double v = std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9;
        if (v > hi + 1e-9) break;
        out.push_back(v);
    }
    return out;
}

}  // namespace lesioneval
