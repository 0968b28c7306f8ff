#pragma once

// Agreement between metric families across cases: Pearson correlation with
// a bootstrap over small resamples, Cohen's kappa on "which of two cases is
// better" votes, least-squares lines, and the lesion error counts one would
// infer from DSC alone through those lines.
//
// Series use NaN for an undefined value; every pairwise operation drops
// indices where either series is NaN.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "error.hpp"
#include "pipeline.hpp"
#include "rng.hpp"

namespace lesioneval {

enum class Orientation { higher_better, lower_better };

struct MetricSeries {
    std::string name;
    Orientation orientation = Orientation::higher_better;
    std::vector<double> values;  // NaN = undefined for that case
};

struct CorrelationReport {
    double r_full = 0.0;
    double p_value = 1.0;
    double bootstrap_mean_r = 0.0;
    double bootstrap_std_r = 0.0;
    std::size_t n_boot = 100;
    std::size_t sample_size = 20;
    std::uint64_t seed = 0;
    std::size_t n_cases = 0;
    std::size_t n_redraws = 0;
    std::vector<double> bootstrap_r;  // per resample, in resample order
};

struct AgreementReport {
    double kappa = 0.0;
    std::size_t n_pairs_requested = 0;
    std::size_t n_pairs_used = 0;
    std::size_t n_pairs_discarded_ties = 0;
    /// contingency[a][b]: a / b is 1 when that metric judges the first case better.
    std::array<std::array<std::size_t, 2>, 2> contingency{};
    std::uint64_t seed = 0;
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

struct ErrorEstimate {
    std::size_t fp_est = 0;
    std::size_t fn_est = 0;
    std::size_t fp_actual = 0;
    std::size_t fn_actual = 0;
    LineFit fit_precision;
    LineFit fit_recall;
    std::size_t n_cases_precision_fit = 0;
    std::size_t n_cases_recall_fit = 0;
};

namespace stats_detail {

inline std::pair<std::vector<double>, std::vector<double>> paired(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw StatsError("series lengths differ");
    std::pair<std::vector<double>, std::vector<double>> out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::isnan(x[i]) || std::isnan(y[i])) continue;
        out.first.push_back(x[i]);
        out.second.push_back(y[i]);
    }
    return out;
}

// Pearson r on complete data; nullopt on zero variance.
inline std::optional<double> pearson_r(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace stats_detail

struct PearsonResult {
    double r = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

/// Two-tailed p for correlation r over n pairs (Student's t, n−2 df).
inline double pearson_p_value(double r, std::size_t n) {
    if (n < 3) throw StatsError("p-value needs at least 3 pairs");
    if (std::abs(r) >= 1.0) return 0.0;
    const double df = static_cast<double>(n - 2);
    const double t = std::abs(r) * std::sqrt(df / (1.0 - r * r));
    const boost::math::students_t dist(df);
    return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
}

inline PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
    const auto [px, py] = stats_detail::paired(x, y);
    if (px.size() < 3) throw StatsError("pearson needs at least 3 complete pairs");
    const auto r = stats_detail::pearson_r(px, py);
    if (!r) throw StatsError("pearson undefined for a constant series");
    return {*r, pearson_p_value(*r, px.size()), px.size()};
}

/// Pearson r on the full data plus `n_boot` resamples of `sample_size` paired
/// indices drawn with replacement. Resample b draws from
/// Xoshiro256::stream(seed, b); a resample with a constant series is redrawn
/// from the same stream. More than n_boot/2 redraws in total is an error.
inline CorrelationReport bootstrap_pearson(std::span<const double> x, std::span<const double> y,
                                           std::size_t n_boot = 100, std::size_t sample_size = 20,
                                           std::uint64_t seed = 0, std::size_t threads = 1) {
    if (n_boot == 0) throw StatsError("n_boot must be positive");
    if (sample_size < 3) throw StatsError("bootstrap sample size must be at least 3");
    const auto full = pearson(x, y);
    const auto [px, py] = stats_detail::paired(x, y);
    const std::size_t cap = n_boot / 2;

    std::vector<double> rs(n_boot, 0.0);
    std::vector<std::size_t> redraws(n_boot, 0);
    parallel_for(n_boot, threads, [&](std::size_t b) {
        auto rng = Xoshiro256::stream(seed, b);
        std::vector<double> sx(sample_size);
        std::vector<double> sy(sample_size);
        while (true) {
            for (std::size_t k = 0; k < sample_size; ++k) {
                const auto i = static_cast<std::size_t>(rng.below(px.size()));
                sx[k] = px[i];
                sy[k] = py[i];
            }
            if (const auto r = stats_detail::pearson_r(sx, sy)) {
                rs[b] = *r;
                return;
            }
            if (++redraws[b] > cap) return;
        }
    });

    std::size_t total_redraws = 0;
    for (auto n : redraws) total_redraws += n;
    if (total_redraws > cap) {
        throw StatsError("bootstrap resamples too often degenerate (" + std::to_string(total_redraws) +
                         " redraws, cap " + std::to_string(cap) + ")");
    }
    const auto summary = *mean_std(rs);
    CorrelationReport out;
    out.r_full = full.r;
    out.p_value = full.p_value;
    out.bootstrap_mean_r = summary.mean;
    out.bootstrap_std_r = summary.std;
    out.n_boot = n_boot;
    out.sample_size = sample_size;
    out.seed = seed;
    out.n_cases = px.size();
    out.n_redraws = total_redraws;
    out.bootstrap_r = std::move(rs);
    return out;
}

/// 1 if `s` judges case i better than case j, 0 if worse, nullopt on a tie.
inline std::optional<int> vote(const MetricSeries& s, std::size_t i, std::size_t j) {
    const double a = s.values[i];
    const double b = s.values[j];
    if (a == b) return std::nullopt;
    const bool first_higher = a > b;
    return (first_higher == (s.orientation == Orientation::higher_better)) ? 1 : 0;
}

/// Cohen's kappa from a 2×2 vote table.
inline double kappa_from_table(const std::array<std::array<std::size_t, 2>, 2>& t) {
    const double n = static_cast<double>(t[0][0] + t[0][1] + t[1][0] + t[1][1]);
    if (n == 0.0) throw StatsError("kappa of an empty table");
    const double a1 = static_cast<double>(t[1][0] + t[1][1]);
    const double b1 = static_cast<double>(t[0][1] + t[1][1]);
    const double agree = static_cast<double>(t[0][0] + t[1][1]);
    const double chance = a1 * b1 + (n - a1) * (n - b1);  // n² · p_e
    const double denom = n * n - chance;
    if (denom == 0.0) throw StatsError("kappa undefined: both metrics cast a single vote value");
    return (n * agree - chance) / denom;
}

/// Samples `n_pairs` ordered case pairs (i ≠ j) uniformly from the cases
/// where both series are defined, lets each metric vote for the better case,
/// discards pairs where either metric ties, and returns Cohen's kappa.
/// Pair k uses i = below(n), j = below(n−1) (+1 if j ≥ i) from one
/// Xoshiro256(seed) stream.
inline AgreementReport kappa_agreement(const MetricSeries& a, const MetricSeries& b, std::size_t n_pairs = 1000,
                                       std::uint64_t seed = 0) {
    if (a.values.size() != b.values.size()) throw StatsError("series lengths differ");
    MetricSeries ca{a.name, a.orientation, {}};
    MetricSeries cb{b.name, b.orientation, {}};
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (std::isnan(a.values[i]) || std::isnan(b.values[i])) continue;
        ca.values.push_back(a.values[i]);
        cb.values.push_back(b.values[i]);
    }
    const std::size_t n = ca.values.size();
    if (n < 2) throw StatsError("kappa needs at least 2 cases with both metrics defined");

    AgreementReport out;
    out.seed = seed;
    out.n_pairs_requested = n_pairs;
    Xoshiro256 rng(seed);
    for (std::size_t k = 0; k < n_pairs; ++k) {
        const auto i = static_cast<std::size_t>(rng.below(n));
        auto j = static_cast<std::size_t>(rng.below(n - 1));
        if (j >= i) ++j;
        const auto va = vote(ca, i, j);
        const auto vb = vote(cb, i, j);
        if (!va || !vb) {
            ++out.n_pairs_discarded_ties;
            continue;
        }
        ++out.contingency[static_cast<std::size_t>(*va)][static_cast<std::size_t>(*vb)];
        ++out.n_pairs_used;
    }
    if (out.n_pairs_used == 0) throw StatsError("every sampled pair was tied");
    out.kappa = kappa_from_table(out.contingency);
    return out;
}

/// Ordinary least squares y = slope·x + intercept.
inline LineFit linear_fit(std::span<const double> x, std::span<const double> y) {
    const auto [px, py] = stats_detail::paired(x, y);
    if (px.size() < 2) throw StatsError("linear fit needs at least 2 points");
    const auto n = static_cast<double>(px.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i) {
        mx += px[i];
        my += py[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i) {
        sxx += (px[i] - mx) * (px[i] - mx);
        sxy += (px[i] - mx) * (py[i] - my);
    }
    if (!(sxx > 0.0)) throw StatsError("linear fit undefined for constant x");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

namespace stats_detail {

// OLS line, or the horizontal line at mean(y) when every x is equal.
inline LineFit fit_or_level(const std::vector<double>& x, const std::vector<double>& y) {
    if (std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) != x.end()) return linear_fit(x, y);
    double sum = 0.0;
    for (double v : y) sum += v;
    return {0.0, sum / static_cast<double>(y.size())};
}

}  // namespace stats_detail

/// Fits precision^Pred and recall^GT as lines in DSC over the cases of one
/// cut-off, predicts each case's rates from its DSC (clamped to [0,1]) and
/// converts them to lesion counts: FP̂ = Σ round((1−p̂)·M), FN̂ = Σ round((1−r̂)·N).
inline ErrorEstimate dice_estimated_errors(std::span<const CaseMetrics> cases) {
    std::vector<double> dsc_p;
    std::vector<double> prec;
    std::vector<double> dsc_r;
    std::vector<double> rec;
    ErrorEstimate out;
    for (const auto& c : cases) {
        out.fp_actual += c.pred_summary.fp.value_or(0);
        out.fn_actual += c.gt_summary.fn.value_or(0);
        if (!c.voxel.dsc.defined()) continue;
        if (c.pred_summary.precision) {
            dsc_p.push_back(c.voxel.dsc.value);
            prec.push_back(*c.pred_summary.precision);
        }
        if (c.gt_summary.recall) {
            dsc_r.push_back(c.voxel.dsc.value);
            rec.push_back(*c.gt_summary.recall);
        }
    }
    if (dsc_p.size() < 3 || dsc_r.size() < 3) {
        throw StatsError("error estimate needs at least 3 cases with DSC and lesion rates defined");
    }
    out.n_cases_precision_fit = dsc_p.size();
    out.n_cases_recall_fit = dsc_r.size();
    out.fit_precision = stats_detail::fit_or_level(dsc_p, prec);
    out.fit_recall = stats_detail::fit_or_level(dsc_r, rec);

    for (const auto& c : cases) {
        if (!c.voxel.dsc.defined()) continue;
        const double d = c.voxel.dsc.value;
        if (c.pred_summary.precision) {
            const double p = std::clamp(out.fit_precision.slope * d + out.fit_precision.intercept, 0.0, 1.0);
            out.fp_est += static_cast<std::size_t>(std::llround((1.0 - p) * static_cast<double>(c.n_pred_lesions)));
        }
        if (c.gt_summary.recall) {
            const double r = std::clamp(out.fit_recall.slope * d + out.fit_recall.intercept, 0.0, 1.0);
            out.fn_est += static_cast<std::size_t>(std::llround((1.0 - r) * static_cast<double>(c.n_gt_lesions)));
        }
    }
    return out;
}

/// Per-case values of a named CaseMetrics column; NaN where undefined.
/// Known names: dsc, iou, hd95_mm, precision_pred, recall_gt, precision_iou,
/// recall_iou. hd95_mm is lower-is-better, everything else higher.
inline std::optional<MetricSeries> metric_series(std::string_view name, std::span<const CaseMetrics> cases) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    static constexpr std::string_view kKnown[] = {"dsc",       "iou",           "hd95_mm",   "precision_pred",
                                                  "recall_gt", "precision_iou", "recall_iou"};
    if (std::find(std::begin(kKnown), std::end(kKnown), name) == std::end(kKnown)) return std::nullopt;
    const auto pick = [nan](const std::optional<double>& v) { return v.value_or(nan); };
    MetricSeries s;
    s.name = std::string(name);
    s.orientation = name == "hd95_mm" ? Orientation::lower_better : Orientation::higher_better;
    for (const auto& c : cases) {
        if (name == "dsc") {
            s.values.push_back(pick(c.voxel.dsc.get()));
        } else if (name == "iou") {
            s.values.push_back(pick(c.voxel.iou.get()));
        } else if (name == "hd95_mm") {
            s.values.push_back(pick(c.voxel.hd95_mm.get()));
        } else if (name == "precision_pred") {
            s.values.push_back(pick(c.pred_summary.precision));
        } else if (name == "recall_gt") {
            s.values.push_back(pick(c.gt_summary.recall));
        } else if (name == "precision_iou") {
            s.values.push_back(pick(c.iou_summary.precision));
        } else {
            s.values.push_back(pick(c.iou_summary.recall));
        }
    }
    return s;
}

}  // namespace lesioneval
