#pragma once

// Serialisation of sweep tables (CSV, JSON, plain text) and per-case records
// (JSON Lines, one object per case and cut-off).

#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "pipeline.hpp"

namespace lesioneval {

inline constexpr std::string_view kSweepCsvHeader =
    "cutoff,precision_pred,recall_gt,precision_iou,recall_iou,dsc_mean,dsc_std,hd95_mean,hd95_std,"
    "tp_gt,fn_gt,tp_pred,fp_pred,tp_iou,fp_iou,fn_iou,n_cases_dsc_undefined";

inline constexpr std::string_view kMissing = "NA";

/// Fixed-point with `digits` decimals; "NA" when absent.
inline std::string fmt_fixed(std::optional<double> v, int digits = 6) {
    if (!v) return std::string(kMissing);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
    return buf;
}

inline std::string fmt_cutoff(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

/// "0.34(0.20)" style.
inline std::string fmt_mean_std(const std::optional<MeanStd>& m, int digits = 2) {
    if (!m) return std::string(kMissing);
    return fmt_fixed(m->mean, digits) + "(" + fmt_fixed(m->std, digits) + ")";
}

inline void write_sweep_csv(const SweepTable& table, std::ostream& out) {
    out << kSweepCsvHeader << '\n';
    for (const auto& r : table.rows) {
        const auto mean = [](const std::optional<MeanStd>& m) -> std::optional<double> {
            return m ? std::optional(m->mean) : std::nullopt;
        };
        const auto sd = [](const std::optional<MeanStd>& m) -> std::optional<double> {
            return m ? std::optional(m->std) : std::nullopt;
        };
        out << fmt_cutoff(r.cutoff) << ',' << fmt_fixed(r.precision_pred) << ',' << fmt_fixed(r.recall_gt) << ','
            << fmt_fixed(r.precision_iou) << ',' << fmt_fixed(r.recall_iou) << ',' << fmt_fixed(mean(r.dsc)) << ','
            << fmt_fixed(sd(r.dsc)) << ',' << fmt_fixed(mean(r.hd95)) << ',' << fmt_fixed(sd(r.hd95)) << ','
            << r.tp_gt << ',' << r.fn_gt << ',' << r.tp_pred << ',' << r.fp_pred << ',' << r.tp_iou << ','
            << r.fp_iou << ',' << r.fn_iou << ',' << r.n_cases_dsc_undefined << '\n';
    }
}

/// Human-readable table in the column order of the CSV's rate block.
inline void write_sweep_text(const SweepTable& table, std::ostream& out) {
    char line[256];
    std::snprintf(line, sizeof line, "%-6s %-10s %-10s %-10s %-10s %-14s %-16s\n", "c/o", "prec.Pred", "rec.GT",
                  "prec.IoU", "rec.IoU", "DSC", "HD95(mm)");
    out << line;
    for (const auto& r : table.rows) {
        std::snprintf(line, sizeof line, "%-6s %-10s %-10s %-10s %-10s %-14s %-16s\n", fmt_cutoff(r.cutoff).c_str(),
                      fmt_fixed(r.precision_pred, 2).c_str(), fmt_fixed(r.recall_gt, 2).c_str(),
                      fmt_fixed(r.precision_iou, 2).c_str(), fmt_fixed(r.recall_iou, 2).c_str(),
                      fmt_mean_std(r.dsc).c_str(), fmt_mean_std(r.hd95).c_str());
        out << line;
    }
}

namespace report_detail {

using nlohmann::ordered_json;

inline ordered_json opt(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }
inline ordered_json opt(const std::optional<std::size_t>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

inline ordered_json measure(const Measure& m) { return m.defined() ? ordered_json(m.value) : ordered_json(nullptr); }

inline ordered_json summary(const DetectionSummary& d) {
    ordered_json j;
    j["tp"] = d.tp;
    j["fp"] = opt(d.fp);
    j["fn"] = opt(d.fn);
    j["precision"] = opt(d.precision);
    j["recall"] = opt(d.recall);
    return j;
}

inline std::optional<double> get_real(const ordered_json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

inline std::optional<std::size_t> get_count(const ordered_json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::size_t>();
}

inline DetectionSummary parse_summary(const ordered_json& j) {
    DetectionSummary d;
    d.tp = j.at("tp").get<std::size_t>();
    d.fp = get_count(j, "fp");
    d.fn = get_count(j, "fn");
    d.precision = get_real(j, "precision");
    d.recall = get_real(j, "recall");
    return d;
}

inline Undefined parse_reason(const ordered_json& j, const char* key) {
    if (!j.contains(key)) return Undefined::none;
    const auto s = j.at(key).get<std::string>();
    if (s == "both-empty") return Undefined::both_empty;
    if (s == "one-empty") return Undefined::one_empty;
    return Undefined::none;
}

inline Measure parse_measure(const ordered_json& j, const char* key, const char* reason_key) {
    if (auto v = get_real(j, key)) return Measure::of(*v);
    const Undefined why = parse_reason(j, reason_key);
    return Measure::missing(why == Undefined::none ? Undefined::both_empty : why);
}

}  // namespace report_detail

inline nlohmann::ordered_json to_json(const CaseMetrics& m) {
    using namespace report_detail;
    ordered_json j;
    j["case_id"] = m.case_id;
    j["cutoff"] = m.cutoff;
    j["dsc"] = measure(m.voxel.dsc);
    j["iou"] = measure(m.voxel.iou);
    j["hd95_mm"] = measure(m.voxel.hd95_mm);
    if (!m.voxel.dsc.defined()) j["dsc_undefined"] = std::string(to_string(m.voxel.dsc.reason));
    if (!m.voxel.hd95_mm.defined()) j["hd95_undefined"] = std::string(to_string(m.voxel.hd95_mm.reason));
    j["n_gt_lesions"] = m.n_gt_lesions;
    j["n_pred_lesions"] = m.n_pred_lesions;
    j["precision_pred"] = opt(m.pred_summary.precision);
    j["recall_gt"] = opt(m.gt_summary.recall);
    j["precision_iou"] = opt(m.iou_summary.precision);
    j["recall_iou"] = opt(m.iou_summary.recall);
    j["iou_scheme"] = summary(m.iou_summary);
    j["gt_scheme"] = summary(m.gt_summary);
    j["pred_scheme"] = summary(m.pred_summary);
    j["gt_empty"] = m.gt_empty;
    j["pred_empty"] = m.pred_empty;
    return j;
}

inline CaseMetrics case_metrics_from_json(const nlohmann::ordered_json& j) {
    using namespace report_detail;
    try {
        CaseMetrics m;
        m.case_id = j.at("case_id").get<std::string>();
        m.cutoff = j.at("cutoff").get<double>();
        m.voxel.dsc = parse_measure(j, "dsc", "dsc_undefined");
        m.voxel.iou = parse_measure(j, "iou", "dsc_undefined");
        m.voxel.hd95_mm = parse_measure(j, "hd95_mm", "hd95_undefined");
        m.n_gt_lesions = j.at("n_gt_lesions").get<std::size_t>();
        m.n_pred_lesions = j.at("n_pred_lesions").get<std::size_t>();
        m.iou_summary = parse_summary(j.at("iou_scheme"));
        m.gt_summary = parse_summary(j.at("gt_scheme"));
        m.pred_summary = parse_summary(j.at("pred_scheme"));
        m.gt_empty = j.value("gt_empty", false);
        m.pred_empty = j.value("pred_empty", false);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad case record: ") + e.what());
    }
}

inline void write_records(std::span<const CaseMetrics> records, std::ostream& out) {
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

/// Reads a JSON Lines record stream; blank lines are skipped. Raw objects
/// are kept alongside so callers can pick arbitrary numeric columns.
struct RecordStream {
    std::vector<CaseMetrics> records;
    std::vector<nlohmann::ordered_json> raw;
};

inline RecordStream read_records(std::istream& in) {
    RecordStream out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::ordered_json j;
        try {
            j = nlohmann::ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("record line " + std::to_string(line_no) + ": " + e.what());
        }
        out.records.push_back(case_metrics_from_json(j));
        out.raw.push_back(std::move(j));
    }
    return out;
}

inline nlohmann::ordered_json to_json(const SweepTable& table) {
    using namespace report_detail;
    ordered_json rows = ordered_json::array();
    for (const auto& r : table.rows) {
        ordered_json j;
        j["cutoff"] = r.cutoff;
        j["precision_pred"] = opt(r.precision_pred);
        j["recall_gt"] = opt(r.recall_gt);
        j["precision_iou"] = opt(r.precision_iou);
        j["recall_iou"] = opt(r.recall_iou);
        j["dsc_mean"] = r.dsc ? ordered_json(r.dsc->mean) : ordered_json(nullptr);
        j["dsc_std"] = r.dsc ? ordered_json(r.dsc->std) : ordered_json(nullptr);
        j["hd95_mean"] = r.hd95 ? ordered_json(r.hd95->mean) : ordered_json(nullptr);
        j["hd95_std"] = r.hd95 ? ordered_json(r.hd95->std) : ordered_json(nullptr);
        j["tp_gt"] = r.tp_gt;
        j["fn_gt"] = r.fn_gt;
        j["tp_pred"] = r.tp_pred;
        j["fp_pred"] = r.fp_pred;
        j["tp_iou"] = r.tp_iou;
        j["fp_iou"] = r.fp_iou;
        j["fn_iou"] = r.fn_iou;
        j["n_cases"] = r.n_cases;
        j["n_cases_dsc_undefined"] = r.n_cases_dsc_undefined;
        j["n_cases_hd95_undefined"] = r.n_cases_hd95_undefined;
        rows.push_back(std::move(j));
    }
    ordered_json out;
    out["rows"] = std::move(rows);
    return out;
}

}  // namespace lesioneval
