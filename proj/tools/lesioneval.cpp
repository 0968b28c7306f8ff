// Command-line front end: evaluate / sweep / compare / phantom.
//
// Exit codes: 0 success, 1 I/O failure, 2 validation error (bad flags,
// mismatched volumes, malformed files, degenerate statistics).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lesioneval/lesioneval.hpp"

namespace fs = std::filesystem;
using namespace lesioneval;

namespace {

struct Options {
    std::string gt;
    std::string pred;
    std::string manifest;
    std::string in;
    double cutoff = 0.5;
    std::string cutoffs = "0.1:0.9:0.1";
    Thresholds thresholds;
    std::size_t min_voxels = 8;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::string format;
    std::string out = "-";
    std::string records;
    // compare
    std::string metric_a = "dsc";
    std::string metric_b = "hd95_mm";
    std::optional<double> only_cutoff;
    std::size_t n_boot = 100;
    std::size_t sample_size = 20;
    std::size_t n_pairs = 1000;
    // phantom
    std::string scenario;
    std::string spec_file;
    std::size_t cases = 20;
    std::vector<std::size_t> dims;
    std::int64_t offset = 8;
    std::size_t min_lesions = 1;
    std::size_t max_lesions = 3;
    NoiseParams noise;
};

struct ManifestEntry {
    std::string case_id;
    fs::path gt_path;
    fs::path pred_path;
};

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest is not valid JSON: " + std::string(e.what()));
    }
    const fs::path base = path.parent_path();
    std::vector<ManifestEntry> out;
    try {
        for (const auto& c : j.at("cases")) {
            ManifestEntry e;
            e.case_id = c.at("case_id").get<std::string>();
            e.gt_path = base / c.at("gt_path").get<std::string>();
            e.pred_path = base / c.at("pred_path").get<std::string>();
            out.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest entry malformed: " + std::string(e.what()));
    }
    if (out.empty()) throw FormatError("manifest lists no cases");
    return out;
}

std::vector<CasePair> load_cases(const Options& o) {
    std::vector<CasePair> cases;
    if (!o.manifest.empty()) {
        for (const auto& e : read_manifest(o.manifest)) {
            cases.emplace_back(e.case_id, read_volume(e.gt_path), read_volume(e.pred_path));
        }
    } else {
        if (o.gt.empty() || o.pred.empty()) throw ValueError("give --manifest or both --gt and --pred");
        auto id = fs::path(o.pred).filename().string();
        cases.emplace_back(id, read_volume(o.gt), read_volume(o.pred));
    }
    return cases;
}

/// Writes `text` to the --out target ("-" = standard output).
void emit(const std::string& target, const std::string& text) {
    if (target == "-" || target.empty()) {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create '" + target + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + target + "'");
}

EvalOptions eval_options(const Options& o) {
    for (double s : {o.thresholds.s_iou, o.thresholds.s_gt, o.thresholds.s_pred}) {
        if (!(s >= 0.0 && s <= 1.0)) throw ValueError("overlap thresholds must lie in [0,1]");
    }
    if (o.min_voxels < 1) throw ValueError("--min-voxels must be at least 1");
    return {o.thresholds, o.min_voxels};
}

std::vector<double> parse_cutoffs(const std::string& text) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValueError("--cutoffs expects lo:hi:step, got '" + text + "'");
        }
    }
    if (parts.size() != 3) throw ValueError("--cutoffs expects lo:hi:step, got '" + text + "'");
    auto values = cutoff_range(parts[0], parts[1], parts[2]);
    for (double v : values) {
        if (v < 0.0 || v > 1.0) throw ValueError("cut-offs must lie in [0,1]");
    }
    return values;
}

std::string case_csv(const std::vector<CaseMetrics>& rows) {
    std::ostringstream out;
    out << "case_id,cutoff,dsc,iou,hd95_mm,n_gt_lesions,n_pred_lesions,precision_pred,recall_gt,precision_iou,"
           "recall_iou,tp_gt,fn_gt,tp_pred,fp_pred,tp_iou,fp_iou,fn_iou\n";
    for (const auto& m : rows) {
        out << m.case_id << ',' << fmt_cutoff(m.cutoff) << ',' << fmt_fixed(m.voxel.dsc.get()) << ','
            << fmt_fixed(m.voxel.iou.get()) << ',' << fmt_fixed(m.voxel.hd95_mm.get()) << ',' << m.n_gt_lesions
            << ',' << m.n_pred_lesions << ',' << fmt_fixed(m.pred_summary.precision) << ','
            << fmt_fixed(m.gt_summary.recall) << ',' << fmt_fixed(m.iou_summary.precision) << ','
            << fmt_fixed(m.iou_summary.recall) << ',' << m.gt_summary.tp << ',' << m.gt_summary.fn.value_or(0) << ','
            << m.pred_summary.tp << ',' << m.pred_summary.fp.value_or(0) << ',' << m.iou_summary.tp << ','
            << m.iou_summary.fp.value_or(0) << ',' << m.iou_summary.fn.value_or(0) << '\n';
    }
    return out.str();
}

int cmd_evaluate(const Options& o) {
    const auto opts = eval_options(o);
    if (!(o.cutoff >= 0.0 && o.cutoff <= 1.0)) throw ValueError("--cutoff must lie in [0,1]");
    const auto cases = load_cases(o);
    const double cutoffs[] = {o.cutoff};
    const auto result = sweep(cases, cutoffs, opts, o.threads);
    const std::string format = o.format.empty() ? "json" : o.format;
    if (format == "csv") {
        emit(o.out, case_csv(result.records));
    } else if (format == "json") {
        std::ostringstream out;
        write_records(result.records, out);
        emit(o.out, out.str());
    } else {
        throw ValueError("evaluate --format must be csv or json");
    }
    return 0;
}

int cmd_sweep(const Options& o) {
    const auto opts = eval_options(o);
    const auto cutoffs = parse_cutoffs(o.cutoffs);
    const auto cases = load_cases(o);
    const auto result = sweep(cases, cutoffs, opts, o.threads);
    std::ostringstream out;
    const std::string format = o.format.empty() ? "csv" : o.format;
    if (format == "csv") {
        write_sweep_csv(result.table, out);
    } else if (format == "json") {
        out << to_json(result.table).dump(2) << '\n';
    } else if (format == "text") {
        write_sweep_text(result.table, out);
    } else {
        throw ValueError("sweep --format must be csv, json or text");
    }
    emit(o.out, out.str());
    if (!o.records.empty()) {
        std::ostringstream rec;
        write_records(result.records, rec);
        emit(o.records, rec.str());
    }
    return 0;
}

nlohmann::ordered_json correlation_json(const CorrelationReport& r) {
    nlohmann::ordered_json j;
    j["r_full"] = r.r_full;
    j["p_value"] = r.p_value;
    j["bootstrap_mean_r"] = r.bootstrap_mean_r;
    j["bootstrap_std_r"] = r.bootstrap_std_r;
    j["n_boot"] = r.n_boot;
    j["sample_size"] = r.sample_size;
    j["n_cases"] = r.n_cases;
    j["n_redraws"] = r.n_redraws;
    j["seed"] = r.seed;
    return j;
}

nlohmann::ordered_json agreement_json(const AgreementReport& a) {
    nlohmann::ordered_json j;
    j["kappa"] = a.kappa;
    j["n_pairs_requested"] = a.n_pairs_requested;
    j["n_pairs_used"] = a.n_pairs_used;
    j["n_pairs_discarded_ties"] = a.n_pairs_discarded_ties;
    j["contingency"] = {{a.contingency[0][0], a.contingency[0][1]}, {a.contingency[1][0], a.contingency[1][1]}};
    j["seed"] = a.seed;
    return j;
}

nlohmann::ordered_json estimate_json(const ErrorEstimate& e) {
    nlohmann::ordered_json j;
    j["fp_est"] = e.fp_est;
    j["fp_actual"] = e.fp_actual;
    j["fn_est"] = e.fn_est;
    j["fn_actual"] = e.fn_actual;
    j["fit_precision"] = {{"slope", e.fit_precision.slope}, {"intercept", e.fit_precision.intercept}};
    j["fit_recall"] = {{"slope", e.fit_recall.slope}, {"intercept", e.fit_recall.intercept}};
    j["n_cases_precision_fit"] = e.n_cases_precision_fit;
    j["n_cases_recall_fit"] = e.n_cases_recall_fit;
    return j;
}

int cmd_compare(const Options& o) {
    if (o.in.empty()) throw ValueError("compare needs --in <records.jsonl>");
    std::ifstream in(o.in);
    if (!in) throw IoError("cannot open '" + o.in + "'");
    const auto stream = read_records(in);
    if (stream.records.empty()) throw FormatError("no case records in '" + o.in + "'");

    std::map<double, std::vector<CaseMetrics>> by_cutoff;
    for (const auto& r : stream.records) {
        if (o.only_cutoff && std::abs(r.cutoff - *o.only_cutoff) > 1e-9) continue;
        by_cutoff[r.cutoff].push_back(r);
    }
    if (by_cutoff.empty()) throw ValueError("no records at the requested cut-off");

    nlohmann::ordered_json report;
    report["seed"] = o.seed;
    report["metric_a"] = o.metric_a;
    report["metric_b"] = o.metric_b;
    report["results"] = nlohmann::ordered_json::array();
    for (const auto& [cutoff, rows] : by_cutoff) {
        const auto a = metric_series(o.metric_a, rows);
        const auto b = metric_series(o.metric_b, rows);
        if (!a) throw ValueError("unknown metric column '" + o.metric_a + "'");
        if (!b) throw ValueError("unknown metric column '" + o.metric_b + "'");
        nlohmann::ordered_json entry;
        entry["cutoff"] = cutoff;
        entry["n_cases"] = rows.size();
        entry["correlation"] = correlation_json(
            bootstrap_pearson(a->values, b->values, o.n_boot, o.sample_size, o.seed, o.threads));
        entry["agreement"] = agreement_json(kappa_agreement(*a, *b, o.n_pairs, o.seed));
        try {
            entry["error_estimate"] = estimate_json(dice_estimated_errors(rows));
        } catch (const StatsError& e) {
            entry["error_estimate"] = nullptr;
            entry["error_estimate_note"] = e.what();
        }
        report["results"].push_back(std::move(entry));
    }

    const std::string format = o.format.empty() ? "json" : o.format;
    if (format == "json") {
        emit(o.out, report.dump(2) + "\n");
    } else if (format == "csv") {
        std::ostringstream out;
        out << "cutoff,n_cases,r_full,p_value,bootstrap_mean_r,bootstrap_std_r,kappa,n_pairs_used,"
               "fp_est,fp_actual,fn_est,fn_actual,seed\n";
        for (const auto& e : report["results"]) {
            const auto& est = e["error_estimate"];
            const auto count = [&](const char* key) {
                return est.is_null() ? std::string(kMissing) : std::to_string(est[key].get<std::size_t>());
            };
            out << fmt_cutoff(e["cutoff"].get<double>()) << ',' << e["n_cases"].get<std::size_t>() << ','
                << fmt_fixed(e["correlation"]["r_full"].get<double>()) << ','
                << fmt_fixed(e["correlation"]["p_value"].get<double>(), 8) << ','
                << fmt_fixed(e["correlation"]["bootstrap_mean_r"].get<double>()) << ','
                << fmt_fixed(e["correlation"]["bootstrap_std_r"].get<double>()) << ','
                << fmt_fixed(e["agreement"]["kappa"].get<double>()) << ','
                << e["agreement"]["n_pairs_used"].get<std::size_t>() << ',' << count("fp_est") << ','
                << count("fp_actual") << ',' << count("fn_est") << ',' << count("fn_actual") << ',' << o.seed
                << '\n';
        }
        emit(o.out, out.str());
    } else {
        throw ValueError("compare --format must be json or csv");
    }
    return 0;
}

int cmd_phantom(const Options& o) {
    if (o.out.empty() || o.out == "-") throw ValueError("phantom needs --out <directory>");
    const std::string format = o.format.empty() ? "nifti" : o.format;
    if (format != "nifti" && format != "raw") throw ValueError("phantom --format must be nifti or raw");
    const VolumeFormat vf = format == "nifti" ? VolumeFormat::nifti : VolumeFormat::raw;

    std::vector<CasePair> cases;
    if (!o.spec_file.empty()) {
        std::ifstream in(o.spec_file);
        if (!in) throw IoError("cannot open '" + o.spec_file + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw SpecError("scenario file is not valid JSON: " + std::string(e.what()));
        }
        cases.push_back(generate(scenario_from_json(j)));
    } else if (o.scenario == "random") {
        CorpusParams p;
        p.n_cases = o.cases;
        p.seed = o.seed;
        p.min_lesions = o.min_lesions;
        p.max_lesions = o.max_lesions;
        p.noise = o.noise;
        if (!o.dims.empty()) {
            if (o.dims.size() != 3) throw SpecError("--dims needs three values");
            p.grid.dims = {o.dims[0], o.dims[1], o.dims[2]};
        }
        cases = random_corpus(p);
    } else if (o.scenario == "all") {
        for (const auto& name : preset_names()) cases.push_back(generate(preset(name, o.offset)));
    } else if (!o.scenario.empty()) {
        cases.push_back(generate(preset(o.scenario, o.offset)));
    } else {
        throw ValueError("phantom needs --scenario or --spec");
    }

    const fs::path dir(o.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
    const std::string ext = vf == VolumeFormat::nifti ? ".nii.gz" : ".raw";
    nlohmann::ordered_json manifest;
    manifest["cases"] = nlohmann::ordered_json::array();
    for (const auto& c : cases) {
        const std::string gt_name = c.case_id + "_gt" + ext;
        const std::string pred_name = c.case_id + "_pred" + ext;
        write_volume(c.gt, dir / gt_name, vf);
        write_volume(c.pred, dir / pred_name, vf);
        manifest["cases"].push_back({{"case_id", c.case_id}, {"gt_path", gt_name}, {"pred_path", pred_name}});
    }
    emit((dir / "manifest.json").string(), manifest.dump(2) + "\n");
    return 0;
}

void add_eval_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--gt", o.gt, "Ground-truth volume (.nii, .nii.gz or raw with .json sidecar)");
    cmd->add_option("--pred", o.pred, "Prediction volume (binary mask or probability map)");
    cmd->add_option("--manifest", o.manifest, "JSON manifest of {case_id, gt_path, pred_path}");
    cmd->add_option("--s-iou", o.thresholds.s_iou, "IoU overlap threshold")->capture_default_str();
    cmd->add_option("--s-gt", o.thresholds.s_gt, "Ground-truth coverage threshold")->capture_default_str();
    cmd->add_option("--s-pred", o.thresholds.s_pred, "Prediction overlap threshold")->capture_default_str();
    cmd->add_option("--min-voxels", o.min_voxels, "Drop predicted components smaller than this")
        ->capture_default_str();
    cmd->add_option("--threads", o.threads, "Worker threads")->capture_default_str();
    cmd->add_option("--out", o.out, "Output file ('-' for stdout)")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Voxel- and lesion-level evaluation of multifocal segmentations"};
    app.require_subcommand(1);
    Options o;

    auto* evaluate = app.add_subcommand("evaluate", "Per-case metrics at one cut-off");
    add_eval_flags(evaluate, o);
    evaluate->add_option("--cutoff", o.cutoff, "Probability cut-off")->capture_default_str();
    evaluate->add_option("--format", o.format, "json (JSON Lines) or csv");

    auto* sweep_cmd = app.add_subcommand("sweep", "Cut-off sweep summary table");
    add_eval_flags(sweep_cmd, o);
    sweep_cmd->add_option("--cutoffs", o.cutoffs, "lo:hi:step")->capture_default_str();
    sweep_cmd->add_option("--format", o.format, "csv, json or text");
    sweep_cmd->add_option("--records", o.records, "Also write per-case records (JSON Lines) here");

    auto* compare = app.add_subcommand("compare", "Correlation, pairwise agreement and DSC-estimated errors");
    compare->add_option("--in", o.in, "Per-case records from evaluate/sweep")->required();
    compare->add_option("--metric-a", o.metric_a, "First metric column")->capture_default_str();
    compare->add_option("--metric-b", o.metric_b, "Second metric column")->capture_default_str();
    compare->add_option("--cutoff", o.only_cutoff, "Only use records at this cut-off");
    compare->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    compare->add_option("--n-boot", o.n_boot, "Bootstrap resamples")->capture_default_str();
    compare->add_option("--sample-size", o.sample_size, "Cases per bootstrap resample")->capture_default_str();
    compare->add_option("--pairs", o.n_pairs, "Case pairs sampled for kappa")->capture_default_str();
    compare->add_option("--threads", o.threads, "Worker threads")->capture_default_str();
    compare->add_option("--format", o.format, "json or csv");
    compare->add_option("--out", o.out, "Output file ('-' for stdout)")->capture_default_str();

    auto* phantom = app.add_subcommand("phantom", "Write synthetic cases and a manifest");
    phantom->add_option("--scenario", o.scenario, "a1, a2, b1, b2, b3, b4, all or random");
    phantom->add_option("--spec", o.spec_file, "Scenario description (JSON)");
    phantom->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    phantom->add_option("--cases", o.cases, "Number of random cases")->capture_default_str();
    phantom->add_option("--dims", o.dims, "Grid size for random cases")->expected(3);
    phantom->add_option("--offset", o.offset, "a1 lesion offset in voxels")->capture_default_str();
    phantom->add_option("--min-lesions", o.min_lesions, "Fewest GT lesions per random case")->capture_default_str();
    phantom->add_option("--max-lesions", o.max_lesions, "Most GT lesions per random case")->capture_default_str();
    phantom->add_option("--miss", o.noise.miss_probability, "Probability a lesion is missed");
    phantom->add_option("--shift", o.noise.max_shift, "Max prediction shift (voxels)");
    phantom->add_option("--jitter", o.noise.radius_jitter, "Relative radius jitter");
    phantom->add_option("--spurious", o.noise.max_spurious, "Max spurious blobs per case");
    phantom->add_option("--blur", o.noise.blur_radius, "Box-blur half-width for the probability map");
    phantom->add_option("--format", o.format, "nifti or raw");
    phantom->add_option("--out", o.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*evaluate) return cmd_evaluate(o);
        if (*sweep_cmd) return cmd_sweep(o);
        if (*compare) return cmd_compare(o);
        if (*phantom) return cmd_phantom(o);
    } catch (const IoError& e) {
        std::cerr << "lesioneval: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        std::cerr << "lesioneval: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "lesioneval: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
