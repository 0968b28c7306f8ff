// Prints voxel- and lesion-level metrics for the built-in phantom scenarios.
//
//   scenarios [offset]

#include <cstdio>
#include <cstdlib>
#include <string>

#include "lesioneval/lesioneval.hpp"

using namespace lesioneval;

namespace {

std::string show(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    const std::int64_t offset = argc > 1 ? std::atoll(argv[1]) : 8;
    std::printf("%-4s %6s %9s %5s %5s | %8s %8s | %8s %8s\n", "case", "DSC", "HD95(mm)", "#GT", "#pred",
                "rec^GT", "prec^Pr", "rec^IoU", "prec^IoU");
    try {
        for (const auto& name : preset_names()) {
            const auto m = evaluate_case(generate(preset(name, offset)), 0.5);
            std::printf("%-4s %6s %9s %5zu %5zu | %8s %8s | %8s %8s\n", name.c_str(), show(m.voxel.dsc.get()).c_str(),
                        show(m.voxel.hd95_mm.get()).c_str(), m.n_gt_lesions, m.n_pred_lesions,
                        show(m.gt_summary.recall).c_str(), show(m.pred_summary.precision).c_str(),
                        show(m.iou_summary.recall).c_str(), show(m.iou_summary.precision).c_str());
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    }
    return 0;
}
