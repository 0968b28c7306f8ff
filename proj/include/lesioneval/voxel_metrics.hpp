#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distance_transform.hpp"
#include "volume.hpp"

namespace lesioneval {

/// Why a metric has no value.
enum class Undefined : std::uint8_t { none, both_empty, one_empty };

inline std::string_view to_string(Undefined reason) {
    switch (reason) {
        case Undefined::none: return "defined";
        case Undefined::both_empty: return "both-empty";
        case Undefined::one_empty: return "one-empty";
    }
    return "unknown";
}

/// A real value or the reason it is missing.
struct Measure {
    double value = 0.0;
    Undefined reason = Undefined::none;

    [[nodiscard]] bool defined() const { return reason == Undefined::none; }
    [[nodiscard]] std::optional<double> get() const { return defined() ? std::optional(value) : std::nullopt; }

    static Measure of(double v) { return {v, Undefined::none}; }
    static Measure missing(Undefined why) { return {0.0, why}; }

    friend bool operator==(const Measure&, const Measure&) = default;
};

struct VoxelMetrics {
    Measure dsc;
    Measure iou;
    Measure hd95_mm;
};

struct OverlapCounts {
    std::size_t pred = 0;
    std::size_t gt = 0;
    std::size_t intersection = 0;
};

inline OverlapCounts overlap_counts(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
    if (pred.size() != gt.size()) throw ShapeError("mask lengths differ");
    OverlapCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0;
        const bool g = gt[i] != 0;
        c.pred += p;
        c.gt += g;
        c.intersection += p && g;
    }
    return c;
}

/// 2|P∩G| / (|P|+|G|); nullopt when both are empty.
inline std::optional<double> dsc(const OverlapCounts& c) {
    if (c.pred + c.gt == 0) return std::nullopt;
    return 2.0 * static_cast<double>(c.intersection) / static_cast<double>(c.pred + c.gt);
}

/// |P∩G| / |P∪G|; nullopt when both are empty.
inline std::optional<double> iou(const OverlapCounts& c) {
    const std::size_t uni = c.pred + c.gt - c.intersection;
    if (uni == 0) return std::nullopt;
    return static_cast<double>(c.intersection) / static_cast<double>(uni);
}

namespace voxel_detail {

inline void require_binary(const Volume& v, std::string_view role) {
    if (v.kind() != VolumeKind::binary) throw ValueError(std::string(role) + " mask is not binary");
}

inline OverlapCounts checked_counts(const Volume& pred, const Volume& gt) {
    require_same_grid(pred.grid(), gt.grid());
    require_binary(pred, "prediction");
    require_binary(gt, "ground-truth");
    return overlap_counts(pred.mask(), gt.mask());
}

}  // namespace voxel_detail

inline std::optional<double> dsc(const Volume& pred, const Volume& gt) {
    return dsc(voxel_detail::checked_counts(pred, gt));
}

inline std::optional<double> iou(const Volume& pred, const Volume& gt) {
    return iou(voxel_detail::checked_counts(pred, gt));
}

/// Foreground voxels with at least one 6-neighbour that is background or
/// outside the grid, as a byte mask.
inline std::vector<std::uint8_t> surface_mask(const Grid& grid, std::span<const std::uint8_t> mask) {
    const std::size_t nx = grid.dims[0];
    const std::size_t ny = grid.dims[1];
    const std::size_t nz = grid.dims[2];
    std::vector<std::uint8_t> out(mask.size(), 0);
    for (std::size_t z = 0; z < nz; ++z) {
        for (std::size_t y = 0; y < ny; ++y) {
            for (std::size_t x = 0; x < nx; ++x) {
                const std::size_t i = grid.index(x, y, z);
                if (mask[i] == 0) continue;
                const bool boundary = x == 0 || y == 0 || z == 0 || x + 1 == nx || y + 1 == ny || z + 1 == nz ||
                                      mask[i - 1] == 0 || mask[i + 1] == 0 || mask[i - nx] == 0 ||
                                      mask[i + nx] == 0 || mask[i - nx * ny] == 0 || mask[i + nx * ny] == 0;
                out[i] = boundary ? 1 : 0;
            }
        }
    }
    return out;
}

/// Linear indices of the surface voxels, ascending.
inline std::vector<std::size_t> surface_voxels(const Volume& mask) {
    const auto surface = surface_mask(mask.grid(), mask.mask());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < surface.size(); ++i) {
        if (surface[i] != 0) out.push_back(i);
    }
    return out;
}

/// Percentile `p` in [0,1] of `values`: position p·(n−1) in sorted order,
/// linearly interpolated. `values` is reordered.
inline double percentile(std::vector<double>& values, double p) {
    if (values.empty()) throw ValueError("percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

/// Every surface-to-surface distance entering HD95: d(a, B) for each surface
/// voxel a of `pred` followed by d(b, A) for each surface voxel b of `gt`.
inline std::vector<double> surface_distances(const Grid& grid, std::span<const std::uint8_t> pred,
                                             std::span<const std::uint8_t> gt) {
    const auto surface_p = surface_mask(grid, pred);
    const auto surface_g = surface_mask(grid, gt);
    const auto to_g = squared_distance_transform(grid, surface_g);
    const auto to_p = squared_distance_transform(grid, surface_p);
    std::vector<double> out;
    for (std::size_t i = 0; i < surface_p.size(); ++i) {
        if (surface_p[i] != 0) out.push_back(std::sqrt(to_g[i]));
    }
    for (std::size_t i = 0; i < surface_g.size(); ++i) {
        if (surface_g[i] != 0) out.push_back(std::sqrt(to_p[i]));
    }
    return out;
}

/// 95th percentile of the pooled symmetric surface distances in mm.
inline Measure hd95(const Grid& grid, std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt,
                    double p = 0.95) {
    const bool pred_empty = std::none_of(pred.begin(), pred.end(), [](std::uint8_t v) { return v != 0; });
    const bool gt_empty = std::none_of(gt.begin(), gt.end(), [](std::uint8_t v) { return v != 0; });
    if (pred_empty && gt_empty) return Measure::missing(Undefined::both_empty);
    if (pred_empty || gt_empty) return Measure::missing(Undefined::one_empty);
    auto distances = surface_distances(grid, pred, gt);
    return Measure::of(percentile(distances, p));
}

inline std::optional<double> hd95(const Volume& pred, const Volume& gt) {
    require_same_grid(pred.grid(), gt.grid());
    voxel_detail::require_binary(pred, "prediction");
    voxel_detail::require_binary(gt, "ground-truth");
    return hd95(pred.grid(), pred.mask(), gt.mask()).get();
}

inline VoxelMetrics voxel_metrics(const Grid& grid, std::span<const std::uint8_t> pred,
                                  std::span<const std::uint8_t> gt) {
    const auto counts = overlap_counts(pred, gt);
    VoxelMetrics m;
    if (counts.pred == 0 && counts.gt == 0) {
        m.dsc = m.iou = m.hd95_mm = Measure::missing(Undefined::both_empty);
        return m;
    }
    m.dsc = Measure::of(*dsc(counts));
    m.iou = Measure::of(*iou(counts));
    m.hd95_mm = (counts.pred == 0 || counts.gt == 0) ? Measure::missing(Undefined::one_empty) : hd95(grid, pred, gt);
    return m;
}

inline VoxelMetrics voxel_metrics(const Volume& pred, const Volume& gt) {
    require_same_grid(pred.grid(), gt.grid());
    voxel_detail::require_binary(pred, "prediction");
    voxel_detail::require_binary(gt, "ground-truth");
    return voxel_metrics(pred.grid(), pred.mask(), gt.mask());
}

}  // namespace lesioneval
