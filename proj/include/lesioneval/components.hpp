#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <vector>

#include "volume.hpp"

namespace lesioneval {

enum class Connectivity { faces = 6, edges = 18, full = 26 };

/// Foreground voxels partitioned into connected components. Label 0 is
/// background; label k (1-based) owns sizes[k-1] voxels listed in ascending
/// linear index in voxel_lists[k-1]. Labels are ordered by each component's
/// smallest linear voxel index.
struct ComponentLabeling {
    Grid grid;
    std::vector<std::int32_t> labels;
    std::vector<std::size_t> sizes;
    std::vector<std::vector<std::size_t>> voxel_lists;

    [[nodiscard]] std::size_t count() const { return sizes.size(); }

    [[nodiscard]] std::size_t foreground() const {
        std::size_t total = 0;
        for (auto s : sizes) total += s;
        return total;
    }

    [[nodiscard]] Volume to_volume() const {
        std::vector<float> data(labels.begin(), labels.end());
        return Volume(grid, VolumeKind::labels, std::move(data));
    }

    /// Union of all retained components as a binary volume.
    [[nodiscard]] Volume mask() const {
        std::vector<float> data(labels.size(), 0.0F);
        for (std::size_t i = 0; i < labels.size(); ++i) data[i] = labels[i] > 0 ? 1.0F : 0.0F;
        return Volume(grid, VolumeKind::binary, std::move(data));
    }

    friend bool operator==(const ComponentLabeling&, const ComponentLabeling&) = default;
};

namespace components_detail {

struct Offset {
    int dx, dy, dz;
};

inline std::vector<Offset> neighbour_offsets(Connectivity conn) {
    std::vector<Offset> out;
    for (int dz = -1; dz <= 1; ++dz) {
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
                if (manhattan == 0) continue;
                if (conn == Connectivity::faces && manhattan > 1) continue;
                if (conn == Connectivity::edges && manhattan > 2) continue;
                out.push_back({dx, dy, dz});
            }
        }
    }
    return out;
}

}  // namespace components_detail

/// Labels connected foreground components of a byte mask (non-zero = foreground).
inline ComponentLabeling label_components(const Grid& grid, std::span<const std::uint8_t> mask,
                                          Connectivity conn = Connectivity::full) {
    grid.validate();
    if (mask.size() != grid.size()) throw ShapeError("mask length does not match grid");
    const auto offsets = components_detail::neighbour_offsets(conn);
    const auto nx = static_cast<std::int64_t>(grid.dims[0]);
    const auto ny = static_cast<std::int64_t>(grid.dims[1]);
    const auto nz = static_cast<std::int64_t>(grid.dims[2]);

    ComponentLabeling out;
    out.grid = grid;
    out.labels.assign(grid.size(), 0);
    std::vector<std::size_t> stack;

    for (std::size_t seed = 0; seed < mask.size(); ++seed) {
        if (mask[seed] == 0 || out.labels[seed] != 0) continue;
        const auto label = static_cast<std::int32_t>(out.sizes.size() + 1);
        std::vector<std::size_t> members;
        out.labels[seed] = label;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t v = stack.back();
            stack.pop_back();
            members.push_back(v);
            const auto c = grid.coords(v);
            const auto x = static_cast<std::int64_t>(c[0]);
            const auto y = static_cast<std::int64_t>(c[1]);
            const auto z = static_cast<std::int64_t>(c[2]);
            for (const auto& o : offsets) {
                const std::int64_t px = x + o.dx;
                const std::int64_t py = y + o.dy;
                const std::int64_t pz = z + o.dz;
                if (px < 0 || py < 0 || pz < 0 || px >= nx || py >= ny || pz >= nz) continue;
                const auto n = static_cast<std::size_t>(px + nx * (py + ny * pz));
                if (mask[n] == 0 || out.labels[n] != 0) continue;
                out.labels[n] = label;
                stack.push_back(n);
            }
        }
        std::sort(members.begin(), members.end());
        out.sizes.push_back(members.size());
        out.voxel_lists.push_back(std::move(members));
    }
    return out;
}

inline ComponentLabeling label_components(const Volume& mask, Connectivity conn = Connectivity::full) {
    const auto bytes = mask.mask();
    return label_components(mask.grid(), bytes, conn);
}

/// Drops components with fewer than `min_voxels` voxels and relabels the
/// survivors 1..k in their original order.
inline ComponentLabeling filter_small(const ComponentLabeling& labeling, std::size_t min_voxels = 8) {
    ComponentLabeling out;
    out.grid = labeling.grid;
    out.labels.assign(labeling.labels.size(), 0);
    for (std::size_t k = 0; k < labeling.count(); ++k) {
        if (labeling.sizes[k] < min_voxels) continue;
        const auto label = static_cast<std::int32_t>(out.sizes.size() + 1);
        for (auto v : labeling.voxel_lists[k]) out.labels[v] = label;
        out.sizes.push_back(labeling.sizes[k]);
        out.voxel_lists.push_back(labeling.voxel_lists[k]);
    }
    return out;
}

}  // namespace lesioneval
