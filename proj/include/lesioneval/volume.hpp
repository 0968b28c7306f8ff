#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "error.hpp"

namespace lesioneval {

using Dims = std::array<std::size_t, 3>;
using Spacing = std::array<double, 3>;

enum class VolumeKind { binary, probability, labels };

inline std::string_view to_string(VolumeKind kind) {
    switch (kind) {
        case VolumeKind::binary: return "binary";
        case VolumeKind::probability: return "probability";
        case VolumeKind::labels: return "labels";
    }
    return "unknown";
}

/// Voxel grid geometry. Linear index = x + nx * (y + ny * z).
struct Grid {
    Dims dims{1, 1, 1};
    Spacing spacing{1.0, 1.0, 1.0};

    [[nodiscard]] std::size_t size() const { return dims[0] * dims[1] * dims[2]; }

    [[nodiscard]] std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
        return x + dims[0] * (y + dims[1] * z);
    }

    [[nodiscard]] std::array<std::size_t, 3> coords(std::size_t idx) const {
        const std::size_t x = idx % dims[0];
        const std::size_t rest = idx / dims[0];
        return {x, rest % dims[1], rest / dims[1]};
    }

    void validate() const {
        for (int a = 0; a < 3; ++a) {
            if (dims[a] == 0) throw ValueError("grid dimension " + std::to_string(a) + " is zero");
            if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
                throw ValueError("voxel spacing must be positive and finite");
            }
        }
    }

    friend bool operator==(const Grid&, const Grid&) = default;
};

inline bool same_dims(const Grid& a, const Grid& b) { return a.dims == b.dims; }

/// Spacings agree to 1e-6 relative.
inline bool same_spacing(const Grid& a, const Grid& b) {
    for (int i = 0; i < 3; ++i) {
        const double scale = std::max(std::abs(a.spacing[i]), std::abs(b.spacing[i]));
        if (std::abs(a.spacing[i] - b.spacing[i]) > 1e-6 * scale) return false;
    }
    return true;
}

inline void require_same_grid(const Grid& a, const Grid& b) {
    if (!same_dims(a, b)) {
        throw ShapeError("dims differ: (" + std::to_string(a.dims[0]) + "," + std::to_string(a.dims[1]) +
                         "," + std::to_string(a.dims[2]) + ") vs (" + std::to_string(b.dims[0]) + "," +
                         std::to_string(b.dims[1]) + "," + std::to_string(b.dims[2]) + ")");
    }
    if (!same_spacing(a, b)) throw ShapeError("voxel spacing differs");
}

/// Immutable 3D scalar volume. Every constructor checks the invariants of its
/// kind, so a Volume that exists is valid.
class Volume {
public:
    Volume() : Volume(Grid{}, VolumeKind::binary, std::vector<float>(1, 0.0F)) {}

    Volume(Grid grid, VolumeKind kind, std::vector<float> data)
        : grid_(grid), kind_(kind), data_(std::move(data)) {
        grid_.validate();
        if (data_.size() != grid_.size()) {
            throw ValueError("data length " + std::to_string(data_.size()) + " does not match grid size " +
                             std::to_string(grid_.size()));
        }
        check_kind(kind_, data_);
    }

    /// Zero-filled volume.
    static Volume zeros(Grid grid, VolumeKind kind = VolumeKind::binary) {
        grid.validate();
        return Volume(grid, kind, std::vector<float>(grid.size(), 0.0F));
    }

    /// Builds a binary volume from any 0/non-zero mask.
    static Volume from_mask(Grid grid, std::span<const std::uint8_t> mask) {
        std::vector<float> data(mask.size());
        std::transform(mask.begin(), mask.end(), data.begin(),
                       [](std::uint8_t v) { return v != 0 ? 1.0F : 0.0F; });
        return Volume(grid, VolumeKind::binary, std::move(data));
    }

    /// Picks the narrowest kind that admits every value: {0,1} -> binary,
    /// [0,1] -> probability, non-negative integers -> labels.
    static VolumeKind infer_kind(std::span<const float> values) {
        bool binary = true;
        bool unit = true;
        bool integral = true;
        for (float v : values) {
            if (!std::isfinite(v)) throw ValueError("non-finite voxel value");
            if (v != 0.0F && v != 1.0F) binary = false;
            if (v < 0.0F || v > 1.0F) unit = false;
            if (v < 0.0F || std::floor(v) != v) integral = false;
        }
        if (binary) return VolumeKind::binary;
        if (unit) return VolumeKind::probability;
        if (integral) return VolumeKind::labels;
        throw ValueError("values fit none of binary, probability or labels");
    }

    [[nodiscard]] const Grid& grid() const { return grid_; }
    [[nodiscard]] const Dims& dims() const { return grid_.dims; }
    [[nodiscard]] const Spacing& spacing() const { return grid_.spacing; }
    [[nodiscard]] VolumeKind kind() const { return kind_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] std::span<const float> data() const { return data_; }
    [[nodiscard]] float operator[](std::size_t i) const { return data_[i]; }
    [[nodiscard]] float at(std::size_t x, std::size_t y, std::size_t z) const { return data_[grid_.index(x, y, z)]; }

    /// Foreground as a byte mask (value > 0).
    [[nodiscard]] std::vector<std::uint8_t> mask() const {
        std::vector<std::uint8_t> m(data_.size());
        std::transform(data_.begin(), data_.end(), m.begin(), [](float v) { return v > 0.0F ? 1 : 0; });
        return m;
    }

    [[nodiscard]] std::size_t count_foreground() const {
        return static_cast<std::size_t>(std::count_if(data_.begin(), data_.end(), [](float v) { return v > 0.0F; }));
    }

    friend bool operator==(const Volume& a, const Volume& b) {
        return a.grid_.dims == b.grid_.dims && a.grid_.spacing == b.grid_.spacing && a.kind_ == b.kind_ &&
               a.data_ == b.data_;
    }

private:
    static void check_kind(VolumeKind kind, std::span<const float> values) {
        for (float v : values) {
            switch (kind) {
                case VolumeKind::binary:
                    if (v != 0.0F && v != 1.0F) throw ValueError("binary volume holds a value other than 0/1");
                    break;
                case VolumeKind::probability:
                    if (!(v >= 0.0F && v <= 1.0F)) throw ValueError("probability outside [0,1]");
                    break;
                case VolumeKind::labels:
                    if (!(v >= 0.0F) || std::floor(v) != v || !std::isfinite(v)) {
                        throw ValueError("label volume holds a negative or non-integral value");
                    }
                    break;
            }
        }
    }

    Grid grid_;
    VolumeKind kind_;
    std::vector<float> data_;
};

/// Ground truth and prediction for one case.
struct CasePair {
    std::string case_id;
    Volume gt;
    Volume pred;

    CasePair() = default;
    CasePair(std::string id, Volume gt_volume, Volume pred_volume)
        : case_id(std::move(id)), gt(std::move(gt_volume)), pred(std::move(pred_volume)) {
        require_same_grid(gt.grid(), pred.grid());
        if (gt.kind() != VolumeKind::binary) throw ValueError("ground truth of case '" + case_id + "' is not binary");
        if (pred.kind() == VolumeKind::labels) {
            throw ValueError("prediction of case '" + case_id + "' must be binary or a probability map");
        }
    }
};

}  // namespace lesioneval
