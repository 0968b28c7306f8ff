#pragma once

// Exact Euclidean distance transform on an anisotropic grid
// (Felzenszwalb & Huttenlocher lower envelope of parabolas, one axis at a
// time). Distances are between voxel centres, in the units of the spacing.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "volume.hpp"

namespace lesioneval {

namespace edt_detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// One line of `n` samples at `stride` apart: f[i] <- min_j f[j] + (w (i-j))^2.
inline void transform_line(double* base, std::size_t n, std::size_t stride, double w, std::vector<double>& f,
                           std::vector<std::size_t>& v, std::vector<double>& z) {
    f.resize(n);
    v.resize(n);
    z.resize(n + 1);
    const double w2 = w * w;
    // Height of the parabola rooted at q, shifted so intersections are linear.
    const auto lifted = [&](std::size_t q) {
        const auto qd = static_cast<double>(q);
        return f[q] + w2 * qd * qd;
    };
    const auto intersect = [&](std::size_t r, std::size_t q) {
        return (lifted(q) - lifted(r)) / (2.0 * w2 * (static_cast<double>(q) - static_cast<double>(r)));
    };

    std::size_t sites = 0;
    for (std::size_t q = 0; q < n; ++q) {
        f[q] = base[q * stride];
        if (f[q] == kInf) continue;
        while (sites > 0 && intersect(v[sites - 1], q) <= z[sites - 1]) --sites;
        z[sites] = sites == 0 ? -kInf : intersect(v[sites - 1], q);
        v[sites] = q;
        ++sites;
        z[sites] = kInf;
    }
    if (sites == 0) return;
    std::size_t k = 0;
    for (std::size_t q = 0; q < n; ++q) {
        while (z[k + 1] < static_cast<double>(q)) ++k;
        const double d = w * (static_cast<double>(q) - static_cast<double>(v[k]));
        base[q * stride] = d * d + f[v[k]];
    }
}

}  // namespace edt_detail

/// Squared distance from every voxel to the nearest feature voxel
/// (non-zero in `features`); +inf everywhere when there are none.
inline std::vector<double> squared_distance_transform(const Grid& grid, std::span<const std::uint8_t> features) {
    using edt_detail::kInf;
    const std::size_t nx = grid.dims[0];
    const std::size_t ny = grid.dims[1];
    const std::size_t nz = grid.dims[2];
    std::vector<double> d(grid.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = features[i] != 0 ? 0.0 : kInf;

    std::vector<double> f;
    std::vector<std::size_t> v;
    std::vector<double> z;
    for (std::size_t k = 0; k < nz; ++k) {
        for (std::size_t j = 0; j < ny; ++j) {
            edt_detail::transform_line(d.data() + grid.index(0, j, k), nx, 1, grid.spacing[0], f, v, z);
        }
    }
    for (std::size_t k = 0; k < nz; ++k) {
        for (std::size_t i = 0; i < nx; ++i) {
            edt_detail::transform_line(d.data() + grid.index(i, 0, k), ny, nx, grid.spacing[1], f, v, z);
        }
    }
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            edt_detail::transform_line(d.data() + grid.index(i, j, 0), nz, nx * ny, grid.spacing[2], f, v, z);
        }
    }
    return d;
}

}  // namespace lesioneval
