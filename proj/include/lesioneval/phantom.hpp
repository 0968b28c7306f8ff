#pragma once

// Synthetic ground-truth / prediction pairs.
//
// Presets are exact-count constructions on a 32×32×16 grid at
// 0.5×0.5×1.0 mm, built from 2×2×2 cubes (8 voxels, the smallest lesion the
// size filter keeps):
//
//   b1  one GT lesion fully predicted, the other missed, plus an 8-voxel
//       false blob.                                     DSC = 16/32 = 0.5
//   b2  each GT lesion half covered by an 8-voxel prediction that sticks
//       out by the other half.                          DSC = 16/32 = 0.5
//   a1  two GT lesions, only the first predicted; the missed one sits
//       `offset` voxels along x from the first.          DSC = 16/24
//   a2  as a1 with twice the offset: same DSC, larger HD95.
//   b3  one 5×2×2 GT lesion, two 8-voxel predictions inside it separated by
//       a one-voxel gap (IoU 0.4 each).
//   b4  two GT cubes one voxel apart, one 3×2×2 prediction bridging the
//       inner halves of both (IoU 0.25 each).
//
// The random corpus draws spherical lesions and derives a probability map
// from them (missed lesions, shifts, radius jitter, spurious blobs, box blur).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "components.hpp"
#include "error.hpp"
#include "pipeline.hpp"
#include "rng.hpp"
#include "volume.hpp"

namespace lesioneval {

using Voxel = std::array<std::int64_t, 3>;

struct Cuboid {
    Voxel corner{0, 0, 0};
    Voxel size{1, 1, 1};
};

/// Voxels whose centre lies within `radius` (in voxel units) of `center`.
struct Sphere {
    std::array<double, 3> center{0.0, 0.0, 0.0};
    double radius = 1.0;
};

using Shape = std::variant<Cuboid, Sphere>;

struct ScenarioSpec {
    std::string id;
    Grid grid{{32, 32, 16}, {0.5, 0.5, 1.0}};
    std::vector<Shape> gt;
    std::vector<Shape> pred;
    std::uint64_t seed = 0;  // random scenario only
};

struct NoiseParams {
    double miss_probability = 0.0;  // chance a GT lesion gets no prediction
    std::int64_t max_shift = 0;     // per-axis displacement, voxels
    double radius_jitter = 0.0;     // relative radius change, uniform ±
    std::int64_t max_spurious = 0;  // spurious blobs per case, uniform [0, max]
    double spurious_radius = 2.0;   // spurious blob radius upper bound, voxels
    std::int64_t blur_radius = 0;   // box-blur half-width applied to the indicator

    [[nodiscard]] bool is_zero() const {
        return miss_probability == 0.0 && max_shift == 0 && radius_jitter == 0.0 && max_spurious == 0 &&
               blur_radius == 0;
    }
};

struct CorpusParams {
    std::size_t n_cases = 20;
    Grid grid{{32, 32, 16}, {0.5, 0.5, 1.0}};
    std::uint64_t seed = 0;
    std::size_t min_lesions = 1;
    std::size_t max_lesions = 3;
    double min_radius = 1.5;
    double max_radius = 3.0;
    NoiseParams noise;
};

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"a1", "a2", "b1", "b2", "b3", "b4"};
    return names;
}

namespace phantom_detail {

inline bool in_grid(const Grid& g, std::int64_t x, std::int64_t y, std::int64_t z) {
    return x >= 0 && y >= 0 && z >= 0 && x < static_cast<std::int64_t>(g.dims[0]) &&
           y < static_cast<std::int64_t>(g.dims[1]) && z < static_cast<std::int64_t>(g.dims[2]);
}

/// Calls f(linear index) for every voxel of the shape. With `clip`, voxels
/// outside the grid are skipped; otherwise they raise SpecError.
template <typename F>
void rasterize(const Grid& g, const Shape& shape, bool clip, F&& f) {
    const auto emit = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
        if (!in_grid(g, x, y, z)) {
            if (clip) return;
            throw SpecError("shape extends outside the grid");
        }
        f(g.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z)));
    };
    if (const auto* c = std::get_if<Cuboid>(&shape)) {
        if (c->size[0] < 1 || c->size[1] < 1 || c->size[2] < 1) throw SpecError("cuboid size must be positive");
        for (std::int64_t z = c->corner[2]; z < c->corner[2] + c->size[2]; ++z) {
            for (std::int64_t y = c->corner[1]; y < c->corner[1] + c->size[1]; ++y) {
                for (std::int64_t x = c->corner[0]; x < c->corner[0] + c->size[0]; ++x) emit(x, y, z);
            }
        }
        return;
    }
    const auto& s = std::get<Sphere>(shape);
    if (!(s.radius > 0.0)) throw SpecError("sphere radius must be positive");
    const double r2 = s.radius * s.radius;
    std::array<std::int64_t, 3> lo{};
    std::array<std::int64_t, 3> hi{};
    for (int a = 0; a < 3; ++a) {
        lo[a] = static_cast<std::int64_t>(std::ceil(s.center[a] - s.radius));
        hi[a] = static_cast<std::int64_t>(std::floor(s.center[a] + s.radius));
    }
    for (std::int64_t z = lo[2]; z <= hi[2]; ++z) {
        for (std::int64_t y = lo[1]; y <= hi[1]; ++y) {
            for (std::int64_t x = lo[0]; x <= hi[0]; ++x) {
                const double dx = static_cast<double>(x) - s.center[0];
                const double dy = static_cast<double>(y) - s.center[1];
                const double dz = static_cast<double>(z) - s.center[2];
                if (dx * dx + dy * dy + dz * dz <= r2) emit(x, y, z);
            }
        }
    }
}

inline std::vector<std::uint8_t> paint(const Grid& g, const std::vector<Shape>& shapes, bool clip) {
    std::vector<std::uint8_t> mask(g.size(), 0);
    for (const auto& s : shapes) rasterize(g, s, clip, [&](std::size_t i) { mask[i] = 1; });
    return mask;
}

inline Cuboid cube(std::int64_t x, std::int64_t y, std::int64_t z, std::int64_t edge = 2) {
    return Cuboid{{x, y, z}, {edge, edge, edge}};
}

inline Cuboid box(Voxel corner, Voxel size) { return Cuboid{corner, size}; }

/// Mean of `indicator` over the (2r+1)^3 window clipped to the grid.
inline std::vector<float> box_blur(const Grid& g, const std::vector<std::uint8_t>& indicator, std::int64_t r) {
    std::vector<double> sum(indicator.begin(), indicator.end());
    std::vector<double> count(indicator.size(), 1.0);
    const std::array<std::size_t, 3> stride{1, g.dims[0], g.dims[0] * g.dims[1]};
    std::vector<double> line_s;
    std::vector<double> line_c;
    for (int axis = 0; axis < 3; ++axis) {
        const std::size_t n = g.dims[static_cast<std::size_t>(axis)];
        const std::size_t st = stride[static_cast<std::size_t>(axis)];
        line_s.resize(n + 1);
        line_c.resize(n + 1);
        for (std::size_t base = 0; base < g.size(); ++base) {
            // Only visit line starts: coordinate along `axis` is zero.
            if ((base / st) % n != 0) continue;
            line_s[0] = line_c[0] = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                line_s[i + 1] = line_s[i] + sum[base + i * st];
                line_c[i + 1] = line_c[i] + count[base + i * st];
            }
            for (std::size_t i = 0; i < n; ++i) {
                const auto lo = static_cast<std::size_t>(std::max<std::int64_t>(0, static_cast<std::int64_t>(i) - r));
                const auto hi = static_cast<std::size_t>(
                    std::min<std::int64_t>(static_cast<std::int64_t>(n), static_cast<std::int64_t>(i) + r + 1));
                sum[base + i * st] = line_s[hi] - line_s[lo];
                count[base + i * st] = line_c[hi] - line_c[lo];
            }
        }
    }
    std::vector<float> out(indicator.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::clamp(static_cast<float>(sum[i] / count[i]), 0.0F, 1.0F);
    }
    return out;
}

/// True when any voxel of `shape` is 26-adjacent to (or on) foreground of `mask`.
inline bool touches(const Grid& g, const std::vector<std::uint8_t>& mask, const Shape& shape) {
    bool hit = false;
    rasterize(g, shape, true, [&](std::size_t i) {
        if (hit) return;
        const auto c = g.coords(i);
        for (std::int64_t dz = -1; dz <= 1 && !hit; ++dz) {
            for (std::int64_t dy = -1; dy <= 1 && !hit; ++dy) {
                for (std::int64_t dx = -1; dx <= 1 && !hit; ++dx) {
                    const auto x = static_cast<std::int64_t>(c[0]) + dx;
                    const auto y = static_cast<std::int64_t>(c[1]) + dy;
                    const auto z = static_cast<std::int64_t>(c[2]) + dz;
                    if (in_grid(g, x, y, z) &&
                        mask[g.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                     static_cast<std::size_t>(z))] != 0) {
                        hit = true;
                    }
                }
            }
        }
    });
    return hit;
}

inline std::size_t voxel_count(const Grid& g, const Shape& shape) {
    std::size_t n = 0;
    rasterize(g, shape, true, [&](std::size_t) { ++n; });
    return n;
}

}  // namespace phantom_detail

/// Built-in scenario. `offset` is the a1 distance (voxels, along x) between
/// the detected and the missed lesion; a2 uses twice that.
inline ScenarioSpec preset(std::string_view name, std::int64_t offset = 8) {
    using phantom_detail::box;
    using phantom_detail::cube;
    ScenarioSpec s;
    s.id = std::string(name);
    if (name == "b1") {
        s.gt = {cube(4, 4, 4), cube(20, 20, 8)};
        s.pred = {cube(4, 4, 4), cube(4, 24, 10)};
    } else if (name == "b2") {
        s.gt = {cube(4, 4, 4), cube(20, 20, 8)};
        s.pred = {cube(3, 4, 4), cube(21, 20, 8)};
    } else if (name == "a1" || name == "a2") {
        const std::int64_t d = name == "a1" ? offset : 2 * offset;
        if (offset < 3) throw SpecError("a1/a2 offset must be at least 3 voxels to keep lesions separate");
        s.gt = {cube(2, 4, 4), cube(2 + d, 4, 4)};
        s.pred = {cube(2, 4, 4)};
    } else if (name == "b3") {
        s.gt = {box({10, 10, 6}, {5, 2, 2})};
        s.pred = {cube(10, 10, 6), cube(13, 10, 6)};
    } else if (name == "b4") {
        s.gt = {cube(10, 10, 6), cube(13, 10, 6)};
        s.pred = {box({11, 10, 6}, {3, 2, 2})};
    } else {
        throw SpecError("unknown scenario '" + std::string(name) + "'");
    }
    return s;
}

inline std::vector<CasePair> random_corpus(const CorpusParams& params);

/// Binary GT and prediction realising the scenario. Shapes must lie inside
/// the grid and GT shapes must form distinct 26-connected lesions.
inline CasePair generate(const ScenarioSpec& spec) {
    if (spec.id == "random") {
        CorpusParams p;
        p.n_cases = 1;
        p.grid = spec.grid;
        p.seed = spec.seed;
        auto corpus = random_corpus(p);
        corpus.front().case_id = "random";
        return corpus.front();
    }
    try {
        spec.grid.validate();
    } catch (const ValueError& e) {
        throw SpecError(e.what());
    }
    const auto gt = phantom_detail::paint(spec.grid, spec.gt, false);
    const auto pred = phantom_detail::paint(spec.grid, spec.pred, false);
    const auto labeling = label_components(spec.grid, gt);
    if (labeling.count() != spec.gt.size()) {
        throw SpecError("ground-truth shapes touch or overlap: " + std::to_string(spec.gt.size()) + " shapes form " +
                        std::to_string(labeling.count()) + " lesions");
    }
    return CasePair(spec.id, Volume::from_mask(spec.grid, gt), Volume::from_mask(spec.grid, pred));
}

/// Seeded corpus: case k draws from Xoshiro256::stream(seed, k). GT lesions
/// are spheres of at least 8 voxels that never touch each other; the
/// prediction is a probability map (kind probability even when noise is zero).
inline std::vector<CasePair> random_corpus(const CorpusParams& params) {
    using phantom_detail::paint;
    try {
        params.grid.validate();
    } catch (const ValueError& e) {
        throw SpecError(e.what());
    }
    if (params.min_lesions > params.max_lesions) throw SpecError("lesion count range is empty");
    if (!(params.min_radius > 0.0) || params.min_radius > params.max_radius) throw SpecError("bad radius range");
    const auto& nz = params.noise;
    if (!(nz.miss_probability >= 0.0 && nz.miss_probability <= 1.0) || nz.max_shift < 0 || nz.radius_jitter < 0.0 ||
        nz.radius_jitter >= 1.0 || nz.max_spurious < 0 || nz.blur_radius < 0 || !(nz.spurious_radius >= 1.0)) {
        throw SpecError("noise parameters out of range");
    }
    const Grid& g = params.grid;
    const double margin = params.max_radius + 1.0;
    for (int a = 0; a < 3; ++a) {
        if (static_cast<double>(g.dims[a]) <= 2.0 * margin) throw SpecError("grid too small for the lesion radius");
    }

    std::vector<CasePair> out(params.n_cases);
    for (std::size_t k = 0; k < params.n_cases; ++k) {
        auto rng = Xoshiro256::stream(params.seed, k);
        const auto center_in = [&](double m) {
            return std::array<double, 3>{rng.uniform(m, static_cast<double>(g.dims[0]) - 1.0 - m),
                                         rng.uniform(m, static_cast<double>(g.dims[1]) - 1.0 - m),
                                         rng.uniform(m, static_cast<double>(g.dims[2]) - 1.0 - m)};
        };

        const auto wanted = static_cast<std::size_t>(
            rng.between(static_cast<std::int64_t>(params.min_lesions), static_cast<std::int64_t>(params.max_lesions)));
        std::vector<Shape> lesions;
        std::vector<std::uint8_t> gt(g.size(), 0);
        for (std::size_t attempt = 0; lesions.size() < wanted && attempt < 200 * (wanted + 1); ++attempt) {
            const double r = rng.uniform(params.min_radius, params.max_radius);
            const Shape s = Sphere{center_in(margin), r};
            if (phantom_detail::voxel_count(g, s) < 8 || phantom_detail::touches(g, gt, s)) continue;
            phantom_detail::rasterize(g, s, true, [&](std::size_t i) { gt[i] = 1; });
            lesions.push_back(s);
        }

        std::vector<Shape> predicted;
        for (const auto& l : lesions) {
            const auto& s = std::get<Sphere>(l);
            if (nz.miss_probability > 0.0 && rng.unit() < nz.miss_probability) continue;
            Sphere p = s;
            if (nz.max_shift > 0) {
                for (auto& c : p.center) c += static_cast<double>(rng.between(-nz.max_shift, nz.max_shift));
            }
            if (nz.radius_jitter > 0.0) p.radius = s.radius * (1.0 + rng.uniform(-nz.radius_jitter, nz.radius_jitter));
            predicted.push_back(p);
        }
        if (nz.max_spurious > 0) {
            const auto n_spurious = rng.between(0, nz.max_spurious);
            for (std::int64_t i = 0; i < n_spurious; ++i) {
                const double r = rng.uniform(1.0, nz.spurious_radius);
                predicted.push_back(Sphere{center_in(r + 1.0), r});
            }
        }
        const auto indicator = paint(g, predicted, true);
        std::vector<float> prob;
        if (nz.blur_radius > 0) {
            prob = phantom_detail::box_blur(g, indicator, nz.blur_radius);
        } else {
            prob.assign(indicator.begin(), indicator.end());
        }
        char id[32];
        std::snprintf(id, sizeof id, "case%03zu", k);
        out[k] = CasePair(id, Volume::from_mask(g, gt), Volume(g, VolumeKind::probability, std::move(prob)));
    }
    return out;
}

namespace phantom_detail {

inline Voxel voxel_from(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) throw SpecError("expected a 3-element integer array");
    return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>(), j[2].get<std::int64_t>()};
}

inline std::vector<Shape> shapes_from(const nlohmann::json& list) {
    if (!list.is_array()) throw SpecError("shape list must be an array");
    std::vector<Shape> out;
    for (const auto& item : list) {
        if (item.contains("cuboid")) {
            const auto& c = item.at("cuboid");
            out.emplace_back(Cuboid{voxel_from(c.at("corner")), voxel_from(c.at("size"))});
        } else if (item.contains("sphere")) {
            const auto& s = item.at("sphere");
            const auto& c = s.at("center");
            if (!c.is_array() || c.size() != 3) throw SpecError("sphere center must have 3 entries");
            out.emplace_back(Sphere{{c[0].get<double>(), c[1].get<double>(), c[2].get<double>()},
                                    s.at("radius").get<double>()});
        } else {
            throw SpecError("shape must be a cuboid or a sphere");
        }
    }
    return out;
}

}  // namespace phantom_detail

/// Scenario from JSON:
///   { "id": "b1", "offset": 8 }                       preset
///   { "id": "custom", "dims": [..], "spacing_mm": [..],
///     "gt": [{"cuboid": {"corner": [..], "size": [..]}},
///            {"sphere": {"center": [..], "radius": r}}],
///     "pred": [...] }                                  explicit shapes
///   { "id": "random", "seed": 7 }
inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
    try {
        ScenarioSpec s;
        const auto id = j.at("id").get<std::string>();
        if (j.contains("gt") || j.contains("pred")) {
            s.id = id;
            s.gt = phantom_detail::shapes_from(j.value("gt", nlohmann::json::array()));
            s.pred = phantom_detail::shapes_from(j.value("pred", nlohmann::json::array()));
        } else if (id == "random") {
            s.id = id;
        } else {
            s = preset(id, j.value("offset", std::int64_t{8}));
        }
        if (j.contains("dims")) {
            const auto d = phantom_detail::voxel_from(j.at("dims"));
            for (int a = 0; a < 3; ++a) {
                if (d[a] < 1) throw SpecError("dims must be positive");
                s.grid.dims[a] = static_cast<std::size_t>(d[a]);
            }
        }
        if (j.contains("spacing_mm")) {
            const auto& sp = j.at("spacing_mm");
            if (!sp.is_array() || sp.size() != 3) throw SpecError("spacing_mm must have 3 entries");
            for (std::size_t a = 0; a < 3; ++a) s.grid.spacing[a] = sp[a].get<double>();
        }
        s.seed = j.value("seed", std::uint64_t{0});
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("bad scenario description: ") + e.what());
    }
}

}  // namespace lesioneval
