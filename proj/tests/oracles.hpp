#pragma once

// Slow, obviously-correct reference implementations used only by tests.
// None of these call into the library code they are compared against.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <set>
#include <tuple>
#include <vector>

namespace oracle {

struct Dims3 {
    int nx, ny, nz;
    [[nodiscard]] int size() const { return nx * ny * nz; }
    [[nodiscard]] int idx(int x, int y, int z) const { return x + nx * (y + ny * z); }
    [[nodiscard]] bool inside(int x, int y, int z) const {
        return x >= 0 && y >= 0 && z >= 0 && x < nx && y < ny && z < nz;
    }
};

/// Breadth-first flood fill, 26-connectivity, seeds taken in scan order so
/// labels follow each component's smallest linear index.
inline std::vector<int> bfs_labels(const Dims3& d, const std::vector<std::uint8_t>& mask) {
    std::vector<int> label(mask.size(), 0);
    int next = 0;
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                if (!mask[d.idx(x, y, z)] || label[d.idx(x, y, z)]) continue;
                ++next;
                std::deque<std::array<int, 3>> queue{{x, y, z}};
                label[d.idx(x, y, z)] = next;
                while (!queue.empty()) {
                    const auto [cx, cy, cz] = queue.front();
                    queue.pop_front();
                    for (int dz = -1; dz <= 1; ++dz) {
                        for (int dy = -1; dy <= 1; ++dy) {
                            for (int dx = -1; dx <= 1; ++dx) {
                                const int px = cx + dx, py = cy + dy, pz = cz + dz;
                                if (!d.inside(px, py, pz)) continue;
                                const int p = d.idx(px, py, pz);
                                if (!mask[p] || label[p]) continue;
                                label[p] = next;
                                queue.push_back({px, py, pz});
                            }
                        }
                    }
                }
            }
        }
    }
    return label;
}

inline std::size_t count(const std::vector<std::uint8_t>& m) {
    std::size_t n = 0;
    for (auto v : m) n += v != 0;
    return n;
}

/// Direct triple-loop Dice; NaN when both masks are empty.
inline double dice(const Dims3& d, const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
    double inter = 0, na = 0, nb = 0;
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                const int i = d.idx(x, y, z);
                na += a[i] ? 1 : 0;
                nb += b[i] ? 1 : 0;
                inter += (a[i] && b[i]) ? 1 : 0;
            }
        }
    }
    if (na + nb == 0) return std::numeric_limits<double>::quiet_NaN();
    return 2 * inter / (na + nb);
}

/// Foreground voxels with a background or out-of-grid face neighbour.
inline std::vector<std::array<int, 3>> surface(const Dims3& d, const std::vector<std::uint8_t>& m) {
    std::vector<std::array<int, 3>> out;
    const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                if (!m[d.idx(x, y, z)]) continue;
                bool edge = false;
                for (const auto& o : nb) {
                    const int px = x + o[0], py = y + o[1], pz = z + o[2];
                    if (!d.inside(px, py, pz) || !m[d.idx(px, py, pz)]) edge = true;
                }
                if (edge) out.push_back({x, y, z});
            }
        }
    }
    return out;
}

/// Exhaustive pairwise-minimum HD95 with the p·(n−1) interpolated percentile.
inline double hd95(const Dims3& d, const std::array<double, 3>& sp, const std::vector<std::uint8_t>& a,
                   const std::vector<std::uint8_t>& b) {
    const auto sa = surface(d, a);
    const auto sb = surface(d, b);
    const auto dist = [&](const std::array<int, 3>& p, const std::array<int, 3>& q) {
        const double dx = (p[0] - q[0]) * sp[0], dy = (p[1] - q[1]) * sp[1], dz = (p[2] - q[2]) * sp[2];
        return std::sqrt(dx * dx + dy * dy + dz * dz);
    };
    std::vector<double> all;
    for (const auto& p : sa) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : sb) best = std::min(best, dist(p, q));
        all.push_back(best);
    }
    for (const auto& q : sb) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : sa) best = std::min(best, dist(p, q));
        all.push_back(best);
    }
    std::sort(all.begin(), all.end());
    const double pos = 0.95 * static_cast<double>(all.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= all.size()) return all[lo];
    return all[lo] * (1 - frac) + all[lo + 1] * frac;
}

using Lesions = std::vector<std::vector<std::size_t>>;

inline std::size_t intersect(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::set<std::size_t> sa(a.begin(), a.end());
    std::size_t n = 0;
    for (auto v : b) n += sa.count(v);
    return n;
}

struct Match {
    std::size_t pred, gt;
};

/// Repeatedly takes the best remaining pair (highest IoU; ties to lower gt
/// then lower pred index) until the best no longer beats the threshold.
inline std::vector<Match> greedy_iou(const Lesions& pred, const Lesions& gt, double s) {
    std::vector<bool> pu(pred.size()), gu(gt.size());
    std::vector<Match> out;
    while (true) {
        bool found = false;
        std::size_t best_inter = 0, best_union = 1, bp = 0, bg = 0;
        for (std::size_t g = 0; g < gt.size(); ++g) {
            for (std::size_t p = 0; p < pred.size(); ++p) {
                if (pu[p] || gu[g]) continue;
                const std::size_t inter = intersect(pred[p], gt[g]);
                const std::size_t uni = pred[p].size() + gt[g].size() - inter;
                // Compare inter/uni > best_inter/best_union exactly in integers.
                if (!found || inter * best_union > best_inter * uni) {
                    found = true;
                    best_inter = inter;
                    best_union = uni;
                    bp = p;
                    bg = g;
                }
            }
        }
        if (!found) break;
        if (!(static_cast<double>(best_inter) / static_cast<double>(best_union) > s)) break;
        pu[bp] = gu[bg] = true;
        out.push_back({bp, bg});
    }
    return out;
}

/// Fraction of each `target` lesion covered by the union of `cover` lesions.
inline std::vector<double> coverage(const Lesions& cover, const Lesions& target) {
    std::set<std::size_t> all;
    for (const auto& l : cover) all.insert(l.begin(), l.end());
    std::vector<double> out;
    for (const auto& t : target) {
        std::size_t n = 0;
        for (auto v : t) n += all.count(v);
        out.push_back(static_cast<double>(n) / static_cast<double>(t.size()));
    }
    return out;
}

/// Every lesion configuration on a 3×3×3 grid built from a pair of cell
/// partitions: each side assigns its 4 cells to lesion labels 0..3 (0 = none)
/// such that the used labels are exactly 1..k. Lesion k is the union of its
/// cells. Calls visit(pred, gt) for all 126 × 126 labellings per partition pair.
/// Partitions: two fixed hand-made pairs plus `random_pairs` seeded ones.
template <class Visit>
std::size_t for_each_lesion_config(int random_pairs, Visit&& visit) {
    using Partition = std::array<int, 27>;  // voxel -> cell
    std::vector<std::pair<Partition, Partition>> pairs;
    Partition slabs{}, rows{}, a{}, b{};
    for (int v = 0; v < 27; ++v) {
        const int x = v % 3, y = (v / 3) % 3, z = v / 9;
        slabs[v] = z == 0 ? 0 : (z == 1 ? (y == 0 ? 1 : 2) : 3);
        rows[v] = x == 0 ? 0 : (x == 1 ? (y < 2 ? 1 : 2) : 3);
        a[v] = (x + y) % 4;
        b[v] = (y == 1 && z == 1) ? 0 : (x == 2 ? 1 : (z == 0 ? 2 : 3));
    }
    pairs.push_back({slabs, rows});
    pairs.push_back({a, b});
    std::uint64_t state = 0x2545F4914F6CDD1DULL;
    const auto next = [&state] {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        return state;
    };
    while (static_cast<int>(pairs.size()) < 2 + random_pairs) {
        std::pair<Partition, Partition> p;
        bool ok = true;
        for (auto* part : {&p.first, &p.second}) {
            std::array<int, 4> used{};
            for (auto& c : *part) ++used[c = static_cast<int>(next() % 4)];
            for (int n : used) ok &= n > 0;
        }
        if (ok) pairs.push_back(p);
    }

    std::vector<std::array<int, 4>> labellings;
    for (int code = 0; code < 256; ++code) {
        std::array<int, 4> lab{};
        int top = 0;
        std::array<bool, 4> seen{};
        for (int c = 0; c < 4; ++c) {
            lab[c] = (code >> (2 * c)) & 3;
            seen[lab[c]] = true;
            top = std::max(top, lab[c]);
        }
        bool prefix = true;
        for (int l = 1; l <= top; ++l) prefix &= seen[l];
        if (prefix) labellings.push_back(lab);
    }

    const auto build = [](const Partition& part, const std::array<int, 4>& lab) {
        int k = 0;
        for (int l : lab) k = std::max(k, l);
        Lesions out(k);
        for (int v = 0; v < 27; ++v) {
            if (lab[part[v]] > 0) out[lab[part[v]] - 1].push_back(static_cast<std::size_t>(v));
        }
        return out;
    };
    std::size_t n = 0;
    for (const auto& [pp, gp] : pairs) {
        for (const auto& pl : labellings) {
            const auto pred = build(pp, pl);
            for (const auto& gl : labellings) {
                visit(pred, build(gp, gl));
                ++n;
            }
        }
    }
    return n;
}

}  // namespace oracle
