// SPDX-License-Identifier: Apache-2.0
//
// Test-only reference implementations. Deliberately brute force and
// independent of the library code paths they check.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "vascheck/core.hpp"

namespace oracle {

using vascheck::Vec3;
using vascheck::VoxelVolume;

// ---------------------------------------------------------------------------
// Betti numbers by GF(2) boundary-matrix ranks over the closed cubical
// complex of foreground voxels. b_k = dim C_k - rank d_k - rank d_{k+1}.
// ---------------------------------------------------------------------------

namespace gf2 {

// Rows are bitsets over column indices.
inline int rank(std::vector<std::vector<std::uint64_t>> rows, int ncols) {
    int rank = 0;
    int nwords = (ncols + 63) / 64;
    for (auto& r : rows) r.resize(nwords, 0);
    std::size_t n = rows.size();
    for (int col = 0; col < ncols && rank < static_cast<int>(n); ++col) {
        int w = col / 64;
        std::uint64_t bit = std::uint64_t(1) << (col % 64);
        std::size_t pivot = n;
        for (std::size_t r = rank; r < n; ++r)
            if (rows[r][w] & bit) {
                pivot = r;
                break;
            }
        if (pivot == n) continue;
        std::swap(rows[rank], rows[pivot]);
        for (std::size_t r = 0; r < n; ++r)
            if (r != static_cast<std::size_t>(rank) && (rows[r][w] & bit))
                for (int ww = 0; ww < nwords; ++ww) rows[r][ww] ^= rows[rank][ww];
        ++rank;
    }
    return rank;
}

}  // namespace gf2

struct CubicalComplex {
    // Cells keyed by (min corner, extent bits): extent bit d set means the
    // cell spans [x_d, x_d+1] along axis d.
    std::map<std::array<int, 4>, int> id[4];  // by dimension

    int add(int dim, std::array<int, 4> key) {
        auto [it, inserted] = id[dim].emplace(key, static_cast<int>(id[dim].size()));
        (void)inserted;
        return it->second;
    }
};

inline std::array<int, 3> betti_oracle(const VoxelVolume& mask) {
    CubicalComplex cx;
    // Enumerate all faces of every foreground voxel's closed cube.
    for (int z = 0; z < mask.nz(); ++z)
        for (int y = 0; y < mask.ny(); ++y)
            for (int x = 0; x < mask.nx(); ++x) {
                if (mask(x, y, z) == 0.0f) continue;
                for (int ext = 0; ext < 8; ++ext) {
                    int dim = ((ext >> 0) & 1) + ((ext >> 1) & 1) + ((ext >> 2) & 1);
                    int fx = (ext & 1) ? 1 : 2;  // spans: 1 choice if extended
                    int fy = (ext & 2) ? 1 : 2;
                    int fz = (ext & 4) ? 1 : 2;
                    for (int ox = 0; ox < fx; ++ox)
                        for (int oy = 0; oy < fy; ++oy)
                            for (int oz = 0; oz < fz; ++oz)
                                cx.add(dim, {x + ox, y + oy, z + oz, ext});
                }
            }

    auto boundary_rank = [&](int dim) {
        if (cx.id[dim].empty() || dim == 0) return 0;
        std::vector<std::vector<std::uint64_t>> rows;
        rows.reserve(cx.id[dim].size());
        int ncols = static_cast<int>(cx.id[dim - 1].size());
        int nwords = (ncols + 63) / 64;
        for (const auto& [key, idx] : cx.id[dim]) {
            (void)idx;
            std::vector<std::uint64_t> row(nwords, 0);
            int ext = key[3];
            for (int axis = 0; axis < 3; ++axis) {
                if (!(ext & (1 << axis))) continue;
                for (int side = 0; side < 2; ++side) {
                    std::array<int, 4> fkey = key;
                    fkey[3] = ext & ~(1 << axis);
                    fkey[axis] += side;
                    int col = cx.id[dim - 1].at(fkey);
                    row[col / 64] ^= std::uint64_t(1) << (col % 64);
                }
            }
            rows.push_back(std::move(row));
        }
        return gf2::rank(std::move(rows), ncols);
    };

    int r1 = boundary_rank(1);
    int r2 = boundary_rank(2);
    int r3 = boundary_rank(3);
    int nv = static_cast<int>(cx.id[0].size());
    int ne = static_cast<int>(cx.id[1].size());
    int nf = static_cast<int>(cx.id[2].size());
    int b0 = nv - r1;
    int b1 = ne - r1 - r2;
    int b2 = nf - r2 - r3;
    return {b0, b1, b2};
}

// ---------------------------------------------------------------------------
// Distances
// ---------------------------------------------------------------------------

// Exact Euclidean distance (mm) from every voxel to the nearest seed voxel,
// by exhaustive search.
inline std::vector<double> brute_force_distance_to_set(const VoxelVolume& grid,
                                                       const std::vector<std::array<int, 3>>& seeds) {
    std::vector<double> out(grid.size(), std::numeric_limits<double>::infinity());
    const Vec3 s = grid.spacing();
    for (int z = 0; z < grid.nz(); ++z)
        for (int y = 0; y < grid.ny(); ++y)
            for (int x = 0; x < grid.nx(); ++x) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& p : seeds) {
                    double dx = (x - p[0]) * s.x;
                    double dy = (y - p[1]) * s.y;
                    double dz = (z - p[2]) * s.z;
                    best = std::min(best, dx * dx + dy * dy + dz * dz);
                }
                out[grid.index(x, y, z)] = std::sqrt(best);
            }
    return out;
}

// Surface voxels: foreground with a 6-neighbor background (volume border
// counts as background).
inline std::vector<std::array<int, 3>> surface_voxels(const VoxelVolume& mask) {
    std::vector<std::array<int, 3>> out;
    for (int z = 0; z < mask.nz(); ++z)
        for (int y = 0; y < mask.ny(); ++y)
            for (int x = 0; x < mask.nx(); ++x) {
                if (mask(x, y, z) == 0.0f) continue;
                for (const auto& d : vascheck::face_neighbors()) {
                    if (mask.at_or(x + d[0], y + d[1], z + d[2], 0.0f) == 0.0f) {
                        out.push_back({x, y, z});
                        break;
                    }
                }
            }
    return out;
}

// Pooled symmetric 95th-percentile surface distance, all pairs.
inline double brute_force_hd95(const VoxelVolume& a, const VoxelVolume& b) {
    auto sa = surface_voxels(a);
    auto sb = surface_voxels(b);
    const Vec3 sp = a.spacing();
    auto directed = [&](const std::vector<std::array<int, 3>>& from,
                        const std::vector<std::array<int, 3>>& to,
                        std::vector<double>& pool) {
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) {
                double dx = (p[0] - q[0]) * sp.x;
                double dy = (p[1] - q[1]) * sp.y;
                double dz = (p[2] - q[2]) * sp.z;
                best = std::min(best, dx * dx + dy * dy + dz * dz);
            }
            pool.push_back(std::sqrt(best));
        }
    };
    std::vector<double> pool;
    directed(sa, sb, pool);
    directed(sb, sa, pool);
    std::sort(pool.begin(), pool.end());
    if (pool.empty()) return 0.0;
    double rank = 0.95 * (static_cast<double>(pool.size()) - 1.0);
    std::size_t lo = static_cast<std::size_t>(rank);
    std::size_t hi = std::min(lo + 1, pool.size() - 1);
    double t = rank - static_cast<double>(lo);
    return pool[lo] * (1.0 - t) + pool[hi] * t;
}

// ---------------------------------------------------------------------------
// Random masks
// ---------------------------------------------------------------------------

inline VoxelVolume random_mask(std::mt19937& rng, int nx, int ny, int nz,
                               double density, Vec3 spacing = {1, 1, 1}) {
    VoxelVolume m(nx, ny, nz, spacing);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : m.data()) v = u(rng) < density ? 1.0f : 0.0f;
    return m;
}

// Central finite-difference gradient check helper: returns max relative error
// over the provided analytic gradient, probing each index with step h.
template <typename LossFn>
double gradient_check(LossFn&& loss_of, std::vector<double>& params,
                      const std::vector<double>& analytic, double h = 1e-4) {
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double saved = params[i];
        params[i] = saved + h;
        double fp = loss_of(params);
        params[i] = saved - h;
        double fm = loss_of(params);
        params[i] = saved;
        double numeric = (fp - fm) / (2.0 * h);
        double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
        worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
    return worst;
}

}  // namespace oracle
