// SPDX-License-Identifier: Apache-2.0
//
// Mask preprocessing: binary median smoothing, small-hole filling, and
// largest-component extraction.

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "vascheck/topology.hpp"

namespace vascheck {

struct PreprocessConfig {
    double median_kernel_mm = 1.0;   // window *diameter* in mm (see README)
    int fill_hole_max_voxels = 64;
    bool keep_largest = true;
};

// Binary median = majority vote over the anisotropic box window whose
// physical size is kernel_mm per axis. The window is clipped at the volume
// border; exact ties keep the input voxel.
inline VoxelVolume median_filter(const VoxelVolume& mask, double kernel_mm) {
    mask.require_binary("median_filter");
    auto radius = [&](double spacing) {
        return std::max(0, static_cast<int>(std::lround(kernel_mm / (2.0 * spacing))));
    };
    const int rx = radius(mask.spacing().x);
    const int ry = radius(mask.spacing().y);
    const int rz = radius(mask.spacing().z);
    if (rx == 0 && ry == 0 && rz == 0) return mask;

    const int nx = mask.nx(), ny = mask.ny(), nz = mask.nz();
    VoxelVolume out(nx, ny, nz, mask.spacing(), mask.origin());

    // Running sums along x, then accumulate the y/z extent per voxel.
    std::vector<std::int64_t> pref(static_cast<std::size_t>(nx) + 1);
    std::vector<std::int32_t> row_counts(mask.size());
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y) {
            pref[0] = 0;
            for (int x = 0; x < nx; ++x)
                pref[x + 1] = pref[x] + (mask(x, y, z) != 0.0f ? 1 : 0);
            for (int x = 0; x < nx; ++x) {
                int lo = std::max(0, x - rx), hi = std::min(nx - 1, x + rx);
                row_counts[mask.index(x, y, z)] =
                    static_cast<std::int32_t>(pref[hi + 1] - pref[lo]);
            }
        }

    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                int lo_y = std::max(0, y - ry), hi_y = std::min(ny - 1, y + ry);
                int lo_z = std::max(0, z - rz), hi_z = std::min(nz - 1, z + rz);
                int lo_x = std::max(0, x - rx), hi_x = std::min(nx - 1, x + rx);
                std::int64_t fg = 0;
                for (int zz = lo_z; zz <= hi_z; ++zz)
                    for (int yy = lo_y; yy <= hi_y; ++yy)
                        fg += row_counts[mask.index(x, yy, zz)];
                std::int64_t window = std::int64_t(hi_x - lo_x + 1) * (hi_y - lo_y + 1) *
                                      (hi_z - lo_z + 1);
                std::int64_t bg = window - fg;
                float v;
                if (fg > bg)
                    v = 1.0f;
                else if (bg > fg)
                    v = 0.0f;
                else
                    v = mask(x, y, z);
                out(x, y, z) = v;
            }
    return out;
}

// Fill enclosed background pockets of at most max_voxels voxels.
inline VoxelVolume fill_small_holes(const VoxelVolume& mask, int max_voxels) {
    mask.require_binary("fill_small_holes");
    const int nx = mask.nx(), ny = mask.ny(), nz = mask.nz();

    VoxelVolume padded(nx + 2, ny + 2, nz + 2, mask.spacing(), mask.origin());
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) padded(x + 1, y + 1, z + 1) = mask(x, y, z);

    std::vector<std::int32_t> comp;
    auto bg = [&](int x, int y, int z) { return padded(x, y, z) == 0.0f; };
    int k = detail::label_components(padded, bg, face_neighbors(), comp);
    std::vector<std::int64_t> sizes(k, 0);
    for (std::int32_t c : comp)
        if (c >= 0) ++sizes[static_cast<std::size_t>(c)];
    int exterior = comp[padded.index(0, 0, 0)];

    VoxelVolume out = mask;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                std::int32_t c = comp[padded.index(x + 1, y + 1, z + 1)];
                if (c >= 0 && c != exterior && sizes[c] <= max_voxels)
                    out(x, y, z) = 1.0f;
            }
    return out;
}

inline VoxelVolume keep_largest_component(const VoxelVolume& mask) {
    mask.require_binary("keep_largest_component");
    VoxelVolume out(mask.nx(), mask.ny(), mask.nz(), mask.spacing(), mask.origin());
    if (mask.empty_mask()) return out;
    auto cc = connected_components(mask, 26);
    for (std::size_t i = 0; i < mask.size(); ++i)
        out.data()[i] = cc.labels.data()[i] == 1.0f ? 1.0f : 0.0f;
    return out;
}

struct PreprocessResult {
    VoxelVolume mask;
    bool input_was_empty = false;
    bool output_is_empty = false;
};

// Appendix-style preprocessing chain: median smooth, fill small holes, keep
// the largest component. Idempotent on its own output.
inline PreprocessResult preprocess(const VoxelVolume& mask,
                                   const PreprocessConfig& cfg = {}) {
    PreprocessResult result;
    result.input_was_empty = mask.empty_mask();
    VoxelVolume m = median_filter(mask, cfg.median_kernel_mm);
    m = fill_small_holes(m, cfg.fill_hole_max_voxels);
    if (cfg.keep_largest && !m.empty_mask()) m = keep_largest_component(m);
    result.output_is_empty = m.empty_mask();
    result.mask = std::move(m);
    return result;
}

}  // namespace vascheck
