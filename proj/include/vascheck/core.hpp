// SPDX-License-Identifier: Apache-2.0
//
// Core value types shared by every module: 3-vectors, dense voxel volumes
// with physical spacing, and the error taxonomy.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vascheck {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        double n = norm();
        return n > 0.0 ? Vec3{x / n, y / n, z / n} : Vec3{0.0, 0.0, 0.0};
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Error taxonomy. Every throwing operation documents which of these it uses.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FormatError : Error { using Error::Error; };        // malformed input file
struct CapacityError : Error { using Error::Error; };      // dims overflow addressable memory
struct ArgumentError : Error { using Error::Error; };      // bad parameter value
struct IoError : Error { using Error::Error; };            // read/write failure
struct ResolutionError : Error { using Error::Error; };    // structure too thin for the grid
struct PreconditionError : Error { using Error::Error; };  // caller violated a stated pre
struct CutError : Error { using Error::Error; };           // end-face cutting failed
struct DomainError : Error { using Error::Error; };        // flow-domain construction failed
struct UndefinedMetricError : Error { using Error::Error; };

enum class VolumeKind { BinaryMask, Scalar };

// Dense 3D grid, x-fastest storage. Voxel (i,j,k) is centered at
// origin + (i*sx, j*sy, k*sz) in millimetres.
class VoxelVolume {
public:
    VoxelVolume() = default;
    VoxelVolume(int nx, int ny, int nz, Vec3 spacing, Vec3 origin = {},
                VolumeKind kind = VolumeKind::BinaryMask)
        : nx_(nx), ny_(ny), nz_(nz), spacing_(spacing), origin_(origin), kind_(kind) {
        if (nx <= 0 || ny <= 0 || nz <= 0)
            throw ArgumentError("VoxelVolume: dims must be positive");
        if (!(spacing.x > 0.0) || !(spacing.y > 0.0) || !(spacing.z > 0.0) ||
            !std::isfinite(spacing.x) || !std::isfinite(spacing.y) || !std::isfinite(spacing.z))
            throw ArgumentError("VoxelVolume: spacing must be positive and finite");
        std::size_t n = checked_voxel_count(nx, ny, nz);
        data_.assign(n, 0.0f);
    }

    static std::size_t checked_voxel_count(std::int64_t nx, std::int64_t ny, std::int64_t nz) {
        // 2^33 voxels (= 32 GiB of f32) is beyond anything this pipeline addresses.
        constexpr std::int64_t kMaxVoxels = std::int64_t(1) << 33;
        if (nx <= 0 || ny <= 0 || nz <= 0 || nx > kMaxVoxels || ny > kMaxVoxels ||
            nz > kMaxVoxels || nx * ny > kMaxVoxels || nx * ny * nz > kMaxVoxels)
            throw CapacityError("volume dims overflow addressable memory");
        return static_cast<std::size_t>(nx * ny * nz);
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    std::size_t size() const { return data_.size(); }
    const Vec3& spacing() const { return spacing_; }
    const Vec3& origin() const { return origin_; }
    VolumeKind kind() const { return kind_; }
    void set_kind(VolumeKind k) { kind_ = k; }
    void set_origin(Vec3 o) { origin_ = o; }

    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(nx_) *
                   (static_cast<std::size_t>(y) + static_cast<std::size_t>(ny_) * z);
    }
    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && x < nx_ && y >= 0 && y < ny_ && z >= 0 && z < nz_;
    }

    float& operator()(int x, int y, int z) { return data_[index(x, y, z)]; }
    float operator()(int x, int y, int z) const { return data_[index(x, y, z)]; }
    float at_or(int x, int y, int z, float outside) const {
        return in_bounds(x, y, z) ? data_[index(x, y, z)] : outside;
    }

    std::vector<float>& data() { return data_; }
    const std::vector<float>& data() const { return data_; }

    Vec3 voxel_center(int x, int y, int z) const {
        return {origin_.x + x * spacing_.x, origin_.y + y * spacing_.y,
                origin_.z + z * spacing_.z};
    }
    double voxel_volume_mm3() const { return spacing_.x * spacing_.y * spacing_.z; }

    bool is_binary() const {
        for (float v : data_)
            if (v != 0.0f && v != 1.0f) return false;
        return true;
    }
    std::size_t foreground_count() const {
        std::size_t n = 0;
        for (float v : data_)
            if (v != 0.0f) ++n;
        return n;
    }
    bool empty_mask() const { return foreground_count() == 0; }

    void require_binary(const char* who) const {
        if (kind_ != VolumeKind::BinaryMask || !is_binary())
            throw PreconditionError(std::string(who) + ": binary mask required");
    }
    bool same_grid(const VoxelVolume& o) const {
        return nx_ == o.nx_ && ny_ == o.ny_ && nz_ == o.nz_ &&
               spacing_.x == o.spacing_.x && spacing_.y == o.spacing_.y &&
               spacing_.z == o.spacing_.z;
    }

private:
    int nx_ = 0, ny_ = 0, nz_ = 0;
    Vec3 spacing_{1.0, 1.0, 1.0};
    Vec3 origin_{};
    VolumeKind kind_ = VolumeKind::BinaryMask;
    std::vector<float> data_;
};

// 26-neighborhood offsets (all nonzero |dx|,|dy|,|dz| <= 1), and the 6 face
// directions as the leading entries of a separate table.
inline const std::array<std::array<int, 3>, 6>& face_neighbors() {
    static const std::array<std::array<int, 3>, 6> k = {{
        {{1, 0, 0}}, {{-1, 0, 0}}, {{0, 1, 0}}, {{0, -1, 0}}, {{0, 0, 1}}, {{0, 0, -1}},
    }};
    return k;
}

inline const std::array<std::array<int, 3>, 26>& full_neighbors() {
    static const std::array<std::array<int, 3>, 26> k = [] {
        std::array<std::array<int, 3>, 26> out{};
        int n = 0;
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0 && dz == 0) continue;
                    out[n++] = {dx, dy, dz};
                }
        return out;
    }();
    return k;
}

}  // namespace vascheck
