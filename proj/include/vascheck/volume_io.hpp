// SPDX-License-Identifier: Apache-2.0
//
// Volume file I/O and resampling.
//
// Two on-disk formats are supported:
//   * NIfTI-1 single file (.nii, or gzip-compressed; gzip is detected by the
//     0x1f 0x8b magic regardless of extension). Datatypes uint8/int16/float32.
//   * Raw little-endian + JSON sidecar: <name>.json holds dims/spacing_mm/
//     origin_mm/dtype/order, <name>.raw holds the samples.
//
// Orientation beyond spacing and origin is ignored throughout the pipeline.

#pragma once

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include <nlohmann/json.hpp>

#include "vascheck/core.hpp"

namespace vascheck {

struct VolumeHeader {
    std::array<int, 3> dims{};
    Vec3 spacing;
    Vec3 origin;
    int datatype_code = 0;     // NIfTI code (2=u8, 4=i16, 16=f32) or 0 for raw
    bool little_endian = true;
};

namespace detail {

// --- NIfTI-1 header layout (the subset we touch, offsets per the standard
// 348-byte struct) ---------------------------------------------------------
//   0   int32   sizeof_hdr   (= 348)
//   40  int16   dim[8]
//   70  int16   datatype
//   72  int16   bitpix
//   76  float   pixdim[8]
//   108 float   vox_offset
//   252 int16   qform_code
//   254 int16   sform_code
//   268 float   qoffset_x/y/z
//   280 float   srow_x[4], srow_y[4], srow_z[4]
//   344 char    magic[4]     (= "n+1\0")

constexpr int kNiftiHeaderSize = 348;
constexpr int kDtUint8 = 2;
constexpr int kDtInt16 = 4;
constexpr int kDtFloat32 = 16;

template <typename T>
T read_le(const unsigned char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;  // build targets are little-endian
}

template <typename T>
void write_le(unsigned char* p, T v) {
    std::memcpy(p, &v, sizeof(T));
}

inline std::uint16_t bswap16(std::uint16_t v) { return std::uint16_t((v >> 8) | (v << 8)); }
inline std::uint32_t bswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    f.seekg(0, std::ios::end);
    std::streamoff n = f.tellg();
    f.seekg(0);
    std::vector<unsigned char> buf(static_cast<std::size_t>(n));
    if (n > 0) f.read(reinterpret_cast<char*>(buf.data()), n);
    if (!f) throw IoError("short read on " + path);
    return buf;
}

inline void write_file_bytes(const std::string& path, const unsigned char* data,
                             std::size_t n) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!f) throw IoError("write failed on " + path);
}

inline bool is_gzip(const std::vector<unsigned char>& b) {
    return b.size() >= 2 && b[0] == 0x1f && b[1] == 0x8b;
}

inline std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK) throw FormatError("zlib init failed");
    std::vector<unsigned char> out;
    out.reserve(in.size() * 4);
    std::vector<unsigned char> chunk(1 << 16);
    zs.next_in = const_cast<unsigned char*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = chunk.data();
        zs.avail_out = static_cast<uInt>(chunk.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw FormatError("corrupt gzip stream");
        }
        out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw FormatError("truncated gzip stream");
        }
    }
    inflateEnd(&zs);
    return out;
}

inline std::vector<unsigned char> gzip_bytes(const unsigned char* data, std::size_t n) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK)
        throw IoError("zlib deflate init failed");
    std::vector<unsigned char> out(deflateBound(&zs, static_cast<uLong>(n)));
    zs.next_in = const_cast<unsigned char*>(data);
    zs.avail_in = static_cast<uInt>(n);
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    if (deflate(&zs, Z_FINISH) != Z_STREAM_END) {
        deflateEnd(&zs);
        throw IoError("gzip compression failed");
    }
    out.resize(out.size() - zs.avail_out);
    deflateEnd(&zs);
    return out;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline VoxelVolume parse_nifti(std::vector<unsigned char> bytes) {
    if (is_gzip(bytes)) bytes = gunzip(bytes);
    if (bytes.size() < kNiftiHeaderSize) throw FormatError("NIfTI file shorter than header");
    const unsigned char* h = bytes.data();

    std::int32_t sizeof_hdr = read_le<std::int32_t>(h + 0);
    bool swapped = false;
    if (sizeof_hdr != kNiftiHeaderSize) {
        if (bswap32(static_cast<std::uint32_t>(sizeof_hdr)) == kNiftiHeaderSize)
            swapped = true;
        else
            throw FormatError("bad NIfTI sizeof_hdr");
    }
    if (std::memcmp(h + 344, "n+1\0", 4) != 0 && std::memcmp(h + 344, "ni1\0", 4) != 0)
        throw FormatError("bad NIfTI magic");

    auto rd16 = [&](int off) {
        std::uint16_t v = read_le<std::uint16_t>(h + off);
        if (swapped) v = bswap16(v);
        return static_cast<std::int16_t>(v);
    };
    auto rdf32 = [&](int off) {
        std::uint32_t v = read_le<std::uint32_t>(h + off);
        if (swapped) v = bswap32(v);
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    };

    int ndim = rd16(40);
    if (ndim < 3 || ndim > 7) throw FormatError("NIfTI dim[0] out of range");
    std::int64_t nx = rd16(42), ny = rd16(44), nz = rd16(46);
    for (int d = 4; d <= ndim; ++d)
        if (rd16(40 + 2 * d) > 1) throw FormatError("only 3D NIfTI volumes are supported");
    std::size_t nvox = VoxelVolume::checked_voxel_count(nx, ny, nz);

    int datatype = rd16(70);
    int bytes_per = 0;
    switch (datatype) {
        case kDtUint8: bytes_per = 1; break;
        case kDtInt16: bytes_per = 2; break;
        case kDtFloat32: bytes_per = 4; break;
        default: throw FormatError("unsupported NIfTI datatype " + std::to_string(datatype));
    }

    Vec3 spacing{rdf32(80), rdf32(84), rdf32(88)};
    if (!(spacing.x > 0) || !(spacing.y > 0) || !(spacing.z > 0))
        throw FormatError("non-positive NIfTI pixdim");

    float vox_offset = rdf32(108);
    std::size_t off = static_cast<std::size_t>(vox_offset);
    if (vox_offset < kNiftiHeaderSize || off + nvox * bytes_per > bytes.size())
        throw FormatError("NIfTI data truncated");

    Vec3 origin{0, 0, 0};
    if (rd16(254) > 0)
        origin = {rdf32(280 + 12), rdf32(296 + 12), rdf32(312 + 12)};
    else if (rd16(252) > 0)
        origin = {rdf32(268), rdf32(272), rdf32(276)};

    VoxelVolume vol(static_cast<int>(nx), static_cast<int>(ny), static_cast<int>(nz),
                    spacing, origin, VolumeKind::Scalar);
    const unsigned char* d = bytes.data() + off;
    float* out = vol.data().data();
    if (datatype == kDtUint8) {
        for (std::size_t i = 0; i < nvox; ++i) out[i] = static_cast<float>(d[i]);
    } else if (datatype == kDtInt16) {
        for (std::size_t i = 0; i < nvox; ++i) {
            std::uint16_t v = read_le<std::uint16_t>(d + 2 * i);
            if (swapped) v = bswap16(v);
            out[i] = static_cast<float>(static_cast<std::int16_t>(v));
        }
    } else {
        for (std::size_t i = 0; i < nvox; ++i) {
            std::uint32_t v = read_le<std::uint32_t>(d + 4 * i);
            if (swapped) v = bswap32(v);
            float f;
            std::memcpy(&f, &v, 4);
            out[i] = f;
        }
    }
    vol.set_kind(vol.is_binary() ? VolumeKind::BinaryMask : VolumeKind::Scalar);
    return vol;
}

inline std::vector<unsigned char> encode_nifti(const VoxelVolume& vol) {
    const bool as_u8 = vol.kind() == VolumeKind::BinaryMask;
    const int datatype = as_u8 ? kDtUint8 : kDtFloat32;
    const int bitpix = as_u8 ? 8 : 32;
    const std::size_t nvox = vol.size();
    const std::size_t data_off = 352;  // header + 4 bytes of zero extension flags

    std::vector<unsigned char> out(data_off + nvox * (as_u8 ? 1 : 4), 0);
    unsigned char* h = out.data();
    write_le<std::int32_t>(h + 0, kNiftiHeaderSize);
    write_le<std::int16_t>(h + 40, 3);
    write_le<std::int16_t>(h + 42, static_cast<std::int16_t>(vol.nx()));
    write_le<std::int16_t>(h + 44, static_cast<std::int16_t>(vol.ny()));
    write_le<std::int16_t>(h + 46, static_cast<std::int16_t>(vol.nz()));
    for (int d = 4; d < 8; ++d) write_le<std::int16_t>(h + 40 + 2 * d, 1);
    write_le<std::int16_t>(h + 70, static_cast<std::int16_t>(datatype));
    write_le<std::int16_t>(h + 72, static_cast<std::int16_t>(bitpix));
    write_le<float>(h + 76, 1.0f);
    write_le<float>(h + 80, static_cast<float>(vol.spacing().x));
    write_le<float>(h + 84, static_cast<float>(vol.spacing().y));
    write_le<float>(h + 88, static_cast<float>(vol.spacing().z));
    write_le<float>(h + 108, static_cast<float>(data_off));
    write_le<float>(h + 112, 1.0f);  // scl_slope
    write_le<std::int16_t>(h + 254, 1);  // sform: scaled identity + origin
    write_le<float>(h + 280, static_cast<float>(vol.spacing().x));
    write_le<float>(h + 280 + 12, static_cast<float>(vol.origin().x));
    write_le<float>(h + 296 + 4, static_cast<float>(vol.spacing().y));
    write_le<float>(h + 296 + 12, static_cast<float>(vol.origin().y));
    write_le<float>(h + 312 + 8, static_cast<float>(vol.spacing().z));
    write_le<float>(h + 312 + 12, static_cast<float>(vol.origin().z));
    std::memcpy(h + 344, "n+1\0", 4);

    unsigned char* d = out.data() + data_off;
    const float* src = vol.data().data();
    if (as_u8) {
        for (std::size_t i = 0; i < nvox; ++i) d[i] = src[i] != 0.0f ? 1 : 0;
    } else {
        std::memcpy(d, src, nvox * 4);
    }
    return out;
}

inline std::string strip_suffix(const std::string& s, const std::string& suffix) {
    return s.substr(0, s.size() - suffix.size());
}

inline VoxelVolume load_raw_json(const std::string& json_path) {
    nlohmann::json j;
    {
        std::ifstream f(json_path);
        if (!f) throw IoError("cannot open " + json_path);
        try {
            f >> j;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("bad sidecar JSON: " + std::string(e.what()));
        }
    }
    try {
        auto dims = j.at("dims").get<std::vector<std::int64_t>>();
        auto sp = j.at("spacing_mm").get<std::vector<double>>();
        std::vector<double> org = {0, 0, 0};
        if (j.contains("origin_mm")) org = j.at("origin_mm").get<std::vector<double>>();
        std::string dtype = j.at("dtype").get<std::string>();
        std::string order = j.value("order", std::string("x-fastest"));
        if (dims.size() != 3 || sp.size() != 3 || org.size() != 3)
            throw FormatError("sidecar dims/spacing/origin must have 3 entries");
        if (order != "x-fastest") throw FormatError("unsupported sample order " + order);
        if (dtype != "u8" && dtype != "f32") throw FormatError("unsupported dtype " + dtype);

        std::size_t nvox = VoxelVolume::checked_voxel_count(dims[0], dims[1], dims[2]);
        VoxelVolume vol(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                        static_cast<int>(dims[2]), Vec3{sp[0], sp[1], sp[2]},
                        Vec3{org[0], org[1], org[2]}, VolumeKind::Scalar);

        std::string raw_path = strip_suffix(json_path, ".json") + ".raw";
        auto bytes = read_file_bytes(raw_path);
        std::size_t bytes_per = dtype == "u8" ? 1 : 4;
        if (bytes.size() < nvox * bytes_per) throw FormatError("raw file truncated");
        float* out = vol.data().data();
        if (dtype == "u8") {
            for (std::size_t i = 0; i < nvox; ++i) out[i] = static_cast<float>(bytes[i]);
        } else {
            std::memcpy(out, bytes.data(), nvox * 4);
        }
        vol.set_kind(vol.is_binary() ? VolumeKind::BinaryMask : VolumeKind::Scalar);
        return vol;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad sidecar JSON: " + std::string(e.what()));
    }
}

inline void save_raw_json(const VoxelVolume& vol, const std::string& json_path) {
    const bool as_u8 = vol.kind() == VolumeKind::BinaryMask;
    nlohmann::json j;
    j["dims"] = {vol.nx(), vol.ny(), vol.nz()};
    j["spacing_mm"] = {vol.spacing().x, vol.spacing().y, vol.spacing().z};
    j["origin_mm"] = {vol.origin().x, vol.origin().y, vol.origin().z};
    j["dtype"] = as_u8 ? "u8" : "f32";
    j["order"] = "x-fastest";
    std::string text = j.dump(2);
    text.push_back('\n');
    write_file_bytes(json_path, reinterpret_cast<const unsigned char*>(text.data()),
                     text.size());

    std::string raw_path = strip_suffix(json_path, ".json") + ".raw";
    if (as_u8) {
        std::vector<unsigned char> bytes(vol.size());
        for (std::size_t i = 0; i < vol.size(); ++i)
            bytes[i] = vol.data()[i] != 0.0f ? 1 : 0;
        write_file_bytes(raw_path, bytes.data(), bytes.size());
    } else {
        write_file_bytes(raw_path,
                         reinterpret_cast<const unsigned char*>(vol.data().data()),
                         vol.size() * 4);
    }
}

}  // namespace detail

inline VoxelVolume load_volume(const std::string& path) {
    if (detail::ends_with(path, ".json")) return detail::load_raw_json(path);
    if (detail::ends_with(path, ".raw"))
        return detail::load_raw_json(detail::strip_suffix(path, ".raw") + ".json");
    return detail::parse_nifti(detail::read_file_bytes(path));
}

inline VolumeHeader peek_header(const VoxelVolume& vol) {
    VolumeHeader h;
    h.dims = {vol.nx(), vol.ny(), vol.nz()};
    h.spacing = vol.spacing();
    h.origin = vol.origin();
    h.datatype_code = vol.kind() == VolumeKind::BinaryMask ? detail::kDtUint8
                                                           : detail::kDtFloat32;
    return h;
}

inline void save_volume(const VoxelVolume& vol, const std::string& path) {
    if (detail::ends_with(path, ".json")) {
        detail::save_raw_json(vol, path);
        return;
    }
    if (detail::ends_with(path, ".raw")) {
        detail::save_raw_json(vol, detail::strip_suffix(path, ".raw") + ".json");
        return;
    }
    auto bytes = detail::encode_nifti(vol);
    if (detail::ends_with(path, ".gz")) {
        auto gz = detail::gzip_bytes(bytes.data(), bytes.size());
        detail::write_file_bytes(path, gz.data(), gz.size());
    } else {
        detail::write_file_bytes(path, bytes.data(), bytes.size());
    }
}

enum class Interp { Nearest, Trilinear };

// Resample onto a new spacing. The physical extent of the cell grid is kept:
// cell (0) of the output starts at the same box corner as cell (0) of the
// input, and new dims = round(old_dims * old_spacing / new_spacing).
// Binary masks always use nearest-neighbor so they stay binary.
inline VoxelVolume resample(const VoxelVolume& vol, Vec3 target_spacing, Interp interp) {
    if (!(target_spacing.x > 0) || !(target_spacing.y > 0) || !(target_spacing.z > 0))
        throw ArgumentError("resample: target spacing must be positive");
    if (vol.kind() == VolumeKind::BinaryMask) interp = Interp::Nearest;

    auto out_dim = [](int n, double s_old, double s_new) {
        int m = static_cast<int>(std::llround(n * s_old / s_new));
        return std::max(m, 1);
    };
    int nx = out_dim(vol.nx(), vol.spacing().x, target_spacing.x);
    int ny = out_dim(vol.ny(), vol.spacing().y, target_spacing.y);
    int nz = out_dim(vol.nz(), vol.spacing().z, target_spacing.z);

    Vec3 new_origin = vol.origin() + (target_spacing - vol.spacing()) * 0.5;
    VoxelVolume out(nx, ny, nz, target_spacing, new_origin, vol.kind());

    const double fx = target_spacing.x / vol.spacing().x;
    const double fy = target_spacing.y / vol.spacing().y;
    const double fz = target_spacing.z / vol.spacing().z;
    const double ox = (target_spacing.x - vol.spacing().x) * 0.5 / vol.spacing().x;
    const double oy = (target_spacing.y - vol.spacing().y) * 0.5 / vol.spacing().y;
    const double oz = (target_spacing.z - vol.spacing().z) * 0.5 / vol.spacing().z;

    for (int z = 0; z < nz; ++z) {
        double src_z = oz + z * fz;
        for (int y = 0; y < ny; ++y) {
            double src_y = oy + y * fy;
            for (int x = 0; x < nx; ++x) {
                double src_x = ox + x * fx;
                float v;
                if (interp == Interp::Nearest) {
                    int ix = std::clamp(static_cast<int>(std::llround(src_x)), 0, vol.nx() - 1);
                    int iy = std::clamp(static_cast<int>(std::llround(src_y)), 0, vol.ny() - 1);
                    int iz = std::clamp(static_cast<int>(std::llround(src_z)), 0, vol.nz() - 1);
                    v = vol(ix, iy, iz);
                } else {
                    double cx = std::clamp(src_x, 0.0, double(vol.nx() - 1));
                    double cy = std::clamp(src_y, 0.0, double(vol.ny() - 1));
                    double cz = std::clamp(src_z, 0.0, double(vol.nz() - 1));
                    int x0 = std::min(static_cast<int>(cx), vol.nx() - 2 >= 0 ? vol.nx() - 2 : 0);
                    int y0 = std::min(static_cast<int>(cy), vol.ny() - 2 >= 0 ? vol.ny() - 2 : 0);
                    int z0 = std::min(static_cast<int>(cz), vol.nz() - 2 >= 0 ? vol.nz() - 2 : 0);
                    x0 = std::max(x0, 0); y0 = std::max(y0, 0); z0 = std::max(z0, 0);
                    int x1 = std::min(x0 + 1, vol.nx() - 1);
                    int y1 = std::min(y0 + 1, vol.ny() - 1);
                    int z1 = std::min(z0 + 1, vol.nz() - 1);
                    double tx = cx - x0, ty = cy - y0, tz = cz - z0;
                    auto s = [&](int a, int b, int c) { return double(vol(a, b, c)); };
                    double c00 = s(x0, y0, z0) * (1 - tx) + s(x1, y0, z0) * tx;
                    double c10 = s(x0, y1, z0) * (1 - tx) + s(x1, y1, z0) * tx;
                    double c01 = s(x0, y0, z1) * (1 - tx) + s(x1, y0, z1) * tx;
                    double c11 = s(x0, y1, z1) * (1 - tx) + s(x1, y1, z1) * tx;
                    double c0 = c00 * (1 - ty) + c10 * ty;
                    double c1 = c01 * (1 - ty) + c11 * ty;
                    v = static_cast<float>(c0 * (1 - tz) + c1 * tz);
                }
                out(x, y, z) = v;
            }
        }
    }
    return out;
}

}  // namespace vascheck
