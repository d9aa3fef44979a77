// SPDX-License-Identifier: Apache-2.0
//
// Mask -> triangle surface conversion and mesh checks.
//
// Marching cubes uses a case table generated at first use from the cube
// combinatorics instead of a pasted 256-entry list. Patch boundaries on a
// cube face depend only on that face's corner pattern (ambiguous faces
// always separate the diagonal of inside corners), which makes adjacent
// cubes agree edge-for-edge: the output is crack-free and every edge is
// shared by exactly two triangles for any padded binary input.

#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <unordered_map>
#include <vector>

#include "vascheck/core.hpp"

namespace vascheck {

struct FaceLabel {
    enum Kind { Wall = 0, Inlet = 1, Outlet = 2, CapUncut = 3 };
    Kind kind = Wall;
    int index = 0;  // inlet/outlet ordinal

    bool operator==(const FaceLabel& o) const { return kind == o.kind && index == o.index; }
};

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<FaceLabel> labels;  // empty means all wall

    FaceLabel label(std::size_t t) const {
        return t < labels.size() ? labels[t] : FaceLabel{};
    }
};

struct MeshDiagnostics {
    long long non_manifold_edge_count = 0;
    long long boundary_edge_count = 0;
    long long self_intersection_count = 0;
    int component_count = 0;
    long long euler_characteristic = 0;
    double min_triangle_quality = 0.0;  // 2*inradius/circumradius, 1 for equilateral

    bool watertight() const {
        return boundary_edge_count == 0 && non_manifold_edge_count == 0;
    }
};

namespace mc {

// Cube corner c sits at offsets (c&1, c>>1&1, c>>2&1).
struct CaseTable {
    // per case: closed, outward-oriented loops of cube-edge ids
    std::array<std::vector<std::vector<int>>, 256> loops;
    std::array<std::array<int, 2>, 12> edge_corners;
    std::array<std::array<int, 2>, 12> edge_faces;  // the two faces along each edge
};

inline const CaseTable& case_table() {
    static const CaseTable table = [] {
        CaseTable t{};
        // edges: pairs of corners differing in exactly one bit, fixed order
        int ne = 0;
        for (int a = 0; a < 8; ++a)
            for (int b = a + 1; b < 8; ++b) {
                int diff = a ^ b;
                if (diff == 1 || diff == 2 || diff == 4) t.edge_corners[ne++] = {a, b};
            }

        // faces: axis d, side s; corners listed in cyclic order around the face
        struct Face {
            std::array<int, 4> cyc;
            std::array<int, 4> edge;  // edge id between cyc[i] and cyc[i+1]
        };
        std::array<Face, 6> faces;
        auto edge_id = [&](int a, int b) {
            for (int e = 0; e < 12; ++e)
                if ((t.edge_corners[e][0] == a && t.edge_corners[e][1] == b) ||
                    (t.edge_corners[e][0] == b && t.edge_corners[e][1] == a))
                    return e;
            return -1;
        };
        int nf = 0;
        for (int axis = 0; axis < 3; ++axis)
            for (int side = 0; side < 2; ++side) {
                int u = (axis + 1) % 3, v = (axis + 2) % 3;
                std::array<int, 4> cyc{};
                const int uv[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
                for (int i = 0; i < 4; ++i)
                    cyc[i] = (side << axis) | (uv[i][0] << u) | (uv[i][1] << v);
                Face f{};
                f.cyc = cyc;
                for (int i = 0; i < 4; ++i) f.edge[i] = edge_id(cyc[i], cyc[(i + 1) % 4]);
                faces[nf++] = f;
            }
        for (int e = 0; e < 12; ++e) {
            int n = 0;
            for (int f = 0; f < 6; ++f)
                for (int i = 0; i < 4; ++i)
                    if (faces[f].edge[i] == e) t.edge_faces[e][n++] = f;
        }

        auto corner_pos = [](int c) {
            return Vec3{double(c & 1), double((c >> 1) & 1), double((c >> 2) & 1)};
        };

        for (int mask = 1; mask < 255; ++mask) {
            bool cut[12];
            for (int e = 0; e < 12; ++e) {
                bool a = mask & (1 << t.edge_corners[e][0]);
                bool b = mask & (1 << t.edge_corners[e][1]);
                cut[e] = a != b;
            }
            // pairing[f][e] = partner edge of cut edge e within face f
            std::array<std::unordered_map<int, int>, 6> pairing;
            for (int f = 0; f < 6; ++f) {
                const Face& face = faces[f];
                std::vector<int> cuts;
                for (int i = 0; i < 4; ++i)
                    if (cut[face.edge[i]]) cuts.push_back(i);
                if (cuts.empty()) continue;
                if (cuts.size() == 2) {
                    pairing[f][face.edge[cuts[0]]] = face.edge[cuts[1]];
                    pairing[f][face.edge[cuts[1]]] = face.edge[cuts[0]];
                } else {
                    // ambiguous face: inside corners on a diagonal; cut each
                    // inside corner off by pairing its two adjacent edges
                    for (int i = 0; i < 4; ++i) {
                        if (!(mask & (1 << face.cyc[i]))) continue;
                        int e_prev = face.edge[(i + 3) % 4];
                        int e_next = face.edge[i];
                        pairing[f][e_prev] = e_next;
                        pairing[f][e_next] = e_prev;
                    }
                }
            }

            // assemble loops: each cut edge belongs to exactly two faces
            auto faces_of_edge = [&](int e, int out[2]) {
                int n = 0;
                for (int f = 0; f < 6; ++f)
                    for (int i = 0; i < 4; ++i)
                        if (faces[f].edge[i] == e) out[n++] = f;
            };
            bool used[12] = {};
            for (int start = 0; start < 12; ++start) {
                if (!cut[start] || used[start]) continue;
                std::vector<int> loop;
                int e = start;
                int ef[2];
                faces_of_edge(e, ef);
                int via = ef[0];
                while (true) {
                    loop.push_back(e);
                    used[e] = true;
                    int partner = pairing[via].at(e);
                    if (partner == start) break;
                    e = partner;
                    faces_of_edge(e, ef);
                    via = (ef[0] == via) ? ef[1] : ef[0];
                }

                // orient the loop so triangle normals point from inside to out
                auto midpoint = [&](int eid) {
                    Vec3 a = corner_pos(t.edge_corners[eid][0]);
                    Vec3 b = corner_pos(t.edge_corners[eid][1]);
                    return (a + b) * 0.5;
                };
                Vec3 newell{0, 0, 0};
                Vec3 outward{0, 0, 0};
                for (std::size_t i = 0; i < loop.size(); ++i) {
                    Vec3 p = midpoint(loop[i]);
                    Vec3 q = midpoint(loop[(i + 1) % loop.size()]);
                    newell += p.cross(q);
                    int ca = t.edge_corners[loop[i]][0], cb = t.edge_corners[loop[i]][1];
                    bool a_in = mask & (1 << ca);
                    Vec3 in_pos = corner_pos(a_in ? ca : cb);
                    Vec3 out_pos = corner_pos(a_in ? cb : ca);
                    outward += out_pos - in_pos;
                }
                if (newell.dot(outward) < 0.0) std::reverse(loop.begin(), loop.end());
                t.loops[mask].push_back(std::move(loop));
            }
        }
        return t;
    }();
    return table;
}

}  // namespace mc

// Extract the iso-surface of a volume sampled at voxel centers, padding one
// background layer so surfaces close. Vertex coordinates are in mm.
//
// Case codes come from the raw samples, so the mesh topology follows the
// binary mask exactly. For binary masks the vertex position along each cut
// edge is read from a 7-point (face-neighbor) smoothed occupancy field
// instead of the raw 0/1 step; this removes most of the staircase area bias
// while keeping every vertex strictly inside its lattice edge.
inline TriangleMesh marching_cubes(const VoxelVolume& vol, double iso = 0.5) {
    if (vol.kind() == VolumeKind::BinaryMask && vol.empty_mask())
        throw PreconditionError("marching_cubes: empty mask has no surface");

    const auto& table = mc::case_table();
    const int nx = vol.nx(), ny = vol.ny(), nz = vol.nz();
    auto sample = [&](int x, int y, int z) { return double(vol.at_or(x, y, z, 0.0f)); };
    const bool binary = vol.kind() == VolumeKind::BinaryMask;
    auto placement = [&](int x, int y, int z) {
        if (!binary) return sample(x, y, z);
        double s = sample(x, y, z);
        for (const auto& d : face_neighbors()) s += sample(x + d[0], y + d[1], z + d[2]);
        return s / 7.0;
    };

    TriangleMesh mesh;
    std::unordered_map<std::uint64_t, int> weld;
    auto edge_key = [&](int x, int y, int z, int axis) {
        std::uint64_t k = (std::uint64_t(z + 1) * (ny + 3) + (y + 1)) * (nx + 3) + (x + 1);
        return k * 3 + axis;
    };
    auto vertex_on_edge = [&](int e, int cx, int cy, int cz) {
        int ca = table.edge_corners[e][0], cb = table.edge_corners[e][1];
        int ax = cx + (ca & 1), ay = cy + ((ca >> 1) & 1), az = cz + ((ca >> 2) & 1);
        int bx = cx + (cb & 1), by = cy + ((cb >> 1) & 1), bz = cz + ((cb >> 2) & 1);
        int axis = (ax != bx) ? 0 : (ay != by ? 1 : 2);
        auto key = edge_key(ax, ay, az, axis);
        auto it = weld.find(key);
        if (it == weld.end()) {
            double va = placement(ax, ay, az), vb = placement(bx, by, bz);
            double tt = (vb != va) ? (iso - va) / (vb - va) : 0.5;
            tt = std::clamp(tt, 0.05, 0.95);
            Vec3 pa = vol.voxel_center(ax, ay, az);
            Vec3 pb = vol.voxel_center(bx, by, bz);
            mesh.vertices.push_back(pa + (pb - pa) * tt);
            it = weld.emplace(key, int(mesh.vertices.size()) - 1).first;
        }
        return it->second;
    };

    bool any = false;
    std::vector<int> vid;
    for (int cz = -1; cz < nz; ++cz)
        for (int cy = -1; cy < ny; ++cy)
            for (int cx = -1; cx < nx; ++cx) {
                int code = 0;
                for (int c = 0; c < 8; ++c) {
                    double v = sample(cx + (c & 1), cy + ((c >> 1) & 1), cz + ((c >> 2) & 1));
                    if (v > iso) code |= 1 << c;
                }
                if (code == 0 || code == 255) {
                    any = any || code == 255;
                    continue;
                }
                any = true;
                for (const auto& loop : table.loops[code]) {
                    vid.clear();
                    for (int e : loop) vid.push_back(vertex_on_edge(e, cx, cy, cz));
                    const std::size_t k = vid.size();
                    if (k == 3) {
                        mesh.triangles.push_back({vid[0], vid[1], vid[2]});
                    } else if (k == 4) {
                        // pick the diagonal that cannot coincide with a face
                        // chord of a neighboring cube's patch
                        auto shares_face = [&](int ea, int eb) {
                            for (int u = 0; u < 2; ++u)
                                for (int v = 0; v < 2; ++v)
                                    if (table.edge_faces[ea][u] == table.edge_faces[eb][v])
                                        return true;
                            return false;
                        };
                        if (!shares_face(loop[0], loop[2])) {
                            mesh.triangles.push_back({vid[0], vid[1], vid[2]});
                            mesh.triangles.push_back({vid[0], vid[2], vid[3]});
                        } else {
                            mesh.triangles.push_back({vid[1], vid[2], vid[3]});
                            mesh.triangles.push_back({vid[1], vid[3], vid[0]});
                        }
                    } else {
                        // long loops: star triangulation around the loop
                        // centroid, which lies strictly inside the cube
                        Vec3 c{0, 0, 0};
                        for (int v : vid) c += mesh.vertices[v];
                        c = c / double(k);
                        mesh.vertices.push_back(c);
                        int ci = int(mesh.vertices.size()) - 1;
                        for (std::size_t i = 0; i < k; ++i)
                            mesh.triangles.push_back(
                                {ci, vid[i], vid[(i + 1) % k]});
                    }
                }
            }
    if (!any || mesh.triangles.empty())
        throw PreconditionError("marching_cubes: no iso-surface crossing found");
    return mesh;
}

inline double signed_volume(const TriangleMesh& mesh) {
    double v = 0.0;
    for (const auto& t : mesh.triangles) {
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3& b = mesh.vertices[t[1]];
        const Vec3& c = mesh.vertices[t[2]];
        v += a.dot(b.cross(c));
    }
    return v / 6.0;
}

inline double surface_area(const TriangleMesh& mesh) {
    double a = 0.0;
    for (const auto& t : mesh.triangles) {
        Vec3 e1 = mesh.vertices[t[1]] - mesh.vertices[t[0]];
        Vec3 e2 = mesh.vertices[t[2]] - mesh.vertices[t[0]];
        a += 0.5 * e1.cross(e2).norm();
    }
    return a;
}

namespace detail_mesh {

inline std::uint64_t undirected_edge(int a, int b) {
    if (a > b) std::swap(a, b);
    return (std::uint64_t(a) << 32) | std::uint32_t(b);
}

// Moller triangle-triangle overlap, coplanar cases included.
inline bool tri_tri_intersect(const Vec3* t0, const Vec3* t1) {
    auto plane = [](const Vec3* t, Vec3& n, double& d) {
        n = (t[1] - t[0]).cross(t[2] - t[0]);
        d = -n.dot(t[0]);
    };
    Vec3 n0, n1;
    double d0, d1;
    plane(t0, n0, d0);
    plane(t1, n1, d1);
    double eps = 1e-12;

    double dist1[3], dist0[3];
    for (int i = 0; i < 3; ++i) dist1[i] = n0.dot(t1[i]) + d0;
    if ((dist1[0] > eps && dist1[1] > eps && dist1[2] > eps) ||
        (dist1[0] < -eps && dist1[1] < -eps && dist1[2] < -eps))
        return false;
    for (int i = 0; i < 3; ++i) dist0[i] = n1.dot(t0[i]) + d1;
    if ((dist0[0] > eps && dist0[1] > eps && dist0[2] > eps) ||
        (dist0[0] < -eps && dist0[1] < -eps && dist0[2] < -eps))
        return false;

    Vec3 dir = n0.cross(n1);
    double maxc = std::max({std::abs(dir.x), std::abs(dir.y), std::abs(dir.z)});
    if (maxc < eps) {
        // coplanar: project to dominant axis plane and run 2D tests
        int axis = 0;
        Vec3 an{std::abs(n0.x), std::abs(n0.y), std::abs(n0.z)};
        if (an.y > an.x) axis = 1;
        if (an.z > (axis == 0 ? an.x : an.y)) axis = 2;
        auto proj = [&](const Vec3& p) -> std::array<double, 2> {
            if (axis == 0) return {p.y, p.z};
            if (axis == 1) return {p.x, p.z};
            return {p.x, p.y};
        };
        std::array<std::array<double, 2>, 3> a, b;
        for (int i = 0; i < 3; ++i) {
            a[i] = proj(t0[i]);
            b[i] = proj(t1[i]);
        }
        auto orient = [](const std::array<double, 2>& p, const std::array<double, 2>& q,
                         const std::array<double, 2>& r) {
            return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
        };
        auto seg_int = [&](const std::array<double, 2>& p1, const std::array<double, 2>& p2,
                           const std::array<double, 2>& q1, const std::array<double, 2>& q2) {
            double o1 = orient(p1, p2, q1), o2 = orient(p1, p2, q2);
            double o3 = orient(q1, q2, p1), o4 = orient(q1, q2, p2);
            return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0));
        };
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (seg_int(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3])) return true;
        auto inside = [&](const std::array<std::array<double, 2>, 3>& tri,
                          const std::array<double, 2>& p) {
            double o1 = orient(tri[0], tri[1], p);
            double o2 = orient(tri[1], tri[2], p);
            double o3 = orient(tri[2], tri[0], p);
            return (o1 > 0 && o2 > 0 && o3 > 0) || (o1 < 0 && o2 < 0 && o3 < 0);
        };
        return inside(a, b[0]) || inside(b, a[0]);
    }

    auto interval = [&](const Vec3* t, const double* dist, double& lo, double& hi) {
        double p[3];
        for (int i = 0; i < 3; ++i) p[i] = dir.dot(t[i]);
        lo = std::numeric_limits<double>::infinity();
        hi = -lo;
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j) {
                if ((dist[i] > eps && dist[j] > eps) || (dist[i] < -eps && dist[j] < -eps))
                    continue;
                double denom = dist[i] - dist[j];
                if (std::abs(denom) < eps) continue;
                double s = dist[i] / denom;
                double v = p[i] + s * (p[j] - p[i]);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    };
    double lo0, hi0, lo1, hi1;
    interval(t0, dist0, lo0, hi0);
    interval(t1, dist1, lo1, hi1);
    if (!(lo0 <= hi0) || !(lo1 <= hi1)) return false;
    double tol = 1e-10;
    return std::min(hi0, hi1) - std::max(lo0, lo1) > tol;
}

}  // namespace detail_mesh

inline MeshDiagnostics diagnose(const TriangleMesh& mesh) {
    MeshDiagnostics d;
    std::unordered_map<std::uint64_t, int> edge_count;
    for (const auto& t : mesh.triangles)
        for (int k = 0; k < 3; ++k) {
            auto key = detail_mesh::undirected_edge(t[k], t[(k + 1) % 3]);
            ++edge_count[key];
        }
    for (const auto& [key, n] : edge_count) {
        (void)key;
        if (n == 1) ++d.boundary_edge_count;
        if (n > 2) ++d.non_manifold_edge_count;
    }

    // connected components over shared edges
    std::vector<int> parent(mesh.triangles.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = int(i);
    std::function<int(int)> find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    std::unordered_map<std::uint64_t, int> first_tri;
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        for (int k = 0; k < 3; ++k) {
            auto key = detail_mesh::undirected_edge(t[k], t[(k + 1) % 3]);
            auto it = first_tri.find(key);
            if (it == first_tri.end())
                first_tri.emplace(key, int(i));
            else
                parent[find(int(i))] = find(it->second);
        }
    }
    std::vector<int> roots;
    for (std::size_t i = 0; i < parent.size(); ++i) {
        int r = find(int(i));
        if (std::find(roots.begin(), roots.end(), r) == roots.end()) roots.push_back(r);
    }
    d.component_count = int(roots.size());

    std::vector<bool> used(mesh.vertices.size(), false);
    for (const auto& t : mesh.triangles)
        for (int k = 0; k < 3; ++k) used[t[k]] = true;
    long long nv = std::count(used.begin(), used.end(), true);
    d.euler_characteristic =
        nv - (long long)edge_count.size() + (long long)mesh.triangles.size();

    double worst = mesh.triangles.empty() ? 0.0 : 1.0;
    for (const auto& t : mesh.triangles) {
        Vec3 ea = mesh.vertices[t[1]] - mesh.vertices[t[0]];
        Vec3 eb = mesh.vertices[t[2]] - mesh.vertices[t[1]];
        Vec3 ec = mesh.vertices[t[0]] - mesh.vertices[t[2]];
        double a = ea.norm(), b = eb.norm(), c = ec.norm();
        double area = 0.5 * ea.cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]).norm();
        double q = (a * b * c > 0.0) ? 8.0 * area * area / ((a + b + c) * 0.5 * a * b * c)
                                     : 0.0;
        worst = std::min(worst, q);
    }
    d.min_triangle_quality = worst;

    // self intersections: grid-binned triangle pairs, skipping any pair that
    // shares a vertex index (mesh adjacency, not geometric coincidence)
    Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (const auto& v : mesh.vertices) {
        lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
        hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
    }
    if (!mesh.triangles.empty()) {
        double diag = (hi - lo).norm();
        double cell = std::max(diag / 64.0, 1e-9);
        std::unordered_map<std::uint64_t, std::vector<int>> bins;
        auto bin_of = [&](const Vec3& p) {
            auto q = (p - lo) / cell;
            return std::array<int, 3>{int(q.x), int(q.y), int(q.z)};
        };
        auto bin_key = [](int x, int y, int z) {
            return (std::uint64_t(x) * 73856093u) ^ (std::uint64_t(y) * 19349663u) ^
                   (std::uint64_t(z) * 83492791u);
        };
        for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
            const auto& t = mesh.triangles[i];
            Vec3 tlo = mesh.vertices[t[0]], thi = tlo;
            for (int k = 1; k < 3; ++k) {
                const Vec3& p = mesh.vertices[t[k]];
                tlo = {std::min(tlo.x, p.x), std::min(tlo.y, p.y), std::min(tlo.z, p.z)};
                thi = {std::max(thi.x, p.x), std::max(thi.y, p.y), std::max(thi.z, p.z)};
            }
            auto b0 = bin_of(tlo), b1 = bin_of(thi);
            for (int z = b0[2]; z <= b1[2]; ++z)
                for (int y = b0[1]; y <= b1[1]; ++y)
                    for (int x = b0[0]; x <= b1[0]; ++x)
                        bins[bin_key(x, y, z)].push_back(int(i));
        }
        std::unordered_map<std::uint64_t, char> tested;
        for (const auto& [key, list] : bins) {
            (void)key;
            for (std::size_t a = 0; a < list.size(); ++a)
                for (std::size_t b = a + 1; b < list.size(); ++b) {
                    int i = std::min(list[a], list[b]), j = std::max(list[a], list[b]);
                    auto pk = (std::uint64_t(i) << 32) | std::uint32_t(j);
                    if (tested.count(pk)) continue;
                    tested[pk] = 1;
                    const auto& ti = mesh.triangles[i];
                    const auto& tj = mesh.triangles[j];
                    bool shared = false;
                    for (int u = 0; u < 3 && !shared; ++u)
                        for (int v = 0; v < 3; ++v)
                            if (ti[u] == tj[v]) {
                                shared = true;
                                break;
                            }
                    if (shared) continue;
                    Vec3 a3[3] = {mesh.vertices[ti[0]], mesh.vertices[ti[1]],
                                  mesh.vertices[ti[2]]};
                    Vec3 b3[3] = {mesh.vertices[tj[0]], mesh.vertices[tj[1]],
                                  mesh.vertices[tj[2]]};
                    if (detail_mesh::tri_tri_intersect(a3, b3)) ++d.self_intersection_count;
                }
        }
    }
    return d;
}

// Taubin lambda/mu smoothing with the uniform umbrella operator. Keeps the
// vertex count and connectivity; the mu pass compensates the shrinkage of
// the lambda pass.
inline TriangleMesh taubin_smooth(const TriangleMesh& mesh, int iterations = 10,
                                  double lambda = 0.5, double mu = -0.53) {
    auto diag = diagnose(mesh);
    if (!diag.watertight())
        throw PreconditionError("taubin_smooth: mesh must be watertight");
    if (iterations == 0) return mesh;

    std::vector<std::vector<int>> ring(mesh.vertices.size());
    {
        std::unordered_map<std::uint64_t, char> seen;
        for (const auto& t : mesh.triangles)
            for (int k = 0; k < 3; ++k) {
                int a = t[k], b = t[(k + 1) % 3];
                auto key = detail_mesh::undirected_edge(a, b);
                if (seen.emplace(key, 1).second) {
                    ring[a].push_back(b);
                    ring[b].push_back(a);
                }
            }
    }
    TriangleMesh out = mesh;
    std::vector<Vec3> next(out.vertices.size());
    auto pass = [&](double factor) {
        for (std::size_t i = 0; i < out.vertices.size(); ++i) {
            if (ring[i].empty()) {
                next[i] = out.vertices[i];
                continue;
            }
            Vec3 mean{0, 0, 0};
            for (int j : ring[i]) mean += out.vertices[j];
            mean = mean / double(ring[i].size());
            next[i] = out.vertices[i] + (mean - out.vertices[i]) * factor;
        }
        out.vertices.swap(next);
    };
    for (int it = 0; it < iterations; ++it) {
        pass(lambda);
        pass(mu);
    }
    return out;
}

// --- binary STL -------------------------------------------------------------
// 80-byte header, uint32 count, then 50-byte records: normal 3xf32,
// vertices 9xf32, uint16 attribute (0). Little-endian. ASCII STL is refused.

inline void write_stl(const TriangleMesh& mesh, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    char header[80] = {};
    std::snprintf(header, sizeof(header), "vascheck binary stl");
    f.write(header, 80);
    std::uint32_t n = std::uint32_t(mesh.triangles.size());
    f.write(reinterpret_cast<const char*>(&n), 4);
    for (const auto& t : mesh.triangles) {
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3& b = mesh.vertices[t[1]];
        const Vec3& c = mesh.vertices[t[2]];
        Vec3 nrm = (b - a).cross(c - a).normalized();
        float rec[12] = {float(nrm.x), float(nrm.y), float(nrm.z),
                         float(a.x), float(a.y), float(a.z),
                         float(b.x), float(b.y), float(b.z),
                         float(c.x), float(c.y), float(c.z)};
        f.write(reinterpret_cast<const char*>(rec), 48);
        std::uint16_t attr = 0;
        f.write(reinterpret_cast<const char*>(&attr), 2);
    }
    if (!f) throw IoError("write failed on " + path);
}

inline TriangleMesh read_stl(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    f.seekg(0, std::ios::end);
    std::streamoff size = f.tellg();
    f.seekg(0);
    if (size < 84) {
        char prefix[6] = {};
        f.read(prefix, 5);
        if (std::strncmp(prefix, "solid", 5) == 0)
            throw FormatError("ASCII STL is not supported (binary only)");
        throw FormatError("STL file shorter than binary header");
    }
    char header[80];
    f.read(header, 80);
    std::uint32_t n = 0;
    f.read(reinterpret_cast<char*>(&n), 4);
    if (size != std::streamoff(84) + std::streamoff(n) * 50) {
        if (std::strncmp(header, "solid", 5) == 0)
            throw FormatError("ASCII STL is not supported (binary only)");
        throw FormatError("binary STL record count does not match file size");
    }

    TriangleMesh mesh;
    struct Key {
        float x, y, z;
        bool operator==(const Key& o) const { return x == o.x && y == o.y && z == o.z; }
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::uint32_t a, b, c;
            std::memcpy(&a, &k.x, 4);
            std::memcpy(&b, &k.y, 4);
            std::memcpy(&c, &k.z, 4);
            std::uint64_t h = a * 0x9e3779b97f4a7c15ull;
            h ^= b + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
            h ^= c + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
            return std::size_t(h);
        }
    };
    std::unordered_map<Key, int, KeyHash> weld;
    for (std::uint32_t i = 0; i < n; ++i) {
        float rec[12];
        f.read(reinterpret_cast<char*>(rec), 48);
        std::uint16_t attr;
        f.read(reinterpret_cast<char*>(&attr), 2);
        if (!f) throw FormatError("binary STL truncated");
        std::array<int, 3> ids{};
        for (int v = 0; v < 3; ++v) {
            Key k{rec[3 + 3 * v], rec[4 + 3 * v], rec[5 + 3 * v]};
            auto it = weld.find(k);
            if (it == weld.end()) {
                mesh.vertices.push_back({k.x, k.y, k.z});
                it = weld.emplace(k, int(mesh.vertices.size()) - 1).first;
            }
            ids[v] = it->second;
        }
        mesh.triangles.push_back(ids);
    }
    return mesh;
}

// Re-voxelize a watertight mesh by x-ray parity at voxel centers. Rows are
// nudged off the lattice to dodge exact edge hits.
inline VoxelVolume mesh_to_mask(const TriangleMesh& mesh, int nx, int ny, int nz,
                                Vec3 spacing, Vec3 origin = {}) {
    VoxelVolume out(nx, ny, nz, spacing, origin);
    const double ey = 0.49712e-3 * spacing.y;  // irrational-ish offsets
    const double ez = 0.31627e-3 * spacing.z;

    std::vector<std::vector<int>> rows(std::size_t(ny) * nz);
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        double ylo = 1e300, yhi = -1e300, zlo = 1e300, zhi = -1e300;
        for (int k = 0; k < 3; ++k) {
            const Vec3& p = mesh.vertices[t[k]];
            ylo = std::min(ylo, p.y);
            yhi = std::max(yhi, p.y);
            zlo = std::min(zlo, p.z);
            zhi = std::max(zhi, p.z);
        }
        int y0 = std::max(0, int(std::ceil((ylo - origin.y - ey) / spacing.y)));
        int y1 = std::min(ny - 1, int(std::floor((yhi - origin.y - ey) / spacing.y)));
        int z0 = std::max(0, int(std::ceil((zlo - origin.z - ez) / spacing.z)));
        int z1 = std::min(nz - 1, int(std::floor((zhi - origin.z - ez) / spacing.z)));
        for (int z = z0; z <= z1; ++z)
            for (int y = y0; y <= y1; ++y) rows[std::size_t(z) * ny + y].push_back(int(i));
    }

    std::vector<double> crossings;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y) {
            const auto& list = rows[std::size_t(z) * ny + y];
            if (list.empty()) continue;
            double ry = origin.y + y * spacing.y + ey;
            double rz = origin.z + z * spacing.z + ez;
            crossings.clear();
            for (int ti : list) {
                const auto& t = mesh.triangles[ti];
                const Vec3& a = mesh.vertices[t[0]];
                const Vec3& b = mesh.vertices[t[1]];
                const Vec3& c = mesh.vertices[t[2]];
                // solve for intersection of the +x ray with the triangle in (y,z)
                double d = (b.y - a.y) * (c.z - a.z) - (b.z - a.z) * (c.y - a.y);
                if (d == 0.0) continue;
                double u = ((ry - a.y) * (c.z - a.z) - (rz - a.z) * (c.y - a.y)) / d;
                double v = ((b.y - a.y) * (rz - a.z) - (b.z - a.z) * (ry - a.y)) / d;
                if (u < 0.0 || v < 0.0 || u + v > 1.0) continue;
                crossings.push_back(a.x + u * (b.x - a.x) + v * (c.x - a.x));
            }
            if (crossings.empty()) continue;
            std::sort(crossings.begin(), crossings.end());
            for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
                int x0 = std::max(0, int(std::ceil((crossings[k] - origin.x) / spacing.x)));
                int x1 = std::min(nx - 1,
                                  int(std::floor((crossings[k + 1] - origin.x) / spacing.x)));
                for (int x = x0; x <= x1; ++x) out(x, y, z) = 1.0f;
            }
        }
    return out;
}

}  // namespace vascheck
