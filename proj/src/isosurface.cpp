#include "sfmap/isosurface.hpp"

#include <cmath>
#include <unordered_map>

#include "mc_tables.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sfmap {

namespace {

// Bourke corner layout: 0..3 bottom face loop, 4..7 top face loop.
constexpr int kCornerOffset[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                     {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeCorners[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0},
                                     {4, 5}, {5, 6}, {6, 7}, {7, 4},
                                     {0, 4}, {1, 5}, {2, 6}, {3, 7}};

struct GridSampler {
    const Box3& bounds;
    int res;  // cells per axis
    Vec3 cell;

    Vec3 position(int gx, int gy, int gz) const {
        return {bounds.lo.x + cell.x * gx, bounds.lo.y + cell.y * gy,
                bounds.lo.z + cell.z * gz};
    }
    int64_t vid(int gx, int gy, int gz) const {
        int64_t n1 = res + 1;
        return gx + n1 * (gy + n1 * gz);
    }
};

}  // namespace

ExtractedSurface marching_cubes(const std::function<double(const Vec3&)>& sdf,
                                const Box3& bounds, int resolution, bool parallel) {
    if (resolution < 1) throw ContractError("marching_cubes: resolution must be >= 1");
    if (resolution > 512)
        throw ContractError("marching_cubes: resolution above 512 is unsupported");
    Vec3 ext = bounds.extent();
    if (!(ext.x > 0 && ext.y > 0 && ext.z > 0))
        throw ContractError("marching_cubes: bounds must have positive extent");

    const int R = resolution;
    const int64_t n1 = R + 1;
    GridSampler grid{bounds, R, {ext.x / R, ext.y / R, ext.z / R}};

    std::vector<double> values(size_t(n1 * n1 * n1));
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (int gz = 0; gz <= R; ++gz)
        for (int gy = 0; gy <= R; ++gy)
            for (int gx = 0; gx <= R; ++gx)
                values[size_t(grid.vid(gx, gy, gz))] = sdf(grid.position(gx, gy, gz));

    // Per-slab triangle generation: triangles as triples of global edge keys
    // (key = vertex_id * 3 + axis of the edge from that vertex).
    std::vector<std::vector<uint64_t>> slab_tris(static_cast<size_t>(R));
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (int cz = 0; cz < R; ++cz) {
        std::vector<uint64_t>& tris = slab_tris[size_t(cz)];
        for (int cy = 0; cy < R; ++cy) {
            for (int cx = 0; cx < R; ++cx) {
                int cube = 0;
                double corner_vals[8];
                for (int i = 0; i < 8; ++i) {
                    corner_vals[i] = values[size_t(grid.vid(cx + kCornerOffset[i][0],
                                                            cy + kCornerOffset[i][1],
                                                            cz + kCornerOffset[i][2]))];
                    if (corner_vals[i] < 0.0) cube |= 1 << i;
                }
                if (detail::kMcEdgeTable[cube] == 0) continue;

                uint64_t edge_key[12];
                for (int e = 0; e < 12; ++e) {
                    if (!(detail::kMcEdgeTable[cube] & (1 << e))) continue;
                    int a = kEdgeCorners[e][0], b = kEdgeCorners[e][1];
                    int ax[3] = {cx + kCornerOffset[a][0], cy + kCornerOffset[a][1],
                                 cz + kCornerOffset[a][2]};
                    int bx[3] = {cx + kCornerOffset[b][0], cy + kCornerOffset[b][1],
                                 cz + kCornerOffset[b][2]};
                    int axis = 0;
                    for (int d = 0; d < 3; ++d)
                        if (ax[d] != bx[d]) axis = d;
                    const int* lo = ax[axis] < bx[axis] ? ax : bx;
                    edge_key[e] = uint64_t(grid.vid(lo[0], lo[1], lo[2])) * 3 + uint64_t(axis);
                }
                const int* tri = detail::kMcTriTable[cube];
                for (int i = 0; tri[i] != -1; i += 3) {
                    tris.push_back(edge_key[tri[i]]);
                    tris.push_back(edge_key[tri[i + 1]]);
                    tris.push_back(edge_key[tri[i + 2]]);
                }
            }
        }
    }

    // Deterministic merge in slab order; vertices welded through edge keys and
    // interpolated once, always from the lower grid vertex of the edge.
    ExtractedSurface out;
    std::unordered_map<uint64_t, int> vertex_of_edge;
    auto edge_vertex = [&](uint64_t key) -> int {
        auto it = vertex_of_edge.find(key);
        if (it != vertex_of_edge.end()) return it->second;
        int axis = int(key % 3);
        int64_t vid = int64_t(key / 3);
        int gx = int(vid % n1), gy = int((vid / n1) % n1), gz = int(vid / (n1 * n1));
        double v0 = values[size_t(vid)];
        int hx = gx + (axis == 0), hy = gy + (axis == 1), hz = gz + (axis == 2);
        double v1 = values[size_t(grid.vid(hx, hy, hz))];
        double t = v0 == v1 ? 0.5 : v0 / (v0 - v1);
        Vec3 p0 = grid.position(gx, gy, gz);
        Vec3 p1 = grid.position(hx, hy, hz);
        int idx = int(out.vertices.size());
        out.vertices.push_back(p0 + t * (p1 - p0));
        vertex_of_edge.emplace(key, idx);
        return idx;
    };
    for (const auto& tris : slab_tris)
        for (size_t i = 0; i < tris.size(); i += 3)
            out.triangles.push_back(std::array<int, 3>{
                edge_vertex(tris[i]), edge_vertex(tris[i + 1]), edge_vertex(tris[i + 2])});

    out.empty_warning = out.triangles.empty();
    return out;
}

ExtractedSurface extract_surface(const DualBranchField& field, const Box3& bounds,
                                 int resolution, bool parallel) {
    if (resolution < 16)
        throw ContractError("extract_surface: resolution must be >= 16");
    ExtractedSurface surf = marching_cubes(
        [&field](const Vec3& p) { return double(field.sdf_at(p)); }, bounds, resolution,
        parallel);

    surf.vertex_class.assign(surf.vertices.size(), 0);
    surf.vertex_prob.assign(surf.vertices.size(), 0.0f);
    const int64_t n = int64_t(surf.vertices.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (int64_t i = 0; i < n; ++i) {
        auto [cls, probs] = predict_material(field, surf.vertices[size_t(i)]);
        surf.vertex_class[size_t(i)] = cls;
        surf.vertex_prob[size_t(i)] = probs[size_t(cls)];
    }
    return surf;
}

}  // namespace sfmap
