#pragma once

#include <array>
#include <functional>
#include <vector>

#include "sfmap/common.hpp"
#include "sfmap/field.hpp"

namespace sfmap {

struct ExtractedSurface {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> vertex_class;    // one entry per vertex when materials attached
    std::vector<float> vertex_prob;   // probability of the assigned class
    bool empty_warning = false;       // no zero crossing found in bounds

    bool has_materials() const { return vertex_class.size() == vertices.size(); }
};

/// Marching cubes over the zero level set of an arbitrary scalar field,
/// sampled on a uniform grid of `resolution` cells per axis. Vertices are
/// welded through global edge keys, so the mesh is indexed and watertight
/// where the field is clean. Standard 15-case table, linear interpolation of
/// the crossing. Deterministic; the parallel path evaluates slabs with
/// OpenMP and merges them in slab order, matching the serial path exactly.
ExtractedSurface marching_cubes(const std::function<double(const Vec3&)>& sdf,
                                const Box3& bounds, int resolution,
                                bool parallel = true);

/// Zero level set of the field's SDF branch with per-vertex material class
/// and probability. resolution must be >= 16.
ExtractedSurface extract_surface(const DualBranchField& field, const Box3& bounds,
                                 int resolution, bool parallel = true);

}  // namespace sfmap
