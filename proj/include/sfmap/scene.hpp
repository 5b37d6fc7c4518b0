#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sfmap/common.hpp"

namespace sfmap {

struct Primitive {
    enum class Shape { kSphere, kBox, kCylinder };
    Shape shape = Shape::kSphere;
    Vec3 center;
    Quat rotation;  // identity unless set
    double radius = 0.0;      // sphere, cylinder
    Vec3 half_extents;        // box
    double half_height = 0.0; // cylinder, along local z

    double sdf(const Vec3& p) const;
    /// Conservative bounding-sphere radius around center.
    double bound_radius() const;
    /// Per-axis half extents of a conservative world-frame bounding box.
    Vec3 aabb_half() const;
};

/// Surface-point predicates used for material regions and the region of
/// interest. Height is measured along the (normalized) axis in absolute
/// coordinates; sector angles are measured in a deterministic basis built
/// from the axis (x-axis reference when the axis is z).
struct RegionPredicate {
    enum class Type { kHalfSpace, kAngularSector, kHeightBand };
    Type type = Type::kHalfSpace;
    // half_space: dot(normal_hat, p) >= offset
    Vec3 normal{0, 0, 1};
    double offset = 0.0;
    // angular_sector around axis through center
    Vec3 center;
    Vec3 axis{0, 0, 1};
    double start_deg = 0.0;
    double sweep_deg = 0.0;
    // height_band along axis
    double min_h = 0.0;
    double max_h = 0.0;

    bool contains(const Vec3& p) const;
};

struct MaterialRegion {
    RegionPredicate predicate;
    int material = 0;
};

class Scene {
public:
    std::string name;
    Box3 bounds;
    std::vector<Primitive> primitives;
    std::vector<MaterialRegion> regions;
    std::vector<RegionPredicate> roi;  // empty = whole surface under study
    int default_class = kPlastic;

    /// min over primitive SDFs (exact for one primitive, valid lower bound
    /// for unions).
    double sdf(const Vec3& p) const;

    /// Central-difference gradient of the SDF.
    Vec3 sdf_gradient(const Vec3& p, double h = 1e-5) const;

    /// Material class of a surface point: first matching region wins, else
    /// default_class. Throws ContractError when |sdf(p)| >= tol.
    int true_material(const Vec3& p, double tol = 1e-3) const;

    bool in_roi(const Vec3& p) const;

    void validate() const;

    static Scene load(const std::string& path);
    void save(const std::string& path) const;
    static Scene from_json_text(const std::string& text);
    std::string to_json_text() const;
};

struct GroundTruthSample {
    Vec3 point;
    double sdf = 0.0;
    int true_class = 0;
    Vec3 normal;
};

/// Newton projection along the SDF gradient; returns false when it fails to
/// converge within max_iters.
bool project_to_surface(const Scene& scene, Vec3& p, int max_iters = 64,
                        double tol = 1e-6);

/// Rejection-sample bounds-uniform points projected onto the surface.
/// Deterministic given seed. roi_only keeps only region-of-interest points.
std::vector<GroundTruthSample> sample_surface(const Scene& scene, int n, uint64_t seed,
                                              bool roi_only = false);

}  // namespace sfmap
