#include "sfmap/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace sfmap {

using detail::json;

double Primitive::sdf(const Vec3& p) const {
    Vec3 q = p - center;
    if (!rotation.is_identity()) q = rotation.rotate_inverse(q);
    switch (shape) {
        case Shape::kSphere:
            return q.norm() - radius;
        case Shape::kBox: {
            Vec3 d{std::abs(q.x) - half_extents.x, std::abs(q.y) - half_extents.y,
                   std::abs(q.z) - half_extents.z};
            Vec3 outside{std::max(d.x, 0.0), std::max(d.y, 0.0), std::max(d.z, 0.0)};
            double inside = std::min(std::max(d.x, std::max(d.y, d.z)), 0.0);
            return outside.norm() + inside;
        }
        case Shape::kCylinder: {
            double dr = std::sqrt(q.x * q.x + q.y * q.y) - radius;
            double dz = std::abs(q.z) - half_height;
            double ox = std::max(dr, 0.0), oz = std::max(dz, 0.0);
            return std::sqrt(ox * ox + oz * oz) + std::min(std::max(dr, dz), 0.0);
        }
    }
    throw ContractError("primitive: unknown shape");
}

double Primitive::bound_radius() const {
    switch (shape) {
        case Shape::kSphere:
            return radius;
        case Shape::kBox:
            return half_extents.norm();
        case Shape::kCylinder:
            return std::sqrt(radius * radius + half_height * half_height);
    }
    return 0.0;
}

Vec3 Primitive::aabb_half() const {
    if (!rotation.is_identity()) {
        double r = bound_radius();
        return {r, r, r};
    }
    switch (shape) {
        case Shape::kSphere:
            return {radius, radius, radius};
        case Shape::kBox:
            return half_extents;
        case Shape::kCylinder:
            return {radius, radius, half_height};
    }
    return {0, 0, 0};
}

bool RegionPredicate::contains(const Vec3& p) const {
    switch (type) {
        case Type::kHalfSpace:
            return normal.normalized().dot(p) >= offset;
        case Type::kHeightBand: {
            double h = axis.normalized().dot(p);
            return h >= min_h && h <= max_h;
        }
        case Type::kAngularSector: {
            Vec3 a = axis.normalized();
            Vec3 xref{1, 0, 0};
            if (std::abs(a.dot(xref)) > 0.9) xref = Vec3{0, 1, 0};
            Vec3 r = (xref - a * a.dot(xref)).normalized();
            Vec3 e = a.cross(r);
            Vec3 d = p - center;
            double deg = std::atan2(d.dot(e), d.dot(r)) * 180.0 / M_PI;
            double rel = std::fmod(deg - start_deg + 720.0, 360.0);
            return rel < sweep_deg;
        }
    }
    throw ContractError("region predicate: unknown type");
}

double Scene::sdf(const Vec3& p) const {
    double d = std::numeric_limits<double>::infinity();
    for (const Primitive& prim : primitives) d = std::min(d, prim.sdf(p));
    return d;
}

Vec3 Scene::sdf_gradient(const Vec3& p, double h) const {
    return {(sdf({p.x + h, p.y, p.z}) - sdf({p.x - h, p.y, p.z})) / (2 * h),
            (sdf({p.x, p.y + h, p.z}) - sdf({p.x, p.y - h, p.z})) / (2 * h),
            (sdf({p.x, p.y, p.z + h}) - sdf({p.x, p.y, p.z - h})) / (2 * h)};
}

int Scene::true_material(const Vec3& p, double tol) const {
    double d = sdf(p);
    if (std::abs(d) >= tol) {
        std::ostringstream ss;
        ss << "true_material: point is " << d << " m from the surface (tolerance " << tol
           << ")";
        throw ContractError(ss.str());
    }
    for (const MaterialRegion& r : regions)
        if (r.predicate.contains(p)) return r.material;
    return default_class;
}

bool Scene::in_roi(const Vec3& p) const {
    if (roi.empty()) return true;
    for (const RegionPredicate& r : roi)
        if (r.contains(p)) return true;
    return false;
}

void Scene::validate() const {
    if (primitives.empty()) throw ConfigError("scene: needs at least one primitive");
    Vec3 ext = bounds.extent();
    if (!(ext.x > 0 && ext.y > 0 && ext.z > 0))
        throw ConfigError("scene: bounds must have positive extent");
    if (default_class < 0 || default_class >= kNumClasses)
        throw ConfigError("scene: default_class outside [0, 4)");
    for (const MaterialRegion& r : regions)
        if (r.material < 0 || r.material >= kNumClasses)
            throw ConfigError("scene: region class outside [0, 4)");
    // Geometry must sit inside the bounds with >= 10% margin.
    Vec3 c = bounds.center();
    Vec3 half = ext * 0.5;
    for (const Primitive& prim : primitives) {
        Vec3 r = prim.aabb_half();
        Vec3 d = prim.center - c;
        if (std::abs(d.x) + r.x > half.x / 1.1 || std::abs(d.y) + r.y > half.y / 1.1 ||
            std::abs(d.z) + r.z > half.z / 1.1)
            throw ConfigError("scene: bounds must enclose geometry with >= 10% margin");
    }
}

// --- projection & sampling --------------------------------------------------

bool project_to_surface(const Scene& scene, Vec3& p, int max_iters, double tol) {
    for (int i = 0; i < max_iters; ++i) {
        double d = scene.sdf(p);
        if (std::abs(d) < tol) return true;
        Vec3 g = scene.sdf_gradient(p);
        double gn = g.norm();
        if (gn < 1e-8) return false;
        p = p - (d / gn) * (g / gn);
    }
    return std::abs(scene.sdf(p)) < tol;
}

std::vector<GroundTruthSample> sample_surface(const Scene& scene, int n, uint64_t seed,
                                              bool roi_only) {
    if (n <= 0) throw ContractError("sample_surface: n must be positive");
    Rng rng(seed, 0x5u);
    std::vector<GroundTruthSample> out;
    out.reserve(size_t(n));
    const int64_t max_attempts = int64_t(n) * 400 + 10000;
    int64_t attempts = 0;
    while (int(out.size()) < n) {
        if (++attempts > max_attempts)
            throw RunError("sample_surface: exceeded retry cap; does the ROI touch the surface?");
        Vec3 p{rng.uniform(scene.bounds.lo.x, scene.bounds.hi.x),
               rng.uniform(scene.bounds.lo.y, scene.bounds.hi.y),
               rng.uniform(scene.bounds.lo.z, scene.bounds.hi.z)};
        if (!project_to_surface(scene, p)) continue;
        if (!scene.bounds.contains(p)) continue;
        if (roi_only && !scene.in_roi(p)) continue;
        GroundTruthSample s;
        s.point = p;
        s.sdf = scene.sdf(p);
        s.normal = scene.sdf_gradient(p).normalized();
        s.true_class = scene.true_material(p);
        out.push_back(s);
    }
    return out;
}

// --- JSON -------------------------------------------------------------------

namespace {

Primitive primitive_from_json(const json& j) {
    detail::check_keys(
        j, {"shape", "center", "rotation", "radius", "half_extents", "half_height"},
        "primitives");
    Primitive p;
    std::string shape = j.at("shape").get<std::string>();
    p.center = detail::vec3_from(j.at("center"), "primitive.center");
    if (j.contains("rotation")) {
        const json& r = j.at("rotation");
        if (!r.is_array() || r.size() != 4)
            throw ConfigError("primitive.rotation: expected [w, x, y, z]");
        p.rotation = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>(),
                      r[3].get<double>()};
    }
    if (shape == "sphere") {
        p.shape = Primitive::Shape::kSphere;
        p.radius = j.at("radius").get<double>();
    } else if (shape == "box") {
        p.shape = Primitive::Shape::kBox;
        p.half_extents = detail::vec3_from(j.at("half_extents"), "primitive.half_extents");
    } else if (shape == "cylinder") {
        p.shape = Primitive::Shape::kCylinder;
        p.radius = j.at("radius").get<double>();
        p.half_height = j.at("half_height").get<double>();
    } else {
        throw ConfigError("primitive.shape: unknown shape '" + shape + "'");
    }
    return p;
}

json primitive_to_json(const Primitive& p) {
    json j;
    j["center"] = detail::vec3_to(p.center);
    if (!p.rotation.is_identity())
        j["rotation"] = json::array({p.rotation.w, p.rotation.x, p.rotation.y, p.rotation.z});
    switch (p.shape) {
        case Primitive::Shape::kSphere:
            j["shape"] = "sphere";
            j["radius"] = p.radius;
            break;
        case Primitive::Shape::kBox:
            j["shape"] = "box";
            j["half_extents"] = detail::vec3_to(p.half_extents);
            break;
        case Primitive::Shape::kCylinder:
            j["shape"] = "cylinder";
            j["radius"] = p.radius;
            j["half_height"] = p.half_height;
            break;
    }
    return j;
}

RegionPredicate predicate_from_json(const json& j, const std::string& ctx) {
    RegionPredicate r;
    std::string type = j.at("type").get<std::string>();
    if (type == "half_space") {
        detail::check_keys(j, {"type", "normal", "offset"}, ctx);
        r.type = RegionPredicate::Type::kHalfSpace;
        r.normal = detail::vec3_from(j.at("normal"), ctx + ".normal");
        r.offset = j.at("offset").get<double>();
    } else if (type == "angular_sector") {
        detail::check_keys(j, {"type", "center", "axis", "start_deg", "sweep_deg"}, ctx);
        r.type = RegionPredicate::Type::kAngularSector;
        r.center = detail::vec3_from(j.at("center"), ctx + ".center");
        r.axis = detail::vec3_from(j.at("axis"), ctx + ".axis");
        r.start_deg = j.at("start_deg").get<double>();
        r.sweep_deg = j.at("sweep_deg").get<double>();
    } else if (type == "height_band") {
        detail::check_keys(j, {"type", "axis", "min", "max"}, ctx);
        r.type = RegionPredicate::Type::kHeightBand;
        r.axis = detail::vec3_from(j.at("axis"), ctx + ".axis");
        r.min_h = j.at("min").get<double>();
        r.max_h = j.at("max").get<double>();
    } else {
        throw ConfigError(ctx + ".type: unknown predicate type '" + type + "'");
    }
    return r;
}

json predicate_to_json(const RegionPredicate& r) {
    json j;
    switch (r.type) {
        case RegionPredicate::Type::kHalfSpace:
            j["type"] = "half_space";
            j["normal"] = detail::vec3_to(r.normal);
            j["offset"] = r.offset;
            break;
        case RegionPredicate::Type::kAngularSector:
            j["type"] = "angular_sector";
            j["center"] = detail::vec3_to(r.center);
            j["axis"] = detail::vec3_to(r.axis);
            j["start_deg"] = r.start_deg;
            j["sweep_deg"] = r.sweep_deg;
            break;
        case RegionPredicate::Type::kHeightBand:
            j["type"] = "height_band";
            j["axis"] = detail::vec3_to(r.axis);
            j["min"] = r.min_h;
            j["max"] = r.max_h;
            break;
    }
    return j;
}

}  // namespace

Scene Scene::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("scene: JSON parse error: ") + e.what());
    }
    detail::check_keys(
        j, {"name", "bounds", "default_class", "primitives", "regions", "roi"}, "");
    Scene s;
    s.name = detail::get_or<std::string>(j, "name", "");
    const json& b = j.at("bounds");
    detail::check_keys(b, {"min", "max"}, "bounds");
    s.bounds.lo = detail::vec3_from(b.at("min"), "bounds.min");
    s.bounds.hi = detail::vec3_from(b.at("max"), "bounds.max");
    s.default_class = detail::get_or<int>(j, "default_class", 0);
    for (const json& pj : j.at("primitives")) s.primitives.push_back(primitive_from_json(pj));
    if (j.contains("regions"))
        for (const json& rj : j.at("regions")) {
            detail::check_keys(rj, {"class", "predicate"}, "regions");
            MaterialRegion r;
            r.material = rj.at("class").get<int>();
            r.predicate = predicate_from_json(rj.at("predicate"), "regions.predicate");
            s.regions.push_back(r);
        }
    if (j.contains("roi"))
        for (const json& rj : j.at("roi"))
            s.roi.push_back(predicate_from_json(rj, "roi"));
    s.validate();
    return s;
}

std::string Scene::to_json_text() const {
    json j;
    if (!name.empty()) j["name"] = name;
    j["bounds"] = {{"min", detail::vec3_to(bounds.lo)}, {"max", detail::vec3_to(bounds.hi)}};
    j["default_class"] = default_class;
    j["primitives"] = json::array();
    for (const Primitive& p : primitives) j["primitives"].push_back(primitive_to_json(p));
    j["regions"] = json::array();
    for (const MaterialRegion& r : regions)
        j["regions"].push_back({{"class", r.material}, {"predicate", predicate_to_json(r.predicate)}});
    if (!roi.empty()) {
        j["roi"] = json::array();
        for (const RegionPredicate& r : roi) j["roi"].push_back(predicate_to_json(r));
    }
    return j.dump(2) + "\n";
}

Scene Scene::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("scene: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return from_json_text(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(e.what()) + " (in '" + path + "')");
    }
}

void Scene::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("scene: cannot write '" + path + "'");
    out << to_json_text();
    if (!out) throw IoError("scene: write failed for '" + path + "'");
}

}  // namespace sfmap
