#include "sfmap/export.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace sfmap {

namespace {

std::string float_repr(float v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", double(v));
    return buf;
}

}  // namespace

void export_ply(const ExtractedSurface& surface, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("export_ply: cannot write '" + path + "'");

    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << surface.vertices.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    out << "element face " << surface.triangles.size() << "\n";
    out << "property list uchar int vertex_indices\n";
    out << "end_header\n";

    for (size_t i = 0; i < surface.vertices.size(); ++i) {
        const Vec3& v = surface.vertices[i];
        int cls = surface.has_materials() ? surface.vertex_class[i] : 0;
        if (cls < 0 || cls >= kNumClasses) cls = 0;
        const auto& c = kMaterialColors[size_t(cls)];
        out << float_repr(float(v.x)) << ' ' << float_repr(float(v.y)) << ' '
            << float_repr(float(v.z)) << ' ' << int(c[0]) << ' ' << int(c[1]) << ' '
            << int(c[2]) << '\n';
    }
    for (const auto& t : surface.triangles) {
        for (int idx : t)
            if (idx < 0 || idx >= int(surface.vertices.size()))
                throw ContractError("export_ply: triangle index out of range");
        out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
    if (!out) throw IoError("export_ply: write failed for '" + path + "'");
}

ExtractedSurface import_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("import_ply: cannot open '" + path + "'");

    std::string line;
    size_t n_vertices = 0, n_faces = 0;
    if (!std::getline(in, line) || line != "ply")
        throw IoError("import_ply: '" + path + "' is not a PLY file");
    bool header_done = false;
    while (std::getline(in, line)) {
        if (line == "end_header") {
            header_done = true;
            break;
        }
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word == "element") {
            std::string what;
            size_t count;
            ss >> what >> count;
            if (what == "vertex") n_vertices = count;
            if (what == "face") n_faces = count;
        }
    }
    if (!header_done) throw IoError("import_ply: missing end_header in '" + path + "'");

    ExtractedSurface surf;
    surf.vertices.reserve(n_vertices);
    surf.vertex_class.reserve(n_vertices);
    surf.vertex_prob.assign(n_vertices, 0.0f);
    for (size_t i = 0; i < n_vertices; ++i) {
        float x, y, z;
        int r, g, b;
        if (!(in >> x >> y >> z >> r >> g >> b))
            throw IoError("import_ply: truncated vertex data in '" + path + "'");
        surf.vertices.push_back({double(x), double(y), double(z)});
        int cls = 0;
        for (int c = 0; c < kNumClasses; ++c)
            if (kMaterialColors[size_t(c)][0] == r && kMaterialColors[size_t(c)][1] == g &&
                kMaterialColors[size_t(c)][2] == b)
                cls = c;
        surf.vertex_class.push_back(cls);
    }
    for (size_t i = 0; i < n_faces; ++i) {
        int n, a, b, c;
        if (!(in >> n >> a >> b >> c) || n != 3)
            throw IoError("import_ply: bad face record in '" + path + "'");
        surf.triangles.push_back({a, b, c});
    }
    surf.empty_warning = surf.triangles.empty();
    return surf;
}

void export_mask_image(const MaterialMap& map, ProjectionAxis axis, int width,
                       int height, const std::string& path) {
    if (map.samples.empty())
        throw ContractError("export_mask_image: map has no samples");
    if (width < 1 || height < 1)
        throw ContractError("export_mask_image: image dimensions must be positive");

    auto project = [axis](const Vec3& p) -> std::pair<double, double> {
        switch (axis) {
            case ProjectionAxis::kX: return {p.y, p.z};
            case ProjectionAxis::kY: return {p.x, p.z};
            default: return {p.x, p.y};
        }
    };

    double ulo = std::numeric_limits<double>::infinity(), uhi = -ulo;
    double vlo = ulo, vhi = -ulo;
    bool any_roi = false;
    for (const MaterialMapSample& s : map.samples) {
        if (!s.in_roi) continue;
        any_roi = true;
        auto [u, v] = project(s.point);
        ulo = std::min(ulo, u);
        uhi = std::max(uhi, u);
        vlo = std::min(vlo, v);
        vhi = std::max(vhi, v);
    }
    if (!any_roi) throw ContractError("export_mask_image: no region-of-interest samples");
    double upad = std::max((uhi - ulo) * 0.01, 1e-12);
    double vpad = std::max((vhi - vlo) * 0.01, 1e-12);
    ulo -= upad;
    uhi += upad;
    vlo -= vpad;
    vhi += vpad;

    std::vector<uint8_t> pixels(size_t(width) * size_t(height) * 3, 0);
    for (const MaterialMapSample& s : map.samples) {
        if (!s.in_roi) continue;
        auto [u, v] = project(s.point);
        int px = std::clamp(int((u - ulo) / (uhi - ulo) * width), 0, width - 1);
        int py = std::clamp(int((v - vlo) / (vhi - vlo) * height), 0, height - 1);
        uint8_t* p = pixels.data() + (size_t(py) * size_t(width) + size_t(px)) * 3;
        bool match = s.predicted == s.truth;
        p[0] = match ? 0 : 255;
        p[1] = match ? 255 : 0;
        p[2] = 0;
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("export_mask_image: cannot write '" + path + "'");
    out << "P6\n" << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              std::streamsize(pixels.size()));
    if (!out) throw IoError("export_mask_image: write failed for '" + path + "'");
}

}  // namespace sfmap
