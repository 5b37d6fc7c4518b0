#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "sfmap/isosurface.hpp"
#include "sfmap/metrics.hpp"

namespace sfmap {

/// Fixed class color table: plastic, metal, fabric, wood.
inline constexpr std::array<std::array<uint8_t, 3>, 4> kMaterialColors = {{
    {31, 119, 180},   // plastic
    {128, 128, 128},  // metal
    {214, 39, 40},    // fabric
    {140, 86, 75},    // wood
}};

/// ASCII PLY with per-vertex position and class color. Canonical formatting:
/// re-exporting an imported file reproduces it byte for byte.
void export_ply(const ExtractedSurface& surface, const std::string& path);

/// Parses files produced by export_ply (positions, colors -> classes).
ExtractedSurface import_ply(const std::string& path);

enum class ProjectionAxis { kX = 0, kY = 1, kZ = 2 };

/// Orthographic splat of region-of-interest samples into a binary PPM (P6):
/// green = match, red = mismatch, black = outside ROI / empty. Later samples
/// overwrite earlier ones pixel-wise, keeping pixel fractions representative
/// on dense maps.
void export_mask_image(const MaterialMap& map, ProjectionAxis axis, int width,
                       int height, const std::string& path);

}  // namespace sfmap
