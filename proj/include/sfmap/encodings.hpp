#pragma once

#include <array>
#include <span>
#include <vector>

#include "sfmap/common.hpp"
#include "sfmap/tensor.hpp"

namespace sfmap {

// ---------------------------------------------------------------------------
// Multiresolution hash-grid encoding. Level resolutions follow a geometric
// progression N_l = floor(base * scale^l); levels whose dense vertex count
// fits the table stay dense (row-major), finer levels use a spatial hash.
// ---------------------------------------------------------------------------

struct HashGridConfig {
    int levels = 16;
    int features_per_level = 2;
    int base_resolution = 16;
    double per_level_scale = 1.3819;
    int log2_hashmap_size = 24;

    int output_dim() const { return levels * features_per_level; }
};

int grid_resolution(const HashGridConfig& cfg, int level);

/// Allocated rows for a level: min(2^log2_hashmap_size, (N_l+1)^3).
int64_t table_rows(const HashGridConfig& cfg, int level);

bool level_is_dense(const HashGridConfig& cfg, int level);

/// Row index for an integer grid corner. Dense levels use row-major
/// x + (N+1)*y + (N+1)^2*z; hashed levels XOR the coordinates multiplied by
/// fixed primes and reduce modulo the table size.
uint32_t hash_index(const HashGridConfig& cfg, int x, int y, int z, int level);

struct HashGridEncoding {
    HashGridConfig config;
    Box3 bounds;                      // object frame -> [0,1]^3
    std::vector<nn::Tensor> tables;   // per level, [rows x features_per_level]

    int output_dim() const { return config.output_dim(); }

    /// Tables initialized uniform(-1e-4, 1e-4), deterministic given rng state.
    static HashGridEncoding create(const HashGridConfig& cfg, const Box3& bounds,
                                   Rng& rng);
};

/// Per-level interpolation footprint of a query point.
struct LevelCorners {
    std::array<uint32_t, 8> rows;
    std::array<float, 8> weights;  // trilinear, sum to 1
    bool clamped = false;          // point was outside bounds
};

LevelCorners level_corners(const HashGridEncoding& enc, int level, const Vec3& p);

/// Forward encode of one point; out must hold output_dim() floats.
/// Shared by the training op and the inference path.
void hashgrid_encode_point(const HashGridEncoding& enc, const Vec3& p, float* out,
                           bool* clamped = nullptr);

/// Batch encode recording gradient scatter into the level tables.
/// clamped_flags, when given, receives one flag per point.
nn::Tensor hashgrid_encode(nn::Tape* tape, HashGridEncoding& enc,
                           std::span<const Vec3> points,
                           std::vector<uint8_t>* clamped_flags = nullptr);

// ---------------------------------------------------------------------------
// Real spherical harmonics of the direction from a fixed center to the query
// point. bands=4 covers l in {0..3} -> 16 outputs (configurable down to 3).
// ---------------------------------------------------------------------------

struct SphericalHarmonicsEncoding {
    int bands = 4;
    Vec3 center;

    int output_dim() const { return bands * bands; }
};

/// Evaluate the real SH basis for unit direction d; out holds bands^2 floats.
void sh_basis(int bands, const Vec3& d, float* out);

/// Encode the direction from enc.center to p. Throws ContractError when p
/// coincides with the center (degenerate direction).
void sh_encode_point(const SphericalHarmonicsEncoding& enc, const Vec3& p, float* out);

std::vector<float> sh_encode(const SphericalHarmonicsEncoding& enc, const Vec3& p);

}  // namespace sfmap
