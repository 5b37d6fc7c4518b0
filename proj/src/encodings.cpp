#include "sfmap/encodings.hpp"

#include <cmath>
#include <sstream>

namespace sfmap {

namespace {

constexpr uint32_t kHashPrimes[3] = {1u, 2654435761u, 805459861u};

void check_level(const HashGridConfig& cfg, int level) {
    if (level < 0 || level >= cfg.levels) {
        std::ostringstream ss;
        ss << "hash grid: level " << level << " outside [0, " << cfg.levels << ")";
        throw ContractError(ss.str());
    }
}

}  // namespace

int grid_resolution(const HashGridConfig& cfg, int level) {
    check_level(cfg, level);
    return int(std::floor(double(cfg.base_resolution) *
                          std::pow(cfg.per_level_scale, double(level))));
}

int64_t table_rows(const HashGridConfig& cfg, int level) {
    int64_t n = grid_resolution(cfg, level);
    int64_t dense = (n + 1) * (n + 1) * (n + 1);
    int64_t hashed = int64_t(1) << cfg.log2_hashmap_size;
    return std::min(dense, hashed);
}

bool level_is_dense(const HashGridConfig& cfg, int level) {
    int64_t n = grid_resolution(cfg, level);
    return (n + 1) * (n + 1) * (n + 1) <= (int64_t(1) << cfg.log2_hashmap_size);
}

uint32_t hash_index(const HashGridConfig& cfg, int x, int y, int z, int level) {
    if (x < 0 || y < 0 || z < 0)
        throw ContractError("hash_index: corner components must be non-negative");
    if (level_is_dense(cfg, level)) {
        int64_t n1 = grid_resolution(cfg, level) + 1;
        return uint32_t(x + n1 * y + n1 * n1 * z);
    }
    uint32_t h = uint32_t(x) * kHashPrimes[0] ^ uint32_t(y) * kHashPrimes[1] ^
                 uint32_t(z) * kHashPrimes[2];
    return h & (uint32_t((int64_t(1) << cfg.log2_hashmap_size) - 1));
}

HashGridEncoding HashGridEncoding::create(const HashGridConfig& cfg, const Box3& bounds,
                                          Rng& rng) {
    HashGridEncoding enc;
    enc.config = cfg;
    enc.bounds = bounds;
    enc.tables.reserve(size_t(cfg.levels));
    for (int l = 0; l < cfg.levels; ++l) {
        int64_t rows = table_rows(cfg, l);
        std::vector<float> init(size_t(rows) * size_t(cfg.features_per_level));
        for (float& v : init) v = rng.uniform_f(-1e-4f, 1e-4f);
        enc.tables.push_back(
            nn::Tensor::from({int(rows), cfg.features_per_level}, std::move(init), true));
    }
    return enc;
}

LevelCorners level_corners(const HashGridEncoding& enc, int level, const Vec3& p) {
    const HashGridConfig& cfg = enc.config;
    check_level(cfg, level);

    Vec3 ext = enc.bounds.extent();
    Vec3 u{(p.x - enc.bounds.lo.x) / ext.x, (p.y - enc.bounds.lo.y) / ext.y,
           (p.z - enc.bounds.lo.z) / ext.z};
    bool clamped = false;
    auto clamp01 = [&clamped](double v) {
        if (v < 0.0) {
            clamped = true;
            return 0.0;
        }
        if (v > 1.0) {
            clamped = true;
            return 1.0;
        }
        return v;
    };
    u = {clamp01(u.x), clamp01(u.y), clamp01(u.z)};

    const int n = grid_resolution(cfg, level);
    int c[3];
    float t[3];
    const double s[3] = {u.x * n, u.y * n, u.z * n};
    for (int a = 0; a < 3; ++a) {
        int ci = int(std::floor(s[a]));
        if (ci > n - 1) ci = n - 1;  // upper boundary lands in the last cell
        c[a] = ci;
        t[a] = float(s[a] - double(ci));
    }

    LevelCorners out;
    out.clamped = clamped;
    for (int corner = 0; corner < 8; ++corner) {
        int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
        float w = (dx ? t[0] : 1.0f - t[0]) * (dy ? t[1] : 1.0f - t[1]) *
                  (dz ? t[2] : 1.0f - t[2]);
        out.weights[size_t(corner)] = w;
        out.rows[size_t(corner)] = hash_index(cfg, c[0] + dx, c[1] + dy, c[2] + dz, level);
    }
    return out;
}

void hashgrid_encode_point(const HashGridEncoding& enc, const Vec3& p, float* out,
                           bool* clamped) {
    const int F = enc.config.features_per_level;
    bool any_clamped = false;
    for (int l = 0; l < enc.config.levels; ++l) {
        LevelCorners lc = level_corners(enc, l, p);
        any_clamped = any_clamped || lc.clamped;
        const float* table = enc.tables[size_t(l)].values().data();
        float* dst = out + size_t(l) * size_t(F);
        for (int f = 0; f < F; ++f) dst[f] = 0.0f;
        for (int corner = 0; corner < 8; ++corner) {
            const float w = lc.weights[size_t(corner)];
            const float* row = table + size_t(lc.rows[size_t(corner)]) * size_t(F);
            for (int f = 0; f < F; ++f) dst[f] += w * row[f];
        }
    }
    if (clamped) *clamped = any_clamped;
}

nn::Tensor hashgrid_encode(nn::Tape* tape, HashGridEncoding& enc,
                           std::span<const Vec3> points,
                           std::vector<uint8_t>* clamped_flags) {
    const int B = int(points.size());
    const int F = enc.config.features_per_level;
    const int L = enc.config.levels;
    const int D = enc.output_dim();

    bool track = tape != nullptr;
    if (track) {
        track = false;
        for (const auto& t : enc.tables) track = track || t.requires_grad();
        track = track && tape;
    }

    std::vector<float> out(size_t(B) * size_t(D));
    std::vector<LevelCorners> refs;
    if (track) refs.resize(size_t(B) * size_t(L));
    if (clamped_flags) clamped_flags->assign(size_t(B), 0);

    for (int b = 0; b < B; ++b) {
        bool any_clamped = false;
        float* dst = out.data() + size_t(b) * size_t(D);
        for (int l = 0; l < L; ++l) {
            LevelCorners lc = level_corners(enc, l, points[size_t(b)]);
            any_clamped = any_clamped || lc.clamped;
            const float* table = enc.tables[size_t(l)].values().data();
            float* ldst = dst + size_t(l) * size_t(F);
            for (int f = 0; f < F; ++f) ldst[f] = 0.0f;
            for (int corner = 0; corner < 8; ++corner) {
                const float w = lc.weights[size_t(corner)];
                const float* row = table + size_t(lc.rows[size_t(corner)]) * size_t(F);
                for (int f = 0; f < F; ++f) ldst[f] += w * row[f];
            }
            if (track) refs[size_t(b) * size_t(L) + size_t(l)] = lc;
        }
        if (clamped_flags) (*clamped_flags)[size_t(b)] = any_clamped ? 1 : 0;
    }

    nn::Tensor result = nn::Tensor::from({B, D}, std::move(out), track);
    if (track) {
        result.data()->is_leaf = false;
        std::vector<nn::Tensor> tables = enc.tables;
        nn::Tensor out_t = result;
        tape->record(
            [tables, out_t, refs = std::move(refs), B, L, F]() mutable {
                const std::vector<float>& gout = out_t.data()->grad;
                if (gout.empty()) return;
                for (int b = 0; b < B; ++b) {
                    for (int l = 0; l < L; ++l) {
                        nn::TensorData* td = tables[size_t(l)].data();
                        if (!td->requires_grad) continue;
                        if (td->grad.empty()) td->grad.assign(td->values.size(), 0.0f);
                        const LevelCorners& lc = refs[size_t(b) * size_t(L) + size_t(l)];
                        const float* g =
                            gout.data() + size_t(b) * size_t(L) * size_t(F) + size_t(l) * size_t(F);
                        for (int corner = 0; corner < 8; ++corner) {
                            const float w = lc.weights[size_t(corner)];
                            float* grow =
                                td->grad.data() + size_t(lc.rows[size_t(corner)]) * size_t(F);
                            for (int f = 0; f < F; ++f) grow[f] += w * g[f];
                            td->touched_rows.push_back(lc.rows[size_t(corner)]);
                        }
                    }
                }
            },
            result);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Real spherical harmonics, graphics convention (no Condon-Shortley phase),
// orthonormal over the unit sphere. Fixed (l, m) order, m from -l to +l.
// ---------------------------------------------------------------------------

void sh_basis(int bands, const Vec3& d, float* out) {
    if (bands < 1 || bands > 4)
        throw ContractError("sh_basis: bands must be in [1, 4]");
    const double x = d.x, y = d.y, z = d.z;
    int i = 0;
    out[i++] = 0.28209479177387814f;  // Y_0^0
    if (bands > 1) {
        out[i++] = float(0.4886025119029199 * y);   // Y_1^{-1}
        out[i++] = float(0.4886025119029199 * z);   // Y_1^{0}
        out[i++] = float(0.4886025119029199 * x);   // Y_1^{+1}
    }
    if (bands > 2) {
        out[i++] = float(1.0925484305920792 * x * y);                // Y_2^{-2}
        out[i++] = float(1.0925484305920792 * y * z);                // Y_2^{-1}
        out[i++] = float(0.31539156525252005 * (3.0 * z * z - 1.0)); // Y_2^{0}
        out[i++] = float(1.0925484305920792 * x * z);                // Y_2^{+1}
        out[i++] = float(0.5462742152960396 * (x * x - y * y));      // Y_2^{+2}
    }
    if (bands > 3) {
        out[i++] = float(0.5900435899266435 * y * (3.0 * x * x - y * y));  // Y_3^{-3}
        out[i++] = float(2.890611442640554 * x * y * z);                   // Y_3^{-2}
        out[i++] = float(0.4570457994644658 * y * (5.0 * z * z - 1.0));    // Y_3^{-1}
        out[i++] = float(0.3731763325901154 * z * (5.0 * z * z - 3.0));    // Y_3^{0}
        out[i++] = float(0.4570457994644658 * x * (5.0 * z * z - 1.0));    // Y_3^{+1}
        out[i++] = float(1.445305721320277 * z * (x * x - y * y));         // Y_3^{+2}
        out[i++] = float(0.5900435899266435 * x * (x * x - 3.0 * y * y));  // Y_3^{+3}
    }
}

void sh_encode_point(const SphericalHarmonicsEncoding& enc, const Vec3& p, float* out) {
    Vec3 v = p - enc.center;
    double n = v.norm();
    if (n < 1e-12)
        throw ContractError("sh_encode: point coincides with encoding center (degenerate direction)");
    sh_basis(enc.bands, v / n, out);
}

std::vector<float> sh_encode(const SphericalHarmonicsEncoding& enc, const Vec3& p) {
    std::vector<float> out(size_t(enc.output_dim()));
    sh_encode_point(enc, p, out.data());
    return out;
}

}  // namespace sfmap
