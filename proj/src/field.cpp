#include "sfmap/field.hpp"

#include <cmath>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sfmap {

namespace {

nn::Tensor xavier_linear(int fan_in, int fan_out, Rng& rng, float gain) {
    float limit = gain * std::sqrt(6.0f / float(fan_in + fan_out));
    std::vector<float> w(size_t(fan_in) * size_t(fan_out));
    for (float& v : w) v = rng.uniform_f(-limit, limit);
    return nn::Tensor::from({fan_in, fan_out}, std::move(w), true);
}

nn::Tensor zero_bias(int n) { return nn::Tensor::zeros({n}, true); }

void relu_inplace(float* v, int n) {
    for (int i = 0; i < n; ++i)
        if (v[i] < 0.0f) v[i] = 0.0f;
}

}  // namespace

void FieldConfig::validate() const {
    if (num_classes < 2 || num_classes > kNumClasses)
        throw ConfigError("field: num_classes must be in [2, 4]");
    if (sh_bands < 1 || sh_bands > 4)
        throw ConfigError("field: sh_bands must be in [1, 4]");
    if (grid.levels < 1 || grid.features_per_level < 1 || grid.base_resolution < 1)
        throw ConfigError("field: hash grid dimensions must be positive");
    if (grid.levels > 32 || grid.features_per_level > 8)
        throw ConfigError("field: at most 32 levels and 8 features per level");
    if (grid.log2_hashmap_size < 4 || grid.log2_hashmap_size > 24)
        throw ConfigError("field: log2_hashmap_size must be in [4, 24]");
    if (!(grid.per_level_scale >= 1.0))
        throw ConfigError("field: per_level_scale must be >= 1");
}

void LossWeights::validate() const {
    if (sdf_weight < 0.0f || material_weight < 0.0f || eikonal_weight < 0.0f)
        throw ConfigError("loss: weights must be non-negative");
    if (!(truncation > 0.0f)) throw ConfigError("loss: truncation must be positive");
}

DualBranchField DualBranchField::create(const FieldConfig& cfg, const Box3& bounds,
                                        Rng& rng) {
    cfg.validate();
    DualBranchField f;
    f.config = cfg;
    f.grid = HashGridEncoding::create(cfg.grid, bounds, rng);
    f.sh = SphericalHarmonicsEncoding{cfg.sh_bands, bounds.center()};

    // The SDF head keeps a small spread so the truncated loss always has live
    // anchors near the surface; the class head starts at zero, which makes an
    // untrained field report uniform class probabilities everywhere.
    const int enc_dim = cfg.grid.output_dim();
    f.sdf_mlp.w1 = xavier_linear(enc_dim, 64, rng, 1.0f);
    f.sdf_mlp.b1 = zero_bias(64);
    f.sdf_mlp.w2 = xavier_linear(64, 64, rng, 1.0f);
    f.sdf_mlp.b2 = zero_bias(64);
    f.sdf_mlp.w3 = xavier_linear(64, 1, rng, 0.1f);
    f.sdf_mlp.b3 = zero_bias(1);

    const int min_dim = cfg.material_input_dim();
    f.material_mlp.w1 = xavier_linear(min_dim, 64, rng, 1.0f);
    f.material_mlp.b1 = zero_bias(64);
    f.material_mlp.w2 = nn::Tensor::zeros({64, cfg.num_classes}, true);
    f.material_mlp.b2 = zero_bias(cfg.num_classes);
    return f;
}

DualBranchField::ForwardTensors DualBranchField::forward(nn::Tape* tape,
                                                         std::span<const Vec3> points) {
    const int B = int(points.size());
    for (const Vec3& p : points)
        if (!p.finite()) throw ContractError("field_forward: non-finite query point");

    ForwardTensors out;
    nn::Tensor enc = hashgrid_encode(tape, grid, points, &out.clamped);

    nn::Tensor h1 = nn::relu(tape, nn::linear_forward(tape, enc, sdf_mlp.w1, sdf_mlp.b1));
    nn::Tensor h2 = nn::relu(tape, nn::linear_forward(tape, h1, sdf_mlp.w2, sdf_mlp.b2));
    out.feature = h2;
    out.sdf = nn::linear_forward(tape, h2, sdf_mlp.w3, sdf_mlp.b3);

    // Material-branch base input is a constant w.r.t. the parameters.
    const int base_dim = config.material_input == MaterialInput::kSh
                             ? config.sh_bands * config.sh_bands
                             : 3;
    std::vector<float> base(size_t(B) * size_t(base_dim));
    for (int b = 0; b < B; ++b) {
        float* row = base.data() + size_t(b) * size_t(base_dim);
        if (config.material_input == MaterialInput::kSh) {
            sh_encode_point(sh, points[size_t(b)], row);
        } else {
            row[0] = float(points[size_t(b)].x);
            row[1] = float(points[size_t(b)].y);
            row[2] = float(points[size_t(b)].z);
        }
    }
    nn::Tensor base_t = nn::Tensor::from({B, base_dim}, std::move(base));
    nn::Tensor min_t =
        config.use_feature_concat ? nn::concat_cols(tape, base_t, h2) : base_t;

    nn::Tensor mh =
        nn::relu(tape, nn::linear_forward(tape, min_t, material_mlp.w1, material_mlp.b1));
    out.logits = nn::linear_forward(tape, mh, material_mlp.w2, material_mlp.b2);
    return out;
}

nn::Tensor DualBranchField::forward_sdf(nn::Tape* tape, std::span<const Vec3> points) {
    nn::Tensor enc = hashgrid_encode(tape, grid, points);
    nn::Tensor h1 = nn::relu(tape, nn::linear_forward(tape, enc, sdf_mlp.w1, sdf_mlp.b1));
    nn::Tensor h2 = nn::relu(tape, nn::linear_forward(tape, h1, sdf_mlp.w2, sdf_mlp.b2));
    return nn::linear_forward(tape, h2, sdf_mlp.w3, sdf_mlp.b3);
}

FieldOutput DualBranchField::evaluate_one(const Vec3& p) const {
    FieldOutput out;
    const int enc_dim = config.grid.output_dim();
    float enc[256];  // levels * features_per_level, capped by validate()
    hashgrid_encode_point(grid, p, enc);

    float h1[64], h2[64];
    nn::linear_row(enc, sdf_mlp.w1.values().data(), sdf_mlp.b1.values().data(),
                   enc_dim, 64, h1);
    relu_inplace(h1, 64);
    nn::linear_row(h1, sdf_mlp.w2.values().data(), sdf_mlp.b2.values().data(), 64, 64, h2);
    relu_inplace(h2, 64);
    nn::linear_row(h2, sdf_mlp.w3.values().data(), sdf_mlp.b3.values().data(), 64, 1,
                   &out.sdf);
    std::copy(h2, h2 + kFeatureDim, out.feature.begin());

    const int base_dim = config.material_input == MaterialInput::kSh
                             ? config.sh_bands * config.sh_bands
                             : 3;
    float min_buf[3 + 16 + kFeatureDim];
    if (config.material_input == MaterialInput::kSh) {
        sh_encode_point(sh, p, min_buf);
    } else {
        min_buf[0] = float(p.x);
        min_buf[1] = float(p.y);
        min_buf[2] = float(p.z);
    }
    int min_dim = base_dim;
    if (config.use_feature_concat) {
        std::copy(h2, h2 + kFeatureDim, min_buf + base_dim);
        min_dim += kFeatureDim;
    }

    float mh[64];
    nn::linear_row(min_buf, material_mlp.w1.values().data(),
                   material_mlp.b1.values().data(), min_dim, 64, mh);
    relu_inplace(mh, 64);
    float logits[kNumClasses] = {0, 0, 0, 0};
    nn::linear_row(mh, material_mlp.w2.values().data(), material_mlp.b2.values().data(),
                   64, config.num_classes, logits);
    std::copy(logits, logits + kNumClasses, out.logits.begin());
    return out;
}

void DualBranchField::evaluate_batch_serial(std::span<const Vec3> points,
                                            FieldOutput* out) const {
    for (size_t i = 0; i < points.size(); ++i) out[i] = evaluate_one(points[i]);
}

void DualBranchField::evaluate_batch(std::span<const Vec3> points,
                                     FieldOutput* out) const {
    const int64_t n = int64_t(points.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t i = 0; i < n; ++i) out[i] = evaluate_one(points[size_t(i)]);
}

float DualBranchField::sdf_at(const Vec3& p) const {
    const int enc_dim = config.grid.output_dim();
    float enc[256];
    hashgrid_encode_point(grid, p, enc);
    float h1[64], h2[64], s;
    nn::linear_row(enc, sdf_mlp.w1.values().data(), sdf_mlp.b1.values().data(),
                   enc_dim, 64, h1);
    relu_inplace(h1, 64);
    nn::linear_row(h1, sdf_mlp.w2.values().data(), sdf_mlp.b2.values().data(), 64, 64, h2);
    relu_inplace(h2, 64);
    nn::linear_row(h2, sdf_mlp.w3.values().data(), sdf_mlp.b3.values().data(), 64, 1, &s);
    return s;
}

std::vector<DualBranchField::NamedParam> DualBranchField::named_parameters() {
    std::vector<NamedParam> out;
    for (size_t l = 0; l < grid.tables.size(); ++l) {
        std::ostringstream name;
        name << "grid.level" << (l < 10 ? "0" : "") << l;
        out.push_back({name.str(), grid.tables[l], true, config.grid.features_per_level,
                       false});
    }
    out.push_back({"sdf.w1", sdf_mlp.w1, false, 0, true});
    out.push_back({"sdf.b1", sdf_mlp.b1, false, 0, true});
    out.push_back({"sdf.w2", sdf_mlp.w2, false, 0, true});
    out.push_back({"sdf.b2", sdf_mlp.b2, false, 0, true});
    out.push_back({"sdf.w3", sdf_mlp.w3, false, 0, true});
    out.push_back({"sdf.b3", sdf_mlp.b3, false, 0, true});
    out.push_back({"material.w1", material_mlp.w1, false, 0, true});
    out.push_back({"material.b1", material_mlp.b1, false, 0, true});
    out.push_back({"material.w2", material_mlp.w2, false, 0, true});
    out.push_back({"material.b2", material_mlp.b2, false, 0, true});
    return out;
}

void DualBranchField::register_with(nn::AdamOptimizer& opt, float weight_decay) {
    for (NamedParam& p : named_parameters())
        opt.add_param(p.tensor, p.decay ? weight_decay : 0.0f, p.lazy_rows, p.row_width);
}

std::pair<int, std::array<float, 4>> predict_material(const DualBranchField& field,
                                                      const Vec3& p) {
    FieldOutput out = field.evaluate_one(p);
    const int C = field.config.num_classes;
    std::vector<float> probs =
        nn::softmax(std::span<const float>(out.logits.data(), size_t(C)));
    int best = 0;
    for (int c = 1; c < C; ++c)
        if (out.logits[size_t(c)] > out.logits[size_t(best)]) best = c;
    std::array<float, 4> p4{};
    std::copy(probs.begin(), probs.end(), p4.begin());
    return {best, p4};
}

nn::Tensor sdf_loss(nn::Tape* tape, const nn::Tensor& pred_sdf,
                    std::span<const float> target_sdf, const LossWeights& weights) {
    nn::Tensor l1 = nn::l1_truncated(tape, pred_sdf, target_sdf, weights.truncation);
    const nn::Tensor terms[] = {l1};
    const float ws[] = {weights.sdf_weight};
    return nn::weighted_sum(tape, terms, ws);
}

nn::Tensor material_loss(nn::Tape* tape, const nn::Tensor& logits,
                         std::span<const int> labels, const LossWeights& weights) {
    nn::Tensor ce = nn::softmax_cross_entropy(tape, logits, labels);
    const nn::Tensor terms[] = {ce};
    const float ws[] = {weights.material_weight};
    return nn::weighted_sum(tape, terms, ws);
}

}  // namespace sfmap
