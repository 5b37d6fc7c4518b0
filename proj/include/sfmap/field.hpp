#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "sfmap/adam.hpp"
#include "sfmap/encodings.hpp"

namespace sfmap {

constexpr int kFeatureDim = 64;  // final hidden layer of the SDF branch

/// Material-branch input selection: spherical harmonics of the query
/// direction (default) or the raw 3D point.
enum class MaterialInput { kSh, kRawPoint };

struct FieldConfig {
    HashGridConfig grid;
    int sh_bands = 4;
    bool use_feature_concat = true;
    MaterialInput material_input = MaterialInput::kSh;
    int num_classes = 4;

    int material_input_dim() const {
        int base = material_input == MaterialInput::kSh ? sh_bands * sh_bands : 3;
        return base + (use_feature_concat ? kFeatureDim : 0);
    }
    void validate() const;
};

struct LossWeights {
    float sdf_weight = 1.0f;
    float material_weight = 1.0f;
    float truncation = 0.02f;  // meters
    float eikonal_weight = 0.0f;

    void validate() const;
};

struct FieldOutput {
    float sdf = 0.0f;
    std::array<float, 4> logits{};  // material class scores, kNumClasses wide
    std::array<float, kFeatureDim> feature{};
};

/// Geometry branch 32 -> 64 -> 64 -> 1 with ReLU hidden activations.
struct SdfMlp {
    nn::Tensor w1, b1, w2, b2, w3, b3;
};

/// Material branch (sh_dim [+64]) -> 64 -> num_classes.
struct MaterialMlp {
    nn::Tensor w1, b1, w2, b2;
};

class DualBranchField {
public:
    HashGridEncoding grid;
    SphericalHarmonicsEncoding sh;
    SdfMlp sdf_mlp;
    MaterialMlp material_mlp;
    FieldConfig config;

    /// Hidden layers use Xavier-uniform init; output heads start at zero so an
    /// untrained field reports zero SDF and uniform class probabilities.
    static DualBranchField create(const FieldConfig& cfg, const Box3& bounds, Rng& rng);

    struct ForwardTensors {
        nn::Tensor sdf;      // [B x 1]
        nn::Tensor logits;   // [B x num_classes]
        nn::Tensor feature;  // [B x 64], post-activation z(x)
        std::vector<uint8_t> clamped;
    };

    /// Training-path forward; records onto the tape when given.
    ForwardTensors forward(nn::Tape* tape, std::span<const Vec3> points);

    /// Geometry branch only ([B x 1] SDF tensor); used by the eikonal probes.
    nn::Tensor forward_sdf(nn::Tape* tape, std::span<const Vec3> points);

    /// Inference with frozen parameters (no tape). Shares its row kernels with
    /// the training path, so outputs agree bitwise.
    FieldOutput evaluate_one(const Vec3& p) const;
    void evaluate_batch(std::span<const Vec3> points, FieldOutput* out) const;
    void evaluate_batch_serial(std::span<const Vec3> points, FieldOutput* out) const;

    /// Geometry-only fast path (skips the material branch).
    float sdf_at(const Vec3& p) const;

    Box3 bounds() const { return grid.bounds; }

    struct NamedParam {
        std::string name;
        nn::Tensor tensor;
        bool lazy_rows = false;  // hash tables: sparse optimizer updates
        int row_width = 0;
        bool decay = true;  // participates in weight decay
    };
    /// Canonical parameter order: grid tables, SDF MLP, material MLP.
    std::vector<NamedParam> named_parameters();

    void register_with(nn::AdamOptimizer& opt, float weight_decay);
};

/// argmax class (ties toward the lowest index) and softmax probabilities.
std::pair<int, std::array<float, 4>> predict_material(const DualBranchField& field,
                                                      const Vec3& p);

/// Mean truncated L1 against oracle targets, scaled by sdf_weight.
nn::Tensor sdf_loss(nn::Tape* tape, const nn::Tensor& pred_sdf,
                    std::span<const float> target_sdf, const LossWeights& weights);

/// Cross-entropy against (noisy) class labels, scaled by material_weight.
nn::Tensor material_loss(nn::Tape* tape, const nn::Tensor& logits,
                         std::span<const int> labels, const LossWeights& weights);

}  // namespace sfmap
