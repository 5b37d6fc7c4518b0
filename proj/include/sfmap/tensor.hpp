#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "sfmap/common.hpp"

namespace sfmap::nn {

// ---------------------------------------------------------------------------
// Dense float tensor with an optional gradient buffer, plus a tape recording
// backward closures. Parameters and activations are float; loss reductions
// accumulate in double.
// ---------------------------------------------------------------------------

struct TensorData {
    std::vector<int> shape;
    std::vector<float> values;
    std::vector<float> grad;  // empty until first touched
    bool requires_grad = false;
    bool is_leaf = true;
    // Rows written by a sparse scatter since the last optimizer step.
    // Only populated for row-major [rows x width] embedding tables.
    std::vector<uint32_t> touched_rows;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor from(std::vector<int> shape, std::vector<float> values,
                       bool requires_grad = false);
    static Tensor scalar(float v);

    bool defined() const { return data_ != nullptr; }
    const std::vector<int>& shape() const { return data_->shape; }
    int dim(int i) const { return data_->shape[size_t(i)]; }
    int ndim() const { return int(data_->shape.size()); }
    int64_t size() const { return int64_t(data_->values.size()); }

    std::vector<float>& values() { return data_->values; }
    const std::vector<float>& values() const { return data_->values; }

    bool requires_grad() const { return data_->requires_grad; }
    void set_requires_grad(bool v) { data_->requires_grad = v; }
    bool is_leaf() const { return data_->is_leaf; }

    /// Gradient buffer, allocated zero-filled on first access.
    std::vector<float>& grad();
    const std::vector<float>& grad() const { return data_->grad; }
    bool has_grad() const { return !data_->grad.empty(); }
    void zero_grad();

    /// Value of a scalar (1-element) tensor.
    float item() const;

    TensorData* data() const { return data_.get(); }
    std::shared_ptr<TensorData> storage() const { return data_; }

private:
    std::shared_ptr<TensorData> data_;
};

/// Records one backward closure per differentiable op, replayed in reverse.
/// Gradients of tensors produced on the tape are reset at the start of each
/// backward() so repeated calls accumulate exactly once per call into leaves.
class Tape {
public:
    void record(std::function<void()> backward_fn, const Tensor& output);
    void backward(const Tensor& loss);
    void clear();
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        std::function<void()> fn;
        std::shared_ptr<TensorData> out;
    };
    std::vector<Node> nodes_;
};

// --- ops (tape == nullptr runs forward only) -------------------------------

/// output[b,o] = sum_i input[b,i] * weight[i,o] + bias[o]
Tensor linear_forward(Tape* tape, const Tensor& input, const Tensor& weight,
                      const Tensor& bias);

Tensor relu(Tape* tape, const Tensor& input);

/// Concatenate along columns: [B x Na], [B x Nb] -> [B x (Na+Nb)].
Tensor concat_cols(Tape* tape, const Tensor& a, const Tensor& b);

/// Gather rows of a [B x C] tensor: out[k] = x[rows[k]]. Backward scatters.
Tensor select_rows(Tape* tape, const Tensor& x, std::span<const int> rows);

/// Mean over the batch of -log softmax(logits)[target], stable log-sum-exp.
Tensor softmax_cross_entropy(Tape* tape, const Tensor& logits,
                             std::span<const int> targets);

/// Mean L1 between pred and target after both are clamped to [-trunc, +trunc].
/// pred is [B] or [Bx1].
Tensor l1_truncated(Tape* tape, const Tensor& pred, std::span<const float> target,
                    float truncation);

/// sum_i weights[i] * terms[i] over scalar tensors.
Tensor weighted_sum(Tape* tape, std::span<const Tensor> terms,
                    std::span<const float> weights);

/// mean_b (|g_b| - 1)^2 where g_b is the central-difference gradient assembled
/// from six [B] / [Bx1] probes: g_i = (plus[i] - minus[i]) / (2*step).
Tensor eikonal_residual(Tape* tape, const std::array<Tensor, 3>& plus,
                        const std::array<Tensor, 3>& minus, float step);

/// Numerically stable softmax of a logit row (double internally).
std::vector<float> softmax(std::span<const float> logits);

/// Throws ContractError if any value (or gradient) is non-finite.
void check_finite(const Tensor& t, const char* what);

// Shared row kernel: out[o] = sum_i in[i]*w[i*O+o] + b[o], float accumulation,
// ascending i. Training ops and the inference path both use this so their
// outputs agree bitwise.
inline void linear_row(const float* in, const float* w, const float* b, int I,
                       int O, float* out) {
    for (int o = 0; o < O; ++o) out[o] = b[o];
    for (int i = 0; i < I; ++i) {
        float vi = in[i];
        const float* wrow = w + size_t(i) * size_t(O);
        for (int o = 0; o < O; ++o) out[o] += vi * wrow[o];
    }
}

}  // namespace sfmap::nn
