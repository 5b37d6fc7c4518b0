#pragma once

#include <cstdint>
#include <vector>

#include "sfmap/tensor.hpp"

namespace sfmap::nn {

struct AdamParams {
    float learning_rate = 3e-4f;
    float weight_decay = 1e-5f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
};

/// Adam with bias correction and decoupled weight decay over a registered
/// parameter set. Gradients are zeroed after each applied step.
///
/// Parameters registered with lazy_rows update only the rows marked touched
/// by the hash-grid scatter since the previous step; untouched rows have zero
/// gradient and zero moments, so with zero weight decay the skipped update is
/// exactly the dense one.
class AdamOptimizer {
public:
    explicit AdamOptimizer(AdamParams params) : params_(params) {}

    /// weight_decay_override < 0 keeps AdamParams::weight_decay.
    void add_param(Tensor p, float weight_decay_override = -1.0f,
                   bool lazy_rows = false, int row_width = 0);

    void step();

    int64_t step_count() const { return step_count_; }
    const AdamParams& params() const { return params_; }
    size_t num_params() const { return slots_.size(); }

    /// Serialization access to the moment arrays, in registration order.
    std::vector<float>& first_moment(size_t slot) { return slots_[slot].m; }
    std::vector<float>& second_moment(size_t slot) { return slots_[slot].v; }
    void set_step_count(int64_t t) { step_count_ = t; }

private:
    struct Slot {
        Tensor param;
        std::vector<float> m, v;
        float wd = 0.0f;
        bool lazy = false;
        int width = 0;
    };
    void apply_element(Slot& s, size_t i, float lr, float bc1, float bc2);

    AdamParams params_;
    std::vector<Slot> slots_;
    int64_t step_count_ = 0;
};

}  // namespace sfmap::nn
