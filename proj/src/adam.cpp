#include "sfmap/adam.hpp"

#include <algorithm>
#include <cmath>

namespace sfmap::nn {

void AdamOptimizer::add_param(Tensor p, float weight_decay_override, bool lazy_rows,
                              int row_width) {
    Slot s;
    s.param = p;
    s.m.assign(size_t(p.size()), 0.0f);
    s.v.assign(size_t(p.size()), 0.0f);
    s.wd = weight_decay_override < 0.0f ? params_.weight_decay : weight_decay_override;
    s.lazy = lazy_rows;
    s.width = row_width;
    if (lazy_rows && row_width <= 0)
        throw ContractError("adam: lazy_rows requires a positive row_width");
    slots_.push_back(std::move(s));
}

void AdamOptimizer::apply_element(Slot& s, size_t i, float lr, float bc1, float bc2) {
    std::vector<float>& g = s.param.data()->grad;
    float gi = g[i];
    s.m[i] = params_.beta1 * s.m[i] + (1.0f - params_.beta1) * gi;
    s.v[i] = params_.beta2 * s.v[i] + (1.0f - params_.beta2) * gi * gi;
    float mhat = s.m[i] / bc1;
    float vhat = s.v[i] / bc2;
    float p = s.param.values()[i];
    s.param.values()[i] = p - lr * (mhat / (std::sqrt(vhat) + params_.epsilon) + s.wd * p);
}

void AdamOptimizer::step() {
    ++step_count_;
    const double t = double(step_count_);
    const float bc1 = float(1.0 - std::pow(double(params_.beta1), t));
    const float bc2 = float(1.0 - std::pow(double(params_.beta2), t));
    const float lr = params_.learning_rate;

    for (Slot& s : slots_) {
        TensorData* d = s.param.data();
        if (d->grad.empty())
            throw ContractError("adam_step: parameter missing gradient");
        if (s.lazy) {
            std::vector<uint32_t>& rows = d->touched_rows;
            std::sort(rows.begin(), rows.end());
            rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
            for (uint32_t row : rows) {
                size_t base = size_t(row) * size_t(s.width);
                for (int j = 0; j < s.width; ++j) apply_element(s, base + size_t(j), lr, bc1, bc2);
                for (int j = 0; j < s.width; ++j) d->grad[base + size_t(j)] = 0.0f;
            }
            rows.clear();
        } else {
            for (size_t i = 0; i < d->values.size(); ++i) apply_element(s, i, lr, bc1, bc2);
            std::fill(d->grad.begin(), d->grad.end(), 0.0f);
        }
    }
}

}  // namespace sfmap::nn
