#include "sfmap/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sfmap::nn {

namespace {

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw DimensionError("tensor: negative dimension");
        n *= d;
    }
    return n;
}

bool any_requires_grad(std::initializer_list<const Tensor*> ts) {
    for (const Tensor* t : ts)
        if (t->requires_grad()) return true;
    return false;
}

Tensor make_output(std::vector<int> shape, std::vector<float> values, bool track) {
    Tensor out = Tensor::from(std::move(shape), std::move(values), track);
    if (track) out.data()->is_leaf = false;
    return out;
}

// Batch/cols view of a [B] or [BxC] tensor.
void matrix_view(const Tensor& t, const char* op, int& rows, int& cols) {
    if (t.ndim() == 1) {
        rows = t.dim(0);
        cols = 1;
    } else if (t.ndim() == 2) {
        rows = t.dim(0);
        cols = t.dim(1);
    } else {
        std::ostringstream ss;
        ss << op << ": expected 1- or 2-d tensor, got " << t.ndim() << "-d";
        throw DimensionError(ss.str());
    }
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    int64_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<float>(size_t(n), 0.0f), requires_grad);
}

Tensor Tensor::from(std::vector<int> shape, std::vector<float> values,
                    bool requires_grad) {
    if (shape_numel(shape) != int64_t(values.size()))
        throw DimensionError("tensor: shape does not match value count");
    Tensor t;
    t.data_ = std::make_shared<TensorData>();
    t.data_->shape = std::move(shape);
    t.data_->values = std::move(values);
    t.data_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::scalar(float v) { return from({1}, {v}); }

std::vector<float>& Tensor::grad() {
    if (data_->grad.empty()) data_->grad.assign(data_->values.size(), 0.0f);
    return data_->grad;
}

void Tensor::zero_grad() {
    if (!data_->grad.empty()) std::fill(data_->grad.begin(), data_->grad.end(), 0.0f);
}

float Tensor::item() const {
    if (size() != 1) throw ContractError("tensor: item() on non-scalar tensor");
    return data_->values[0];
}

void Tape::record(std::function<void()> backward_fn, const Tensor& output) {
    nodes_.push_back({std::move(backward_fn), output.storage()});
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw ContractError("backward: loss must be a scalar tensor");
    // Reset intermediate gradients so each call contributes exactly one pass.
    for (Node& n : nodes_) n.out->grad.assign(n.out->values.size(), 0.0f);
    Tensor l = loss;
    l.grad()[0] = 1.0f;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->fn();
}

void Tape::clear() { nodes_.clear(); }

Tensor linear_forward(Tape* tape, const Tensor& input, const Tensor& weight,
                      const Tensor& bias) {
    if (input.ndim() != 2)
        throw DimensionError("linear_forward: input must be 2-d [batch x in]");
    if (weight.ndim() != 2)
        throw DimensionError("linear_forward: weight must be 2-d [in x out]");
    if (bias.ndim() != 1)
        throw DimensionError("linear_forward: bias must be 1-d [out]");
    const int B = input.dim(0), I = input.dim(1);
    const int WI = weight.dim(0), O = weight.dim(1);
    if (I != WI) {
        std::ostringstream ss;
        ss << "linear_forward: input has " << I << " columns but weight has " << WI
           << " rows";
        throw DimensionError(ss.str());
    }
    if (bias.dim(0) != O) {
        std::ostringstream ss;
        ss << "linear_forward: bias has " << bias.dim(0) << " elements but weight has "
           << O << " output columns";
        throw DimensionError(ss.str());
    }

    std::vector<float> out(size_t(B) * size_t(O));
    const float* in = input.values().data();
    const float* w = weight.values().data();
    const float* b = bias.values().data();
    for (int r = 0; r < B; ++r)
        linear_row(in + size_t(r) * size_t(I), w, b, I, O, out.data() + size_t(r) * size_t(O));

    bool track = tape && any_requires_grad({&input, &weight, &bias});
    Tensor result = make_output({B, O}, std::move(out), track);
    if (track) {
        Tensor in_t = input, w_t = weight, b_t = bias, out_t = result;
        tape->record(
            [in_t, w_t, b_t, out_t, B, I, O]() mutable {
                const std::vector<float>& gout = out_t.data()->grad;
                if (gout.empty()) return;
                const float* gv = gout.data();
                if (in_t.requires_grad()) {
                    float* gin = in_t.grad().data();
                    const float* w = w_t.values().data();
                    for (int r = 0; r < B; ++r)
                        for (int i = 0; i < I; ++i) {
                            float acc = 0.0f;
                            const float* wrow = w + size_t(i) * size_t(O);
                            const float* grow = gv + size_t(r) * size_t(O);
                            for (int o = 0; o < O; ++o) acc += grow[o] * wrow[o];
                            gin[size_t(r) * size_t(I) + size_t(i)] += acc;
                        }
                }
                if (w_t.requires_grad()) {
                    float* gw = w_t.grad().data();
                    const float* in = in_t.values().data();
                    for (int r = 0; r < B; ++r) {
                        const float* irow = in + size_t(r) * size_t(I);
                        const float* grow = gv + size_t(r) * size_t(O);
                        for (int i = 0; i < I; ++i) {
                            float vi = irow[i];
                            float* gwrow = gw + size_t(i) * size_t(O);
                            for (int o = 0; o < O; ++o) gwrow[o] += vi * grow[o];
                        }
                    }
                }
                if (b_t.requires_grad()) {
                    float* gb = b_t.grad().data();
                    for (int r = 0; r < B; ++r) {
                        const float* grow = gv + size_t(r) * size_t(O);
                        for (int o = 0; o < O; ++o) gb[o] += grow[o];
                    }
                }
            },
            result);
    }
    return result;
}

Tensor relu(Tape* tape, const Tensor& input) {
    std::vector<float> out(input.values().size());
    const std::vector<float>& v = input.values();
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0f ? v[i] : 0.0f;

    bool track = tape && input.requires_grad();
    Tensor result = make_output(input.shape(), std::move(out), track);
    if (track) {
        Tensor in_t = input, out_t = result;
        tape->record(
            [in_t, out_t]() mutable {
                const std::vector<float>& gout = out_t.data()->grad;
                if (gout.empty()) return;
                float* gin = in_t.grad().data();
                const std::vector<float>& v = in_t.values();
                for (size_t i = 0; i < v.size(); ++i)
                    if (v[i] > 0.0f) gin[i] += gout[i];
            },
            result);
    }
    return result;
}

Tensor concat_cols(Tape* tape, const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        throw DimensionError("concat_cols: inputs must be 2-d");
    if (a.dim(0) != b.dim(0)) {
        std::ostringstream ss;
        ss << "concat_cols: batch sizes differ (" << a.dim(0) << " vs " << b.dim(0)
           << ")";
        throw DimensionError(ss.str());
    }
    const int B = a.dim(0), Na = a.dim(1), Nb = b.dim(1);
    std::vector<float> out(size_t(B) * size_t(Na + Nb));
    for (int r = 0; r < B; ++r) {
        std::copy_n(a.values().data() + size_t(r) * Na, Na,
                    out.data() + size_t(r) * (Na + Nb));
        std::copy_n(b.values().data() + size_t(r) * Nb, Nb,
                    out.data() + size_t(r) * (Na + Nb) + Na);
    }

    bool track = tape && any_requires_grad({&a, &b});
    Tensor result = make_output({B, Na + Nb}, std::move(out), track);
    if (track) {
        Tensor a_t = a, b_t = b, out_t = result;
        tape->record(
            [a_t, b_t, out_t, B, Na, Nb]() mutable {
                const std::vector<float>& gout = out_t.data()->grad;
                if (gout.empty()) return;
                if (a_t.requires_grad()) {
                    float* ga = a_t.grad().data();
                    for (int r = 0; r < B; ++r)
                        for (int i = 0; i < Na; ++i)
                            ga[size_t(r) * Na + i] += gout[size_t(r) * (Na + Nb) + i];
                }
                if (b_t.requires_grad()) {
                    float* gb = b_t.grad().data();
                    for (int r = 0; r < B; ++r)
                        for (int i = 0; i < Nb; ++i)
                            gb[size_t(r) * Nb + i] +=
                                gout[size_t(r) * (Na + Nb) + Na + i];
                }
            },
            result);
    }
    return result;
}

Tensor select_rows(Tape* tape, const Tensor& x, std::span<const int> rows) {
    if (x.ndim() != 2) throw DimensionError("select_rows: input must be 2-d");
    const int B = x.dim(0), C = x.dim(1);
    for (int r : rows)
        if (r < 0 || r >= B) {
            std::ostringstream ss;
            ss << "select_rows: row " << r << " outside [0, " << B << ")";
            throw IndexError(ss.str());
        }
    const int K = int(rows.size());
    std::vector<float> out(size_t(K) * size_t(C));
    for (int k = 0; k < K; ++k)
        std::copy_n(x.values().data() + size_t(rows[size_t(k)]) * size_t(C), C,
                    out.data() + size_t(k) * size_t(C));

    bool track = tape && x.requires_grad();
    Tensor result = make_output({K, C}, std::move(out), track);
    if (track) {
        Tensor x_t = x, out_t = result;
        std::vector<int> rs(rows.begin(), rows.end());
        tape->record(
            [x_t, out_t, rs, C]() mutable {
                const std::vector<float>& gout = out_t.data()->grad;
                if (gout.empty()) return;
                float* gx = x_t.grad().data();
                for (size_t k = 0; k < rs.size(); ++k)
                    for (int c = 0; c < C; ++c)
                        gx[size_t(rs[k]) * size_t(C) + size_t(c)] +=
                            gout[k * size_t(C) + size_t(c)];
            },
            result);
    }
    return result;
}

std::vector<float> softmax(std::span<const float> logits) {
    double mx = -INFINITY;
    for (float v : logits) mx = std::max(mx, double(v));
    double denom = 0.0;
    std::vector<double> e(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        e[i] = std::exp(double(logits[i]) - mx);
        denom += e[i];
    }
    std::vector<float> p(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) p[i] = float(e[i] / denom);
    return p;
}

Tensor softmax_cross_entropy(Tape* tape, const Tensor& logits,
                             std::span<const int> targets) {
    if (logits.ndim() != 2)
        throw DimensionError("softmax_cross_entropy: logits must be 2-d [batch x classes]");
    const int B = logits.dim(0), C = logits.dim(1);
    if (int(targets.size()) != B) {
        std::ostringstream ss;
        ss << "softmax_cross_entropy: " << targets.size() << " targets for batch of "
           << B;
        throw DimensionError(ss.str());
    }
    for (int t : targets)
        if (t < 0 || t >= C) {
            std::ostringstream ss;
            ss << "softmax_cross_entropy: target " << t << " outside class range [0, "
               << C << ")";
            throw IndexError(ss.str());
        }

    // Stable log-sum-exp per row; probabilities saved for backward.
    std::vector<float> probs(size_t(B) * size_t(C));
    double loss_acc = 0.0;
    const float* lv = logits.values().data();
    for (int r = 0; r < B; ++r) {
        const float* row = lv + size_t(r) * size_t(C);
        double mx = row[0];
        for (int c = 1; c < C; ++c) mx = std::max(mx, double(row[c]));
        double denom = 0.0;
        for (int c = 0; c < C; ++c) denom += std::exp(double(row[c]) - mx);
        double log_denom = std::log(denom);
        loss_acc += log_denom - (double(row[targets[size_t(r)]]) - mx);
        for (int c = 0; c < C; ++c)
            probs[size_t(r) * C + c] = float(std::exp(double(row[c]) - mx) / denom);
    }
    float loss = float(loss_acc / double(B));

    bool track = tape && logits.requires_grad();
    Tensor result = make_output({1}, {loss}, track);
    if (track) {
        Tensor logits_t = logits, out_t = result;
        std::vector<int> tgt(targets.begin(), targets.end());
        tape->record(
            [logits_t, out_t, probs = std::move(probs), tgt, B, C]() mutable {
                const std::vector<float>& gout = out_t.data()->grad;
                if (gout.empty()) return;
                float g = gout[0] / float(B);
                float* gl = logits_t.grad().data();
                for (int r = 0; r < B; ++r)
                    for (int c = 0; c < C; ++c) {
                        float p = probs[size_t(r) * C + c];
                        float onehot = (c == tgt[size_t(r)]) ? 1.0f : 0.0f;
                        gl[size_t(r) * C + c] += (p - onehot) * g;
                    }
            },
            result);
    }
    return result;
}

Tensor l1_truncated(Tape* tape, const Tensor& pred, std::span<const float> target,
                    float truncation) {
    int B = 0, cols = 0;
    matrix_view(pred, "l1_truncated", B, cols);
    if (cols != 1)
        throw DimensionError("l1_truncated: pred must be [B] or [Bx1]");
    if (int(target.size()) != B) {
        std::ostringstream ss;
        ss << "l1_truncated: " << target.size() << " targets for batch of " << B;
        throw DimensionError(ss.str());
    }
    if (!(truncation > 0.0f))
        throw ContractError("l1_truncated: truncation must be positive");

    auto clampt = [truncation](float v) {
        return v < -truncation ? -truncation : (v > truncation ? truncation : v);
    };
    const float* pv = pred.values().data();
    double acc = 0.0;
    for (int r = 0; r < B; ++r) acc += std::abs(double(clampt(pv[r]) - clampt(target[size_t(r)])));
    float loss = float(acc / double(B));

    bool track = tape && pred.requires_grad();
    Tensor result = make_output({1}, {loss}, track);
    if (track) {
        Tensor pred_t = pred, out_t = result;
        std::vector<float> tgt(target.begin(), target.end());
        tape->record(
            [pred_t, out_t, tgt, truncation, clampt, B]() mutable {
                const std::vector<float>& gout = out_t.data()->grad;
                if (gout.empty()) return;
                float g = gout[0] / float(B);
                float* gp = pred_t.grad().data();
                const float* pv = pred_t.values().data();
                for (int r = 0; r < B; ++r) {
                    if (std::abs(pv[r]) >= truncation) continue;  // clamp kills grad
                    float d = clampt(pv[r]) - clampt(tgt[size_t(r)]);
                    if (d > 0.0f)
                        gp[r] += g;
                    else if (d < 0.0f)
                        gp[r] -= g;
                }
            },
            result);
    }
    return result;
}

Tensor weighted_sum(Tape* tape, std::span<const Tensor> terms,
                    std::span<const float> weights) {
    if (terms.size() != weights.size())
        throw DimensionError("weighted_sum: terms and weights differ in length");
    double acc = 0.0;
    bool track = false;
    for (size_t i = 0; i < terms.size(); ++i) {
        if (terms[i].size() != 1)
            throw ContractError("weighted_sum: all terms must be scalar");
        acc += double(weights[i]) * double(terms[i].item());
        track = track || terms[i].requires_grad();
    }
    track = track && tape;
    Tensor result = make_output({1}, {float(acc)}, track);
    if (track) {
        std::vector<Tensor> ts(terms.begin(), terms.end());
        std::vector<float> ws(weights.begin(), weights.end());
        Tensor out_t = result;
        tape->record(
            [ts, ws, out_t]() mutable {
                const std::vector<float>& gout = out_t.data()->grad;
                if (gout.empty()) return;
                for (size_t i = 0; i < ts.size(); ++i)
                    if (ts[i].requires_grad()) ts[i].grad()[0] += ws[i] * gout[0];
            },
            result);
    }
    return result;
}

Tensor eikonal_residual(Tape* tape, const std::array<Tensor, 3>& plus,
                        const std::array<Tensor, 3>& minus, float step) {
    if (!(step > 0.0f)) throw ContractError("eikonal_residual: step must be positive");
    int B = 0, cols = 0;
    matrix_view(plus[0], "eikonal_residual", B, cols);
    for (const auto& t : plus)
        if (t.size() != B) throw DimensionError("eikonal_residual: probe size mismatch");
    for (const auto& t : minus)
        if (t.size() != B) throw DimensionError("eikonal_residual: probe size mismatch");

    const float inv2h = 1.0f / (2.0f * step);
    constexpr float kEps = 1e-12f;
    std::vector<float> gvec(size_t(B) * 3);
    std::vector<float> nrm(static_cast<size_t>(B));
    double acc = 0.0;
    for (int r = 0; r < B; ++r) {
        float g2 = kEps;
        for (int i = 0; i < 3; ++i) {
            float gi = (plus[size_t(i)].values()[size_t(r)] -
                        minus[size_t(i)].values()[size_t(r)]) *
                       inv2h;
            gvec[size_t(r) * 3 + size_t(i)] = gi;
            g2 += gi * gi;
        }
        float n = std::sqrt(g2);
        nrm[size_t(r)] = n;
        double res = double(n) - 1.0;
        acc += res * res;
    }
    float loss = float(acc / double(B));

    bool any = false;
    for (int i = 0; i < 3; ++i)
        any = any || plus[size_t(i)].requires_grad() || minus[size_t(i)].requires_grad();
    bool track = tape && any;

    Tensor result = make_output({1}, {loss}, track);
    if (track) {
        std::array<Tensor, 3> p = plus, m = minus;
        Tensor out_t = result;
        tape->record(
            [p, m, out_t, gvec = std::move(gvec), nrm = std::move(nrm), inv2h,
             B]() mutable {
                const std::vector<float>& gout = out_t.data()->grad;
                if (gout.empty()) return;
                float gup = gout[0];
                for (int r = 0; r < B; ++r) {
                    float n = nrm[size_t(r)];
                    float coef = gup * 2.0f * (n - 1.0f) / (n * float(B));
                    for (int i = 0; i < 3; ++i) {
                        float d = coef * gvec[size_t(r) * 3 + size_t(i)] * inv2h;
                        if (p[size_t(i)].requires_grad()) p[size_t(i)].grad()[size_t(r)] += d;
                        if (m[size_t(i)].requires_grad()) m[size_t(i)].grad()[size_t(r)] -= d;
                    }
                }
            },
            result);
    }
    return result;
}

void check_finite(const Tensor& t, const char* what) {
    for (float v : t.values())
        if (!std::isfinite(v)) {
            std::ostringstream ss;
            ss << what << ": non-finite value in tensor";
            throw ContractError(ss.str());
        }
    for (float v : t.grad())
        if (!std::isfinite(v)) {
            std::ostringstream ss;
            ss << what << ": non-finite gradient in tensor";
            throw ContractError(ss.str());
        }
}

}  // namespace sfmap::nn
