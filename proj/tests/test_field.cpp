#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sfmap/field.hpp"
#include "testutil.hpp"

using namespace sfmap;

namespace {

FieldConfig test_config(int levels = 6, int log2_size = 12) {
    FieldConfig cfg;
    cfg.grid.levels = levels;
    cfg.grid.log2_hashmap_size = log2_size;
    return cfg;
}

Box3 unit_bounds() { return {{-1, -1, -1}, {1, 1, 1}}; }

std::vector<Vec3> random_points(Rng& rng, int n, double lo = -0.9, double hi = 0.9) {
    std::vector<Vec3> pts;
    for (int i = 0; i < n; ++i)
        pts.push_back({rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)});
    return pts;
}

// Scale up parameters so gradcheck magnitudes are healthy.
void randomize_field(DualBranchField& f, Rng& rng) {
    for (auto& p : f.named_parameters())
        for (float& v : p.tensor.values()) v = rng.uniform_f(-0.4f, 0.4f);
}

}  // namespace

TEST_CASE("shape contract: B inputs give B ordered outputs of (1, 4, 64)") {
    Rng rng(1);
    DualBranchField field = DualBranchField::create(test_config(), unit_bounds(), rng);
    std::vector<Vec3> pts = random_points(rng, 7);
    auto fw = field.forward(nullptr, pts);
    CHECK(fw.sdf.shape() == std::vector<int>{7, 1});
    CHECK(fw.logits.shape() == std::vector<int>{7, 4});
    CHECK(fw.feature.shape() == std::vector<int>{7, 64});

    // order-preserving: evaluating one point matches its batch row
    for (int i : {0, 3, 6}) {
        FieldOutput one = field.evaluate_one(pts[size_t(i)]);
        CHECK(one.sdf == fw.sdf.values()[size_t(i)]);
        for (int c = 0; c < 4; ++c)
            CHECK(one.logits[size_t(c)] == fw.logits.values()[size_t(i) * 4 + size_t(c)]);
        for (int k = 0; k < 64; ++k)
            CHECK(one.feature[size_t(k)] ==
                  fw.feature.values()[size_t(i) * 64 + size_t(k)]);
    }
}

TEST_CASE("seeded init: small sdf and near-uniform material probabilities") {
    Rng rng(42);
    DualBranchField field = DualBranchField::create(test_config(), unit_bounds(), rng);
    Rng prng(7);
    std::vector<Vec3> pts = random_points(prng, 200);
    for (const Vec3& p : pts) {
        FieldOutput out = field.evaluate_one(p);
        CHECK(std::abs(out.sdf) < 0.01);
        auto [cls, probs] = predict_material(field, p);
        float mx = 0;
        for (int c = 0; c < 4; ++c) mx = std::max(mx, probs[size_t(c)]);
        CHECK(mx < 0.35f);
    }
}

TEST_CASE("material input widths: 80 with SH+concat, 67 raw, 16 without concat") {
    FieldConfig sh_concat = test_config();
    CHECK(sh_concat.material_input_dim() == 80);

    FieldConfig raw = test_config();
    raw.material_input = MaterialInput::kRawPoint;
    CHECK(raw.material_input_dim() == 67);  // 3 + 64

    FieldConfig no_concat = test_config();
    no_concat.use_feature_concat = false;
    CHECK(no_concat.material_input_dim() == 16);

    Rng rng(2);
    DualBranchField fraw = DualBranchField::create(raw, unit_bounds(), rng);
    CHECK(fraw.material_mlp.w1.shape() == std::vector<int>{67, 64});
    std::vector<Vec3> pts = random_points(rng, 3);
    auto fw = fraw.forward(nullptr, pts);
    CHECK(fw.logits.shape() == std::vector<int>{3, 4});
}

TEST_CASE("sdf_loss examples") {
    LossWeights w;  // truncation 0.02, sdf_weight 1
    nn::Tensor pred = nn::Tensor::from({2, 1}, {0.01f, -0.003f});
    float same[] = {0.01f, -0.003f};
    CHECK(sdf_loss(nullptr, pred, same, w).item() == 0.0f);

    nn::Tensor zero = nn::Tensor::from({1, 1}, {0.0f});
    float t[] = {0.02f};
    CHECK(sdf_loss(nullptr, zero, t, w).item() == doctest::Approx(0.02f));

    nn::Tensor big = nn::Tensor::from({1, 1}, {1.0f});
    float half[] = {0.5f};
    CHECK(sdf_loss(nullptr, big, half, w).item() == doctest::Approx(0.0f));

    w.sdf_weight = 2.5f;
    CHECK(sdf_loss(nullptr, zero, t, w).item() == doctest::Approx(0.05f));
}

TEST_CASE("material_loss matches a per-row oracle") {
    LossWeights w;
    Rng rng(3);
    nn::Tensor logits = nn::Tensor::from(
        {3, 4}, {0.2f, -1.0f, 0.7f, 0.1f, 2.0f, 1.0f, -0.5f, 0.0f, -2.0f, 3.0f, 0.4f, 0.9f});
    std::vector<int> labels{2, 0, 1};

    double expect = 0.0;
    for (int r = 0; r < 3; ++r) {
        double mx = -1e30, denom = 0.0;
        for (int c = 0; c < 4; ++c) mx = std::max(mx, double(logits.values()[size_t(r) * 4 + size_t(c)]));
        for (int c = 0; c < 4; ++c)
            denom += std::exp(double(logits.values()[size_t(r) * 4 + size_t(c)]) - mx);
        expect += std::log(denom) - (double(logits.values()[size_t(r) * 4 + size_t(labels[size_t(r)])]) - mx);
    }
    expect /= 3.0;
    CHECK(material_loss(nullptr, logits, labels, w).item() ==
          doctest::Approx(expect).epsilon(1e-6));

    // perfect one-hot at extreme logits
    nn::Tensor sure = nn::Tensor::from({1, 4}, {-40.0f, 40.0f, -40.0f, -40.0f});
    std::vector<int> one{1};
    CHECK(material_loss(nullptr, sure, one, w).item() == doctest::Approx(0.0));

    // uniform logits -> ln 4
    nn::Tensor uni = nn::Tensor::from({1, 4}, {0, 0, 0, 0});
    std::vector<int> any{3};
    CHECK(material_loss(nullptr, uni, any, w).item() ==
          doctest::Approx(std::log(4.0)).epsilon(1e-6));

    std::vector<int> bad{4};
    CHECK_THROWS_AS(material_loss(nullptr, uni, bad, w), IndexError);
}

TEST_CASE("predict_material: argmax, ties, and shift invariance") {
    Rng rng(4);
    DualBranchField field = DualBranchField::create(test_config(), unit_bounds(), rng);

    std::vector<float> p5 = nn::softmax(std::vector<float>{5, 0, 0, 0});
    CHECK(p5[0] > 0.98f);

    std::vector<float> eq = nn::softmax(std::vector<float>{1, 1, 1, 1});
    for (float v : eq) CHECK(v == doctest::Approx(0.25f));

    // tie-break toward the lowest class index
    {
        std::array<float, 4> logits{2, 2, 1, 2};
        int best = 0;
        for (int c = 1; c < 4; ++c)
            if (logits[size_t(c)] > logits[size_t(best)]) best = c;
        CHECK(best == 0);
    }

    // adding a constant shifts nothing
    std::vector<float> a = nn::softmax(std::vector<float>{5, 0, 0, 0});
    std::vector<float> b = nn::softmax(std::vector<float>{7, 2, 2, 2});
    for (size_t i = 0; i < 4; ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("zero material weight leaves material branch without gradient") {
    Rng rng(5);
    DualBranchField field = DualBranchField::create(test_config(), unit_bounds(), rng);
    std::vector<Vec3> pts = random_points(rng, 8);
    std::vector<float> targets(8, 0.01f);
    std::vector<int> labels(8, 1);

    LossWeights w;
    w.material_weight = 0.0f;
    nn::Tape tape;
    auto fw = field.forward(&tape, pts);
    nn::Tensor sl = sdf_loss(&tape, fw.sdf, targets, w);
    nn::Tensor ml = material_loss(&tape, fw.logits, labels, w);
    nn::Tensor total = nn::weighted_sum(&tape, std::vector<nn::Tensor>{sl, ml},
                                        std::vector<float>{1, 1});
    tape.backward(total);
    for (float g : field.material_mlp.w1.grad()) CHECK(g == 0.0f);
    for (float g : field.material_mlp.w2.grad()) CHECK(g == 0.0f);
}

TEST_CASE("without concat and zero sdf weight, geometry gets no material gradient") {
    FieldConfig cfg = test_config();
    cfg.use_feature_concat = false;
    Rng rng(6);
    DualBranchField field = DualBranchField::create(cfg, unit_bounds(), rng);
    randomize_field(field, rng);
    std::vector<Vec3> pts = random_points(rng, 8);
    std::vector<int> labels(8, 2);

    LossWeights w;
    w.sdf_weight = 0.0f;
    nn::Tape tape;
    auto fw = field.forward(&tape, pts);
    nn::Tensor ml = material_loss(&tape, fw.logits, labels, w);
    tape.backward(ml);

    for (float g : field.sdf_mlp.w1.grad()) CHECK(g == 0.0f);
    for (float g : field.sdf_mlp.w2.grad()) CHECK(g == 0.0f);
    for (auto& t : field.grid.tables)
        if (t.has_grad())
            for (float g : t.grad()) CHECK(g == 0.0f);
    // the material branch itself does learn
    bool any = false;
    for (float g : field.material_mlp.w1.grad()) any = any || g != 0.0f;
    CHECK(any);
}

TEST_CASE("with concat enabled, material loss reaches the sdf branch through z(x)") {
    Rng rng(7);
    DualBranchField field = DualBranchField::create(test_config(), unit_bounds(), rng);
    randomize_field(field, rng);
    std::vector<Vec3> pts = random_points(rng, 8);
    std::vector<int> labels(8, 3);

    LossWeights w;
    nn::Tape tape;
    auto fw = field.forward(&tape, pts);
    nn::Tensor ml = material_loss(&tape, fw.logits, labels, w);
    tape.backward(ml);

    auto count_nonzero = [](const std::vector<float>& g) {
        int n = 0;
        for (float v : g)
            if (v != 0.0f) ++n;
        return n;
    };
    CHECK(count_nonzero(field.sdf_mlp.w2.grad()) > 0);
    CHECK(count_nonzero(field.sdf_mlp.w1.grad()) > 0);
}

TEST_CASE("end-to-end gradient check on a 10-point batch") {
    Rng seeds(1234);
    for (int trial = 0; trial < 2; ++trial) {
        Rng rng(seeds.next_u64());
        DualBranchField field =
            DualBranchField::create(test_config(4, 10), unit_bounds(), rng);
        randomize_field(field, rng);
        std::vector<Vec3> pts = random_points(rng, 10, -0.8, 0.8);
        std::vector<float> targets(10);
        for (float& t : targets) t = rng.uniform_f(-0.015f, 0.015f);
        std::vector<int> labels(10);
        for (int& l : labels) l = int(rng.below(4));

        LossWeights w;
        auto loss_value = [&]() {
            nn::Tape tape;
            auto fw = field.forward(&tape, pts);
            nn::Tensor sl = sdf_loss(&tape, fw.sdf, targets, w);
            nn::Tensor ml = material_loss(&tape, fw.logits, labels, w);
            return double(nn::weighted_sum(&tape, std::vector<nn::Tensor>{sl, ml},
                                           std::vector<float>{1, 1})
                              .item());
        };
        nn::Tape tape;
        auto fw = field.forward(&tape, pts);
        nn::Tensor sl = sdf_loss(&tape, fw.sdf, targets, w);
        nn::Tensor ml = material_loss(&tape, fw.logits, labels, w);
        nn::Tensor total = nn::weighted_sum(&tape, std::vector<nn::Tensor>{sl, ml},
                                            std::vector<float>{1, 1});
        tape.backward(total);

        for (auto& p : field.named_parameters()) {
            if (!p.tensor.has_grad()) continue;
            auto res = testutil::fd_check_param(loss_value, p.tensor, p.tensor.grad(),
                                                2e-3, 0.3, 25, rng);
            CHECK_MESSAGE(res.max_rel_err < 1e-3, "param ", p.name);
            CHECK(res.checked > 0);
        }
    }
}

TEST_CASE("training path and inference path agree bitwise") {
    Rng rng(8);
    DualBranchField field = DualBranchField::create(test_config(), unit_bounds(), rng);
    randomize_field(field, rng);
    std::vector<Vec3> pts = random_points(rng, 16);
    auto fw = field.forward(nullptr, pts);
    std::vector<FieldOutput> outs(pts.size());
    field.evaluate_batch_serial(pts, outs.data());
    for (size_t i = 0; i < pts.size(); ++i) {
        CHECK(outs[i].sdf == fw.sdf.values()[i]);
        for (int c = 0; c < 4; ++c)
            CHECK(outs[i].logits[size_t(c)] == fw.logits.values()[i * 4 + size_t(c)]);
    }
}

TEST_CASE("degenerate direction propagates from the SH encoding") {
    Rng rng(9);
    DualBranchField field = DualBranchField::create(test_config(), unit_bounds(), rng);
    // the SH center is the bounds center (origin here)
    std::vector<Vec3> pts{{0, 0, 0}};
    CHECK_THROWS_AS(field.forward(nullptr, pts), ContractError);
}

TEST_CASE("non-finite query points are rejected") {
    Rng rng(10);
    DualBranchField field = DualBranchField::create(test_config(), unit_bounds(), rng);
    std::vector<Vec3> pts{{std::nan(""), 0, 0}};
    CHECK_THROWS_AS(field.forward(nullptr, pts), ContractError);
}
