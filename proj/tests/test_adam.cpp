#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sfmap/adam.hpp"

using namespace sfmap;
using namespace sfmap::nn;

TEST_CASE("first step with unit gradient moves by about the learning rate") {
    AdamParams params;
    params.learning_rate = 0.1f;
    params.weight_decay = 0.0f;
    AdamOptimizer opt(params);
    Tensor p = Tensor::from({1}, {1.0f}, true);
    opt.add_param(p);
    p.grad()[0] = 1.0f;
    opt.step();
    // bias-corrected mhat = vhat = 1 at t=1, so the step is lr/(1+eps)
    CHECK(p.values()[0] == doctest::Approx(0.9f).epsilon(1e-5));
    CHECK(opt.step_count() == 1);
    CHECK(p.grad()[0] == 0.0f);  // grads zeroed after the step
}

TEST_CASE("zero gradient and zero weight decay is a no-op") {
    AdamOptimizer opt(AdamParams{0.1f, 0.0f, 0.9f, 0.999f, 1e-8f});
    Tensor p = Tensor::from({3}, {1.5f, -2.25f, 0.125f}, true);
    opt.add_param(p);
    p.grad();  // allocate zeros
    std::vector<float> before = p.values();
    for (int i = 0; i < 5; ++i) opt.step();
    CHECK(p.values() == before);  // bitwise
    CHECK(opt.step_count() == 5);
}

TEST_CASE("decoupled weight decay shrinks by lr*wd*p under zero gradient") {
    const float lr = 0.01f, wd = 1e-5f;
    AdamOptimizer opt(AdamParams{lr, wd, 0.9f, 0.999f, 1e-8f});
    Tensor p = Tensor::from({1}, {2.0f}, true);
    opt.add_param(p);
    p.grad();
    opt.step();
    CHECK(p.values()[0] == doctest::Approx(2.0f - lr * wd * 2.0f).epsilon(1e-9));
}

TEST_CASE("missing gradient is a contract error") {
    AdamOptimizer opt(AdamParams{});
    Tensor p = Tensor::from({2}, {1.0f, 2.0f}, true);
    opt.add_param(p);
    CHECK_THROWS_AS(opt.step(), ContractError);
}

TEST_CASE("step count increases by one per applied step") {
    AdamOptimizer opt(AdamParams{});
    Tensor p = Tensor::from({1}, {1.0f}, true);
    opt.add_param(p);
    for (int i = 1; i <= 7; ++i) {
        p.grad()[0] = 0.5f;
        opt.step();
        CHECK(opt.step_count() == i);
    }
}

TEST_CASE("lazy row updates equal the dense update for touched rows") {
    // identical parameters, one dense and one lazily updated (wd=0)
    std::vector<float> init{0.5f, -0.25f, 1.0f, 0.75f, -1.5f, 0.3f};
    Tensor dense = Tensor::from({3, 2}, init, true);
    Tensor lazy = Tensor::from({3, 2}, init, true);
    AdamOptimizer opt_d(AdamParams{0.01f, 0.0f, 0.9f, 0.999f, 1e-8f});
    AdamOptimizer opt_l(AdamParams{0.01f, 0.0f, 0.9f, 0.999f, 1e-8f});
    opt_d.add_param(dense, 0.0f);
    opt_l.add_param(lazy, 0.0f, /*lazy_rows=*/true, /*row_width=*/2);

    for (int step = 0; step < 4; ++step) {
        // only row 1 gets gradient
        dense.grad()[2] = 0.3f;
        dense.grad()[3] = -0.1f;
        lazy.grad()[2] = 0.3f;
        lazy.grad()[3] = -0.1f;
        lazy.data()->touched_rows.push_back(1);
        lazy.data()->touched_rows.push_back(1);  // duplicates are deduplicated
        opt_d.step();
        opt_l.step();
    }
    for (size_t i = 0; i < init.size(); ++i) CHECK(dense.values()[i] == lazy.values()[i]);
}

TEST_CASE("adam converges on a quadratic") {
    AdamOptimizer opt(AdamParams{0.05f, 0.0f, 0.9f, 0.999f, 1e-8f});
    Tensor p = Tensor::from({1}, {3.0f}, true);
    opt.add_param(p);
    for (int i = 0; i < 400; ++i) {
        p.grad()[0] = 2.0f * (p.values()[0] - 1.25f);
        opt.step();
    }
    CHECK(p.values()[0] == doctest::Approx(1.25f).epsilon(1e-3));
}
