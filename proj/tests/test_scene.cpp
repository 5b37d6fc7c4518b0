#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sfmap/scene.hpp"
#include "testutil.hpp"

using namespace sfmap;

namespace {

Scene unit_sphere() {
    Scene s;
    s.bounds = {{-1.4, -1.4, -1.4}, {1.4, 1.4, 1.4}};
    Primitive p;
    p.shape = Primitive::Shape::kSphere;
    p.radius = 1.0;
    s.primitives.push_back(p);
    s.validate();
    return s;
}

}  // namespace

TEST_CASE("sphere sdf: center, outside, surface") {
    Scene s = unit_sphere();
    CHECK(s.sdf({0, 0, 0}) == doctest::Approx(-1.0));
    CHECK(s.sdf({2, 0, 0}) == doctest::Approx(1.0));
    CHECK(s.sdf({0, 1, 0}) == doctest::Approx(0.0));
}

TEST_CASE("box sdf: outside corner distance is sqrt(2)") {
    Scene s;
    s.bounds = {{-2.5, -2.5, -2.5}, {2.5, 2.5, 2.5}};
    Primitive p;
    p.shape = Primitive::Shape::kBox;
    p.half_extents = {1, 1, 1};
    s.primitives.push_back(p);
    s.validate();
    CHECK(s.sdf({2, 2, 0}) == doctest::Approx(std::sqrt(2.0)));
    CHECK(s.sdf({0, 0, 0}) == doctest::Approx(-1.0));
    CHECK(s.sdf({1.5, 0, 0}) == doctest::Approx(0.5));
}

TEST_CASE("cylinder sdf basics") {
    Scene s;
    s.bounds = {{-0.1, -0.1, -0.1}, {0.1, 0.1, 0.1}};
    Primitive p;
    p.shape = Primitive::Shape::kCylinder;
    p.radius = 0.04;
    p.half_height = 0.06;
    s.primitives.push_back(p);
    s.validate();
    CHECK(s.sdf({0, 0, 0}) == doctest::Approx(-0.04));
    CHECK(s.sdf({0.05, 0, 0}) == doctest::Approx(0.01));
    CHECK(s.sdf({0, 0, 0.07}) == doctest::Approx(0.01));
    CHECK(s.sdf({0.04, 0, 0.03}) == doctest::Approx(0.0));
}

TEST_CASE("rotated primitive keeps its sdf in the local frame") {
    // 90 degree rotation about z maps local +x to world +y
    Scene s;
    s.bounds = {{-2.5, -2.5, -2.5}, {2.5, 2.5, 2.5}};
    Primitive p;
    p.shape = Primitive::Shape::kBox;
    p.half_extents = {1.0, 0.25, 0.25};
    double c = std::cos(M_PI / 4), sn = std::sin(M_PI / 4);
    p.rotation = {c, 0, 0, sn};
    s.primitives.push_back(p);
    s.validate();
    CHECK(s.sdf({0, 0.99, 0}) < 0.0);   // inside along world y
    CHECK(s.sdf({0.99, 0, 0}) > 0.0);   // outside along world x
}

TEST_CASE("union takes the minimum") {
    Scene s;
    s.bounds = {{-4, -4, -4}, {4, 4, 4}};
    Primitive a;
    a.shape = Primitive::Shape::kSphere;
    a.radius = 1.0;
    a.center = {-1.5, 0, 0};
    Primitive b = a;
    b.center = {1.5, 0, 0};
    s.primitives = {a, b};
    s.validate();
    CHECK(s.sdf({-1.5, 0, 0}) == doctest::Approx(-1.0));
    CHECK(s.sdf({1.5, 0, 0}) == doctest::Approx(-1.0));
    CHECK(s.sdf({0, 0, 0}) == doctest::Approx(0.5));
}

TEST_CASE("true_material: hemisphere region, default, ties, contract") {
    Scene s = testutil::hemisphere_scene();
    CHECK(s.true_material({0, 0, 0.05}) == kFabric);
    CHECK(s.true_material({0, 0, -0.05}) == kPlastic);

    // boundary point lies in the first-listed region (z >= 0 half-space)
    CHECK(s.true_material({0.05, 0, 0}) == kFabric);

    // a second overlapping region does not override the first
    RegionPredicate all;
    all.type = RegionPredicate::Type::kHalfSpace;
    all.normal = {0, 0, 1};
    all.offset = -1.0;
    s.regions.push_back({all, kWood});
    CHECK(s.true_material({0, 0, 0.05}) == kFabric);

    CHECK_THROWS_AS(s.true_material({0, 0, 0.2}), ContractError);
}

TEST_CASE("angular sector membership and height band") {
    RegionPredicate sector;
    sector.type = RegionPredicate::Type::kAngularSector;
    sector.center = {0, 0, 0};
    sector.axis = {0, 0, 1};
    sector.start_deg = 0;
    sector.sweep_deg = 90;
    CHECK(sector.contains({1, 0.1, 0.3}));
    CHECK(sector.contains({0.1, 1, -0.2}));
    CHECK_FALSE(sector.contains({-1, 0.1, 0}));
    CHECK_FALSE(sector.contains({0.1, -1, 0}));

    // wrap-around sector
    sector.start_deg = 315;
    sector.sweep_deg = 90;
    CHECK(sector.contains({1, 0.01, 0}));
    CHECK(sector.contains({1, -0.5, 0}));
    CHECK_FALSE(sector.contains({0, 1, 0}));

    RegionPredicate band;
    band.type = RegionPredicate::Type::kHeightBand;
    band.axis = {0, 0, 1};
    band.min_h = -0.02;
    band.max_h = 0.05;
    CHECK(band.contains({9, 9, 0.0}));
    CHECK(band.contains({0, 0, 0.05}));
    CHECK_FALSE(band.contains({0, 0, 0.06}));
}

TEST_CASE("sample_surface: residency, determinism, hemisphere class balance") {
    Scene s = testutil::hemisphere_scene();
    auto samples = sample_surface(s, 10000, 99);
    REQUIRE(int(samples.size()) == 10000);

    for (size_t i = 0; i < samples.size(); i += 97) {
        const auto& g = samples[i];
        CHECK(std::abs(g.point.norm() - 0.05) < 1e-4);
        CHECK(std::abs(s.sdf(g.point)) < 1e-4);
        CHECK(g.normal.norm() == doctest::Approx(1.0).epsilon(1e-5));
    }

    // byte-identical across runs with the same seed
    auto again = sample_surface(s, 10000, 99);
    bool identical = true;
    for (size_t i = 0; i < samples.size(); ++i) {
        identical = identical && samples[i].point.x == again[i].point.x &&
                    samples[i].point.y == again[i].point.y &&
                    samples[i].point.z == again[i].point.z &&
                    samples[i].true_class == again[i].true_class;
    }
    CHECK(identical);

    // hemisphere area ratio: fabric fraction 0.5 within 0.02
    int fabric = 0;
    for (const auto& g : samples) fabric += g.true_class == kFabric;
    CHECK(std::abs(double(fabric) / 10000.0 - 0.5) < 0.02);

    CHECK_THROWS_AS(sample_surface(s, 0, 1), ContractError);
}

TEST_CASE("sdf gradient has unit norm away from seams") {
    Scene s = testutil::hemisphere_scene();
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        Vec3 p{rng.uniform(-0.06, 0.06), rng.uniform(-0.06, 0.06),
               rng.uniform(-0.06, 0.06)};
        if (p.norm() < 0.01) continue;  // gradient is singular at the center
        CHECK(s.sdf_gradient(p).norm() == doctest::Approx(1.0).epsilon(0.05));
    }
}

TEST_CASE("scene json round-trip preserves semantics") {
    Scene s = testutil::hemisphere_scene();
    s.name = "roundtrip";
    RegionPredicate roi;
    roi.type = RegionPredicate::Type::kHeightBand;
    roi.axis = {0, 0, 1};
    roi.min_h = -0.04;
    roi.max_h = 0.04;
    s.roi.push_back(roi);

    std::string text = s.to_json_text();
    Scene back = Scene::from_json_text(text);
    CHECK(back.to_json_text() == text);

    Rng rng(6);
    for (int i = 0; i < 200; ++i) {
        Vec3 p{rng.uniform(-0.07, 0.07), rng.uniform(-0.07, 0.07),
               rng.uniform(-0.07, 0.07)};
        CHECK(back.sdf(p) == s.sdf(p));
        CHECK(back.in_roi(p) == s.in_roi(p));
    }
}

TEST_CASE("scene file io and validation errors") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "sfmap_scene_test";
    fs::create_directories(dir);
    Scene s = testutil::hemisphere_scene();
    std::string path = (dir / "scene.json").string();
    s.save(path);
    Scene loaded = Scene::load(path);
    CHECK(loaded.primitives.size() == 1);

    CHECK_THROWS_AS(Scene::load((dir / "missing.json").string()), IoError);
    CHECK_THROWS_WITH_AS(Scene::from_json_text("{\"bounds\": {\"min\": [0,0,0], \"max\": [1,1,1]}, \"primitives\": [], \"wat\": 1}"),
                         doctest::Contains("unknown config key: wat"), ConfigError);

    // missing margin
    CHECK_THROWS_WITH_AS(
        Scene::from_json_text(
            "{\"bounds\": {\"min\": [-1,-1,-1], \"max\": [1,1,1]}, \"primitives\": "
            "[{\"shape\": \"sphere\", \"center\": [0,0,0], \"radius\": 1.0}]}"),
        doctest::Contains("margin"), ConfigError);
}

TEST_CASE("sampling an unreachable region hits the retry cap") {
    Scene s = testutil::hemisphere_scene();
    RegionPredicate nowhere;
    nowhere.type = RegionPredicate::Type::kHeightBand;
    nowhere.axis = {0, 0, 1};
    nowhere.min_h = 10.0;  // far above the object
    nowhere.max_h = 11.0;
    s.roi.push_back(nowhere);
    CHECK_THROWS_AS(sample_surface(s, 10, 1, /*roi_only=*/true), RunError);
}

TEST_CASE("projection converges from random points") {
    Scene s = unit_sphere();
    Rng rng(7);
    int ok = 0;
    for (int i = 0; i < 50; ++i) {
        Vec3 p{rng.uniform(-1.3, 1.3), rng.uniform(-1.3, 1.3), rng.uniform(-1.3, 1.3)};
        if (project_to_surface(s, p)) {
            ++ok;
            CHECK(std::abs(s.sdf(p)) < 1e-5);
        }
    }
    CHECK(ok > 45);
}
