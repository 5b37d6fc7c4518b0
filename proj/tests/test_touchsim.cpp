#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sfmap/touchsim.hpp"
#include "testutil.hpp"

using namespace sfmap;

namespace {

Scene cylinder_scene() {
    Scene s;
    s.bounds = {{-0.05, -0.05, -0.07}, {0.05, 0.05, 0.07}};
    Primitive p;
    p.shape = Primitive::Shape::kCylinder;
    p.radius = 0.04;
    p.half_height = 0.06;
    s.primitives.push_back(p);
    RegionPredicate sector;
    sector.type = RegionPredicate::Type::kAngularSector;
    sector.axis = {0, 0, 1};
    sector.start_deg = 0;
    sector.sweep_deg = 180;
    s.regions.push_back({sector, kFabric});
    s.validate();
    return s;
}

}  // namespace

TEST_CASE("confusion_from_accuracy") {
    ConfusionMatrix id = confusion_from_accuracy({1, 1, 1, 1});
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) CHECK(id[size_t(r)][size_t(c)] == (r == c ? 1.0 : 0.0));

    ConfusionMatrix m = confusion_from_accuracy({0.4, 0.7, 1.0, 0.1});
    CHECK(m[0][0] == doctest::Approx(0.4));
    CHECK(m[0][1] == doctest::Approx(0.2));
    CHECK(m[0][2] == doctest::Approx(0.2));
    CHECK(m[0][3] == doctest::Approx(0.2));

    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        std::array<double, 4> acc{rng.uniform(), rng.uniform(), rng.uniform(),
                                  rng.uniform()};
        ConfusionMatrix c = confusion_from_accuracy(acc);
        for (int r = 0; r < 4; ++r) {
            double sum = 0;
            for (int k = 0; k < 4; ++k) sum += c[size_t(r)][size_t(k)];
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(c[size_t(r)][size_t(r)] == doctest::Approx(acc[size_t(r)]));
        }
    }

    CHECK_THROWS_AS(confusion_from_accuracy({1.2, 0, 0, 0}), ContractError);
    CHECK_THROWS_AS(confusion_from_accuracy({-0.1, 0, 0, 0}), ContractError);
}

TEST_CASE("default profiles carry the measured per-sensor accuracies") {
    auto profiles = default_sensor_profiles();
    CHECK(profiles[int(Finger::kThumb)].per_class_accuracy[kMetal] == doctest::Approx(0.32));
    CHECK(profiles[int(Finger::kRing)].per_class_accuracy[kMetal] == doctest::Approx(0.74));
    CHECK(profiles[int(Finger::kThumb)].per_class_accuracy[kWood] == doctest::Approx(0.23));
    CHECK(profiles[int(Finger::kIndex)].per_class_accuracy[kWood] == doctest::Approx(0.75));
    CHECK(profiles[int(Finger::kRing)].per_class_accuracy[kFabric] == doctest::Approx(0.95));
    CHECK(profiles[int(Finger::kThumb)].per_class_accuracy[kFabric] == doctest::Approx(0.83));
    for (const auto& p : profiles) CHECK_NOTHROW(p.validate());
}

TEST_CASE("identity confusion never corrupts labels") {
    Scene scene = cylinder_scene();
    SimParams params;
    params.steps = 20;
    TouchSimulator sim(scene, identity_sensor_profiles(), params, 11);
    for (int t = 0; t < 20; ++t)
        for (const auto& obs : sim.step(t)) CHECK(obs.noisy_label == obs.true_label);
}

TEST_CASE("thumb/metal label accuracy converges to 0.32") {
    // all-metal scene so every contact carries true class metal
    Scene scene = cylinder_scene();
    scene.regions.clear();
    scene.default_class = kMetal;

    auto profiles = default_sensor_profiles();
    SimParams params;
    params.steps = 320;
    TouchSimulator sim(scene, profiles, params, 12);
    int thumb_total = 0, thumb_correct = 0;
    for (int t = 0; t < 320 && thumb_total < 10000; ++t) {
        for (const auto& obs : sim.step(t)) {
            if (obs.finger != Finger::kThumb) continue;
            ++thumb_total;
            thumb_correct += obs.noisy_label == kMetal;
        }
    }
    REQUIRE(thumb_total >= 2500);
    double p = double(thumb_correct) / double(thumb_total);
    double sigma = std::sqrt(0.32 * 0.68 / double(thumb_total));
    CHECK(std::abs(p - 0.32) < 3.0 * sigma + 1e-9);
}

TEST_CASE("emitted points sit within 3 sigma of the surface") {
    Scene scene = cylinder_scene();
    SimParams params;
    params.steps = 40;
    params.sigma_pos = 0.001;
    TouchSimulator sim(scene, default_sensor_profiles(), params, 13);
    for (int t = 0; t < 40; ++t)
        for (const auto& obs : sim.step(t))
            CHECK(std::abs(scene.sdf(obs.point)) < 3.0 * params.sigma_pos);
}

TEST_CASE("streams are reproducible given the seed") {
    Scene scene = cylinder_scene();
    SimParams params;
    params.steps = 25;
    TouchSimulator a(scene, default_sensor_profiles(), params, 14);
    TouchSimulator b(scene, default_sensor_profiles(), params, 14);
    for (int t = 0; t < 25; ++t) {
        auto ba = a.step(t), bb = b.step(t);
        REQUIRE(ba.size() == bb.size());
        for (size_t i = 0; i < ba.size(); ++i) {
            CHECK(ba[i].point.x == bb[i].point.x);
            CHECK(ba[i].point.y == bb[i].point.y);
            CHECK(ba[i].point.z == bb[i].point.z);
            CHECK(ba[i].noisy_label == bb[i].noisy_label);
            CHECK(ba[i].true_label == bb[i].true_label);
            CHECK(ba[i].finger == bb[i].finger);
        }
    }
    TouchSimulator c(scene, default_sensor_profiles(), params, 15);
    auto b0 = TouchSimulator(scene, default_sensor_profiles(), params, 14).step(0);
    auto c0 = c.step(0);
    bool differs = false;
    for (size_t i = 0; i < std::min(b0.size(), c0.size()); ++i)
        differs = differs || b0[i].point.x != c0[i].point.x;
    CHECK(differs);
}

TEST_CASE("a full run covers the lateral surface") {
    Scene scene = cylinder_scene();
    SimParams params;
    params.steps = 600;
    TouchSimulator sim(scene, default_sensor_profiles(), params, 16);
    std::vector<ContactObservation> all;
    for (int t = 0; t < 600; ++t) {
        auto batch = sim.step(t);
        all.insert(all.end(), batch.begin(), batch.end());
    }
    // lateral reference samples: exclude the end caps
    auto ref = sample_surface(scene, 1500, 77);
    std::vector<GroundTruthSample> lateral;
    for (const auto& g : ref)
        if (std::abs(g.point.z) < 0.055) lateral.push_back(g);
    REQUIRE(lateral.size() > 500);
    double cov = surface_coverage(lateral, all, 0.005);
    CHECK(cov >= 0.95);
}

TEST_CASE("stream dump round-trips and rejects corruption") {
    namespace fs = std::filesystem;
    Scene scene = cylinder_scene();
    SimParams params;
    params.steps = 6;
    TouchSimulator sim(scene, default_sensor_profiles(), params, 17);
    std::vector<ContactObservation> all;
    for (int t = 0; t < 6; ++t) {
        auto batch = sim.step(t);
        all.insert(all.end(), batch.begin(), batch.end());
    }

    fs::path dir = fs::temp_directory_path() / "sfmap_stream_test";
    fs::create_directories(dir);
    std::string path = (dir / "stream.sfts").string();
    write_stream_dump(path, all);
    auto back = read_stream_dump(path);
    REQUIRE(back.size() == all.size());
    for (size_t i = 0; i < all.size(); ++i) {
        CHECK(back[i].point.x == all[i].point.x);
        CHECK(back[i].point.y == all[i].point.y);
        CHECK(back[i].point.z == all[i].point.z);
        CHECK(back[i].noisy_label == all[i].noisy_label);
        CHECK(back[i].true_label == all[i].true_label);
        CHECK(back[i].timestep == all[i].timestep);
        CHECK(int(back[i].finger) == int(all[i].finger));
    }

    // truncate mid-record
    std::string trunc_path = (dir / "trunc.sfts").string();
    {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        bytes.resize(bytes.size() - 7);
        std::ofstream out(trunc_path, std::ios::binary);
        out.write(bytes.data(), std::streamsize(bytes.size()));
    }
    CHECK_THROWS_WITH_AS(read_stream_dump(trunc_path), doctest::Contains("truncated record"),
                         IoError);

    // bad magic
    std::string bad_path = (dir / "bad.sfts").string();
    {
        std::ofstream out(bad_path, std::ios::binary);
        out << "NOPE";
    }
    CHECK_THROWS_AS(read_stream_dump(bad_path), IoError);
}

TEST_CASE("empty contact band raises a run error naming the finger") {
    // an object that only exists near the bottom: top bands never hit when
    // the band extent is forced past the surface
    Scene scene = cylinder_scene();
    SimParams params;
    params.steps = 4;
    TouchSimulator sim(scene, default_sensor_profiles(), params, 18);
    // shrink the object after construction so the cached z range is stale
    scene.primitives[0].half_height = 0.001;
    scene.primitives[0].radius = 0.001;
    bool threw = false;
    try {
        for (int t = 0; t < 4; ++t) sim.step(t);
    } catch (const RunError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("finger") != std::string::npos);
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
    CHECK(threw);
}
