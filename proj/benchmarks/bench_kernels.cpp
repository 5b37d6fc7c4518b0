// Timing comparison of the serial reference kernels against their OpenMP
// counterparts: batch field evaluation and marching-cubes extraction.

#include <chrono>
#include <cstdio>
#include <vector>

#include "sfmap/field.hpp"
#include "sfmap/isosurface.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace sfmap;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename F>
double best_of(int reps, F&& fn) {
    double best = 1e30;
    for (int i = 0; i < reps; ++i) {
        auto t0 = Clock::now();
        fn();
        best = std::min(best, seconds_since(t0));
    }
    return best;
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("openmp: disabled (serial build)\n");
#endif

    Rng rng(1);
    FieldConfig cfg;
    cfg.grid.log2_hashmap_size = 19;
    Box3 bounds{{-1, -1, -1}, {1, 1, 1}};
    DualBranchField field = DualBranchField::create(cfg, bounds, rng);
    for (auto& p : field.named_parameters())
        for (float& v : p.tensor.values()) v = rng.uniform_f(-0.3f, 0.3f);

    const int n_points = 40000;
    std::vector<Vec3> pts;
    pts.reserve(n_points);
    for (int i = 0; i < n_points; ++i)
        pts.push_back({rng.uniform(-0.95, 0.95), rng.uniform(-0.95, 0.95),
                       rng.uniform(-0.95, 0.95)});
    std::vector<FieldOutput> out(pts.size());

    double eval_serial = best_of(3, [&] { field.evaluate_batch_serial(pts, out.data()); });
    double eval_parallel = best_of(3, [&] { field.evaluate_batch(pts, out.data()); });
    std::printf("field_eval    %d pts   serial %8.1f ms   parallel %8.1f ms   speedup %.2fx\n",
                n_points, eval_serial * 1e3, eval_parallel * 1e3,
                eval_serial / eval_parallel);

    const int res = 96;
    double mc_serial =
        best_of(2, [&] { extract_surface(field, bounds, res, /*parallel=*/false); });
    double mc_parallel =
        best_of(2, [&] { extract_surface(field, bounds, res, /*parallel=*/true); });
    std::printf("extract_surface res %d  serial %8.1f ms   parallel %8.1f ms   speedup %.2fx\n",
                res, mc_serial * 1e3, mc_parallel * 1e3, mc_serial / mc_parallel);
    return 0;
}
