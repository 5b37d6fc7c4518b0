// sfmap: material-aware neural SDF mapping from simulated tactile streams.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include "sfmap/export.hpp"
#include "sfmap/isosurface.hpp"
#include "sfmap/mapper.hpp"

namespace fs = std::filesystem;
using namespace sfmap;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<uint64_t> seed;
    bool quiet = false;
};

RunConfig load_config_checked(const std::string& path, const std::optional<uint64_t>& seed) {
    if (!fs::exists(path)) throw ConfigError("config file not found: '" + path + "'");
    RunConfig cfg = RunConfig::load(path);
    if (seed) {
        cfg.seed = *seed;
        cfg.validate();
    }
    return cfg;
}

Scene load_scene_checked(const std::string& path) {
    if (!fs::exists(path)) throw ConfigError("scene file not found: '" + path + "'");
    return Scene::load(path);
}

void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw RunError("cannot create output directory '" + out + "': " + ec.message());
}

void print_pct(const char* key, double pct) {
    std::printf("%s=%.2f\n", key, pct);
}

int cmd_simulate(const CommonOpts& opts) {
    RunConfig cfg = load_config_checked(opts.config_path, opts.seed);
    Scene scene = load_scene_checked(cfg.scene_path);

    TouchSimulator sim(scene, cfg.sensors, cfg.sim, cfg.seed);
    std::vector<ContactObservation> stream;
    for (int t = 0; t < cfg.steps; ++t) {
        std::vector<ContactObservation> batch = sim.step(t);
        stream.insert(stream.end(), batch.begin(), batch.end());
    }

    ensure_out_dir(opts.out_dir);
    std::string dump = (fs::path(opts.out_dir) / "stream.sfts").string();
    write_stream_dump(dump, stream);
    cfg.save((fs::path(opts.out_dir) / "config.json").string());
    if (!opts.quiet)
        std::printf("wrote %zu observations over %d timesteps to %s\n", stream.size(),
                    cfg.steps, dump.c_str());
    return 0;
}

int cmd_train(const CommonOpts& opts, int runs) {
    RunConfig cfg = load_config_checked(opts.config_path, opts.seed);
    load_scene_checked(cfg.scene_path);  // validate before side effects

    if (runs <= 1) {
        RunReport report = run_mapping(cfg, opts.out_dir);
        if (!opts.quiet)
            std::printf("run complete: %zu snapshots%s, checkpoint %s\n",
                        report.rows.size(), report.early_stopped ? " (early stop)" : "",
                        report.checkpoint_path.c_str());
        print_pct("final_matching_pct", report.final_matching);
        return 0;
    }

    // N seeds in parallel, isolated output directories.
    std::vector<RunReport> reports(static_cast<size_t>(runs));
    std::vector<std::string> errors(static_cast<size_t>(runs));
    std::vector<std::thread> workers;
    for (int i = 0; i < runs; ++i) {
        workers.emplace_back([&, i]() {
            try {
                RunConfig rc = cfg;
                rc.seed = cfg.seed + uint64_t(i);
                std::string dir =
                    (fs::path(opts.out_dir) / ("run_" + std::to_string(rc.seed))).string();
                reports[size_t(i)] = run_mapping(rc, dir);
            } catch (const std::exception& e) {
                errors[size_t(i)] = e.what();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (const std::string& e : errors)
        if (!e.empty()) throw RunError("train: " + e);

    double mean = 0.0;
    for (int i = 0; i < runs; ++i) {
        if (!opts.quiet) std::printf("seed %llu: ", (unsigned long long)(cfg.seed + uint64_t(i)));
        print_pct("final_matching_pct", reports[size_t(i)].final_matching);
        mean += reports[size_t(i)].final_matching;
    }
    if (!opts.quiet) print_pct("mean_matching_pct", mean / runs);
    return 0;
}

MaterialMap evaluate_map(const DualBranchField& field, const Scene& scene,
                         const RunConfig& cfg) {
    std::vector<GroundTruthSample> eval =
        sample_surface(scene, cfg.eval_points, eval_sampling_seed(cfg.seed), true);
    std::vector<Vec3> pts;
    pts.reserve(eval.size());
    for (const auto& s : eval) pts.push_back(s.point);
    std::vector<FieldOutput> outputs(pts.size());
    field.evaluate_batch(pts, outputs.data());

    MaterialMap map;
    map.samples.reserve(eval.size());
    for (size_t i = 0; i < eval.size(); ++i) {
        int best = 0;
        for (int c = 1; c < field.config.num_classes; ++c)
            if (outputs[i].logits[size_t(c)] > outputs[i].logits[size_t(best)]) best = c;
        map.samples.push_back({eval[i].point, best, eval[i].true_class, true});
    }
    return map;
}

void check_bounds_match(const Checkpoint& ck, const Scene& scene) {
    const Box3& a = ck.bounds;
    const Box3& b = scene.bounds;
    if (a.lo.x != b.lo.x || a.lo.y != b.lo.y || a.lo.z != b.lo.z || a.hi.x != b.hi.x ||
        a.hi.y != b.hi.y || a.hi.z != b.hi.z)
        throw RunError("evaluate: checkpoint bounds do not match the scene bounds");
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& scene_path,
                 const CommonOpts& opts) {
    if (!fs::exists(checkpoint_path))
        throw ConfigError("checkpoint file not found: '" + checkpoint_path + "'");
    Checkpoint ck = Checkpoint::load(checkpoint_path);
    RunConfig cfg = ck.config();
    Scene scene = load_scene_checked(scene_path.empty() ? cfg.scene_path : scene_path);
    check_bounds_match(ck, scene);
    DualBranchField field = ck.restore_field();

    MaterialMap map = evaluate_map(field, scene, cfg);
    double pct = matching_percentage(map);
    auto per_class = per_class_accuracy(map);

    ensure_out_dir(opts.out_dir);
    std::ofstream csv(fs::path(opts.out_dir) / "metrics.csv");
    if (!csv) throw IoError("evaluate: cannot write metrics.csv");
    csv << "metric,value,support\n";
    char line[128];
    std::snprintf(line, sizeof line, "matching_pct,%.2f,%zu\n", pct, map.samples.size());
    csv << line;
    for (int c = 0; c < kNumClasses; ++c) {
        if (!per_class[size_t(c)]) continue;
        std::snprintf(line, sizeof line, "accuracy_%s,%.2f,%d\n", material_name(c),
                      per_class[size_t(c)]->percent, per_class[size_t(c)]->support);
        csv << line;
    }
    std::ofstream echo(fs::path(opts.out_dir) / "config.json");
    echo << ck.config_text;

    print_pct("matching_pct", pct);
    if (!opts.quiet) {
        for (int c = 0; c < kNumClasses; ++c)
            if (per_class[size_t(c)])
                std::printf("accuracy[%s]=%.2f (n=%d)\n", material_name(c),
                            per_class[size_t(c)]->percent, per_class[size_t(c)]->support);
    }
    return 0;
}

int cmd_export(const std::string& checkpoint_path, const std::string& scene_path,
               int resolution, const std::string& mask_axis, const CommonOpts& opts) {
    if (!fs::exists(checkpoint_path))
        throw ConfigError("checkpoint file not found: '" + checkpoint_path + "'");
    Checkpoint ck = Checkpoint::load(checkpoint_path);
    RunConfig cfg = ck.config();
    DualBranchField field = ck.restore_field();
    if (resolution <= 0) resolution = cfg.export_resolution;

    ensure_out_dir(opts.out_dir);
    ExtractedSurface surf = extract_surface(field, field.bounds(), resolution);
    std::string ply = (fs::path(opts.out_dir) / "surface.ply").string();
    export_ply(surf, ply);
    if (!opts.quiet) {
        if (surf.empty_warning)
            std::printf("warning: no zero crossing in bounds; surface is empty\n");
        std::printf("wrote %s (%zu vertices, %zu triangles)\n", ply.c_str(),
                    surf.vertices.size(), surf.triangles.size());
    }

    if (!mask_axis.empty()) {
        Scene scene = load_scene_checked(scene_path.empty() ? cfg.scene_path : scene_path);
        check_bounds_match(ck, scene);
        ProjectionAxis axis = mask_axis == "x"   ? ProjectionAxis::kX
                              : mask_axis == "y" ? ProjectionAxis::kY
                                                 : ProjectionAxis::kZ;
        MaterialMap map = evaluate_map(field, scene, cfg);
        std::string ppm = (fs::path(opts.out_dir) / "mask.ppm").string();
        export_mask_image(map, axis, 512, 512, ppm);
        if (!opts.quiet) std::printf("wrote %s\n", ppm.c_str());
    }
    std::ofstream echo(fs::path(opts.out_dir) / "config.json");
    echo << ck.config_text;
    return 0;
}

int cmd_replay(const std::string& stream_path, const CommonOpts& opts) {
    RunConfig cfg = load_config_checked(opts.config_path, opts.seed);
    Scene scene = load_scene_checked(cfg.scene_path);
    if (!fs::exists(stream_path))
        throw ConfigError("stream dump not found: '" + stream_path + "'");
    std::vector<ContactObservation> stream = read_stream_dump(stream_path);
    if (stream.empty()) throw RunError("replay: dump contains no records");

    Mapper mapper(cfg, scene);
    RunReport report = mapper.run_replayed(stream, opts.out_dir);
    if (!opts.quiet)
        std::printf("replayed %zu observations, %zu snapshots\n", stream.size(),
                    report.rows.size());
    print_pct("final_matching_pct", report.final_matching);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"material-aware neural SDF mapping from tactile streams"};
    app.require_subcommand(1);

    CommonOpts opts;
    int runs = 1;
    std::string checkpoint_path, scene_path, stream_path, mask_axis;
    int resolution = 0;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config)
            cmd->add_option("--config", opts.config_path, "run config JSON")->required();
        cmd->add_option("--out", opts.out_dir, "output directory")->required();
        cmd->add_option("--seed", opts.seed, "override the config seed");
        cmd->add_flag("--quiet", opts.quiet, "print only the metric line");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "generate a tactile stream dump");
    add_common(simulate, true);

    CLI::App* train = app.add_subcommand("train", "run the online mapping loop");
    add_common(train, true);
    train->add_option("--runs", runs, "number of concurrent seeds")->check(CLI::PositiveNumber);

    CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint");
    evaluate->add_option("--checkpoint", checkpoint_path, "checkpoint (.sfck)")->required();
    evaluate->add_option("--scene", scene_path, "scene JSON (defaults to the config echo)");
    add_common(evaluate, false);

    CLI::App* exportc = app.add_subcommand("export", "export surface and difference mask");
    exportc->add_option("--checkpoint", checkpoint_path, "checkpoint (.sfck)")->required();
    exportc->add_option("--scene", scene_path, "scene JSON for the mask");
    exportc->add_option("--resolution", resolution, "marching-cubes resolution");
    exportc->add_option("--mask-axis", mask_axis, "difference-mask projection axis")
        ->check(CLI::IsMember({"x", "y", "z"}));
    add_common(exportc, false);

    CLI::App* replay = app.add_subcommand("replay", "rerun the mapper on a recorded stream");
    replay->add_option("--stream", stream_path, "stream dump (.sfts)")->required();
    add_common(replay, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(opts);
        if (train->parsed()) return cmd_train(opts, runs);
        if (evaluate->parsed()) return cmd_evaluate(checkpoint_path, scene_path, opts);
        if (exportc->parsed())
            return cmd_export(checkpoint_path, scene_path, resolution, mask_axis, opts);
        if (replay->parsed()) return cmd_replay(stream_path, opts);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
