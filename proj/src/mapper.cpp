#include "sfmap/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sfmap/export.hpp"
#include "sfmap/isosurface.hpp"

namespace sfmap {

namespace {
constexpr uint64_t kFieldStream = 0xF1E1D;
constexpr uint64_t kTrainStream = 0x7261;
}  // namespace

uint64_t eval_sampling_seed(uint64_t run_seed) {
    return splitmix64(run_seed ^ 0xEEAA11ULL);
}

Mapper::Mapper(const RunConfig& cfg, const Scene& scene)
    : cfg_(cfg),
      scene_(scene),
      field_([&] {
          Rng rng(cfg.seed, kFieldStream);
          return DualBranchField::create(cfg.field, scene.bounds, rng);
      }()),
      opt_(nn::AdamParams{cfg.learning_rate, cfg.weight_decay, 0.9f, 0.999f, 1e-8f}),
      buffer_(cfg.replay_capacity),
      train_rng_(cfg.seed, kTrainStream) {
    cfg_.validate();
    field_.register_with(opt_, cfg.weight_decay);
    eval_ = sample_surface(scene_, cfg_.eval_points, eval_sampling_seed(cfg_.seed),
                           /*roi_only=*/true);
    eval_pts_.reserve(eval_.size());
    for (const auto& s : eval_) eval_pts_.push_back(s.point);
}

void Mapper::ingest_batch(std::span<const ContactObservation> batch) {
    if (batch.empty()) return;
    const float trunc = cfg_.loss.truncation;
    for (const ContactObservation& obs : batch) {
        buffer_.push({obs.point, 0.0f, obs.noisy_label});
        Vec3 n = scene_.sdf_gradient(obs.point).normalized();
        for (int k = 0; k < cfg_.free_space_per_contact; ++k) {
            double d = train_rng_.uniform(0.005, double(trunc));
            Vec3 fp = obs.point + d * n;
            buffer_.push({fp, float(scene_.sdf(fp)), -1});
        }
    }
    for (int k = 0; k < cfg_.global_freespace_per_step; ++k) {
        Vec3 p{train_rng_.uniform(scene_.bounds.lo.x, scene_.bounds.hi.x),
               train_rng_.uniform(scene_.bounds.lo.y, scene_.bounds.hi.y),
               train_rng_.uniform(scene_.bounds.lo.z, scene_.bounds.hi.z)};
        buffer_.push({p, float(scene_.sdf(p)), -1});
    }
}

std::pair<double, double> Mapper::train_step() {
    if (buffer_.empty()) throw ContractError("train_step: replay buffer is empty");

    const size_t B = size_t(cfg_.batch_size);
    std::vector<Vec3> points(B);
    std::vector<float> targets(B);
    std::vector<int> labeled_rows, labels;
    for (size_t b = 0; b < B; ++b) {
        const TrainingRecord& r = buffer_.sample(train_rng_);
        points[b] = r.point;
        targets[b] = r.target_sdf;
        if (r.material_label >= 0) {
            labeled_rows.push_back(int(b));
            labels.push_back(r.material_label);
        }
    }

    nn::Tape tape;
    DualBranchField::ForwardTensors fw = field_.forward(&tape, points);
    nn::Tensor sdf_l = sdf_loss(&tape, fw.sdf, targets, cfg_.loss);

    nn::Tensor mat_l = nn::Tensor::scalar(0.0f);
    if (!labeled_rows.empty()) {
        nn::Tensor picked = nn::select_rows(&tape, fw.logits, labeled_rows);
        mat_l = material_loss(&tape, picked, labels, cfg_.loss);
    }

    std::vector<nn::Tensor> terms{sdf_l, mat_l};
    std::vector<float> ws{1.0f, 1.0f};
    if (cfg_.loss.eikonal_weight > 0.0f) {
        const float h = 1e-3f;
        std::array<nn::Tensor, 3> plus, minus;
        for (int axis = 0; axis < 3; ++axis) {
            std::vector<Vec3> pp = points, pm = points;
            for (size_t b = 0; b < B; ++b) {
                if (axis == 0) pp[b].x += h, pm[b].x -= h;
                if (axis == 1) pp[b].y += h, pm[b].y -= h;
                if (axis == 2) pp[b].z += h, pm[b].z -= h;
            }
            plus[size_t(axis)] = field_.forward_sdf(&tape, pp);
            minus[size_t(axis)] = field_.forward_sdf(&tape, pm);
        }
        terms.push_back(nn::eikonal_residual(&tape, plus, minus, h));
        ws.push_back(cfg_.loss.eikonal_weight);
    }
    nn::Tensor total = nn::weighted_sum(&tape, terms, ws);

    tape.backward(total);
    opt_.step();

    double sv = double(sdf_l.item());
    double mv = double(mat_l.item());
    if (!std::isfinite(sv) || !std::isfinite(mv))
        throw ContractError("train_step: non-finite loss");
    return {sv, mv};
}

MaterialMap Mapper::snapshot() const {
    std::vector<FieldOutput> outputs(eval_pts_.size());
    field_.evaluate_batch(eval_pts_, outputs.data());
    MaterialMap map;
    map.samples.reserve(eval_.size());
    const int C = field_.config.num_classes;
    for (size_t i = 0; i < eval_.size(); ++i) {
        int best = 0;
        for (int c = 1; c < C; ++c)
            if (outputs[i].logits[size_t(c)] > outputs[i].logits[size_t(best)]) best = c;
        map.samples.push_back({eval_[i].point, best, eval_[i].true_class, true});
    }
    return map;
}

RunReport Mapper::run(const std::string& out_dir) {
    TouchSimulator sim(scene_, cfg_.sensors, cfg_.sim, cfg_.seed);
    return run_loop(&sim, {}, out_dir);
}

RunReport Mapper::run_replayed(std::span<const ContactObservation> stream,
                               const std::string& out_dir) {
    if (stream.empty()) throw RunError("replay: stream contains no records");
    return run_loop(nullptr, stream, out_dir);
}

RunReport Mapper::run_loop(TouchSimulator* sim, std::span<const ContactObservation> stream,
                           const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw RunError("run: cannot create output directory '" + out_dir + "': " + ec.message());

    int steps = cfg_.steps;
    std::vector<std::vector<ContactObservation>> replay_batches;
    if (!sim) {
        int max_t = 0;
        for (const auto& o : stream) max_t = std::max(max_t, o.timestep);
        steps = max_t + 1;
        replay_batches.resize(size_t(steps));
        for (const auto& o : stream) replay_batches[size_t(o.timestep)].push_back(o);
    }

    RunReport report;
    double best = -1.0;
    int stale = 0;
    double last_sdf = 0.0, last_mat = 0.0;

    for (int t = 0; t < steps; ++t) {
        if (sim) {
            std::vector<ContactObservation> batch = sim->step(t);
            ingest_batch(batch);
        } else {
            ingest_batch(replay_batches[size_t(t)]);
        }
        if (!buffer_.empty()) {
            for (int k = 0; k < cfg_.train_steps_per_timestep; ++k)
                std::tie(last_sdf, last_mat) = train_step();
        }

        const bool at_schedule = (t + 1) % cfg_.snapshot_every == 0;
        const bool at_end = t + 1 == steps;
        if (!at_schedule && !at_end) continue;

        MaterialMap map = snapshot();
        double pct = matching_percentage(map);
        report.rows.push_back({t + 1, pct, last_sdf, last_mat});

        if (cfg_.export_snapshot_ply) {
            char name[64];
            std::snprintf(name, sizeof name, "snapshot_%06d.ply", t + 1);
            ExtractedSurface surf =
                extract_surface(field_, field_.bounds(), cfg_.export_resolution);
            export_ply(surf, (fs::path(out_dir) / name).string());
        }

        if (cfg_.early_stop_patience > 0) {
            if (pct > best) {
                best = pct;
                stale = 0;
            } else if (++stale >= cfg_.early_stop_patience) {
                report.early_stopped = true;
                break;
            }
        }
    }

    report.final_matching = report.rows.empty() ? 0.0 : report.rows.back().matching_pct;
    write_outputs(out_dir, report);
    report.checkpoint_path = (fs::path(out_dir) / "final.sfck").string();
    return report;
}

void Mapper::write_outputs(const std::string& out_dir, const RunReport& report) {
    namespace fs = std::filesystem;
    write_report_csv((fs::path(out_dir) / "report.csv").string(), report);
    cfg_.save((fs::path(out_dir) / "config.json").string());
    Checkpoint ck = Checkpoint::capture(cfg_, field_, opt_);
    try {
        ck.save((fs::path(out_dir) / "final.sfck").string());
    } catch (const IoError& e) {
        throw RunError(std::string("run: checkpoint write failed: ") + e.what());
    }
}

RunReport run_mapping(const RunConfig& cfg, const std::string& out_dir) {
    Scene scene = Scene::load(cfg.scene_path);
    Mapper mapper(cfg, scene);
    return mapper.run(out_dir);
}

void write_report_csv(const std::string& path, const RunReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("report: cannot write '" + path + "'");
    out << "timestep,matching_pct,sdf_loss,material_loss\n";
    char line[160];
    for (const SnapshotRow& r : report.rows) {
        std::snprintf(line, sizeof line, "%d,%.2f,%.6g,%.6g\n", r.timestep,
                      r.matching_pct, r.sdf_loss, r.material_loss);
        out << line;
    }
    if (!out) throw IoError("report: write failed for '" + path + "'");
}

}  // namespace sfmap
