#pragma once

#include <span>
#include <string>
#include <vector>

#include "sfmap/checkpoint.hpp"
#include "sfmap/field.hpp"
#include "sfmap/metrics.hpp"
#include "sfmap/replay_buffer.hpp"
#include "sfmap/run_config.hpp"
#include "sfmap/scene.hpp"
#include "sfmap/touchsim.hpp"

namespace sfmap {

struct SnapshotRow {
    int timestep = 0;  // completed timesteps when the snapshot was taken
    double matching_pct = 0.0;
    double sdf_loss = 0.0;
    double material_loss = 0.0;
};

struct RunReport {
    std::vector<SnapshotRow> rows;
    std::string checkpoint_path;
    double final_matching = 0.0;
    bool early_stopped = false;
};

/// The online fusion loop: observation stream -> replay buffer -> incremental
/// field training -> periodic material-map snapshots.
class Mapper {
public:
    Mapper(const RunConfig& cfg, const Scene& scene);

    /// Contacts become (point, noisy label, sdf target 0) records plus
    /// free_space_per_contact offsets along the outward normal with oracle
    /// targets. Non-empty batches also add global_freespace_per_step
    /// bounds-uniform oracle records.
    void ingest_batch(std::span<const ContactObservation> batch);

    /// One optimizer step over a uniform replay sample; returns the weighted
    /// (sdf, material) loss values.
    std::pair<double, double> train_step();

    /// Pure evaluation of the fixed eval point set.
    MaterialMap snapshot() const;

    /// Full run with internally simulated observations.
    RunReport run(const std::string& out_dir);

    /// Same loop over a recorded stream (regression pinning); the stream's
    /// timesteps replace simulation.
    RunReport run_replayed(std::span<const ContactObservation> stream,
                           const std::string& out_dir);

    DualBranchField& field() { return field_; }
    ReplayBuffer& buffer() { return buffer_; }
    nn::AdamOptimizer& optimizer() { return opt_; }
    const std::vector<GroundTruthSample>& eval_points() const { return eval_; }
    const RunConfig& config() const { return cfg_; }

private:
    RunReport run_loop(TouchSimulator* sim, std::span<const ContactObservation> stream,
                       const std::string& out_dir);
    void write_outputs(const std::string& out_dir, const RunReport& report);

    RunConfig cfg_;
    const Scene& scene_;
    DualBranchField field_;
    nn::AdamOptimizer opt_;
    ReplayBuffer buffer_;
    Rng train_rng_;
    std::vector<GroundTruthSample> eval_;
    std::vector<Vec3> eval_pts_;
};

/// Loads the scene, runs the mapper, writes report.csv, config echo, final
/// checkpoint, and optional per-snapshot surface exports into out_dir.
RunReport run_mapping(const RunConfig& cfg, const std::string& out_dir);

void write_report_csv(const std::string& path, const RunReport& report);

/// Derived stream seeds so simulation, training, and evaluation stay
/// independently reproducible.
uint64_t eval_sampling_seed(uint64_t run_seed);

}  // namespace sfmap
