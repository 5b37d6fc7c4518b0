#pragma once

#include <array>
#include <string>

#include "sfmap/field.hpp"
#include "sfmap/touchsim.hpp"

namespace sfmap {

/// Full description of one mapping run. Serializes losslessly to JSON; files
/// with unknown keys are rejected with an error naming the key.
struct RunConfig {
    std::string scene_path;
    uint64_t seed = 1;
    int steps = 600;
    int snapshot_every = 25;
    int batch_size = 32;
    float learning_rate = 3e-4f;
    float weight_decay = 1e-5f;
    int train_steps_per_timestep = 4;
    int early_stop_patience = 10;  // snapshot plateaus; 0 disables
    int eval_points = 20000;
    int replay_capacity = 50000;
    int free_space_per_contact = 2;
    // Extra bounds-uniform free-space samples per ingested batch; keeps the
    // far field positive so extraction does not pick up spurious crossings.
    int global_freespace_per_step = 0;

    LossWeights loss;
    FieldConfig field;
    std::array<SensorProfile, 4> sensors = default_sensor_profiles();
    SimParams sim;

    bool export_snapshot_ply = false;
    int export_resolution = 64;

    void validate() const;

    static RunConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
    static RunConfig load(const std::string& path);
    void save(const std::string& path) const;
};

}  // namespace sfmap
