#pragma once

#include <string>
#include <vector>

#include "sfmap/field.hpp"
#include "sfmap/run_config.hpp"

namespace sfmap {

/// Binary field checkpoint ("SFCK"): run-config echo, field bounds, optimizer
/// step counter, and every parameter array with its Adam moments, all
/// little-endian float32. save -> load -> save is byte-identical.
struct Checkpoint {
    static constexpr uint8_t kVersion = 1;

    std::string config_text;  // exact run-config echo, kept verbatim
    Box3 bounds;
    int64_t adam_step_count = 0;

    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::vector<float> values, m, v;
    };
    std::vector<Entry> entries;

    static Checkpoint capture(const RunConfig& cfg, DualBranchField& field,
                              nn::AdamOptimizer& opt);

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    RunConfig config() const { return RunConfig::from_json_text(config_text); }

    /// Rebuilds the field from the config echo and stored arrays. Rejects
    /// checkpoints whose tensors do not match the config's hyperparameters.
    DualBranchField restore_field() const;

    /// Restores moments and step counter into an optimizer already populated
    /// via field.register_with().
    void restore_optimizer(nn::AdamOptimizer& opt) const;
};

}  // namespace sfmap
