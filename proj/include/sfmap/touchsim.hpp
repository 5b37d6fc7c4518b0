#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "sfmap/common.hpp"
#include "sfmap/scene.hpp"

namespace sfmap {

enum class Finger : int { kIndex = 0, kMiddle = 1, kRing = 2, kThumb = 3 };

inline const char* finger_name(Finger f) {
    switch (f) {
        case Finger::kIndex: return "index";
        case Finger::kMiddle: return "middle";
        case Finger::kRing: return "ring";
        case Finger::kThumb: return "thumb";
    }
    return "unknown";
}

using ConfusionMatrix = std::array<std::array<double, 4>, 4>;

/// diagonal = accuracy, residual split uniformly over the other classes.
ConfusionMatrix confusion_from_accuracy(const std::array<double, 4>& per_class_accuracy);

struct SensorProfile {
    Finger finger = Finger::kIndex;
    std::array<double, 4> per_class_accuracy{1, 1, 1, 1};
    ConfusionMatrix confusion = confusion_from_accuracy({1, 1, 1, 1});
    double contact_rate = 8.0;  // contacts per timestep

    void validate() const;
};

/// Per-sensor accuracies measured on the real system for
/// (plastic, metal, fabric, wood); see the shipped run configs for which
/// entries are measurements and which interpolate gaps.
std::array<SensorProfile, 4> default_sensor_profiles();

std::array<SensorProfile, 4> identity_sensor_profiles();

struct ContactObservation {
    Vec3 point;           // surface point with positional noise
    int noisy_label = 0;  // the only label training may consume
    Finger finger = Finger::kIndex;
    int timestep = 0;
    int true_label = 0;  // carried for evaluation only
};

struct SimParams {
    double sigma_pos = 0.001;          // meters, truncated at 3 sigma
    double rotations = 2.0;            // azimuthal sweeps over the whole run
    double azimuth_halfwidth_deg = 12.0;
    double band_jitter = 0.15;         // band-height fraction of vertical overlap
    int steps = 600;
};

/// Simulates four fingertips tracing latitude bands over the rotating object.
/// Each finger owns one vertical band; the contact window advances azimuthally
/// at constant angular velocity. Labels are corrupted by the per-finger
/// confusion row of the true class. Deterministic given seed.
class TouchSimulator {
public:
    TouchSimulator(const Scene& scene, const std::array<SensorProfile, 4>& profiles,
                   const SimParams& params, uint64_t seed);

    /// Observations for timestep t; call with consecutive t for a run.
    std::vector<ContactObservation> step(int t);

    double surface_z_min() const { return zmin_; }
    double surface_z_max() const { return zmax_; }

private:
    Vec3 trace_contact(double azimuth_deg, double z, bool& ok) const;

    const Scene& scene_;
    std::array<SensorProfile, 4> profiles_;
    SimParams params_;
    Rng rng_;
    double zmin_ = 0.0, zmax_ = 0.0;
    double ray_radius_ = 0.0;
};

/// Fraction of reference surface samples within `radius` of some contact.
double surface_coverage(std::span<const GroundTruthSample> reference,
                        std::span<const ContactObservation> contacts, double radius);

// --- stream dump ("SFTS", little-endian, length-prefixed records) -----------

void write_stream_dump(const std::string& path,
                       std::span<const ContactObservation> stream);

/// Throws IoError on bad magic/version or truncation (names the record index).
std::vector<ContactObservation> read_stream_dump(const std::string& path);

}  // namespace sfmap
