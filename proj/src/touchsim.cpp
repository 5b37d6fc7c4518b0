#include "sfmap/touchsim.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"

namespace sfmap {

ConfusionMatrix confusion_from_accuracy(const std::array<double, 4>& acc) {
    ConfusionMatrix m{};
    for (int c = 0; c < 4; ++c) {
        if (acc[size_t(c)] < 0.0 || acc[size_t(c)] > 1.0) {
            std::ostringstream ss;
            ss << "confusion_from_accuracy: accuracy " << acc[size_t(c)]
               << " for class " << c << " outside [0, 1]";
            throw ContractError(ss.str());
        }
        double off = (1.0 - acc[size_t(c)]) / 3.0;
        for (int k = 0; k < 4; ++k) m[size_t(c)][size_t(k)] = (k == c) ? acc[size_t(c)] : off;
    }
    return m;
}

void SensorProfile::validate() const {
    for (int c = 0; c < 4; ++c) {
        double sum = 0.0;
        for (int k = 0; k < 4; ++k) {
            double v = confusion[size_t(c)][size_t(k)];
            if (v < 0.0 || v > 1.0)
                throw ConfigError("sensor profile: confusion entries must be in [0, 1]");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ConfigError("sensor profile: confusion rows must sum to 1");
    }
    if (contact_rate <= 0.0)
        throw ConfigError("sensor profile: contact_rate must be positive");
}

std::array<SensorProfile, 4> default_sensor_profiles() {
    // (plastic, metal, fabric, wood) accuracies per finger.
    std::array<SensorProfile, 4> p;
    p[0] = {Finger::kIndex, {1.00, 0.60, 0.90, 0.75}, {}, 8.0};
    p[1] = {Finger::kMiddle, {1.00, 0.50, 0.88, 0.50}, {}, 8.0};
    p[2] = {Finger::kRing, {1.00, 0.74, 0.95, 0.70}, {}, 8.0};
    p[3] = {Finger::kThumb, {0.85, 0.32, 0.83, 0.23}, {}, 8.0};
    for (auto& s : p) s.confusion = confusion_from_accuracy(s.per_class_accuracy);
    return p;
}

std::array<SensorProfile, 4> identity_sensor_profiles() {
    std::array<SensorProfile, 4> p = default_sensor_profiles();
    for (auto& s : p) {
        s.per_class_accuracy = {1, 1, 1, 1};
        s.confusion = confusion_from_accuracy(s.per_class_accuracy);
    }
    return p;
}

TouchSimulator::TouchSimulator(const Scene& scene,
                               const std::array<SensorProfile, 4>& profiles,
                               const SimParams& params, uint64_t seed)
    : scene_(scene), profiles_(profiles), params_(params), rng_(seed, 0x7173ULL) {
    for (const auto& p : profiles_) p.validate();
    if (params_.steps <= 0) throw ContractError("touchsim: steps must be positive");

    // Vertical extent of the touchable surface, from a coarse reference set.
    std::vector<GroundTruthSample> ref = sample_surface(scene_, 256, seed ^ 0x5a5aULL);
    zmin_ = ref.front().point.z;
    zmax_ = ref.front().point.z;
    for (const auto& s : ref) {
        zmin_ = std::min(zmin_, s.point.z);
        zmax_ = std::max(zmax_, s.point.z);
    }
    Vec3 ext = scene_.bounds.extent();
    ray_radius_ = std::sqrt(ext.x * ext.x + ext.y * ext.y) * 0.5;
}

Vec3 TouchSimulator::trace_contact(double azimuth_deg, double z, bool& ok) const {
    double a = azimuth_deg * M_PI / 180.0;
    Vec3 c = scene_.bounds.center();
    Vec3 dir{-std::cos(a), -std::sin(a), 0.0};
    Vec3 x{c.x + ray_radius_ * std::cos(a), c.y + ray_radius_ * std::sin(a), z};
    double traveled = 0.0;
    const double max_travel = 2.5 * ray_radius_;
    for (int i = 0; i < 96; ++i) {
        double d = scene_.sdf(x);
        if (d < 1e-6) {
            ok = d > -1e-4;  // overshoot past the surface counts as a miss
            return x;
        }
        x += dir * d;
        traveled += d;
        if (traveled > max_travel) break;
    }
    ok = false;
    return x;
}

std::vector<ContactObservation> TouchSimulator::step(int t) {
    std::vector<ContactObservation> out;
    const double band_h = (zmax_ - zmin_) / 4.0;
    const double jitter = params_.band_jitter * band_h;
    const double sweep = 360.0 * params_.rotations / double(params_.steps);

    for (int f = 0; f < 4; ++f) {
        const SensorProfile& prof = profiles_[size_t(f)];
        const double phi_center = 90.0 * f + sweep * double(t);
        const double z_lo = std::max(zmin_, zmin_ + band_h * f - jitter);
        const double z_hi = std::min(zmax_, zmin_ + band_h * (f + 1) + jitter);
        const int contacts = int(std::lround(prof.contact_rate));

        for (int k = 0; k < contacts; ++k) {
            Vec3 hit;
            bool ok = false;
            for (int attempt = 0; attempt < 24 && !ok; ++attempt) {
                double phi = rng_.uniform(phi_center - params_.azimuth_halfwidth_deg,
                                          phi_center + params_.azimuth_halfwidth_deg);
                double z = rng_.uniform(z_lo, z_hi);
                hit = trace_contact(phi, z, ok);
            }
            if (!ok) {
                std::ostringstream ss;
                ss << "touchsim: empty contact band for finger " << finger_name(Finger(f))
                   << " at step " << t;
                throw RunError(ss.str());
            }

            ContactObservation obs;
            obs.finger = Finger(f);
            obs.timestep = t;
            obs.true_label = scene_.true_material(hit);

            Vec3 noise{0, 0, 0};
            if (params_.sigma_pos > 0.0) {
                do {
                    noise = rng_.normal3(params_.sigma_pos);
                } while (noise.norm() >= 3.0 * params_.sigma_pos);
            }
            obs.point = hit + noise;

            const auto& row = prof.confusion[size_t(obs.true_label)];
            double u = rng_.uniform();
            int label = 3;
            double cdf = 0.0;
            for (int c = 0; c < 4; ++c) {
                cdf += row[size_t(c)];
                if (u < cdf) {
                    label = c;
                    break;
                }
            }
            obs.noisy_label = label;
            out.push_back(obs);
        }
    }
    return out;
}

double surface_coverage(std::span<const GroundTruthSample> reference,
                        std::span<const ContactObservation> contacts, double radius) {
    if (reference.empty()) return 0.0;
    const double r2 = radius * radius;
    int covered = 0;
    for (const auto& ref : reference) {
        for (const auto& c : contacts) {
            Vec3 d = ref.point - c.point;
            if (d.dot(d) < r2) {
                ++covered;
                break;
            }
        }
    }
    return double(covered) / double(reference.size());
}

// --- stream dump -------------------------------------------------------------

namespace {
constexpr char kStreamMagic[4] = {'S', 'F', 'T', 'S'};
constexpr uint8_t kStreamVersion = 1;
constexpr uint32_t kRecordBytes = 4 + 1 + 1 + 1 + 1 + 3 * 8;
}  // namespace

void write_stream_dump(const std::string& path,
                       std::span<const ContactObservation> stream) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("stream dump: cannot write '" + path + "'");
    out.write(kStreamMagic, 4);
    detail::put_u8(out, kStreamVersion);
    for (const ContactObservation& o : stream) {
        detail::put_u32(out, kRecordBytes);
        detail::put_u32(out, uint32_t(o.timestep));
        detail::put_u8(out, uint8_t(int(o.finger)));
        detail::put_u8(out, uint8_t(o.noisy_label));
        detail::put_u8(out, uint8_t(o.true_label));
        detail::put_u8(out, 0);
        detail::put_f64(out, o.point.x);
        detail::put_f64(out, o.point.y);
        detail::put_f64(out, o.point.z);
    }
    if (!out) throw IoError("stream dump: write failed for '" + path + "'");
}

std::vector<ContactObservation> read_stream_dump(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("stream dump: cannot open '" + path + "'");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kStreamMagic, 4) != 0)
        throw IoError("stream dump: bad magic in '" + path + "'");
    uint8_t version = 0;
    if (!detail::get_u8(in, version) || version != kStreamVersion) {
        std::ostringstream ss;
        ss << "stream dump: unsupported version " << int(version) << " (expected "
           << int(kStreamVersion) << ") in '" << path << "'";
        throw IoError(ss.str());
    }

    std::vector<ContactObservation> out;
    for (size_t index = 0;; ++index) {
        uint32_t len = 0;
        if (!detail::get_u32(in, len)) {
            if (in.eof()) break;
            throw IoError("stream dump: read failed in '" + path + "'");
        }
        auto truncated = [&](const char* what) {
            std::ostringstream ss;
            ss << "stream dump: truncated record " << index << " (" << what << ") in '"
               << path << "'";
            return IoError(ss.str());
        };
        if (len != kRecordBytes) throw truncated("bad length");
        ContactObservation o;
        uint32_t ts;
        uint8_t finger, noisy, truec, pad;
        if (!detail::get_u32(in, ts)) throw truncated("timestep");
        if (!detail::get_u8(in, finger) || !detail::get_u8(in, noisy) ||
            !detail::get_u8(in, truec) || !detail::get_u8(in, pad))
            throw truncated("labels");
        if (!detail::get_f64(in, o.point.x) || !detail::get_f64(in, o.point.y) ||
            !detail::get_f64(in, o.point.z))
            throw truncated("point");
        if (finger > 3) throw IoError("stream dump: invalid finger id in '" + path + "'");
        o.timestep = int(ts);
        o.finger = Finger(finger);
        o.noisy_label = noisy;
        o.true_label = truec;
        out.push_back(o);
    }
    return out;
}

}  // namespace sfmap
