#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace sfmap {

// ---------------------------------------------------------------------------
// Errors. The CLI maps ConfigError (and argument parsing) to exit code 1 and
// everything else to exit code 2.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Violated precondition or API contract.
struct ContractError : Error {
    using Error::Error;
};

/// Tensor shape mismatch; message names the offending axis.
struct DimensionError : ContractError {
    using ContractError::ContractError;
};

/// Out-of-range class index or element index.
struct IndexError : ContractError {
    using ContractError::ContractError;
};

/// Bad or unknown configuration content.
struct ConfigError : Error {
    using Error::Error;
};

/// Filesystem / serialization failure; message carries the path.
struct IoError : Error {
    using Error::Error;
};

/// Failure while executing a mapping or simulation run.
struct RunError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Small vector math (object-frame coordinates, meters). Scene/oracle math is
// done in double; the network consumes float.
// ---------------------------------------------------------------------------

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        double n = norm();
        return n > 0.0 ? *this / n : Vec3{0, 0, 0};
    }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Unit quaternion (w, x, y, z) for primitive poses.
struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    bool is_identity() const { return w == 1.0 && x == 0.0 && y == 0.0 && z == 0.0; }

    /// Rotate v by the inverse rotation (world -> local frame).
    Vec3 rotate_inverse(const Vec3& v) const {
        Quat c{w, -x, -y, -z};
        return c.rotate(v);
    }

    Vec3 rotate(const Vec3& v) const {
        Vec3 u{x, y, z};
        Vec3 t = 2.0 * u.cross(v);
        return v + w * t + u.cross(t);
    }
};

struct Box3 {
    Vec3 lo, hi;

    Vec3 center() const { return (lo + hi) * 0.5; }
    Vec3 extent() const { return hi - lo; }
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
               p.z >= lo.z && p.z <= hi.z;
    }
    Vec3 clamp(const Vec3& p) const {
        auto cl = [](double v, double a, double b) { return v < a ? a : (v > b ? b : v); };
        return {cl(p.x, lo.x, hi.x), cl(p.y, lo.y, hi.y), cl(p.z, lo.z, hi.z)};
    }
};

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 has a standardized sequence; the distribution
// helpers are hand-rolled so streams are reproducible independent of the
// standard library build.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}
    /// Independent sub-stream of a base seed (e.g. sim/train/eval streams).
    Rng(uint64_t seed, uint64_t stream) : gen_(splitmix64(seed ^ splitmix64(stream))) {}

    uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1).
    double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    float uniform_f(float a, float b) { return float(uniform(double(a), double(b))); }

    /// Uniform integer in [0, n), n > 0.
    uint64_t below(uint64_t n) {
        return uint64_t((static_cast<__uint128_t>(gen_()) * n) >> 64);
    }

    /// Standard normal via Box-Muller (second value cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // avoid log(0)
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    Vec3 normal3(double sigma) { return {sigma * normal(), sigma * normal(), sigma * normal()}; }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Material class enumeration used everywhere (fixed order).
enum MaterialClass : int { kPlastic = 0, kMetal = 1, kFabric = 2, kWood = 3 };

constexpr int kNumClasses = 4;

inline const char* material_name(int c) {
    switch (c) {
        case kPlastic: return "plastic";
        case kMetal: return "metal";
        case kFabric: return "fabric";
        case kWood: return "wood";
        default: return "unknown";
    }
}

}  // namespace sfmap
