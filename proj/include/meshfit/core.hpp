#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace meshfit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;
using Vec3i = Eigen::Vector3i;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

/// Thrown on malformed inputs (bad files, shape mismatches, invalid configs).
class InputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG.
//
// All randomness in the library flows through counter-based splitmix64
// streams: a (seed, counter) pair fully determines every draw, independent
// of call interleaving, platform, and thread schedule.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Mixes a seed with stream identifiers; use to derive independent substreams
/// (e.g. per iteration, per pixel) from one user-facing seed.
inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + b + (a << 6) + (a >> 2)));
}

/// Stateful stream over splitmix64. Cheap to construct; construct one per
/// logical stream rather than sharing across threads.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0x853c49e6748fea9bULL)) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    /// Uniform in [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    Vec3 normal3() {
        Vec3 v;
        v.x() = normal();
        v.y() = normal();
        v.z() = normal();
        return v;
    }

  private:
    uint64_t state_;
};

// ---------------------------------------------------------------------------
// Deterministic parallelism.
//
// Work is split into fixed-size chunks whose boundaries do not depend on the
// thread count; pure "map" loops therefore produce identical output for any
// thread count. Reductions must be done per chunk and combined in chunk
// order by the caller when bitwise reproducibility across thread counts is
// needed; combining per *thread* is reproducible only at a fixed count.
// ---------------------------------------------------------------------------

/// Number of worker threads implied by a request: 0 = auto (env
/// MESHFIT_THREADS, else hardware), otherwise the request itself.
int resolve_threads(int requested);

/// Runs fn(begin, end) over [0,n) in chunks of chunk_size, on `threads`
/// workers (1 = serial, in-order).
void parallel_chunks(int64_t n, int64_t chunk_size, int threads,
                     const std::function<void(int64_t, int64_t)>& fn);

/// Runs fn(worker_id) on `threads` workers. Used with strided chunk
/// assignment when per-worker accumulators must merge in a fixed order.
void parallel_workers(int threads, const std::function<void(int)>& fn);

// ---------------------------------------------------------------------------
// Image: dense row-major H x W x C of doubles.
// ---------------------------------------------------------------------------

struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<size_t>(h) * w * c, fill) {}

    double& at(int y, int x, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    Vec3 pixel3(int y, int x) const {
        size_t i = (static_cast<size_t>(y) * width + x) * channels;
        return Vec3(data[i], data[i + 1], data[i + 2]);
    }
    void set_pixel3(int y, int x, const Vec3& v) {
        size_t i = (static_cast<size_t>(y) * width + x) * channels;
        data[i] = v.x();
        data[i + 1] = v.y();
        data[i + 2] = v.z();
    }

    size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
    bool empty() const { return data.empty(); }
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b))
        throw InputError(std::string(what) + ": image shape mismatch");
}

}  // namespace meshfit
