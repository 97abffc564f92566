#include "meshfit/metrics.hpp"

#include "ssim_common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace meshfit {

// ---------------------------------------------------------------------------
// KdTree3
// ---------------------------------------------------------------------------

KdTree3::KdTree3(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    if (points_.empty()) throw InputError("KdTree3: empty point set");
    nodes_.reserve(2 * points_.size() / 8 + 8);
    root_ = build(0, static_cast<int>(points_.size()), 0);
}

int KdTree3::build(int begin, int end, int depth) {
    const int idx = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    if (end - begin <= 8) {
        nodes_[idx].begin = begin;
        nodes_[idx].end = end;
        return idx;
    }
    // Split on the widest axis at the median.
    Vec3 lo = points_[begin], hi = points_[begin];
    for (int i = begin + 1; i < end; ++i) {
        lo = lo.cwiseMin(points_[i]);
        hi = hi.cwiseMax(points_[i]);
    }
    int axis;
    (hi - lo).maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(points_.begin() + begin, points_.begin() + mid, points_.begin() + end,
                     [axis](const Vec3& a, const Vec3& b) { return a[axis] < b[axis]; });
    const double split = points_[mid][axis];
    const int left = build(begin, mid, depth + 1);
    const int right = build(mid, end, depth + 1);
    nodes_[idx].axis = axis;
    nodes_[idx].split = split;
    nodes_[idx].left = left;
    nodes_[idx].right = right;
    return idx;
}

void KdTree3::search(int node, const Vec3& q, double& best, int* best_index) const {
    const Node& n = nodes_[node];
    if (n.axis < 0) {
        for (int i = n.begin; i < n.end; ++i) {
            const double d = (points_[i] - q).squaredNorm();
            if (d < best) {
                best = d;
                if (best_index) *best_index = i;
            }
        }
        return;
    }
    const double delta = q[n.axis] - n.split;
    const int near = delta < 0 ? n.left : n.right;
    const int far = delta < 0 ? n.right : n.left;
    search(near, q, best, best_index);
    if (delta * delta < best) search(far, q, best, best_index);
}

double KdTree3::nearest_sq(const Vec3& query) const {
    double best = std::numeric_limits<double>::infinity();
    search(root_, query, best, nullptr);
    return best;
}

const Vec3& KdTree3::nearest_point(const Vec3& query) const {
    double best = std::numeric_limits<double>::infinity();
    int idx = 0;
    search(root_, query, best, &idx);
    return points_[idx];
}

// ---------------------------------------------------------------------------
// Surface sampling / alignment
// ---------------------------------------------------------------------------

std::vector<Vec3> sample_surface_points(const Mesh& mesh, int64_t count, uint64_t seed) {
    if (mesh.empty() || mesh.faces.empty())
        throw InputError("sample_surface_points: empty mesh");
    std::vector<double> cum(mesh.faces.size());
    double total = 0;
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        const Vec3 e1 = mesh.vertices[face[1]] - mesh.vertices[face[0]];
        const Vec3 e2 = mesh.vertices[face[2]] - mesh.vertices[face[0]];
        total += 0.5 * e1.cross(e2).norm();
        cum[f] = total;
    }
    if (total <= 0) throw InputError("sample_surface_points: zero-area mesh");

    std::vector<Vec3> pts(count);
    for (int64_t i = 0; i < count; ++i) {
        Rng rng(hash_combine(seed, 0x5a3f + static_cast<uint64_t>(i)));
        const double u = rng.uniform() * total;
        const size_t f = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
        const auto& face = mesh.faces[std::min(f, mesh.faces.size() - 1)];
        double b1 = rng.uniform(), b2 = rng.uniform();
        if (b1 + b2 > 1.0) {
            b1 = 1.0 - b1;
            b2 = 1.0 - b2;
        }
        pts[i] = mesh.vertices[face[0]] +
                 b1 * (mesh.vertices[face[1]] - mesh.vertices[face[0]]) +
                 b2 * (mesh.vertices[face[2]] - mesh.vertices[face[0]]);
    }
    return pts;
}

Mesh normalize_mesh(const Mesh& mesh) {
    if (mesh.empty()) throw InputError("normalize_mesh: empty mesh");
    Vec3 lo = mesh.vertices[0], hi = mesh.vertices[0];
    for (const Vec3& v : mesh.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    const double diag = (hi - lo).norm();
    if (diag < 1e-12) throw InputError("normalize_mesh: degenerate (zero-diagonal) mesh");
    const Vec3 center = 0.5 * (lo + hi);
    const double scale = 2.0 / diag;
    Mesh out = mesh;
    for (Vec3& v : out.vertices) v = (v - center) * scale;
    return out;  // normals are rotation-free under uniform scale; keep as-is
}

std::pair<Mesh, Mesh> align_meshes(const Mesh& pred, const Mesh& gt) {
    return {normalize_mesh(pred), normalize_mesh(gt)};
}

Mesh icp_refine(const Mesh& pred, const Mesh& gt, int iterations, int64_t samples,
                uint64_t seed) {
    std::vector<Vec3> src = sample_surface_points(pred, samples, hash_combine(seed, 1));
    const std::vector<Vec3> dst = sample_surface_points(gt, samples, hash_combine(seed, 2));
    const KdTree3 tree(dst);

    Mat3 total_r = Mat3::Identity();
    Vec3 total_t = Vec3::Zero();
    for (int it = 0; it < iterations; ++it) {
        Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
        std::vector<Vec3> match(src.size());
        for (size_t i = 0; i < src.size(); ++i) {
            match[i] = tree.nearest_point(src[i]);
            cs += src[i];
            cd += match[i];
        }
        cs /= static_cast<double>(src.size());
        cd /= static_cast<double>(src.size());
        Mat3 h = Mat3::Zero();
        for (size_t i = 0; i < src.size(); ++i)
            h += (src[i] - cs) * (match[i] - cd).transpose();
        Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Mat3 d = Mat3::Identity();
        d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
        const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
        const Vec3 t = cd - r * cs;
        double shift = t.norm() + (r - Mat3::Identity()).norm();
        for (auto& p : src) p = r * p + t;
        total_r = r * total_r;
        total_t = r * total_t + t;
        if (shift < 1e-9) break;
    }

    Mesh out = pred;
    for (auto& v : out.vertices) v = total_r * v + total_t;
    for (auto& n : out.vertex_normals) n = total_r * n;
    return out;
}

// ---------------------------------------------------------------------------
// Chamfer / F1
// ---------------------------------------------------------------------------

namespace {
double directional_mean(std::span<const Vec3> from, const KdTree3& to, int threads) {
    const int64_t n = static_cast<int64_t>(from.size());
    const int64_t chunk = 1024;
    const int64_t num_chunks = (n + chunk - 1) / chunk;
    std::vector<double> partial(num_chunks, 0.0);
    parallel_chunks(n, chunk, threads, [&](int64_t b, int64_t e) {
        double acc = 0;
        for (int64_t i = b; i < e; ++i) acc += std::sqrt(to.nearest_sq(from[i]));
        partial[b / chunk] = acc;
    });
    double total = 0;
    for (double p : partial) total += p;
    return total / static_cast<double>(n);
}
}  // namespace

double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b, int threads) {
    if (a.empty() || b.empty()) throw InputError("chamfer_distance: empty point set");
    KdTree3 ta(a), tb(b);
    return directional_mean(a, tb, threads) + directional_mean(b, ta, threads);
}

double chamfer_distance_bruteforce(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw InputError("chamfer_distance: empty point set");
    auto dir = [](std::span<const Vec3> from, std::span<const Vec3> to) {
        double acc = 0;
        for (const Vec3& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& q : to) best = std::min(best, (p - q).squaredNorm());
            acc += std::sqrt(best);
        }
        return acc / static_cast<double>(from.size());
    };
    return dir(a, b) + dir(b, a);
}

double f1_score(std::span<const Vec3> a, std::span<const Vec3> b, double tau, int threads) {
    if (a.empty() || b.empty()) throw InputError("f1_score: empty point set");
    if (!(tau > 0)) throw InputError("f1_score: tau must be positive");
    KdTree3 ta(a), tb(b);
    const double tau_sq = tau * tau;
    auto fraction_within = [&](std::span<const Vec3> from, const KdTree3& to) {
        int64_t hits = 0;
        for (const Vec3& p : from)
            if (to.nearest_sq(p) <= tau_sq) ++hits;
        return static_cast<double>(hits) / static_cast<double>(from.size());
    };
    const double precision = fraction_within(a, tb);
    const double recall = fraction_within(b, ta);
    if (precision + recall <= 0) return 0.0;
    (void)threads;
    return 2.0 * precision * recall / (precision + recall);
}

// ---------------------------------------------------------------------------
// Image metrics
// ---------------------------------------------------------------------------

double psnr(const Image& pred, const Image& gt, double cap) {
    require_same_shape(pred, gt, "psnr");
    double mse = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - gt.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(pred.data.size());
    if (mse <= 0) return cap;
    return std::min(cap, -10.0 * std::log10(mse));
}

double psnr_masked(const Image& pred, const Image& gt, const Image& mask, double cap) {
    require_same_shape(pred, gt, "psnr");
    if (mask.height != pred.height || mask.width != pred.width)
        throw InputError("psnr_masked: mask shape mismatch");
    double mse = 0;
    int64_t n = 0;
    for (int y = 0; y < pred.height; ++y)
        for (int x = 0; x < pred.width; ++x)
            if (mask.at(y, x) > 0.5)
                for (int c = 0; c < pred.channels; ++c) {
                    const double d = pred.at(y, x, c) - gt.at(y, x, c);
                    mse += d * d;
                    ++n;
                }
    if (n == 0) return cap;
    mse /= static_cast<double>(n);
    if (mse <= 0) return cap;
    return std::min(cap, -10.0 * std::log10(mse));
}

double ssim(const Image& pred, const Image& gt) {
    return ssim_detail::mean_ssim(pred, gt);
}

// ---------------------------------------------------------------------------
// Normal benchmark
// ---------------------------------------------------------------------------

NormalBenchStats normal_benchmark(std::span<const Image> pred_normals,
                                  std::span<const Image> gt_normals,
                                  std::span<const Image> masks) {
    if (pred_normals.size() != gt_normals.size() || pred_normals.size() != masks.size())
        throw InputError("normal_benchmark: image list length mismatch");
    std::vector<double> angles;
    for (size_t i = 0; i < pred_normals.size(); ++i) {
        const Image& p = pred_normals[i];
        const Image& g = gt_normals[i];
        const Image& m = masks[i];
        require_same_shape(p, g, "normal_benchmark");
        if (m.height != p.height || m.width != p.width)
            throw InputError("normal_benchmark: mask shape mismatch");
        for (int y = 0; y < p.height; ++y)
            for (int x = 0; x < p.width; ++x)
                if (m.at(y, x) > 0.5) {
                    const double d = std::clamp(p.pixel3(y, x).dot(g.pixel3(y, x)), -1.0, 1.0);
                    angles.push_back(rad_to_deg(std::acos(d)));
                }
    }
    if (angles.empty()) throw InputError("normal_benchmark: no foreground pixels");

    NormalBenchStats s;
    s.pixel_count = static_cast<int64_t>(angles.size());
    s.mean_deg = std::accumulate(angles.begin(), angles.end(), 0.0) /
                 static_cast<double>(angles.size());
    std::sort(angles.begin(), angles.end());
    const size_t n = angles.size();
    s.median_deg = (n % 2 == 1) ? angles[n / 2] : angles[n / 2 - 1];  // lower of the two
    auto pct_below = [&](double threshold) {
        const size_t c = std::lower_bound(angles.begin(), angles.end(), threshold) - angles.begin();
        return 100.0 * static_cast<double>(c) / static_cast<double>(n);
    };
    s.pct_below_11_25 = pct_below(11.25);
    s.pct_below_22_5 = pct_below(22.5);
    s.pct_below_30 = pct_below(30.0);
    return s;
}

}  // namespace meshfit
