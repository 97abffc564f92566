#include "meshfit/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace meshfit {

namespace {

// Hidden activation: squareplus, an algebraic softplus-style rectifier
// 0.5*(z + sqrt(z^2+1)). C-infinity like softplus but an order of magnitude
// cheaper, and its first two derivatives reuse the same square root.
double softplus(double z) { return 0.5 * (z + std::sqrt(z * z + 1.0)); }
double softplus_d(double z) { return 0.5 * (1.0 + z / std::sqrt(z * z + 1.0)); }
double softplus_dd(double z) {
    const double q = z * z + 1.0;
    return 0.5 / (q * std::sqrt(q));
}
double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

MatX softplus_mat(const MatX& z) { return z.unaryExpr([](double v) { return softplus(v); }); }
MatX softplus_d_mat(const MatX& z) { return z.unaryExpr([](double v) { return softplus_d(v); }); }
MatX softplus_dd_mat(const MatX& z) { return z.unaryExpr([](double v) { return softplus_dd(v); }); }
MatX sigmoid_mat(const MatX& z) { return z.unaryExpr([](double v) { return sigmoid(v); }); }

// Bilinear stencil of one plane: 4 nodes, weights, weight derivatives with
// respect to the plane's two domain axes.
struct PlaneStencil {
    int32_t node[4];
    double w[4];
    double dwa[4];
    double dwb[4];
};

struct PointStencil {
    PlaneStencil plane[3];
};

void build_stencil(const TriplaneField& f, const Vec3& p, PointStencil& st) {
    const int res = f.plane_res;
    const double lo = f.domain_lo, hi = f.domain_hi;
    const double scale = (res - 1) / (hi - lo);
    for (int pl = 0; pl < 3; ++pl) {
        const int ax0 = TriplaneField::kPlaneAxes[pl][0];
        const int ax1 = TriplaneField::kPlaneAxes[pl][1];
        const double a = p[ax0], b = p[ax1];
        const double u = (std::clamp(a, lo, hi) - lo) * scale;
        const double v = (std::clamp(b, lo, hi) - lo) * scale;
        const double dua = (a >= lo && a <= hi) ? scale : 0.0;
        const double dvb = (b >= lo && b <= hi) ? scale : 0.0;
        // Cell choice: ties at integer coordinates resolve to the lower cell.
        int iu = std::clamp(static_cast<int>(std::ceil(u)) - 1, 0, res - 2);
        int iv = std::clamp(static_cast<int>(std::ceil(v)) - 1, 0, res - 2);
        const double fu = u - iu, fv = v - iv;
        PlaneStencil& s = st.plane[pl];
        s.node[0] = iv * res + iu;
        s.node[1] = iv * res + iu + 1;
        s.node[2] = (iv + 1) * res + iu;
        s.node[3] = (iv + 1) * res + iu + 1;
        s.w[0] = (1 - fu) * (1 - fv);
        s.w[1] = fu * (1 - fv);
        s.w[2] = (1 - fu) * fv;
        s.w[3] = fu * fv;
        const double dw_du[4] = {-(1 - fv), (1 - fv), -fv, fv};
        const double dw_dv[4] = {-(1 - fu), -fu, (1 - fu), fu};
        for (int k = 0; k < 4; ++k) {
            s.dwa[k] = dw_du[k] * dua;
            s.dwb[k] = dw_dv[k] * dvb;
        }
    }
}

// Extended forward state for one chunk of points. Tangent matrices track
// derivatives with respect to the three spatial coordinates so that eikonal
// terms can be backpropagated to parameters.
struct ChunkTape {
    std::vector<PointStencil> stencils;
    MatX S;                              // C x m feature sums
    std::array<MatX, 3> T;               // d S / d x_j
    std::vector<MatX> Z;                 // pre-activations per layer
    std::vector<MatX> A;                 // post-activations (hidden layers)
    std::vector<std::array<MatX, 3>> TZ; // tangents of Z (hidden + output)
    std::vector<std::array<MatX, 3>> TA; // tangents of A (hidden)
    MatX out;                            // o x m
    std::array<MatX, 3> gout;            // d out / d x_j
};

void chunk_forward(const TriplaneField& f, std::span<const Vec3> pts, bool tangents,
                   ChunkTape& t) {
    const int m = static_cast<int>(pts.size());
    const int C = f.channels;
    const int L = f.decoder.num_layers();

    t.stencils.resize(m);
    t.S.setZero(C, m);
    if (tangents)
        for (int j = 0; j < 3; ++j) t.T[j].setZero(C, m);

    // Hot path: raw pointer loops over the column-major plane storage.
    for (int i = 0; i < m; ++i) {
        build_stencil(f, pts[i], t.stencils[i]);
        double* s_col = t.S.data() + static_cast<size_t>(i) * C;
        for (int pl = 0; pl < 3; ++pl) {
            const PlaneStencil& s = t.stencils[i].plane[pl];
            const double* plane = f.planes[pl].data();
            const int ax0 = TriplaneField::kPlaneAxes[pl][0];
            const int ax1 = TriplaneField::kPlaneAxes[pl][1];
            double* ta_col = tangents ? t.T[ax0].data() + static_cast<size_t>(i) * C : nullptr;
            double* tb_col = tangents ? t.T[ax1].data() + static_cast<size_t>(i) * C : nullptr;
            for (int k = 0; k < 4; ++k) {
                const double* node = plane + static_cast<size_t>(s.node[k]) * C;
                const double w = s.w[k];
                for (int c = 0; c < C; ++c) s_col[c] += w * node[c];
                if (tangents) {
                    const double da = s.dwa[k], db = s.dwb[k];
                    for (int c = 0; c < C; ++c) {
                        ta_col[c] += da * node[c];
                        tb_col[c] += db * node[c];
                    }
                }
            }
        }
    }

    t.Z.resize(L);
    t.A.assign(L > 1 ? L - 1 : 0, MatX());
    if (tangents) {
        t.TZ.resize(L);
        t.TA.assign(L > 1 ? L - 1 : 0, std::array<MatX, 3>());
    }

    const MatX* a_in = &t.S;
    const std::array<MatX, 3>* ta_in = tangents ? &t.T : nullptr;
    for (int l = 0; l < L; ++l) {
        t.Z[l] = f.decoder.weights[l] * (*a_in);
        t.Z[l].colwise() += f.decoder.biases[l];
        if (tangents)
            for (int j = 0; j < 3; ++j) t.TZ[l][j] = f.decoder.weights[l] * (*ta_in)[j];
        if (l < L - 1) {
            t.A[l] = softplus_mat(t.Z[l]);
            if (tangents) {
                MatX d = softplus_d_mat(t.Z[l]);
                for (int j = 0; j < 3; ++j) t.TA[l][j] = d.cwiseProduct(t.TZ[l][j]);
                ta_in = &t.TA[l];
            }
            a_in = &t.A[l];
        }
    }

    if (f.decoder.output == OutputKind::Sigmoid) {
        t.out = sigmoid_mat(t.Z[L - 1]);
        if (tangents) {
            MatX d = t.out.cwiseProduct(MatX::Ones(t.out.rows(), t.out.cols()) - t.out);
            for (int j = 0; j < 3; ++j) t.gout[j] = d.cwiseProduct(t.TZ[L - 1][j]);
        }
    } else {
        t.out = t.Z[L - 1];
        if (tangents)
            for (int j = 0; j < 3; ++j) t.gout[j] = t.TZ[L - 1][j];
    }
}

// Reverse pass over chunk_forward. value_bar is the adjoint of `out`,
// grad_bar (optional) the adjoint of `gout`. Accumulates into g.
void chunk_backward(const TriplaneField& f, const ChunkTape& t, const MatX& value_bar,
                    const std::array<MatX, 3>* grad_bar, FieldGrads& g) {
    const int L = f.decoder.num_layers();
    const bool tangents = grad_bar != nullptr;

    MatX z_bar;
    std::array<MatX, 3> tz_bar;
    if (f.decoder.output == OutputKind::Sigmoid) {
        MatX d = t.out.cwiseProduct(MatX::Ones(t.out.rows(), t.out.cols()) - t.out);
        z_bar = d.cwiseProduct(value_bar);
        if (tangents) {
            // d/dz of (sigma'(z) * tz): sigma''(z) tz adj + sigma'(z) tz_bar
            MatX dd = d.cwiseProduct(MatX::Ones(t.out.rows(), t.out.cols()) - 2.0 * t.out);
            for (int j = 0; j < 3; ++j) {
                z_bar += dd.cwiseProduct(t.TZ[L - 1][j]).cwiseProduct((*grad_bar)[j]);
                tz_bar[j] = d.cwiseProduct((*grad_bar)[j]);
            }
        }
    } else {
        z_bar = value_bar;
        if (tangents)
            for (int j = 0; j < 3; ++j) tz_bar[j] = (*grad_bar)[j];
    }

    MatX a_bar;
    std::array<MatX, 3> ta_bar;
    for (int l = L - 1; l >= 0; --l) {
        const MatX& a_in = (l == 0) ? t.S : t.A[l - 1];
        g.weights[l].noalias() += z_bar * a_in.transpose();
        g.biases[l] += z_bar.rowwise().sum();
        if (tangents) {
            const std::array<MatX, 3>& ta_in = (l == 0) ? t.T : t.TA[l - 1];
            for (int j = 0; j < 3; ++j)
                g.weights[l].noalias() += tz_bar[j] * ta_in[j].transpose();
        }
        a_bar.noalias() = f.decoder.weights[l].transpose() * z_bar;
        if (tangents)
            for (int j = 0; j < 3; ++j)
                ta_bar[j].noalias() = f.decoder.weights[l].transpose() * tz_bar[j];
        if (l > 0) {
            MatX d1 = softplus_d_mat(t.Z[l - 1]);
            z_bar = d1.cwiseProduct(a_bar);
            if (tangents) {
                MatX d2 = softplus_dd_mat(t.Z[l - 1]);
                for (int j = 0; j < 3; ++j) {
                    z_bar += d2.cwiseProduct(t.TZ[l - 1][j]).cwiseProduct(ta_bar[j]);
                    tz_bar[j] = d1.cwiseProduct(ta_bar[j]);
                }
            }
        }
    }

    // Scatter the feature adjoints into the plane grids (raw loops, as in
    // the forward gather).
    const int m = static_cast<int>(t.stencils.size());
    const int C = static_cast<int>(a_bar.rows());
    for (int i = 0; i < m; ++i) {
        const double* ab_col = a_bar.data() + static_cast<size_t>(i) * C;
        for (int pl = 0; pl < 3; ++pl) {
            const PlaneStencil& s = t.stencils[i].plane[pl];
            double* plane = g.planes[pl].data();
            const int ax0 = TriplaneField::kPlaneAxes[pl][0];
            const int ax1 = TriplaneField::kPlaneAxes[pl][1];
            const double* ta_col =
                tangents ? ta_bar[ax0].data() + static_cast<size_t>(i) * C : nullptr;
            const double* tb_col =
                tangents ? ta_bar[ax1].data() + static_cast<size_t>(i) * C : nullptr;
            for (int k = 0; k < 4; ++k) {
                double* node = plane + static_cast<size_t>(s.node[k]) * C;
                const double w = s.w[k];
                for (int c = 0; c < C; ++c) node[c] += w * ab_col[c];
                if (tangents) {
                    const double da = s.dwa[k], db = s.dwb[k];
                    for (int c = 0; c < C; ++c) node[c] += da * ta_col[c] + db * tb_col[c];
                }
            }
        }
    }
}

constexpr int64_t kChunk = 2048;

}  // namespace

// ---------------------------------------------------------------------------
// MlpParams / TriplaneField / FieldGrads
// ---------------------------------------------------------------------------

void MlpParams::validate() const {
    if (weights.empty() || weights.size() != biases.size())
        throw InputError("decoder: empty or mismatched layer lists");
    for (size_t l = 0; l < weights.size(); ++l) {
        if (biases[l].size() != weights[l].rows())
            throw InputError("decoder: bias width mismatch at layer " + std::to_string(l));
        if (l > 0 && weights[l].cols() != weights[l - 1].rows())
            throw InputError("decoder: layer shapes do not compose at layer " + std::to_string(l));
        if (!weights[l].allFinite() || !biases[l].allFinite())
            throw InputError("decoder: non-finite parameters");
    }
}

MlpParams MlpParams::random(const std::vector<int>& widths, OutputKind out, uint64_t seed) {
    if (widths.size() < 2) throw InputError("decoder: need at least input and output widths");
    MlpParams p;
    p.output = out;
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
        Rng rng(hash_combine(seed, 0x11d + l));
        const int fan_in = widths[l], fan_out = widths[l + 1];
        const double std_dev = std::sqrt(2.0 / (fan_in + fan_out));
        MatX w(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r)
            for (int c = 0; c < fan_in; ++c) w(r, c) = std_dev * rng.normal();
        p.weights.push_back(std::move(w));
        p.biases.push_back(VecX::Zero(fan_out));
    }
    return p;
}

int64_t TriplaneField::param_count() const {
    int64_t n = 3LL * channels * plane_res * plane_res;
    for (size_t l = 0; l < decoder.weights.size(); ++l)
        n += decoder.weights[l].size() + decoder.biases[l].size();
    return n;
}

TriplaneField TriplaneField::create(int plane_res, int channels, const std::vector<int>& hidden,
                                    OutputKind out, int out_width, uint64_t seed) {
    if (plane_res < 2) throw InputError("triplane: plane_res must be >= 2");
    if (channels < 1) throw InputError("triplane: channels must be >= 1");
    TriplaneField f;
    f.plane_res = plane_res;
    f.channels = channels;
    std::vector<int> widths;
    widths.push_back(channels);
    for (int h : hidden) widths.push_back(h);
    widths.push_back(out_width);
    f.decoder = MlpParams::random(widths, out, hash_combine(seed, 0xdec0de));
    for (int pl = 0; pl < 3; ++pl) {
        Rng rng(hash_combine(seed, 0x9a0 + pl));
        f.planes[pl].resize(channels, plane_res * plane_res);
        for (int n = 0; n < plane_res * plane_res; ++n)
            for (int c = 0; c < channels; ++c) f.planes[pl](c, n) = 0.05 * rng.normal();
    }
    return f;
}

void FieldGrads::init_like(const TriplaneField& f) {
    for (int pl = 0; pl < 3; ++pl) planes[pl].setZero(f.channels, f.plane_res * f.plane_res);
    weights.resize(f.decoder.weights.size());
    biases.resize(f.decoder.biases.size());
    for (size_t l = 0; l < weights.size(); ++l) {
        weights[l].setZero(f.decoder.weights[l].rows(), f.decoder.weights[l].cols());
        biases[l].setZero(f.decoder.biases[l].size());
    }
}

void FieldGrads::zero() {
    for (auto& p : planes) p.setZero();
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
}

void FieldGrads::add(const FieldGrads& o) {
    for (int pl = 0; pl < 3; ++pl) planes[pl] += o.planes[pl];
    for (size_t l = 0; l < weights.size(); ++l) {
        weights[l] += o.weights[l];
        biases[l] += o.biases[l];
    }
}

void FieldGrads::scale(double s) {
    for (auto& p : planes) p *= s;
    for (auto& w : weights) w *= s;
    for (auto& b : biases) b *= s;
}

double FieldGrads::dot(const FieldGrads& o) const {
    double d = 0;
    for (int pl = 0; pl < 3; ++pl) d += planes[pl].cwiseProduct(o.planes[pl]).sum();
    for (size_t l = 0; l < weights.size(); ++l) {
        d += weights[l].cwiseProduct(o.weights[l]).sum();
        d += biases[l].dot(o.biases[l]);
    }
    return d;
}

// ---------------------------------------------------------------------------
// SdfGrid sampling
// ---------------------------------------------------------------------------

namespace {
// Per-axis cell/fraction with lower-cell ties, clamped.
inline void grid_cell(double x, double lo, double hi, int n, int& i0, double& fx, double& dx) {
    const double scale = (n - 1) / (hi - lo);
    const double u = (std::clamp(x, lo, hi) - lo) * scale;
    i0 = std::clamp(static_cast<int>(std::ceil(u)) - 1, 0, n - 2);
    fx = u - i0;
    dx = (x >= lo && x <= hi) ? scale : 0.0;
}
}  // namespace

double SdfGrid::sample(const Vec3& p) const {
    int i, j, k;
    double fx, fy, fz, dx, dy, dz;
    grid_cell(p.x(), bbox_lo.x(), bbox_hi.x(), resolution, i, fx, dx);
    grid_cell(p.y(), bbox_lo.y(), bbox_hi.y(), resolution, j, fy, dy);
    grid_cell(p.z(), bbox_lo.z(), bbox_hi.z(), resolution, k, fz, dz);
    double c00 = at(i, j, k) * (1 - fx) + at(i + 1, j, k) * fx;
    double c10 = at(i, j + 1, k) * (1 - fx) + at(i + 1, j + 1, k) * fx;
    double c01 = at(i, j, k + 1) * (1 - fx) + at(i + 1, j, k + 1) * fx;
    double c11 = at(i, j + 1, k + 1) * (1 - fx) + at(i + 1, j + 1, k + 1) * fx;
    double c0 = c00 * (1 - fy) + c10 * fy;
    double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
}

Vec3 SdfGrid::gradient(const Vec3& p) const {
    int i, j, k;
    double fx, fy, fz, dx, dy, dz;
    grid_cell(p.x(), bbox_lo.x(), bbox_hi.x(), resolution, i, fx, dx);
    grid_cell(p.y(), bbox_lo.y(), bbox_hi.y(), resolution, j, fy, dy);
    grid_cell(p.z(), bbox_lo.z(), bbox_hi.z(), resolution, k, fz, dz);
    const double v000 = at(i, j, k), v100 = at(i + 1, j, k);
    const double v010 = at(i, j + 1, k), v110 = at(i + 1, j + 1, k);
    const double v001 = at(i, j, k + 1), v101 = at(i + 1, j, k + 1);
    const double v011 = at(i, j + 1, k + 1), v111 = at(i + 1, j + 1, k + 1);
    double gx = (v100 - v000) * (1 - fy) * (1 - fz) + (v110 - v010) * fy * (1 - fz) +
                (v101 - v001) * (1 - fy) * fz + (v111 - v011) * fy * fz;
    double gy = (v010 - v000) * (1 - fx) * (1 - fz) + (v110 - v100) * fx * (1 - fz) +
                (v011 - v001) * (1 - fx) * fz + (v111 - v101) * fx * fz;
    double gz = (v001 - v000) * (1 - fx) * (1 - fy) + (v101 - v100) * fx * (1 - fy) +
                (v011 - v010) * (1 - fx) * fy + (v111 - v110) * fx * fy;
    return Vec3(gx * dx, gy * dy, gz * dz);
}

// ---------------------------------------------------------------------------
// Analytic shapes
// ---------------------------------------------------------------------------

AnalyticShape AnalyticShape::parse(const std::string& spec) {
    AnalyticShape s;
    auto colon = spec.find(':');
    std::string name = spec.substr(0, colon);
    std::string args = colon == std::string::npos ? "" : spec.substr(colon + 1);
    try {
        if (name == "sphere") {
            s.kind = Kind::Sphere;
            s.a = args.empty() ? 0.5 : std::stod(args);
        } else if (name == "box") {
            s.kind = Kind::Box;
            s.a = args.empty() ? 0.4 : std::stod(args);
        } else if (name == "torus") {
            s.kind = Kind::Torus;
            auto comma = args.find(',');
            if (comma == std::string::npos) throw InputError("torus needs R,r");
            s.a = std::stod(args.substr(0, comma));
            s.b = std::stod(args.substr(comma + 1));
        } else {
            throw InputError("unknown shape '" + name + "' (expected sphere|box|torus)");
        }
    } catch (const std::invalid_argument&) {
        throw InputError("bad shape parameters in '" + spec + "'");
    }
    return s;
}

double analytic_sdf(const AnalyticShape& shape, const Vec3& p) {
    switch (shape.kind) {
        case AnalyticShape::Kind::Sphere: {
            if (shape.a <= 0) throw InputError("sphere radius must be positive");
            return p.norm() - shape.a;
        }
        case AnalyticShape::Kind::Box: {
            if (shape.a <= 0) throw InputError("box half-extent must be positive");
            Vec3 q = p.cwiseAbs() - Vec3::Constant(shape.a);
            double outside = q.cwiseMax(0.0).norm();
            double inside = std::min(q.maxCoeff(), 0.0);
            return outside + inside;
        }
        case AnalyticShape::Kind::Torus: {
            if (shape.a <= 0 || shape.b <= 0) throw InputError("torus radii must be positive");
            double ring = std::sqrt(p.x() * p.x() + p.z() * p.z()) - shape.a;
            return std::sqrt(ring * ring + p.y() * p.y()) - shape.b;
        }
    }
    return 0.0;
}

SdfGrid bake_analytic_grid(const AnalyticShape& shape, int resolution, const Vec3& lo,
                           const Vec3& hi) {
    if (resolution < 2) throw InputError("grid resolution must be >= 2");
    SdfGrid g(resolution, lo, hi);
    for (int k = 0; k < resolution; ++k)
        for (int j = 0; j < resolution; ++j)
            for (int i = 0; i < resolution; ++i)
                g.at(i, j, k) = analytic_sdf(shape, g.lattice_point(i, j, k));
    return g;
}

// ---------------------------------------------------------------------------
// Queries
// ---------------------------------------------------------------------------

MatX mlp_forward(const MlpParams& mlp, const MatX& input) {
    mlp.validate();
    if (input.rows() != mlp.input_width())
        throw InputError("mlp_forward: input width mismatch");
    MatX a = input;
    const int L = mlp.num_layers();
    for (int l = 0; l < L; ++l) {
        MatX z = mlp.weights[l] * a;
        z.colwise() += mlp.biases[l];
        a = (l < L - 1) ? softplus_mat(z) : std::move(z);
    }
    if (mlp.output == OutputKind::Sigmoid) a = sigmoid_mat(a);
    return a;
}

VecX sample_triplane(const TriplaneField& field, const Vec3& p) {
    PointStencil st;
    build_stencil(field, p, st);
    VecX s = VecX::Zero(field.channels);
    for (int pl = 0; pl < 3; ++pl)
        for (int k = 0; k < 4; ++k)
            s += st.plane[pl].w[k] * field.planes[pl].col(st.plane[pl].node[k]);
    return s;
}

double query_sdf(const TriplaneField& field, const Vec3& p) {
    field.decoder.validate();
    if (field.decoder.output_width() != 1)
        throw InputError("query_sdf: field has no scalar head");
    if (field.decoder.input_width() != field.channels)
        throw InputError("query_sdf: decoder input width does not match channels");
    ChunkTape t;
    chunk_forward(field, std::span<const Vec3>(&p, 1), false, t);
    return t.out(0, 0);
}

Vec3 sdf_gradient(const TriplaneField& field, const Vec3& p) {
    ChunkTape t;
    chunk_forward(field, std::span<const Vec3>(&p, 1), true, t);
    return Vec3(t.gout[0](0, 0), t.gout[1](0, 0), t.gout[2](0, 0));
}

MatX field_eval(const TriplaneField& field, std::span<const Vec3> pts, int threads) {
    const int64_t n = static_cast<int64_t>(pts.size());
    MatX out(field.decoder.output_width(), n);
    parallel_chunks(n, kChunk, threads, [&](int64_t b, int64_t e) {
        ChunkTape t;
        chunk_forward(field, pts.subspan(b, e - b), false, t);
        out.middleCols(b, e - b) = t.out;
    });
    return out;
}

void field_eval_with_gradients(const TriplaneField& field, std::span<const Vec3> pts,
                               MatX& values, std::array<MatX, 3>& dvalues, int threads) {
    const int64_t n = static_cast<int64_t>(pts.size());
    const int o = field.decoder.output_width();
    values.resize(o, n);
    for (int j = 0; j < 3; ++j) dvalues[j].resize(o, n);
    parallel_chunks(n, kChunk, threads, [&](int64_t b, int64_t e) {
        ChunkTape t;
        chunk_forward(field, pts.subspan(b, e - b), true, t);
        values.middleCols(b, e - b) = t.out;
        for (int j = 0; j < 3; ++j) dvalues[j].middleCols(b, e - b) = t.gout[j];
    });
}

void field_backprop(const TriplaneField& field, std::span<const Vec3> pts, const MatX& value_bar,
                    const std::array<MatX, 3>* dvalue_bar, FieldGrads& grads, int threads) {
    const int64_t n = static_cast<int64_t>(pts.size());
    if (n == 0) return;
    const int64_t num_chunks = (n + kChunk - 1) / kChunk;
    threads = std::max<int>(1, static_cast<int>(std::min<int64_t>(threads, num_chunks)));

    std::vector<FieldGrads> partial(threads);
    for (auto& p : partial) p.init_like(field);

    parallel_workers(threads, [&](int w) {
        ChunkTape t;
        for (int64_t c = w; c < num_chunks; c += threads) {
            const int64_t b = c * kChunk, e = std::min(n, (c + 1) * kChunk);
            chunk_forward(field, pts.subspan(b, e - b), dvalue_bar != nullptr, t);
            MatX vb = value_bar.middleCols(b, e - b);
            if (dvalue_bar) {
                std::array<MatX, 3> gb;
                for (int j = 0; j < 3; ++j) gb[j] = (*dvalue_bar)[j].middleCols(b, e - b);
                chunk_backward(field, t, vb, &gb, partial[w]);
            } else {
                chunk_backward(field, t, vb, nullptr, partial[w]);
            }
        }
    });
    for (auto& p : partial) grads.add(p);
}

SdfGrid bake_sdf_grid(const TriplaneField& field, int resolution, int threads) {
    if (resolution < 2) throw InputError("bake_sdf_grid: resolution must be >= 2");
    SdfGrid g(resolution, Vec3::Constant(field.domain_lo), Vec3::Constant(field.domain_hi));
    const int64_t n = static_cast<int64_t>(g.values.size());
    std::vector<Vec3> pts(n);
    const int N = resolution;
    for (int k = 0; k < N; ++k)
        for (int j = 0; j < N; ++j)
            for (int i = 0; i < N; ++i) pts[g.index(i, j, k)] = g.lattice_point(i, j, k);
    MatX vals = field_eval(field, pts, threads);
    for (int64_t i = 0; i < n; ++i) g.values[i] = vals(0, i);
    return g;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

std::vector<Vec3> eikonal_sample_points(const TriplaneField& field, int64_t count, uint64_t seed) {
    std::vector<Vec3> pts(count);
    for (int64_t i = 0; i < count; ++i) {
        Rng rng(hash_combine(seed, 0xe1c0 + static_cast<uint64_t>(i)));
        pts[i] = Vec3(rng.uniform(field.domain_lo, field.domain_hi),
                      rng.uniform(field.domain_lo, field.domain_hi),
                      rng.uniform(field.domain_lo, field.domain_hi));
    }
    return pts;
}

double eikonal_loss_at(const TriplaneField& field, std::span<const Vec3> pts, int threads) {
    const int64_t n = static_cast<int64_t>(pts.size());
    if (n == 0) throw InputError("eikonal_loss: need at least one sample");
    const int64_t num_chunks = (n + kChunk - 1) / kChunk;
    std::vector<double> partial(num_chunks, 0.0);
    parallel_chunks(n, kChunk, threads, [&](int64_t b, int64_t e) {
        ChunkTape t;
        chunk_forward(field, pts.subspan(b, e - b), true, t);
        double acc = 0;
        for (int64_t i = 0; i < e - b; ++i) {
            double gn = std::sqrt(t.gout[0](0, i) * t.gout[0](0, i) +
                                  t.gout[1](0, i) * t.gout[1](0, i) +
                                  t.gout[2](0, i) * t.gout[2](0, i));
            acc += (gn - 1.0) * (gn - 1.0);
        }
        partial[b / kChunk] = acc;
    });
    double total = 0;
    for (double p : partial) total += p;
    return total / static_cast<double>(n);
}

double eikonal_loss(const TriplaneField& field, int64_t sample_count, uint64_t seed,
                    int threads) {
    if (sample_count < 1) throw InputError("eikonal_loss: sample_count must be >= 1");
    auto pts = eikonal_sample_points(field, sample_count, seed);
    return eikonal_loss_at(field, pts, threads);
}

double eikonal_loss_grid(const SdfGrid& grid, int64_t sample_count, uint64_t seed) {
    if (sample_count < 1) throw InputError("eikonal_loss: sample_count must be >= 1");
    double acc = 0;
    for (int64_t i = 0; i < sample_count; ++i) {
        Rng rng(hash_combine(seed, 0xe1c0 + static_cast<uint64_t>(i)));
        Vec3 p(rng.uniform(grid.bbox_lo.x(), grid.bbox_hi.x()),
               rng.uniform(grid.bbox_lo.y(), grid.bbox_hi.y()),
               rng.uniform(grid.bbox_lo.z(), grid.bbox_hi.z()));
        double gn = grid.gradient(p).norm();
        acc += (gn - 1.0) * (gn - 1.0);
    }
    return acc / static_cast<double>(sample_count);
}

double eikonal_loss_backprop(const TriplaneField& field, std::span<const Vec3> pts,
                             FieldGrads& grads, int threads) {
    const int64_t n = static_cast<int64_t>(pts.size());
    if (n == 0) throw InputError("eikonal_loss: need at least one sample");
    const int64_t num_chunks = (n + kChunk - 1) / kChunk;
    threads = std::max<int>(1, static_cast<int>(std::min<int64_t>(threads, num_chunks)));

    std::vector<double> partial_loss(num_chunks, 0.0);
    std::vector<FieldGrads> partial(threads);
    for (auto& p : partial) p.init_like(field);

    parallel_workers(threads, [&](int w) {
        ChunkTape t;
        for (int64_t c = w; c < num_chunks; c += threads) {
            const int64_t b = c * kChunk, e = std::min(n, (c + 1) * kChunk);
            const int64_t m = e - b;
            chunk_forward(field, pts.subspan(b, m), true, t);
            MatX vb = MatX::Zero(1, m);
            std::array<MatX, 3> gb;
            for (int j = 0; j < 3; ++j) gb[j].setZero(1, m);
            double acc = 0;
            for (int64_t i = 0; i < m; ++i) {
                Vec3 gvec(t.gout[0](0, i), t.gout[1](0, i), t.gout[2](0, i));
                double gn = gvec.norm();
                acc += (gn - 1.0) * (gn - 1.0);
                if (gn > 1e-12) {
                    Vec3 gl = (2.0 * (gn - 1.0) / (gn * static_cast<double>(n))) * gvec;
                    for (int j = 0; j < 3; ++j) gb[j](0, i) = gl[j];
                }
            }
            partial_loss[c] = acc;
            chunk_backward(field, t, vb, &gb, partial[w]);
        }
    });
    for (auto& p : partial) grads.add(p);
    double total = 0;
    for (double p : partial_loss) total += p;
    return total / static_cast<double>(n);
}

double sdf_grid_loss(const SdfGrid& pred, const SdfGrid& gt) {
    if (pred.resolution != gt.resolution)
        throw InputError("sdf_grid_loss: resolution mismatch");
    if (!pred.bbox_lo.isApprox(gt.bbox_lo) || !pred.bbox_hi.isApprox(gt.bbox_hi))
        throw InputError("sdf_grid_loss: bbox mismatch");
    double acc = 0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        double d = pred.values[i] - gt.values[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.values.size());
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw InputError("unexpected end of file");
    return v;
}

}  // namespace

void save_sdf_grid(const SdfGrid& grid, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open '" + path + "' for writing");
    os.write("DSDF", 4);
    write_pod<uint32_t>(os, 1);
    write_pod<uint32_t>(os, static_cast<uint32_t>(grid.resolution));
    for (int a = 0; a < 3; ++a) write_pod<double>(os, grid.bbox_lo[a]);
    for (int a = 0; a < 3; ++a) write_pod<double>(os, grid.bbox_hi[a]);
    for (double v : grid.values) write_pod<float>(os, static_cast<float>(v));
    if (!os) throw InputError("write failed for '" + path + "'");
}

SdfGrid load_sdf_grid(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "DSDF", 4) != 0)
        throw InputError("'" + path + "' is not an SDF grid file (bad magic)");
    uint32_t version = read_pod<uint32_t>(is);
    if (version != 1) throw InputError("unsupported SDF grid version");
    uint32_t n = read_pod<uint32_t>(is);
    if (n < 2 || n > 4096) throw InputError("bad SDF grid resolution");
    SdfGrid g;
    g.resolution = static_cast<int>(n);
    for (int a = 0; a < 3; ++a) g.bbox_lo[a] = read_pod<double>(is);
    for (int a = 0; a < 3; ++a) g.bbox_hi[a] = read_pod<double>(is);
    g.values.resize(static_cast<size_t>(n) * n * n);
    for (auto& v : g.values) v = read_pod<float>(is);
    return g;
}

void save_triplane(const TriplaneField& field, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open '" + path + "' for writing");
    os.write("TPFC", 4);
    write_pod<uint32_t>(os, 1);
    write_pod<uint32_t>(os, static_cast<uint32_t>(field.plane_res));
    write_pod<uint32_t>(os, static_cast<uint32_t>(field.channels));
    write_pod<double>(os, field.domain_lo);
    write_pod<double>(os, field.domain_hi);
    write_pod<uint32_t>(os, static_cast<uint32_t>(field.decoder.num_layers()));
    write_pod<uint32_t>(os, field.decoder.output == OutputKind::Sigmoid ? 1u : 0u);
    for (const auto& w : field.decoder.weights) {
        write_pod<uint32_t>(os, static_cast<uint32_t>(w.rows()));
        write_pod<uint32_t>(os, static_cast<uint32_t>(w.cols()));
    }
    for (int pl = 0; pl < 3; ++pl)
        os.write(reinterpret_cast<const char*>(field.planes[pl].data()),
                 static_cast<std::streamsize>(sizeof(double) * field.planes[pl].size()));
    for (size_t l = 0; l < field.decoder.weights.size(); ++l) {
        os.write(reinterpret_cast<const char*>(field.decoder.weights[l].data()),
                 static_cast<std::streamsize>(sizeof(double) * field.decoder.weights[l].size()));
        os.write(reinterpret_cast<const char*>(field.decoder.biases[l].data()),
                 static_cast<std::streamsize>(sizeof(double) * field.decoder.biases[l].size()));
    }
    if (!os) throw InputError("write failed for '" + path + "'");
}

TriplaneField load_triplane(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "TPFC", 4) != 0)
        throw InputError("'" + path + "' is not a triplane checkpoint (bad magic)");
    if (read_pod<uint32_t>(is) != 1) throw InputError("unsupported checkpoint version");
    TriplaneField f;
    f.plane_res = static_cast<int>(read_pod<uint32_t>(is));
    f.channels = static_cast<int>(read_pod<uint32_t>(is));
    f.domain_lo = read_pod<double>(is);
    f.domain_hi = read_pod<double>(is);
    uint32_t layers = read_pod<uint32_t>(is);
    f.decoder.output = read_pod<uint32_t>(is) == 1 ? OutputKind::Sigmoid : OutputKind::Linear;
    if (f.plane_res < 2 || f.channels < 1 || layers < 1 || layers > 64)
        throw InputError("bad checkpoint header");
    std::vector<std::pair<uint32_t, uint32_t>> shapes(layers);
    for (auto& s : shapes) {
        s.first = read_pod<uint32_t>(is);
        s.second = read_pod<uint32_t>(is);
    }
    for (int pl = 0; pl < 3; ++pl) {
        f.planes[pl].resize(f.channels, f.plane_res * f.plane_res);
        is.read(reinterpret_cast<char*>(f.planes[pl].data()),
                static_cast<std::streamsize>(sizeof(double) * f.planes[pl].size()));
    }
    for (auto& s : shapes) {
        MatX w(s.first, s.second);
        is.read(reinterpret_cast<char*>(w.data()),
                static_cast<std::streamsize>(sizeof(double) * w.size()));
        VecX b(s.first);
        is.read(reinterpret_cast<char*>(b.data()),
                static_cast<std::streamsize>(sizeof(double) * b.size()));
        f.decoder.weights.push_back(std::move(w));
        f.decoder.biases.push_back(std::move(b));
    }
    if (!is) throw InputError("unexpected end of file in '" + path + "'");
    f.decoder.validate();
    return f;
}

}  // namespace meshfit
