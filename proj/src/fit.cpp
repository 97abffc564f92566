#include "meshfit/fit.hpp"

#include "meshfit/mesh_io.hpp"
#include "meshfit/shading.hpp"
#include "meshfit/texture.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace meshfit {

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void AdamState::init_like(const TriplaneField& f) {
    m.init_like(f);
    v.init_like(f);
    t = 0;
}

namespace {
void adam_tensor(Eigen::Ref<MatX> p, const MatX& g, MatX& m, MatX& v, double lr, double b1,
                 double b2, double eps, double bc1, double bc2) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}
}  // namespace

void AdamState::step(TriplaneField& f, const FieldGrads& g, double lr) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (int pl = 0; pl < 3; ++pl)
        adam_tensor(f.planes[pl], g.planes[pl], m.planes[pl], v.planes[pl], lr, beta1, beta2,
                    eps, bc1, bc2);
    for (size_t l = 0; l < f.decoder.weights.size(); ++l) {
        adam_tensor(f.decoder.weights[l], g.weights[l], m.weights[l], v.weights[l], lr, beta1,
                    beta2, eps, bc1, bc2);
        MatX gb = g.biases[l];
        MatX mb = m.biases[l], vb = v.biases[l];
        MatX pb = f.decoder.biases[l];
        adam_tensor(pb, gb, mb, vb, lr, beta1, beta2, eps, bc1, bc2);
        f.decoder.biases[l] = pb;
        m.biases[l] = mb;
        v.biases[l] = vb;
    }
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

TriplaneField init_sdf_field(const GeometryFitConfig& config) {
    TriplaneField field = TriplaneField::create(config.plane_res, config.channels, config.hidden,
                                                OutputKind::Linear, 1,
                                                hash_combine(config.seed, 0x1f1e1d));
    const AnalyticShape sphere{AnalyticShape::Kind::Sphere, 0.5, 0.0};
    AdamState adam;
    adam.init_like(field);
    FieldGrads grads;
    grads.init_like(field);
    const int64_t n = std::max<int64_t>(1, config.warmstart_samples);
    std::vector<Vec3> pts(n);
    VecX target(n);
    for (int it = 0; it < config.warmstart_iters; ++it) {
        const uint64_t s = hash_combine(hash_combine(config.seed, 0xa57a), it);
        for (int64_t i = 0; i < n; ++i) {
            Rng rng(hash_combine(s, static_cast<uint64_t>(i)));
            pts[i] = Vec3(rng.uniform(field.domain_lo, field.domain_hi),
                          rng.uniform(field.domain_lo, field.domain_hi),
                          rng.uniform(field.domain_lo, field.domain_hi));
            target[i] = analytic_sdf(sphere, pts[i]);
        }
        const MatX vals = field_eval(field, pts, config.threads);
        MatX vbar(1, n);
        for (int64_t i = 0; i < n; ++i)
            vbar(0, i) = 2.0 * (vals(0, i) - target[i]) / static_cast<double>(n);
        grads.zero();
        field_backprop(field, pts, vbar, nullptr, grads, config.threads);
        adam.step(field, grads, config.warmstart_lr);
    }
    return field;
}

// ---------------------------------------------------------------------------
// Geometry fit
// ---------------------------------------------------------------------------

namespace {

// Jitters a camera through its embedding and re-orthonormalizes the rotation.
Camera jitter_camera(const Camera& cam, double sigma, uint64_t seed) {
    if (sigma <= 0) return cam;
    Rng rng(hash_combine(seed, 0x2e7a));
    auto z = camera_embedding(cam);
    for (int i = 0; i < 16; ++i) z[i] += sigma * rng.normal();
    Camera out = cam;
    out.camera_to_world = camera_from_embedding(z);
    out.camera_to_world.row(3) << 0, 0, 0, 1;
    Mat3 r = out.camera_to_world.topLeftCorner<3, 3>();
    // Gram-Schmidt.
    r.col(0).normalize();
    r.col(1) = (r.col(1) - r.col(0) * r.col(0).dot(r.col(1))).normalized();
    r.col(2) = r.col(0).cross(r.col(1));
    out.camera_to_world.topLeftCorner<3, 3>() = r;
    return out;
}

}  // namespace

GeometryFitResult fit_geometry(const GeometryFitConfig& config) {
    if (config.target_mesh_path.empty() != config.target_grid_path.empty())
        throw InputError("fit_geometry: target_mesh and target_grid must be given together");
    if (!config.target_grid_path.empty()) {
        SdfGrid gt_grid = load_sdf_grid(config.target_grid_path);
        Mesh gt_mesh = load_mesh(config.target_mesh_path);
        if (gt_mesh.empty()) throw InputError("fit_geometry: GT mesh is empty");
        return fit_geometry(config, gt_grid, std::move(gt_mesh));
    }
    const AnalyticShape shape = AnalyticShape::parse(config.target);
    SdfGrid gt_grid = bake_analytic_grid(shape, config.grid_res);
    ExtractResult gt = extract_mesh(gt_grid, 0.0, config.threads);
    if (gt.mesh.empty())
        throw InputError("fit_geometry: target '" + config.target +
                         "' has no surface inside the domain");
    return fit_geometry(config, gt_grid, std::move(gt.mesh));
}

GeometryFitResult fit_geometry(const GeometryFitConfig& config, const SdfGrid& gt_grid,
                               Mesh gt_mesh) {
    if (!(config.use_eik || config.use_sdf || config.use_spec || config.use_diff ||
          config.use_nor || config.use_dep || config.use_mask))
        throw InputError("fit_geometry: all loss terms disabled");
    if (gt_grid.resolution != config.grid_res)
        throw InputError("fit_geometry: GT grid resolution does not match config grid_res");

    GeometryFitResult result;
    result.field = config.init_field ? *config.init_field : init_sdf_field(config);
    if (!gt_grid.bbox_lo.isApprox(Vec3::Constant(result.field.domain_lo), 1e-9) ||
        !gt_grid.bbox_hi.isApprox(Vec3::Constant(result.field.domain_hi), 1e-9))
        throw InputError("fit_geometry: GT grid bbox must match the field domain cube");
    if (result.field.decoder.output_width() != 1)
        throw InputError("fit_geometry: field needs a scalar SDF head");
    TriplaneField& field = result.field;
    const int threads = resolve_threads(config.threads);

    compute_vertex_normals(gt_mesh);

    const int N = config.grid_res;
    const int64_t M = static_cast<int64_t>(N) * N * N;
    std::vector<Vec3> lattice(M);
    {
        SdfGrid proto(N, Vec3::Constant(field.domain_lo), Vec3::Constant(field.domain_hi));
        for (int k = 0; k < N; ++k)
            for (int j = 0; j < N; ++j)
                for (int i = 0; i < N; ++i)
                    lattice[proto.index(i, j, k)] = proto.lattice_point(i, j, k);
    }

    const bool need_render = config.use_spec || config.use_diff || config.use_nor ||
                             config.use_dep || config.use_mask;
    const bool need_full_bake = need_render || (config.use_sdf && config.sdf_batch == 0);
    const bool need_pbr = config.use_spec || config.use_diff;

    std::vector<EnvironmentMap> env_pool;
    if (need_pbr) env_pool = make_environment_pool(config.env_pool,
                                                   hash_combine(config.seed, 0xe47));

    ViewSampleConfig view_cfg;
    view_cfg.radius = config.camera_radius;
    view_cfg.elevation_lo = config.elevation_lo;
    view_cfg.elevation_hi = config.elevation_hi;
    view_cfg.fov_y = config.fov_y;
    view_cfg.width = config.render_res;
    view_cfg.height = config.render_res;

    AdamState adam;
    adam.init_like(field);
    FieldGrads grads, tmp_grads;
    grads.init_like(field);
    tmp_grads.init_like(field);

    const LossOptions pbr_loss_opts{config.pbr_proxy};

    for (int iter = 0; iter < config.iters; ++iter) {
        grads.zero();
        GeometryTerms terms;
        VecX grid_bar;  // dL/d(lattice value), weighted
        SdfGrid grid;
        if (need_full_bake) {
            grid = bake_sdf_grid(field, N, threads);
            grid_bar = VecX::Zero(M);
        }

        // SDF supervision on lattice vertices (optionally minibatched).
        if (config.use_sdf) {
            if (config.sdf_batch <= 0) {
                double acc = 0;
                for (int64_t i = 0; i < M; ++i) {
                    const double d = grid.values[i] - gt_grid.values[i];
                    acc += d * d;
                    grid_bar[i] += config.weights.sdf * 2.0 * d / static_cast<double>(M);
                }
                terms.sdf = acc / static_cast<double>(M);
            } else {
                const int64_t B = config.sdf_batch;
                std::vector<Vec3> pts(B);
                std::vector<int64_t> idx(B);
                const uint64_t s = hash_combine(hash_combine(config.seed, 0x5dfb), iter);
                for (int64_t j = 0; j < B; ++j) {
                    Rng rng(hash_combine(s, static_cast<uint64_t>(j)));
                    idx[j] = static_cast<int64_t>(rng.below(static_cast<uint64_t>(M)));
                    pts[j] = lattice[idx[j]];
                }
                VecX vals(B);
                if (need_full_bake) {
                    for (int64_t j = 0; j < B; ++j) vals[j] = grid.values[idx[j]];
                } else {
                    const MatX v = field_eval(field, pts, threads);
                    for (int64_t j = 0; j < B; ++j) vals[j] = v(0, j);
                }
                double acc = 0;
                MatX vbar(1, B);
                for (int64_t j = 0; j < B; ++j) {
                    const double d = vals[j] - gt_grid.values[idx[j]];
                    acc += d * d;
                    vbar(0, j) = config.weights.sdf * 2.0 * d / static_cast<double>(B);
                }
                terms.sdf = acc / static_cast<double>(B);
                field_backprop(field, pts, vbar, nullptr, grads, threads);
            }
        }

        // Rendered terms (normal/depth/mask and light maps) with gradients through the dual-vertex
        // Jacobians and frozen per-pixel visibility.
        if (need_render) {
            ExtractResult extraction = extract_mesh(grid, 0.0, threads);
            Mesh& mesh = extraction.mesh;
            if (!mesh.empty()) {
                compute_vertex_normals(mesh);
                std::vector<Vec3> vert_pos_bar(mesh.vertices.size(), Vec3::Zero());
                std::vector<Vec3> vert_nrm_bar(mesh.vertices.size(), Vec3::Zero());

                const int K = config.views_per_step;
                auto views = sample_views(
                    K, hash_combine(hash_combine(config.seed, 0x51e3), iter), view_cfg);
                double l_nor = 0, l_dep = 0, l_mask = 0, l_spec = 0, l_diff = 0;
                for (int vi = 0; vi < K; ++vi) {
                    Camera cam = jitter_camera(
                        views[vi], config.zeta_noise,
                        hash_combine(hash_combine(config.seed, 0x1077 + vi), iter));
                    const GBuffer gb_p = rasterize_gbuffer(mesh, cam, threads);
                    const GBuffer gb_g = rasterize_gbuffer(gt_mesh, cam, threads);

                    Image npix_bar(gb_p.height, gb_p.width, 3, 0.0);
                    Image dpix_bar(gb_p.height, gb_p.width, 1, 0.0);

                    Image gt_normal = gb_g.normal;
                    if (config.normal_noise_sigma > 0)
                        gt_normal = perturb_normals(
                            gt_normal, config.normal_noise_sigma,
                            hash_combine(hash_combine(config.seed, 0x90a + vi), iter));

                    if (config.use_nor) {
                        l_nor += normal_loss(gb_p.normal, gt_normal, gb_g.mask) / K;
                        Image g = normal_loss_grad(gb_p.normal, gt_normal, gb_g.mask);
                        const double w = config.weights.nor / K;
                        for (size_t i = 0; i < g.data.size(); ++i)
                            npix_bar.data[i] += w * g.data[i];
                    }
                    if (config.use_dep) {
                        l_dep += depth_loss(gb_p.depth, gb_g.depth, gb_g.mask) / K;
                        Image g = depth_loss_grad(gb_p.depth, gb_g.depth, gb_g.mask);
                        const double w = config.weights.dep / K;
                        for (size_t i = 0; i < g.data.size(); ++i)
                            dpix_bar.data[i] += w * g.data[i];
                    }
                    if (config.use_mask) {
                        // Hard visibility: value only, no gradient.
                        l_mask += mask_loss(gb_p.mask, gb_g.mask) / K;
                    }
                    if (need_pbr) {
                        ShadingOptions sopt;
                        sopt.samples = config.pbr_spp;
                        sopt.threads = threads;
                        for (int ci = 0; ci < config.pbr_conditions; ++ci) {
                            const PbrCondition cond = sample_pbr_condition(
                                hash_combine(hash_combine(config.seed, 0xc0d + ci), iter),
                                static_cast<int>(env_pool.size()));
                            const EnvironmentMap& env = env_pool[cond.env_id];
                            const uint64_t mseed = hash_combine(
                                hash_combine(hash_combine(config.seed, 0x3ad + ci), iter), vi);
                            const double cscale = 1.0 / (K * config.pbr_conditions);
                            auto add_map_term = [&](bool specular, double weight, double& slot) {
                                Image jac;
                                Image pred, gtm;
                                if (specular) {
                                    pred = render_specular_with_grad(gb_p, env, cond.material,
                                                                     cam, mseed, sopt, jac);
                                    gtm = render_specular(gb_g, env, cond.material, cam, mseed,
                                                          sopt);
                                } else {
                                    pred = render_diffuse_with_grad(gb_p, env, cond.material,
                                                                    mseed, sopt, jac);
                                    gtm = render_diffuse(gb_g, env, cond.material, mseed, sopt);
                                }
                                const LossParts parts = rgb_loss(pred, gtm, pbr_loss_opts);
                                slot += parts.total() * cscale;
                                Image g = rgb_loss_grad(pred, gtm, pbr_loss_opts);
                                const double w = weight * cscale;
                                for (int y = 0; y < g.height; ++y)
                                    for (int x = 0; x < g.width; ++x) {
                                        if (!gb_p.covered(y, x)) continue;
                                        for (int nc = 0; nc < 3; ++nc) {
                                            double acc = 0;
                                            for (int rc = 0; rc < 3; ++rc)
                                                acc += jac.at(y, x, rc * 3 + nc) *
                                                       g.at(y, x, rc);
                                            npix_bar.at(y, x, nc) += w * acc;
                                        }
                                    }
                            };
                            if (config.use_spec)
                                add_map_term(true, config.weights.spec, l_spec);
                            if (config.use_diff)
                                add_map_term(false, config.weights.diff, l_diff);
                        }
                    }

                    // Distribute pixel adjoints to vertex attributes through
                    // the frozen barycentric weights.
                    const Vec3 view_dir_row = -cam.rotation().col(2);
                    for (int y = 0; y < gb_p.height; ++y) {
                        for (int x = 0; x < gb_p.width; ++x) {
                            if (!gb_p.covered(y, x)) continue;
                            const int face_id =
                                gb_p.prim_id[static_cast<size_t>(y) * gb_p.width + x];
                            const auto& face = mesh.faces[face_id];
                            const Vec3 b = gb_p.bary.pixel3(y, x);
                            const Vec3 nb = npix_bar.pixel3(y, x);
                            if (nb.squaredNorm() > 0) {
                                const Vec3 nraw = b[0] * mesh.vertex_normals[face[0]] +
                                                  b[1] * mesh.vertex_normals[face[1]] +
                                                  b[2] * mesh.vertex_normals[face[2]];
                                const double len = nraw.norm();
                                if (len > 1e-12) {
                                    const Vec3 n = nraw / len;
                                    const Vec3 raw_bar = (nb - n * n.dot(nb)) / len;
                                    for (int k = 0; k < 3; ++k)
                                        vert_nrm_bar[face[k]] += b[k] * raw_bar;
                                }
                            }
                            const double db = dpix_bar.at(y, x);
                            if (db != 0)
                                for (int k = 0; k < 3; ++k)
                                    vert_pos_bar[face[k]] += b[k] * db * view_dir_row;
                        }
                    }
                }
                if (config.use_nor) terms.nor = l_nor;
                if (config.use_dep) terms.dep = l_dep;
                if (config.use_mask) terms.mask = l_mask;
                if (config.use_spec) terms.spec = l_spec;
                if (config.use_diff) terms.diff = l_diff;

                std::vector<Vec3> from_normals;
                backprop_vertex_normals(mesh, vert_nrm_bar, from_normals);
                for (size_t i = 0; i < vert_pos_bar.size(); ++i)
                    vert_pos_bar[i] += from_normals[i];
                for (size_t vid = 0; vid < mesh.vertices.size(); ++vid) {
                    if (vert_pos_bar[vid].squaredNorm() == 0) continue;
                    const VertexJacobian jac =
                        vertex_jacobian(grid, extraction, static_cast<int>(vid));
                    for (int c = 0; c < 8; ++c)
                        grid_bar[jac.corner_node[c]] += jac.d[c].dot(vert_pos_bar[vid]);
                }
            }
            // Empty mesh: rendered terms are skipped this step; 3D terms
            // still apply.
        }

        // Eikonal expectation over fresh uniform samples.
        if (config.use_eik) {
            auto pts = eikonal_sample_points(
                field, config.eik_samples,
                hash_combine(hash_combine(config.seed, 0xe1c), iter));
            if (config.weights.eik == 1.0) {
                terms.eik = eikonal_loss_backprop(field, pts, grads, threads);
            } else {
                tmp_grads.zero();
                terms.eik = eikonal_loss_backprop(field, pts, tmp_grads, threads);
                tmp_grads.scale(config.weights.eik);
                grads.add(tmp_grads);
            }
        }

        // One batched value-backprop covers the SDF term and every mesh-mediated
        // term: they all land on lattice values.
        if (need_full_bake) {
            std::vector<Vec3> pts;
            std::vector<double> bars;
            for (int64_t i = 0; i < M; ++i)
                if (grid_bar[i] != 0.0) {
                    pts.push_back(lattice[i]);
                    bars.push_back(grid_bar[i]);
                }
            if (!pts.empty()) {
                MatX vbar(1, static_cast<int64_t>(bars.size()));
                for (size_t i = 0; i < bars.size(); ++i) vbar(0, i) = bars[i];
                field_backprop(field, pts, vbar, nullptr, grads, threads);
            }
        }

        LossReport report = geometry_total(terms, config.weights);
        result.trace.push_back(report);
        if (!std::isfinite(report.total)) {
            result.diverged = true;
            break;
        }
        adam.step(field, grads, config.lr);
    }

    SdfGrid final_grid = bake_sdf_grid(field, N, threads);
    ExtractResult final_extraction = extract_mesh(final_grid, 0.0, threads);
    result.mesh = std::move(final_extraction.mesh);
    compute_vertex_normals(result.mesh);
    return result;
}

// ---------------------------------------------------------------------------
// Texture fit
// ---------------------------------------------------------------------------

TextureFitResult fit_texture(const Mesh& mesh, std::span<const Camera> cameras,
                             std::span<const Image> target_views,
                             const TextureFitConfig& config) {
    if (cameras.empty() || cameras.size() != target_views.size())
        throw InputError("fit_texture: need matching, non-empty camera/target lists");
    if (mesh.empty()) throw InputError("fit_texture: empty mesh");

    TextureFitResult result;
    result.field = config.init_field
                       ? *config.init_field
                       : make_texture_field(config.plane_res, config.channels, config.hidden,
                                            hash_combine(config.seed, 0x7e47));
    TriplaneField& field = result.field;
    if (field.decoder.output_width() != 3 || field.decoder.output != OutputKind::Sigmoid)
        throw InputError("fit_texture: field needs an RGB sigmoid head");
    const int threads = resolve_threads(config.threads);

    // Geometry is frozen: rasterize each view once and keep the foreground
    // coordinate lists.
    const size_t K = cameras.size();
    struct ViewCache {
        std::vector<Vec3> pts;
        std::vector<int64_t> pixels;
        int height = 0, width = 0;
    };
    std::vector<ViewCache> views(K);
    for (size_t v = 0; v < K; ++v) {
        const GBuffer gb = rasterize_gbuffer(mesh, cameras[v], threads);
        if (target_views[v].height != gb.height || target_views[v].width != gb.width ||
            target_views[v].channels != 3)
            throw InputError("fit_texture: target view " + std::to_string(v) +
                             " does not match the camera resolution");
        ViewCache& vc = views[v];
        vc.height = gb.height;
        vc.width = gb.width;
        for (int y = 0; y < gb.height; ++y)
            for (int x = 0; x < gb.width; ++x)
                if (gb.covered(y, x)) {
                    vc.pts.push_back(gb.coord.pixel3(y, x));
                    vc.pixels.push_back(static_cast<int64_t>(y) * gb.width + x);
                }
    }

    const LossOptions opts{config.include_proxy};
    AdamState adam;
    adam.init_like(field);
    FieldGrads grads;
    grads.init_like(field);

    for (int iter = 0; iter < config.iters; ++iter) {
        grads.zero();
        double mse_acc = 0, proxy_acc = 0;
        for (size_t v = 0; v < K; ++v) {
            const ViewCache& vc = views[v];
            Image pred(vc.height, vc.width, 3, 0.0);
            if (!vc.pts.empty()) {
                const MatX out = field_eval(field, vc.pts, threads);
                for (size_t i = 0; i < vc.pts.size(); ++i)
                    for (int c = 0; c < 3; ++c) pred.data[vc.pixels[i] * 3 + c] = out(c, i);
            }
            const LossParts parts = rgb_loss(pred, target_views[v], opts);
            mse_acc += parts.mse / static_cast<double>(K);
            proxy_acc += parts.proxy / static_cast<double>(K);
            if (vc.pts.empty()) continue;
            const Image g = rgb_loss_grad(pred, target_views[v], opts);
            MatX vbar(3, static_cast<int64_t>(vc.pts.size()));
            for (size_t i = 0; i < vc.pts.size(); ++i)
                for (int c = 0; c < 3; ++c)
                    vbar(c, i) = g.data[vc.pixels[i] * 3 + c] / static_cast<double>(K);
            field_backprop(field, vc.pts, vbar, nullptr, grads, threads);
        }
        LossReport report;
        report.rgb = mse_acc;
        report.perc = proxy_acc;
        report.total = mse_acc + proxy_acc;
        result.trace.push_back(report);
        if (!std::isfinite(report.total)) {
            result.diverged = true;
            break;
        }
        adam.step(field, grads, config.lr);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Normal perturbation
// ---------------------------------------------------------------------------

Image perturb_normals(const Image& normal_map, double sigma, uint64_t seed) {
    if (normal_map.channels != 3)
        throw InputError("perturb_normals: expected a 3-channel map");
    if (sigma < 0) throw InputError("perturb_normals: sigma must be >= 0");
    Image out = normal_map;
    if (sigma == 0) return out;
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            const Vec3 n = out.pixel3(y, x);
            if (n.squaredNorm() < 1e-24) continue;
            Rng rng(hash_combine(hash_combine(seed, 0x4e0),
                                 static_cast<uint64_t>(y) * out.width + x));
            Vec3 noisy = n + sigma * rng.normal3();
            const double len = noisy.norm();
            if (len < 1e-12) noisy = n;  // pathological draw: keep the original
            else noisy /= len;
            out.set_pixel3(y, x, noisy);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Config files
// ---------------------------------------------------------------------------

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open config '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InputError("config '" + path + "' line " + std::to_string(line_no) +
                             ": expected key = value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InputError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::istringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ','))
        try {
            out.push_back(std::stoi(tok));
        } catch (...) {
            throw InputError("config key '" + key + "': bad integer list '" + v + "'");
        }
    if (out.empty()) throw InputError("config key '" + key + "': empty list");
    return out;
}

template <typename T>
T parse_num(const std::string& key, const std::string& v) {
    try {
        if constexpr (std::is_integral_v<T>)
            return static_cast<T>(std::stoll(v));
        else
            return static_cast<T>(std::stod(v));
    } catch (...) {
        throw InputError("config key '" + key + "': bad number '" + v + "'");
    }
}

}  // namespace

void apply_config(GeometryFitConfig& c, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) {
        if (k == "target") c.target = v;
        else if (k == "target_mesh") c.target_mesh_path = v;
        else if (k == "target_grid") c.target_grid_path = v;
        else if (k == "grid_res") c.grid_res = parse_num<int>(k, v);
        else if (k == "plane_res") c.plane_res = parse_num<int>(k, v);
        else if (k == "channels") c.channels = parse_num<int>(k, v);
        else if (k == "hidden") c.hidden = parse_int_list(k, v);
        else if (k == "iters") c.iters = parse_num<int>(k, v);
        else if (k == "lr") c.lr = parse_num<double>(k, v);
        else if (k == "seed") c.seed = parse_num<uint64_t>(k, v);
        else if (k == "threads") c.threads = parse_num<int>(k, v);
        else if (k == "use_eik") c.use_eik = parse_bool(k, v);
        else if (k == "use_sdf") c.use_sdf = parse_bool(k, v);
        else if (k == "use_spec") c.use_spec = parse_bool(k, v);
        else if (k == "use_diff") c.use_diff = parse_bool(k, v);
        else if (k == "use_nor") c.use_nor = parse_bool(k, v);
        else if (k == "use_dep") c.use_dep = parse_bool(k, v);
        else if (k == "use_mask") c.use_mask = parse_bool(k, v);
        else if (k == "w_eik") c.weights.eik = parse_num<double>(k, v);
        else if (k == "w_sdf") c.weights.sdf = parse_num<double>(k, v);
        else if (k == "w_spec") c.weights.spec = parse_num<double>(k, v);
        else if (k == "w_diff") c.weights.diff = parse_num<double>(k, v);
        else if (k == "w_nor") c.weights.nor = parse_num<double>(k, v);
        else if (k == "w_dep") c.weights.dep = parse_num<double>(k, v);
        else if (k == "w_mask") c.weights.mask = parse_num<double>(k, v);
        else if (k == "eik_samples") c.eik_samples = parse_num<int64_t>(k, v);
        else if (k == "sdf_batch") c.sdf_batch = parse_num<int64_t>(k, v);
        else if (k == "views_per_step") c.views_per_step = parse_num<int>(k, v);
        else if (k == "render_res") c.render_res = parse_num<int>(k, v);
        else if (k == "pbr_conditions") c.pbr_conditions = parse_num<int>(k, v);
        else if (k == "pbr_spp") c.pbr_spp = parse_num<int>(k, v);
        else if (k == "pbr_proxy") c.pbr_proxy = parse_bool(k, v);
        else if (k == "env_pool") c.env_pool = parse_num<int>(k, v);
        else if (k == "camera_radius") c.camera_radius = parse_num<double>(k, v);
        else if (k == "fov_y_deg") c.fov_y = deg_to_rad(parse_num<double>(k, v));
        else if (k == "elev_lo_deg") c.elevation_lo = deg_to_rad(parse_num<double>(k, v));
        else if (k == "elev_hi_deg") c.elevation_hi = deg_to_rad(parse_num<double>(k, v));
        else if (k == "zeta_noise") c.zeta_noise = parse_num<double>(k, v);
        else if (k == "normal_noise_sigma") c.normal_noise_sigma = parse_num<double>(k, v);
        else if (k == "warmstart_iters") c.warmstart_iters = parse_num<int>(k, v);
        else if (k == "warmstart_samples") c.warmstart_samples = parse_num<int64_t>(k, v);
        else if (k == "warmstart_lr") c.warmstart_lr = parse_num<double>(k, v);
        else if (k == "init_checkpoint") c.init_field = load_triplane(v);
        else throw InputError("unknown config key '" + k + "'");
    }
}

void apply_config(TextureFitConfig& c, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) {
        if (k == "plane_res") c.plane_res = parse_num<int>(k, v);
        else if (k == "channels") c.channels = parse_num<int>(k, v);
        else if (k == "hidden") c.hidden = parse_int_list(k, v);
        else if (k == "iters") c.iters = parse_num<int>(k, v);
        else if (k == "lr") c.lr = parse_num<double>(k, v);
        else if (k == "seed") c.seed = parse_num<uint64_t>(k, v);
        else if (k == "threads") c.threads = parse_num<int>(k, v);
        else if (k == "include_proxy") c.include_proxy = parse_bool(k, v);
        else if (k == "init_checkpoint") c.init_field = load_triplane(v);
        else throw InputError("unknown config key '" + k + "'");
    }
}

void save_trace(std::span<const LossReport> trace, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot open '" + path + "' for writing");
    for (const auto& r : trace) os << r.to_json_line() << "\n";
}

}  // namespace meshfit
