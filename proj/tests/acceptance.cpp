// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Thresholds are pinned here, in code; the fit thresholds
// were committed from the first oracle runs (see configs/ for the same
// configurations exposed through the CLI).

#include "meshfit/field.hpp"
#include "meshfit/fit.hpp"
#include "meshfit/image_io.hpp"
#include "meshfit/losses.hpp"
#include "meshfit/mesh_io.hpp"
#include "meshfit/metrics.hpp"
#include "meshfit/raster.hpp"
#include "meshfit/shading.hpp"
#include "meshfit/texture.hpp"
#include "support/marching_cubes_ref.hpp"
#include "support/test_utils.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace meshfit;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

struct Criterion {
    const char* name;
    Clock::time_point start = Clock::now();
    bool ok = true;
    std::string detail;

    explicit Criterion(const char* n) : name(n) {}
    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string& what) {
        detail += (detail.empty() ? "" : "; ") + what;
    }
    void finish(double time_limit_s) {
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        if (secs > time_limit_s) {
            ok = false;
            detail += (detail.empty() ? "" : "; ") + std::string("over time budget");
        }
        std::printf("[%s] %s (%.1f s%s%s)\n", ok ? "PASS" : "FAIL", name, secs,
                    detail.empty() ? "" : "; ", detail.c_str());
        std::fflush(stdout);
        if (!ok) ++g_failures;
    }
};

int threads() { return 2; }

// --------------------------------------------------------------------------
// 1. Gradient suite
// --------------------------------------------------------------------------
void criterion_gradients() {
    Criterion c("criterion 1: gradient suite (sdf_gradient, vertex_jacobian, loss inputs)");

    // sdf_gradient vs central differences, 1e-4 relative, >= 100 probes.
    {
        TriplaneField f = TriplaneField::create(12, 6, {24, 24}, OutputKind::Linear, 1, 61);
        const double cell = (f.domain_hi - f.domain_lo) / (f.plane_res - 1);
        const double h = cell / 100.0;
        Rng rng(67);
        int tested = 0, bad = 0;
        while (tested < 120) {
            Vec3 p(rng.uniform(-0.95, 0.95), rng.uniform(-0.95, 0.95), rng.uniform(-0.95, 0.95));
            bool near_edge = false;
            for (int a = 0; a < 3; ++a) {
                const double u = (p[a] - f.domain_lo) / cell;
                if (std::abs(u - std::round(u)) < 3.0 * h / cell) near_edge = true;
            }
            if (near_edge) continue;
            ++tested;
            const Vec3 g = sdf_gradient(f, p);
            for (int a = 0; a < 3; ++a) {
                Vec3 hi = p, lo = p;
                hi[a] += h;
                lo[a] -= h;
                const double fd = (query_sdf(f, hi) - query_sdf(f, lo)) / (2 * h);
                if (std::abs(g[a] - fd) > 1e-4 * std::max(1.0, std::abs(fd))) ++bad;
            }
        }
        c.require(bad == 0, "sdf_gradient FD mismatches: " + std::to_string(bad));
    }

    // vertex_jacobian vs central differences, 1e-3 relative, 100 probes.
    {
        const SdfGrid base = bake_analytic_grid(AnalyticShape::parse("sphere:0.5"), 24);
        const ExtractResult r = extract_mesh(base);
        const double eps = 1e-4 * base.cell_size();
        Rng rng(7);
        int bad = 0;
        for (int probe = 0; probe < 100; ++probe) {
            const int vid = static_cast<int>(rng.below(r.mesh.num_vertices()));
            const VertexJacobian jac = vertex_jacobian(base, r, vid);
            for (int k = 0; k < 8; ++k) {
                SdfGrid hi = base, lo = base;
                hi.values[jac.corner_node[k]] += eps;
                lo.values[jac.corner_node[k]] -= eps;
                const Vec3 fd =
                    (extract_mesh(hi).mesh.vertices[vid] - extract_mesh(lo).mesh.vertices[vid]) /
                    (2 * eps);
                if ((jac.d[k] - fd).norm() > 1e-3 * std::max(1.0, fd.norm())) ++bad;
            }
        }
        c.require(bad == 0, "vertex_jacobian FD mismatches: " + std::to_string(bad));
    }

    // Loss input-gradients vs FD at >= 100 pixels each, 1e-5 relative.
    {
        Rng rng(11);
        auto rnd_normals = [&](int h, int w) {
            Image img(h, w, 3, 0.0);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) img.set_pixel3(y, x, rng.normal3().normalized());
            return img;
        };
        auto rnd = [&](int h, int w, int ch) {
            Image img(h, w, ch, 0.0);
            for (auto& v : img.data) v = rng.uniform(0.1, 0.9);
            return img;
        };
        Image mask(12, 12, 1, 0.0);
        for (auto& v : mask.data) v = rng.uniform() < 0.7 ? 1.0 : 0.0;
        const Image gtn = rnd_normals(12, 12), prn = rnd_normals(12, 12);
        const Image gtd = rnd(12, 12, 1), prd = rnd(12, 12, 1);
        const Image gtm = rnd(12, 12, 1), prm = rnd(12, 12, 1);
        const Image gti = rnd(12, 12, 3), pri = rnd(12, 12, 3);

        int bad = 0;
        auto fd_check = [&](const Image& grad, Image pred, auto loss) {
            const double h = 1e-6;
            for (int probe = 0; probe < 100; ++probe) {
                const size_t idx = rng.below(pred.data.size());
                const double keep = pred.data[idx];
                pred.data[idx] = keep + h;
                const double up = loss(pred);
                pred.data[idx] = keep - h;
                const double dn = loss(pred);
                pred.data[idx] = keep;
                const double fd = (up - dn) / (2 * h);
                if (std::abs(grad.data[idx] - fd) > 1e-5 * std::max(1.0, std::abs(fd))) ++bad;
            }
        };
        fd_check(normal_loss_grad(prn, gtn, mask), prn,
                 [&](const Image& p) { return normal_loss(p, gtn, mask); });
        fd_check(depth_loss_grad(prd, gtd, mask), prd,
                 [&](const Image& p) { return depth_loss(p, gtd, mask); });
        fd_check(mask_loss_grad(prm, gtm), prm,
                 [&](const Image& p) { return mask_loss(p, gtm); });
        fd_check(image_mse_grad(pri, gti), pri,
                 [&](const Image& p) { return image_mse(p, gti); });
        c.require(bad == 0, "loss input-gradient FD mismatches: " + std::to_string(bad));
    }

    c.finish(60.0);
}

// --------------------------------------------------------------------------
// 2. Eikonal ground truth
// --------------------------------------------------------------------------
TriplaneField planar_z_field(double slope) {
    TriplaneField f = TriplaneField::create(9, 1, {8}, OutputKind::Linear, 1, 7);
    for (int pl = 0; pl < 3; ++pl) f.planes[pl].setZero();
    f.decoder.weights.clear();
    f.decoder.biases.clear();
    f.decoder.weights.push_back(MatX::Constant(1, 1, slope));
    f.decoder.biases.push_back(VecX::Zero(1));
    const int res = f.plane_res;
    for (int v = 0; v < res; ++v)
        for (int u = 0; u < res; ++u)
            f.planes[1](0, v * res + u) =
                f.domain_lo + (f.domain_hi - f.domain_lo) * v / (res - 1.0);  // (x,z): v is z
    return f;
}

void criterion_eikonal() {
    Criterion c("criterion 2: eikonal analytic cases");
    const double planar = eikonal_loss(planar_z_field(1.0), 5000, 1);
    c.require(planar < 1e-10, "planar SDF loss " + std::to_string(planar));
    const double doubled = eikonal_loss(planar_z_field(2.0), 5000, 1);
    c.require(std::abs(doubled - 1.0) < 1e-6, "2x SDF loss " + std::to_string(doubled));
    c.finish(1.0);
}

// --------------------------------------------------------------------------
// 3. Extraction oracle
// --------------------------------------------------------------------------
double hausdorff_sampled(const Mesh& a, const Mesh& b, int64_t samples, uint64_t seed) {
    auto pa = sample_surface_points(a, samples, seed);
    auto pb = sample_surface_points(b, samples, seed + 1);
    for (const Vec3& v : a.vertices) pa.push_back(v);
    for (const Vec3& v : b.vertices) pb.push_back(v);
    KdTree3 ta(pa), tb(pb);
    double h = 0;
    for (const Vec3& q : pa) h = std::max(h, std::sqrt(tb.nearest_sq(q)));
    for (const Vec3& q : pb) h = std::max(h, std::sqrt(ta.nearest_sq(q)));
    return h;
}

void criterion_extraction() {
    Criterion c("criterion 3: pruned extractor vs marching-cubes oracle");
    for (const char* spec : {"sphere:0.5", "torus:0.45,0.18"}) {
        for (int n : {32, 64}) {
            const SdfGrid g = bake_analytic_grid(AnalyticShape::parse(spec), n);
            const ExtractResult dc = extract_mesh(g, 0.0, threads());
            const Mesh mc = testutil::marching_cubes_reference(g);
            const double h = hausdorff_sampled(dc.mesh, mc, 60000, 1234);
            c.require(h < 2.0 * g.cell_size(),
                      std::string(spec) + " N" + std::to_string(n) + " Hausdorff " +
                          std::to_string(h) + " vs " + std::to_string(2.0 * g.cell_size()));
            c.require(testutil::is_watertight(dc.mesh),
                      std::string(spec) + " N" + std::to_string(n) + " not watertight");
        }
    }
    const SdfGrid g = bake_analytic_grid(AnalyticShape::parse("sphere:0.5"), 64);
    const ExtractResult r = extract_mesh(g);
    double worst = 0;
    for (const Vec3& v : r.mesh.vertices) worst = std::max(worst, std::abs(v.norm() - 0.5));
    c.require(worst < 1.5 * g.cell_size(), "sphere radial error " + std::to_string(worst));
    c.finish(30.0);
}

// --------------------------------------------------------------------------
// 4. PBR analytic
// --------------------------------------------------------------------------
void criterion_pbr() {
    Criterion c("criterion 4: PBR white furnace and near-mirror limits");
    // Diffuse white furnace on a real sphere G-buffer at S = 4096.
    ExtractResult er = extract_mesh(bake_analytic_grid(AnalyticShape::parse("sphere:0.5"), 32));
    compute_vertex_normals(er.mesh);
    const Camera cam = Camera::look_at(Vec3(0, 0.4, 2.4), Vec3::Zero(), Vec3(0, 1, 0),
                                       deg_to_rad(40), 32, 32);
    const GBuffer gb = rasterize_gbuffer(er.mesh, cam, threads());
    const Vec3 L(0.8, 1.2, 0.4);
    const EnvironmentMap env = EnvironmentMap::constant(L, 8);
    ShadingOptions opt;
    opt.samples = 4096;
    opt.threads = threads();
    const Image diff = render_diffuse(gb, env, Material::clamped(0.0, 0.5), 7, opt);
    double worst = 0;
    for (int y = 0; y < gb.height; ++y)
        for (int x = 0; x < gb.width; ++x)
            if (gb.covered(y, x))
                worst = std::max(worst, ((diff.pixel3(y, x) - L).cwiseAbs().cwiseQuotient(L))
                                            .maxCoeff());
    c.require(worst < 0.02, "white-furnace relative error " + std::to_string(worst));

    // Specular near-mirror, head-on: pixel ~ F0 * L.
    GBuffer px;
    px.width = px.height = 1;
    px.mask = Image(1, 1, 1, 1.0);
    px.depth = Image(1, 1, 1, 2.0);
    px.normal = Image(1, 1, 3, 0.0);
    px.normal.set_pixel3(0, 0, Vec3(0, 0, 1));
    px.coord = Image(1, 1, 3, 0.0);
    px.bary = Image(1, 1, 3, 0.0);
    px.prim_id.assign(1, 0);
    const Camera head =
        Camera::look_at(Vec3(0, 0, 2), Vec3::Zero(), Vec3(0, 1, 0), deg_to_rad(40), 1, 1);
    opt.samples = 512;
    for (double metallic : {0.0, 1.0}) {
        const double f0 = 0.04 + 0.96 * metallic;
        const Image s =
            render_specular(px, env, Material::clamped(metallic, 0.03), head, 3, opt);
        const double rel = (s.pixel3(0, 0) - f0 * L).norm() / (f0 * L).norm();
        c.require(rel < 0.10,
                  "near-mirror m=" + std::to_string(metallic) + " error " + std::to_string(rel));
    }
    c.finish(120.0);
}

// --------------------------------------------------------------------------
// 5. Metrics oracles
// --------------------------------------------------------------------------
double ssim_scalar_oracle(const Image& a, const Image& b) {
    const int win = 11;
    const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
    std::vector<double> w(win * win);
    double wsum = 0;
    for (int dy = 0; dy < win; ++dy)
        for (int dx = 0; dx < win; ++dx) {
            const double g = std::exp(-((dx - 5.0) * (dx - 5.0) + (dy - 5.0) * (dy - 5.0)) /
                                      (2 * sigma * sigma));
            w[dy * win + dx] = g;
            wsum += g;
        }
    for (auto& v : w) v /= wsum;
    double total = 0;
    int count = 0;
    for (int ch = 0; ch < a.channels; ++ch)
        for (int y = 0; y + win <= a.height; ++y)
            for (int x = 0; x + win <= a.width; ++x) {
                double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
                for (int dy = 0; dy < win; ++dy)
                    for (int dx = 0; dx < win; ++dx) {
                        const double pa = a.at(y + dy, x + dx, ch);
                        const double pb = b.at(y + dy, x + dx, ch);
                        const double ww = w[dy * win + dx];
                        ma += ww * pa;
                        mb += ww * pb;
                        aa += ww * pa * pa;
                        bb += ww * pb * pb;
                        ab += ww * pa * pb;
                    }
                total += ((2 * ma * mb + c1) * (2 * (ab - ma * mb) + c2)) /
                         ((ma * ma + mb * mb + c1) * ((aa - ma * ma) + (bb - mb * mb) + c2));
                ++count;
            }
    return total / count;
}

void criterion_metrics() {
    Criterion c("criterion 5: metric oracles (chamfer, PSNR/SSIM, normal stats)");
    Rng rng(17);
    std::vector<Vec3> a(500), b(500);
    for (auto& p : a) p = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    for (auto& p : b) p = 0.7 * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double dcd = std::abs(chamfer_distance(a, b, threads()) -
                                chamfer_distance_bruteforce(a, b));
    c.require(dcd < 1e-9, "chamfer accel vs brute " + std::to_string(dcd));

    Image ia(32, 32, 3, 0.0), ib(32, 32, 3, 0.0);
    for (auto& v : ia.data) v = rng.uniform();
    for (auto& v : ib.data) v = rng.uniform();
    const double dssim = std::abs(ssim(ia, ib) - ssim_scalar_oracle(ia, ib));
    c.require(dssim < 1e-6, "ssim oracle delta " + std::to_string(dssim));
    double mse = 0;
    for (size_t i = 0; i < ia.data.size(); ++i) {
        const double d = ia.data[i] - ib.data[i];
        mse += d * d;
    }
    mse /= ia.data.size();
    const double dpsnr = std::abs(psnr(ia, ib) - (-10.0 * std::log10(mse)));
    c.require(dpsnr < 1e-6, "psnr formula delta " + std::to_string(dpsnr));

    // Constructed normal-benchmark statistics are exact.
    Image gtn(8, 8, 3, 0.0), prn(8, 8, 3, 0.0), mask(8, 8, 1, 1.0);
    const Vec3 tilted(std::sin(deg_to_rad(20.0)), 0, std::cos(deg_to_rad(20.0)));
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            gtn.set_pixel3(y, x, Vec3(0, 0, 1));
            prn.set_pixel3(y, x, y < 4 ? Vec3(0, 0, 1) : tilted);
        }
    std::vector<Image> vp = {prn}, vg = {gtn}, vm = {mask};
    const NormalBenchStats s = normal_benchmark(vp, vg, vm);
    c.require(std::abs(s.mean_deg - 10.0) < 1e-9, "mean angle");
    c.require(std::abs(s.median_deg - 0.0) < 1e-9, "median (lower tie)");
    c.require(std::abs(s.pct_below_11_25 - 50.0) < 1e-9, "pct<11.25");
    c.require(std::abs(s.pct_below_22_5 - 100.0) < 1e-9, "pct<22.5");
    c.finish(60.0);
}

// --------------------------------------------------------------------------
// 6. End-to-end geometry fit (committed threshold: CD < 0.02 domain units;
//    first oracle run measured 0.0146 with an ideal-extraction floor 0.0102).
// --------------------------------------------------------------------------
void criterion_fit_geometry() {
    Criterion c("criterion 6: sphere geometry fit, 48^3 x 2000 iters, seeds {0,1,2}");
    const ExtractResult gt96 =
        extract_mesh(bake_analytic_grid(AnalyticShape::parse("sphere:0.5"), 96));
    const auto gt_pts = sample_surface_points(gt96.mesh, 32000, 2);

    for (uint64_t seed : {0, 1, 2}) {
        GeometryFitConfig cfg;
        cfg.target = "sphere:0.5";
        cfg.grid_res = 48;
        cfg.plane_res = 32;
        cfg.channels = 12;
        cfg.hidden = {32, 32};
        cfg.iters = 2000;
        cfg.lr = 4e-4;
        cfg.seed = seed;
        cfg.threads = threads();
        cfg.eik_samples = 4096;
        cfg.sdf_batch = 8192;
        cfg.warmstart_iters = 250;
        const GeometryFitResult res = fit_geometry(cfg);
        c.require(!res.diverged, "seed " + std::to_string(seed) + " diverged");
        if (res.mesh.empty()) {
            c.require(false, "seed " + std::to_string(seed) + " produced an empty mesh");
            continue;
        }
        const auto pts = sample_surface_points(res.mesh, 32000, 1);
        const double cd = chamfer_distance(pts, gt_pts, threads());
        c.require(cd < 0.02, "seed " + std::to_string(seed) + " CD " + std::to_string(cd));
        auto window_mean = [&](size_t begin) {
            double acc = 0;
            for (size_t i = begin; i < begin + 100; ++i) acc += res.trace[i].total;
            return acc / 100.0;
        };
        const double head = window_mean(0), tail = window_mean(res.trace.size() - 100);
        c.require(tail < head, "seed " + std::to_string(seed) + " loss not decreasing (" +
                                   std::to_string(head) + " -> " + std::to_string(tail) + ")");
        c.note("seed " + std::to_string(seed) + " CD " + std::to_string(cd));
    }
    c.finish(900.0);
}

// --------------------------------------------------------------------------
// 7. End-to-end texture fit (committed threshold: foreground PSNR > 35 dB;
//    first oracle run measured 61 dB).
// --------------------------------------------------------------------------
void criterion_fit_texture() {
    Criterion c("criterion 7: texture fit, single 128^2 view");
    ExtractResult er = extract_mesh(bake_analytic_grid(AnalyticShape::parse("sphere:0.5"), 48));
    compute_vertex_normals(er.mesh);
    const Camera cam = Camera::look_at(Vec3(0.3, 0.5, 2.2), Vec3::Zero(), Vec3(0, 1, 0),
                                       deg_to_rad(40), 128, 128);
    const GBuffer gb = rasterize_gbuffer(er.mesh, cam, threads());
    Image target(128, 128, 3, 0.0);
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x)
            if (gb.covered(y, x)) {
                const double t = 0.5 * (1.0 + std::tanh(gb.coord.pixel3(y, x).x() / 0.08));
                target.set_pixel3(y, x,
                                  (1 - t) * Vec3(0.85, 0.25, 0.1) + t * Vec3(0.1, 0.4, 0.9));
            }
    TextureFitConfig cfg;
    cfg.plane_res = 48;
    cfg.iters = 300;
    cfg.lr = 5e-3;
    cfg.threads = threads();
    std::vector<Camera> cams = {cam};
    std::vector<Image> targets = {target};
    const TextureFitResult res = fit_texture(er.mesh, cams, targets, cfg);
    c.require(!res.diverged, "texture fit diverged");
    const Image pred = render_texture(res.field, gb, threads());
    const double db = psnr_masked(pred, target, gb.mask);
    c.require(db > 35.0, "fg PSNR " + std::to_string(db));
    c.note("fg PSNR " + std::to_string(db) + " dB");
    c.finish(600.0);
}

// --------------------------------------------------------------------------
// 8. Determinism of seeded CLI commands in serial mode
// --------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

void criterion_determinism() {
    Criterion c("criterion 8: seeded CLI commands bitwise-reproducible (serial)");
    const char* cli = std::getenv("MESHFIT_CLI");
    if (!cli) {
        c.require(false, "MESHFIT_CLI not set");
        c.finish(600.0);
        return;
    }
    const fs::path dir = fs::temp_directory_path() / "meshfit_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto run = [&](const std::string& args) {
        const std::string cmd = std::string(cli) + " " + args + " >/dev/null 2>/dev/null";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };

    // extract
    run("extract --shape torus:0.45,0.18 --res 40 -o " + (dir / "a.obj").string() +
        " --threads 1");
    run("extract --shape torus:0.45,0.18 --res 40 -o " + (dir / "b.obj").string() +
        " --threads 1");
    c.require(slurp(dir / "a.obj") == slurp(dir / "b.obj"), "extract not reproducible");

    // render with light maps
    ExtractResult er = extract_mesh(bake_analytic_grid(AnalyticShape::parse("sphere:0.5"), 24));
    compute_vertex_normals(er.mesh);
    save_obj(er.mesh, (dir / "sphere.obj").string());
    save_camera_json(Camera::look_at(Vec3(0, 0.5, 2.3), Vec3::Zero(), Vec3(0, 1, 0),
                                     deg_to_rad(40), 48, 48),
                     (dir / "cam.json").string());
    save_hdr(environment_to_image(EnvironmentMap::procedural(3, 16)),
             (dir / "env.hdr").string());
    const std::string render_args = "render --mesh " + (dir / "sphere.obj").string() +
                                    " --camera " + (dir / "cam.json").string() + " --env " +
                                    (dir / "env.hdr").string() +
                                    " --spp 16 --seed 9 --threads 1 -o ";
    run(render_args + (dir / "r1").string());
    run(render_args + (dir / "r2").string());
    for (const char* f : {"mask.png", "normal.png", "depth.raw", "coord.raw", "spec.raw",
                          "diff.raw"})
        c.require(slurp(dir / "r1" / f) == slurp(dir / "r2" / f),
                  std::string("render ") + f + " not reproducible");

    // fit-geometry (short) and fit-texture (short)
    const std::string fit_args =
        "fit-geometry --set target=sphere:0.5 --set grid_res=16 --set plane_res=10"
        " --set channels=6 --set hidden=16 --set eik_samples=512 --set sdf_batch=1024"
        " --set warmstart_iters=30 --set warmstart_samples=512 --iters 5 --seed 3"
        " --threads 1 -o ";
    run(fit_args + (dir / "g1").string());
    run(fit_args + (dir / "g2").string());
    for (const char* f : {"checkpoint.tpfc", "mesh.obj", "trace.jsonl"})
        c.require(slurp(dir / "g1" / f) == slurp(dir / "g2" / f),
                  std::string("fit-geometry ") + f + " not reproducible");

    const fs::path views = dir / "views";
    fs::create_directories(views);
    {
        const Camera vcam = Camera::look_at(Vec3(0, 0.3, 2.2), Vec3::Zero(), Vec3(0, 1, 0),
                                            deg_to_rad(40), 48, 48);
        const GBuffer gb = rasterize_gbuffer(er.mesh, vcam);
        Image target(48, 48, 3, 0.0);
        for (int y = 0; y < 48; ++y)
            for (int x = 0; x < 48; ++x)
                if (gb.covered(y, x)) target.set_pixel3(y, x, Vec3(0.3, 0.7, 0.2));
        save_camera_json(vcam, (views / "v0.json").string());
        save_png8(target, (views / "v0.png").string());
    }
    const std::string tex_args = "fit-texture --mesh " + (dir / "sphere.obj").string() +
                                 " --views " + views.string() +
                                 " --set plane_res=12 --set channels=4 --set hidden=12"
                                 " --set include_proxy=false --iters 8 --seed 4 --threads 1 -o ";
    run(tex_args + (dir / "t1").string());
    run(tex_args + (dir / "t2").string());
    for (const char* f : {"texture.tpfc", "textured.ply", "trace.jsonl"})
        c.require(slurp(dir / "t1" / f) == slurp(dir / "t2" / f),
                  std::string("fit-texture ") + f + " not reproducible");

    // eval-mesh JSON record
    run("eval-mesh --pred " + (dir / "sphere.obj").string() + " --gt " +
        (dir / "a.obj").string() + " --points 4000 --seed 11 --json " +
        (dir / "e1.json").string());
    run("eval-mesh --pred " + (dir / "sphere.obj").string() + " --gt " +
        (dir / "a.obj").string() + " --points 4000 --seed 11 --json " +
        (dir / "e2.json").string());
    c.require(slurp(dir / "e1.json") == slurp(dir / "e2.json"), "eval-mesh not reproducible");

    c.finish(600.0);
}

}  // namespace

int main() {
    std::printf("meshfit acceptance suite\n");
    criterion_gradients();
    criterion_eikonal();
    criterion_extraction();
    criterion_pbr();
    criterion_metrics();
    criterion_fit_geometry();
    criterion_fit_texture();
    criterion_determinism();
    if (g_failures > 0) {
        std::printf("%d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
