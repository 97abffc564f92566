// meshfit: batch CLI for SDF-field fitting, isosurface extraction, rendering
// and mesh/normal evaluation.
//
// Exit codes: 0 success, 1 internal error, 2 usage or unreadable input,
// 3 fit divergence.

#include "CLI11.hpp"
#include "json.hpp"

#include "meshfit/field.hpp"
#include "meshfit/fit.hpp"
#include "meshfit/image_io.hpp"
#include "meshfit/isosurface.hpp"
#include "meshfit/losses.hpp"
#include "meshfit/mesh_io.hpp"
#include "meshfit/metrics.hpp"
#include "meshfit/raster.hpp"
#include "meshfit/shading.hpp"
#include "meshfit/texture.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using namespace meshfit;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitDiverged = 3;

struct DivergedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void apply_overrides(std::map<std::string, std::string>& kv,
                     const std::vector<std::string>& sets) {
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw InputError("--set expects key=value, got '" + s + "'");
        kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
}

// Benchmark-style metric table; "n/a" marks unimplemented columns (LPIPS needs a
// pretrained network).
void print_metric_table(std::optional<double> cd, std::optional<double> f1,
                        std::optional<double> psnr_mean, std::optional<double> ssim_mean) {
    auto cell = [](std::optional<double> v, int prec) {
        char buf[32];
        if (!v) return std::string("   n/a");
        std::snprintf(buf, sizeof(buf), "%*.*f", 6, prec, *v);
        return std::string(buf);
    };
    std::printf("%-10s %8s %8s %8s %8s %8s\n", "", "CD", "F1", "PSNR", "SSIM", "LPIPS");
    std::printf("%-10s %8s %8s %8s %8s %8s\n", "result", cell(cd, 4).c_str(),
                cell(f1, 4).c_str(), cell(psnr_mean, 2).c_str(), cell(ssim_mean, 4).c_str(),
                "n/a");
}

// Pairs files with identical names across directories; throws listing any
// unpaired file.
std::vector<std::string> paired_names(const std::vector<fs::path>& dirs) {
    std::vector<std::map<std::string, fs::path>> listings;
    for (const auto& d : dirs) {
        if (!fs::is_directory(d)) throw InputError("not a directory: " + d.string());
        std::map<std::string, fs::path> m;
        for (const auto& e : fs::directory_iterator(d))
            if (e.is_regular_file() && e.path().extension() == ".png")
                m[e.path().filename().string()] = e.path();
        listings.push_back(std::move(m));
    }
    std::vector<std::string> names;
    std::string missing;
    for (const auto& [name, _] : listings[0]) {
        bool everywhere = true;
        for (size_t i = 1; i < listings.size(); ++i)
            if (!listings[i].count(name)) {
                everywhere = false;
                missing += "  " + name + " (missing in " + dirs[i].string() + ")\n";
            }
        if (everywhere) names.push_back(name);
    }
    for (size_t i = 1; i < listings.size(); ++i)
        for (const auto& [name, _] : listings[i])
            if (!listings[0].count(name))
                missing += "  " + name + " (missing in " + dirs[0].string() + ")\n";
    if (!missing.empty()) throw InputError("unpaired files:\n" + missing);
    if (names.empty()) throw InputError("no paired .png files found");
    return names;
}

void write_json_record(const std::string& path, const json& j) {
    if (path.empty()) return;
    std::ofstream os(path);
    if (!os) throw InputError("cannot open '" + path + "' for writing");
    os << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

struct ExtractArgs {
    std::string shape, sdf_path, out;
    int res = 64;
    double iso = 0.0;
    int threads = 0;
};

int cmd_extract(const ExtractArgs& a) {
    if (a.shape.empty() == a.sdf_path.empty())
        throw InputError("extract: give exactly one of --shape or --sdf");
    SdfGrid grid;
    if (!a.shape.empty()) {
        grid = bake_analytic_grid(AnalyticShape::parse(a.shape), a.res);
    } else {
        grid = load_sdf_grid(a.sdf_path);
    }
    ExtractResult res = extract_mesh(grid, a.iso, resolve_threads(a.threads));
    if (res.mesh.empty())
        std::cerr << "warning: no iso-crossing found; writing an empty mesh\n";
    else
        compute_vertex_normals(res.mesh);
    save_mesh(res.mesh, a.out);
    std::printf("vertices: %zu faces: %zu -> %s\n", res.mesh.num_vertices(),
                res.mesh.num_faces(), a.out.c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

struct RenderArgs {
    std::string mesh_path, camera_path, env_path, outdir;
    double metallic = 0.0, roughness = 0.5;
    int spp = 64;
    uint64_t seed = 0;
    int threads = 0;
};

int cmd_render(const RenderArgs& a) {
    Mesh mesh = load_mesh(a.mesh_path);
    if (mesh.vertex_normals.size() != mesh.vertices.size()) compute_vertex_normals(mesh);
    const Camera cam = load_camera_json(a.camera_path);
    const int threads = resolve_threads(a.threads);
    fs::create_directories(a.outdir);
    const GBuffer gb = rasterize_gbuffer(mesh, cam, threads);

    const auto out = [&](const char* name) { return (fs::path(a.outdir) / name).string(); };
    save_png16(gb.mask, out("mask.png"));
    save_png16(encode_normal_map(gb.normal), out("normal.png"));
    save_raw_f32(gb.depth, out("depth.raw"));
    save_raw_f32(gb.coord, out("coord.raw"));

    if (!a.env_path.empty()) {
        const EnvironmentMap env = environment_from_image(load_hdr(a.env_path));
        const Material mat = Material::clamped(a.metallic, a.roughness);
        ShadingOptions opt;
        opt.samples = a.spp;
        opt.threads = threads;
        const Image diff = render_diffuse(gb, env, mat, a.seed, opt);
        const Image spec = render_specular(gb, env, mat, cam, a.seed, opt);
        save_raw_f32(diff, out("diff.raw"));
        save_raw_f32(spec, out("spec.raw"));
        save_png8(tonemap(diff), out("diff.png"));
        save_png8(tonemap(spec), out("spec.png"));
    }
    std::printf("wrote G-buffers%s to %s\n", a.env_path.empty() ? "" : " and light maps",
                a.outdir.c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// fit-geometry
// ---------------------------------------------------------------------------

struct FitGeomArgs {
    std::string config_path, outdir;
    std::vector<std::string> sets;
    std::optional<int> iters;
    std::optional<uint64_t> seed;
    std::optional<int> threads;
};

int cmd_fit_geometry(const FitGeomArgs& a) {
    GeometryFitConfig cfg;
    std::map<std::string, std::string> kv;
    if (!a.config_path.empty()) kv = parse_config_file(a.config_path);
    apply_overrides(kv, a.sets);
    apply_config(cfg, kv);
    if (a.iters) cfg.iters = *a.iters;
    if (a.seed) cfg.seed = *a.seed;
    if (a.threads) cfg.threads = *a.threads;

    fs::create_directories(a.outdir);
    const GeometryFitResult res = fit_geometry(cfg);
    const auto out = [&](const char* name) { return (fs::path(a.outdir) / name).string(); };
    save_triplane(res.field, out("checkpoint.tpfc"));
    save_mesh(res.mesh, out("mesh.obj"));
    save_trace(res.trace, out("trace.jsonl"));
    if (res.diverged)
        throw DivergedError("fit diverged (non-finite loss) at iteration " +
                            std::to_string(res.trace.size()));
    std::printf("fit-geometry: %d iters, final total loss %.6g, mesh %zu verts / %zu faces\n",
                cfg.iters, res.trace.empty() ? 0.0 : res.trace.back().total,
                res.mesh.num_vertices(), res.mesh.num_faces());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// fit-texture
// ---------------------------------------------------------------------------

struct FitTexArgs {
    std::string config_path, mesh_path, views_dir, outdir;
    std::vector<std::string> sets;
    std::optional<int> iters;
    std::optional<uint64_t> seed;
    std::optional<int> threads;
};

int cmd_fit_texture(const FitTexArgs& a) {
    TextureFitConfig cfg;
    std::map<std::string, std::string> kv;
    if (!a.config_path.empty()) kv = parse_config_file(a.config_path);
    apply_overrides(kv, a.sets);
    apply_config(cfg, kv);
    if (a.iters) cfg.iters = *a.iters;
    if (a.seed) cfg.seed = *a.seed;
    if (a.threads) cfg.threads = *a.threads;

    Mesh mesh = load_mesh(a.mesh_path);
    if (mesh.vertex_normals.size() != mesh.vertices.size()) compute_vertex_normals(mesh);

    // View pairs: <stem>.json camera + <stem>.png target.
    std::vector<Camera> cams;
    std::vector<Image> targets;
    std::vector<std::string> stems;
    if (!fs::is_directory(a.views_dir))
        throw InputError("not a directory: " + a.views_dir);
    for (const auto& e : fs::directory_iterator(a.views_dir))
        if (e.is_regular_file() && e.path().extension() == ".json")
            stems.push_back(e.path().stem().string());
    std::sort(stems.begin(), stems.end());
    for (const auto& stem : stems) {
        const fs::path png = fs::path(a.views_dir) / (stem + ".png");
        if (!fs::exists(png))
            throw InputError("view '" + stem + "' has a camera but no target image " +
                             png.string());
        cams.push_back(load_camera_json((fs::path(a.views_dir) / (stem + ".json")).string()));
        targets.push_back(load_png(png.string()));
    }
    if (cams.empty()) throw InputError("no camera/image view pairs in " + a.views_dir);

    fs::create_directories(a.outdir);
    const TextureFitResult res = fit_texture(mesh, cams, targets, cfg);
    const auto out = [&](const std::string& name) {
        return (fs::path(a.outdir) / name).string();
    };
    save_triplane(res.field, out("texture.tpfc"));
    const std::vector<Vec3> colors = vertex_colors(mesh, res.field, resolve_threads(cfg.threads));
    save_ply(mesh, out("textured.ply"), &colors);
    save_trace(res.trace, out("trace.jsonl"));
    for (size_t v = 0; v < cams.size(); ++v) {
        const GBuffer gb = rasterize_gbuffer(mesh, cams[v], resolve_threads(cfg.threads));
        save_png8(render_texture(res.field, gb, resolve_threads(cfg.threads)),
                  out("pred_" + stems[v] + ".png"));
    }
    if (res.diverged)
        throw DivergedError("texture fit diverged at iteration " +
                            std::to_string(res.trace.size()));
    std::printf("fit-texture: %d iters over %zu views, final loss %.6g\n", cfg.iters,
                cams.size(), res.trace.empty() ? 0.0 : res.trace.back().total);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval-mesh / eval-images / normal-bench
// ---------------------------------------------------------------------------

struct EvalMeshArgs {
    std::string pred, gt, json_path;
    int64_t points = 32000;
    double tau = 0.1;
    uint64_t seed = 0;
    bool no_align = false;
    bool icp = false;
    int threads = 0;
};

int cmd_eval_mesh(const EvalMeshArgs& a) {
    Mesh pred = load_mesh(a.pred), gt = load_mesh(a.gt);
    if (!a.no_align) std::tie(pred, gt) = align_meshes(pred, gt);
    if (a.icp) pred = icp_refine(pred, gt, 50, 4000, a.seed);
    const auto pa = sample_surface_points(pred, a.points, hash_combine(a.seed, 1));
    const auto pb = sample_surface_points(gt, a.points, hash_combine(a.seed, 2));
    const int threads = resolve_threads(a.threads);
    const double cd = chamfer_distance(pa, pb, threads);
    const double f1 = f1_score(pa, pb, a.tau, threads);
    print_metric_table(cd, f1, std::nullopt, std::nullopt);
    json j{{"cd", cd},        {"f1", f1},   {"psnr_mean", nullptr},
           {"ssim_mean", nullptr}, {"views", 0}, {"lpips", "n/a"}};
    write_json_record(a.json_path, j);
    return kExitOk;
}

struct EvalImagesArgs {
    std::string pred_dir, gt_dir, json_path;
};

int cmd_eval_images(const EvalImagesArgs& a) {
    const auto names = paired_names({a.pred_dir, a.gt_dir});
    double psnr_acc = 0, ssim_acc = 0;
    for (const auto& n : names) {
        const Image p = load_png((fs::path(a.pred_dir) / n).string());
        const Image g = load_png((fs::path(a.gt_dir) / n).string());
        psnr_acc += psnr(p, g);
        ssim_acc += ssim(p, g);
    }
    const double psnr_mean = psnr_acc / names.size();
    const double ssim_mean = ssim_acc / names.size();
    print_metric_table(std::nullopt, std::nullopt, psnr_mean, ssim_mean);
    json j{{"cd", nullptr},          {"f1", nullptr},
           {"psnr_mean", psnr_mean}, {"ssim_mean", ssim_mean},
           {"views", names.size()},  {"lpips", "n/a"}};
    write_json_record(a.json_path, j);
    return kExitOk;
}

struct NormalBenchArgs {
    std::string pred_dir, gt_dir, mask_dir, json_path;
};

int cmd_normal_bench(const NormalBenchArgs& a) {
    const auto names = paired_names({a.pred_dir, a.gt_dir, a.mask_dir});
    std::vector<Image> preds, gts, masks;
    for (const auto& n : names) {
        preds.push_back(decode_normal_map(load_png((fs::path(a.pred_dir) / n).string())));
        gts.push_back(decode_normal_map(load_png((fs::path(a.gt_dir) / n).string())));
        masks.push_back(load_png((fs::path(a.mask_dir) / n).string()));
    }
    const NormalBenchStats s = normal_benchmark(preds, gts, masks);
    std::printf("%10s %10s %10s %10s %10s %10s\n", "mean", "median", "<11.25", "<22.5", "<30",
                "pixels");
    std::printf("%10.3f %10.3f %10.3f %10.3f %10.3f %10lld\n", s.mean_deg, s.median_deg,
                s.pct_below_11_25, s.pct_below_22_5, s.pct_below_30,
                static_cast<long long>(s.pixel_count));
    json j{{"mean_deg", s.mean_deg},
           {"median_deg", s.median_deg},
           {"pct_below_11_25", s.pct_below_11_25},
           {"pct_below_22_5", s.pct_below_22_5},
           {"pct_below_30", s.pct_below_30},
           {"pixels", s.pixel_count}};
    write_json_record(a.json_path, j);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"meshfit: differentiable mesh reconstruction toolkit"};
    app.require_subcommand(1);

    ExtractArgs xa;
    auto* x = app.add_subcommand("extract", "Extract a triangle mesh from an SDF grid");
    x->add_option("--shape", xa.shape, "Analytic shape: sphere:R | box:H | torus:R,r");
    x->add_option("--sdf", xa.sdf_path, "Binary SDF grid file (.dsdf)");
    x->add_option("--res", xa.res, "Bake resolution for --shape (default 64)");
    x->add_option("--iso", xa.iso, "Iso level (default 0)");
    x->add_option("-o,--output", xa.out, "Output mesh (.obj or .ply)")->required();
    x->add_option("--threads", xa.threads, "Thread cap (0 = auto; 1 = deterministic serial)");

    RenderArgs ra;
    auto* r = app.add_subcommand("render", "Rasterize G-buffers and optional PBR light maps");
    r->add_option("--mesh", ra.mesh_path, "Input mesh")->required();
    r->add_option("--camera", ra.camera_path, "Camera JSON")->required();
    r->add_option("-o,--outdir", ra.outdir, "Output directory")->required();
    r->add_option("--env", ra.env_path, "Lat-long HDR environment map");
    r->add_option("--metallic", ra.metallic, "Material metallic in [0,1]");
    r->add_option("--roughness", ra.roughness, "Material roughness in [0.03,1]");
    r->add_option("--spp", ra.spp, "Light-map samples per pixel (default 64)");
    r->add_option("--seed", ra.seed, "Sampling seed");
    r->add_option("--threads", ra.threads, "Thread cap");

    FitGeomArgs fg;
    auto* f = app.add_subcommand("fit-geometry", "Optimize an SDF field against a target");
    f->add_option("--config", fg.config_path, "Config file (key = value lines)");
    f->add_option("--set", fg.sets, "Override a config key (key=value); repeatable");
    f->add_option("--iters", fg.iters, "Override iteration count");
    f->add_option("--seed", fg.seed, "Override seed");
    f->add_option("--threads", fg.threads, "Thread cap");
    f->add_option("-o,--outdir", fg.outdir, "Output directory")->required();

    FitTexArgs ft;
    auto* t = app.add_subcommand("fit-texture", "Fit a texture field to target views");
    t->add_option("--config", ft.config_path, "Config file");
    t->add_option("--set", ft.sets, "Override a config key; repeatable");
    t->add_option("--mesh", ft.mesh_path, "Frozen geometry mesh")->required();
    t->add_option("--views", ft.views_dir, "Directory of <stem>.json + <stem>.png view pairs")
        ->required();
    t->add_option("--iters", ft.iters, "Override iteration count");
    t->add_option("--seed", ft.seed, "Override seed");
    t->add_option("--threads", ft.threads, "Thread cap");
    t->add_option("-o,--outdir", ft.outdir, "Output directory")->required();

    EvalMeshArgs em;
    auto* e1 = app.add_subcommand("eval-mesh", "Chamfer distance and F1 between two meshes");
    e1->add_option("--pred", em.pred, "Predicted mesh")->required();
    e1->add_option("--gt", em.gt, "Ground-truth mesh")->required();
    e1->add_option("--points", em.points, "Surface samples per mesh (default 32000)");
    e1->add_option("--tau", em.tau, "F1 threshold in aligned units (default 0.1)");
    e1->add_option("--seed", em.seed, "Sampling seed");
    e1->add_flag("--no-align", em.no_align, "Skip bbox-center/diagonal-2 alignment");
    e1->add_flag("--icp", em.icp, "Rigid ICP refinement after alignment (off by default)");
    e1->add_option("--json", em.json_path, "Write the JSON record here");
    e1->add_option("--threads", em.threads, "Thread cap");

    EvalImagesArgs ei;
    auto* e2 = app.add_subcommand("eval-images", "PSNR/SSIM over paired image directories");
    e2->add_option("--pred", ei.pred_dir, "Directory of predicted .png renders")->required();
    e2->add_option("--gt", ei.gt_dir, "Directory of ground-truth .png renders")->required();
    e2->add_option("--json", ei.json_path, "Write the JSON record here");

    NormalBenchArgs nb;
    auto* e3 = app.add_subcommand("normal-bench",
                                  "Angular-error statistics for predicted normal maps");
    e3->add_option("--pred", nb.pred_dir, "Predicted normal maps ((n+1)/2 PNG)")->required();
    e3->add_option("--gt", nb.gt_dir, "Ground-truth normal maps")->required();
    e3->add_option("--mask", nb.mask_dir, "Foreground masks")->required();
    e3->add_option("--json", nb.json_path, "Write the JSON record here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (x->parsed()) return cmd_extract(xa);
        if (r->parsed()) return cmd_render(ra);
        if (f->parsed()) return cmd_fit_geometry(fg);
        if (t->parsed()) return cmd_fit_texture(ft);
        if (e1->parsed()) return cmd_eval_mesh(em);
        if (e2->parsed()) return cmd_eval_images(ei);
        if (e3->parsed()) return cmd_normal_bench(nb);
    } catch (const DivergedError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitDiverged;
    } catch (const InputError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitInput;
    } catch (const std::exception& err) {
        std::cerr << "internal error: " << err.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
