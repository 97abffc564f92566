// Python bindings for the meshfit core: field construction and queries,
// isosurface extraction, rasterization, shading, losses, fitting and metrics.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

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

namespace py = pybind11;
using namespace meshfit;

namespace {

// numpy (H, W, C) or (H, W) float64 <-> Image
Image image_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 && a.ndim() != 3) throw InputError("image array must be 2D or 3D");
    Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
              a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1);
    std::memcpy(img.data.data(), a.data(), sizeof(double) * img.data.size());
    return img;
}

py::array_t<double> image_to_array(const Image& img) {
    py::array_t<double> a({img.height, img.width, img.channels});
    std::memcpy(a.mutable_data(), img.data.data(), sizeof(double) * img.data.size());
    return a;
}

py::array_t<double> points_to_array(const std::vector<Vec3>& pts) {
    py::array_t<double> a({static_cast<py::ssize_t>(pts.size()), static_cast<py::ssize_t>(3)});
    auto r = a.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < static_cast<py::ssize_t>(pts.size()); ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = pts[i][j];
    return a;
}

std::vector<Vec3> points_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 || a.shape(1) != 3) throw InputError("points array must be (N, 3)");
    std::vector<Vec3> pts(a.shape(0));
    auto r = a.unchecked<2>();
    for (py::ssize_t i = 0; i < a.shape(0); ++i) pts[i] = Vec3(r(i, 0), r(i, 1), r(i, 2));
    return pts;
}

py::array_t<int> faces_to_array(const Mesh& m) {
    py::array_t<int> a({static_cast<py::ssize_t>(m.faces.size()), static_cast<py::ssize_t>(3)});
    auto r = a.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < static_cast<py::ssize_t>(m.faces.size()); ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = m.faces[i][j];
    return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Differentiable mesh reconstruction toolkit (triplane SDF fields, "
              "dual-contouring extraction, software rasterization, PBR losses, metrics)";

    py::register_exception<InputError>(m, "InputError");

    py::class_<SdfGrid>(m, "SdfGrid")
        .def_readonly("resolution", &SdfGrid::resolution)
        .def_property_readonly("values",
                               [](const SdfGrid& g) {
                                   py::array_t<double> a({g.resolution, g.resolution,
                                                          g.resolution});
                                   auto r = a.mutable_unchecked<3>();
                                   for (int k = 0; k < g.resolution; ++k)
                                       for (int j = 0; j < g.resolution; ++j)
                                           for (int i = 0; i < g.resolution; ++i)
                                               r(i, j, k) = g.at(i, j, k);
                                   return a;
                               })
        .def("sample", &SdfGrid::sample)
        .def("gradient", &SdfGrid::gradient)
        .def("cell_size", &SdfGrid::cell_size);

    py::class_<Mesh>(m, "Mesh")
        .def(py::init<>())
        .def_property_readonly("vertices",
                               [](const Mesh& me) { return points_to_array(me.vertices); })
        .def_property_readonly("faces", &faces_to_array)
        .def_property_readonly("vertex_normals",
                               [](const Mesh& me) { return points_to_array(me.vertex_normals); })
        .def_property_readonly("num_vertices", &Mesh::num_vertices)
        .def_property_readonly("num_faces", &Mesh::num_faces)
        .def("empty", &Mesh::empty);

    py::class_<TriplaneField>(m, "TriplaneField")
        .def_readonly("plane_res", &TriplaneField::plane_res)
        .def_readonly("channels", &TriplaneField::channels);

    py::class_<Camera>(m, "Camera")
        .def(py::init<>())
        .def_readwrite("fov_y", &Camera::fov_y)
        .def_readwrite("width", &Camera::width)
        .def_readwrite("height", &Camera::height)
        .def_readwrite("near_clip", &Camera::near_clip)
        .def_readwrite("far_clip", &Camera::far_clip)
        .def_property(
            "camera_to_world", [](const Camera& c) { return c.camera_to_world; },
            [](Camera& c, const Mat4& m4) { c.camera_to_world = m4; })
        .def_static("look_at", &Camera::look_at, py::arg("eye"), py::arg("target"),
                    py::arg("up"), py::arg("fov_y"), py::arg("width"), py::arg("height"),
                    py::arg("near_clip") = 0.05, py::arg("far_clip") = 100.0);

    py::class_<GBuffer>(m, "GBuffer")
        .def_property_readonly("mask", [](const GBuffer& g) { return image_to_array(g.mask); })
        .def_property_readonly("depth", [](const GBuffer& g) { return image_to_array(g.depth); })
        .def_property_readonly("normal",
                               [](const GBuffer& g) { return image_to_array(g.normal); })
        .def_property_readonly("coord", [](const GBuffer& g) { return image_to_array(g.coord); });

    py::class_<EnvironmentMap>(m, "EnvironmentMap")
        .def_static("constant", &EnvironmentMap::constant, py::arg("radiance"),
                    py::arg("height") = 8)
        .def_static("procedural", &EnvironmentMap::procedural, py::arg("seed"),
                    py::arg("height") = 32);

    py::class_<Material>(m, "Material")
        .def_static("clamped", &Material::clamped, py::arg("metallic"), py::arg("roughness"))
        .def_readonly("metallic", &Material::metallic)
        .def_readonly("roughness", &Material::roughness);

    // Field construction and queries.
    m.def("make_sdf_field",
          [](int plane_res, int channels, const std::vector<int>& hidden, uint64_t seed) {
              return TriplaneField::create(plane_res, channels, hidden, OutputKind::Linear, 1,
                                           seed);
          },
          py::arg("plane_res") = 32, py::arg("channels") = 12,
          py::arg("hidden") = std::vector<int>{64, 64}, py::arg("seed") = 0);
    m.def("make_texture_field", &make_texture_field, py::arg("plane_res") = 48,
          py::arg("channels") = 16, py::arg("hidden") = std::vector<int>{64, 64},
          py::arg("seed") = 0);
    m.def("sample_triplane", &sample_triplane);
    m.def("query_sdf", &query_sdf);
    m.def("sdf_gradient", &sdf_gradient);
    m.def("bake_sdf_grid", &bake_sdf_grid, py::arg("field"), py::arg("resolution"),
          py::arg("threads") = 1);
    m.def("eikonal_loss", &eikonal_loss, py::arg("field"), py::arg("sample_count") = 200000,
          py::arg("seed") = 0, py::arg("threads") = 1);
    m.def("sdf_grid_loss", &sdf_grid_loss);
    m.def("analytic_sdf",
          [](const std::string& shape, const Vec3& p) {
              return analytic_sdf(AnalyticShape::parse(shape), p);
          });
    m.def("bake_analytic_grid",
          [](const std::string& shape, int resolution) {
              return bake_analytic_grid(AnalyticShape::parse(shape), resolution);
          },
          py::arg("shape"), py::arg("resolution"));
    m.def("save_sdf_grid", &save_sdf_grid);
    m.def("load_sdf_grid", &load_sdf_grid);
    m.def("save_triplane", &save_triplane);
    m.def("load_triplane", &load_triplane);

    // Isosurface.
    m.def("extract_mesh",
          [](const SdfGrid& grid, double iso, int threads) {
              ExtractResult r = extract_mesh(grid, iso, threads);
              compute_vertex_normals(r.mesh);
              return r.mesh;
          },
          py::arg("grid"), py::arg("iso") = 0.0, py::arg("threads") = 1);

    // Raster + shading.
    m.def("camera_embedding", [](const Camera& c) { return camera_embedding(c); });
    m.def("rasterize_gbuffer", &rasterize_gbuffer, py::arg("mesh"), py::arg("camera"),
          py::arg("threads") = 1);
    m.def("sample_views",
          [](int count, uint64_t seed) { return sample_views(count, seed); },
          py::arg("count"), py::arg("seed") = 0);
    m.def("render_diffuse",
          [](const GBuffer& gb, const EnvironmentMap& env, const Material& mat, uint64_t seed,
             int samples, int threads) {
              ShadingOptions opt;
              opt.samples = samples;
              opt.threads = threads;
              return image_to_array(render_diffuse(gb, env, mat, seed, opt));
          },
          py::arg("gbuffer"), py::arg("env"), py::arg("material"), py::arg("seed") = 0,
          py::arg("samples") = 64, py::arg("threads") = 1);
    m.def("render_specular",
          [](const GBuffer& gb, const EnvironmentMap& env, const Material& mat,
             const Camera& cam, uint64_t seed, int samples, int threads) {
              ShadingOptions opt;
              opt.samples = samples;
              opt.threads = threads;
              return image_to_array(render_specular(gb, env, mat, cam, seed, opt));
          },
          py::arg("gbuffer"), py::arg("env"), py::arg("material"), py::arg("camera"),
          py::arg("seed") = 0, py::arg("samples") = 64, py::arg("threads") = 1);
    m.def("render_texture",
          [](const TriplaneField& f, const GBuffer& gb, int threads) {
              return image_to_array(render_texture(f, gb, threads));
          },
          py::arg("field"), py::arg("gbuffer"), py::arg("threads") = 1);

    // Losses.
    m.def("normal_loss", [](py::array_t<double> p, py::array_t<double> g, py::array_t<double> mk) {
        return normal_loss(image_from_array(p), image_from_array(g), image_from_array(mk));
    });
    m.def("depth_loss", [](py::array_t<double> p, py::array_t<double> g, py::array_t<double> mk) {
        return depth_loss(image_from_array(p), image_from_array(g), image_from_array(mk));
    });
    m.def("mask_loss", [](py::array_t<double> p, py::array_t<double> g) {
        return mask_loss(image_from_array(p), image_from_array(g));
    });
    m.def("rgb_loss",
          [](py::array_t<double> p, py::array_t<double> g, bool include_proxy) {
              const LossParts parts =
                  rgb_loss(image_from_array(p), image_from_array(g), {include_proxy});
              return py::make_tuple(parts.mse, parts.proxy, parts.total());
          },
          py::arg("pred"), py::arg("gt"), py::arg("include_proxy") = true);
    m.def("perceptual_proxy", [](py::array_t<double> p, py::array_t<double> g) {
        return perceptual_proxy(image_from_array(p), image_from_array(g));
    });

    // Fitting.
    py::class_<GeometryFitConfig>(m, "GeometryFitConfig")
        .def(py::init<>())
        .def_readwrite("target", &GeometryFitConfig::target)
        .def_readwrite("grid_res", &GeometryFitConfig::grid_res)
        .def_readwrite("plane_res", &GeometryFitConfig::plane_res)
        .def_readwrite("channels", &GeometryFitConfig::channels)
        .def_readwrite("hidden", &GeometryFitConfig::hidden)
        .def_readwrite("iters", &GeometryFitConfig::iters)
        .def_readwrite("lr", &GeometryFitConfig::lr)
        .def_readwrite("seed", &GeometryFitConfig::seed)
        .def_readwrite("threads", &GeometryFitConfig::threads)
        .def_readwrite("use_eik", &GeometryFitConfig::use_eik)
        .def_readwrite("use_sdf", &GeometryFitConfig::use_sdf)
        .def_readwrite("use_nor", &GeometryFitConfig::use_nor)
        .def_readwrite("use_dep", &GeometryFitConfig::use_dep)
        .def_readwrite("use_mask", &GeometryFitConfig::use_mask)
        .def_readwrite("use_spec", &GeometryFitConfig::use_spec)
        .def_readwrite("use_diff", &GeometryFitConfig::use_diff)
        .def_readwrite("eik_samples", &GeometryFitConfig::eik_samples)
        .def_readwrite("sdf_batch", &GeometryFitConfig::sdf_batch)
        .def_readwrite("warmstart_iters", &GeometryFitConfig::warmstart_iters)
        .def_readwrite("warmstart_samples", &GeometryFitConfig::warmstart_samples);

    py::class_<LossReport>(m, "LossReport")
        .def_readonly("eik", &LossReport::eik)
        .def_readonly("sdf", &LossReport::sdf)
        .def_readonly("nor", &LossReport::nor)
        .def_readonly("dep", &LossReport::dep)
        .def_readonly("mask", &LossReport::mask)
        .def_readonly("spec", &LossReport::spec)
        .def_readonly("diff", &LossReport::diff)
        .def_readonly("rgb", &LossReport::rgb)
        .def_readonly("perc", &LossReport::perc)
        .def_readonly("total", &LossReport::total);

    py::class_<GeometryFitResult>(m, "GeometryFitResult")
        .def_readonly("field", &GeometryFitResult::field)
        .def_readonly("mesh", &GeometryFitResult::mesh)
        .def_readonly("trace", &GeometryFitResult::trace)
        .def_readonly("diverged", &GeometryFitResult::diverged);

    m.def("fit_geometry",
          [](const GeometryFitConfig& cfg) { return fit_geometry(cfg); },
          py::arg("config"), py::call_guard<py::gil_scoped_release>());
    m.def("perturb_normals",
          [](py::array_t<double> nm, double sigma, uint64_t seed) {
              return image_to_array(perturb_normals(image_from_array(nm), sigma, seed));
          },
          py::arg("normal_map"), py::arg("sigma"), py::arg("seed") = 0);

    py::class_<TextureFitConfig>(m, "TextureFitConfig")
        .def(py::init<>())
        .def_readwrite("plane_res", &TextureFitConfig::plane_res)
        .def_readwrite("channels", &TextureFitConfig::channels)
        .def_readwrite("hidden", &TextureFitConfig::hidden)
        .def_readwrite("iters", &TextureFitConfig::iters)
        .def_readwrite("lr", &TextureFitConfig::lr)
        .def_readwrite("seed", &TextureFitConfig::seed)
        .def_readwrite("threads", &TextureFitConfig::threads)
        .def_readwrite("include_proxy", &TextureFitConfig::include_proxy);

    py::class_<TextureFitResult>(m, "TextureFitResult")
        .def_readonly("field", &TextureFitResult::field)
        .def_readonly("trace", &TextureFitResult::trace)
        .def_readonly("diverged", &TextureFitResult::diverged);

    m.def("fit_texture",
          [](const Mesh& mesh, const std::vector<Camera>& cams,
             const std::vector<py::array_t<double>>& targets, const TextureFitConfig& cfg) {
              std::vector<Image> imgs;
              imgs.reserve(targets.size());
              for (const auto& t : targets) imgs.push_back(image_from_array(t));
              return fit_texture(mesh, cams, imgs, cfg);
          },
          py::arg("mesh"), py::arg("cameras"), py::arg("targets"), py::arg("config"));

    // Metrics.
    m.def("sample_surface_points",
          [](const Mesh& mesh, int64_t count, uint64_t seed) {
              return points_to_array(sample_surface_points(mesh, count, seed));
          },
          py::arg("mesh"), py::arg("count") = 32000, py::arg("seed") = 0);
    m.def("chamfer_distance",
          [](py::array_t<double> a, py::array_t<double> b) {
              return chamfer_distance(points_from_array(a), points_from_array(b));
          });
    m.def("f1_score",
          [](py::array_t<double> a, py::array_t<double> b, double tau) {
              return f1_score(points_from_array(a), points_from_array(b), tau);
          },
          py::arg("a"), py::arg("b"), py::arg("tau") = 0.1);
    m.def("align_meshes", &align_meshes);
    m.def("psnr", [](py::array_t<double> p, py::array_t<double> g) {
        return psnr(image_from_array(p), image_from_array(g));
    });
    m.def("ssim", [](py::array_t<double> p, py::array_t<double> g) {
        return ssim(image_from_array(p), image_from_array(g));
    });
    m.def("normal_benchmark",
          [](const std::vector<py::array_t<double>>& pred,
             const std::vector<py::array_t<double>>& gt,
             const std::vector<py::array_t<double>>& masks) {
              std::vector<Image> p, g, mk;
              for (const auto& a : pred) p.push_back(image_from_array(a));
              for (const auto& a : gt) g.push_back(image_from_array(a));
              for (const auto& a : masks) mk.push_back(image_from_array(a));
              const NormalBenchStats s = normal_benchmark(p, g, mk);
              py::dict d;
              d["mean_deg"] = s.mean_deg;
              d["median_deg"] = s.median_deg;
              d["pct_below_11_25"] = s.pct_below_11_25;
              d["pct_below_22_5"] = s.pct_below_22_5;
              d["pct_below_30"] = s.pct_below_30;
              d["pixels"] = s.pixel_count;
              return d;
          });

    // Mesh I/O.
    m.def("save_mesh", [](const Mesh& mesh, const std::string& path) { save_mesh(mesh, path); });
    m.def("load_mesh", &load_mesh);
}
