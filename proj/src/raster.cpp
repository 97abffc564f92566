#include "meshfit/raster.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace meshfit {

using nlohmann::json;

void Camera::validate() const {
    const Mat3 r = rotation();
    if ((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6)
        throw InputError("camera: rotation block is not orthonormal");
    if (!(near_clip > 0 && near_clip < far_clip))
        throw InputError("camera: need 0 < near < far");
    if (!(fov_y > 0 && fov_y < kPi)) throw InputError("camera: fov_y out of (0, pi)");
    if (width < 1 || height < 1) throw InputError("camera: bad resolution");
    Vec4 bottom = camera_to_world.row(3);
    if ((bottom - Vec4(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9)
        throw InputError("camera: camera_to_world is not a rigid transform");
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y,
                       int width, int height, double near_clip, double far_clip) {
    Vec3 z = eye - target;
    if (z.norm() < 1e-12) throw InputError("look_at: eye equals target");
    z.normalize();
    Vec3 x = up.cross(z);
    if (x.norm() < 1e-9) x = Vec3(1, 0, 0).cross(z);
    if (x.norm() < 1e-9) x = Vec3(0, 1, 0).cross(z);
    x.normalize();
    const Vec3 y = z.cross(x);
    Camera cam;
    cam.camera_to_world.setIdentity();
    cam.camera_to_world.block<3, 1>(0, 0) = x;
    cam.camera_to_world.block<3, 1>(0, 1) = y;
    cam.camera_to_world.block<3, 1>(0, 2) = z;
    cam.camera_to_world.block<3, 1>(0, 3) = eye;
    cam.fov_y = fov_y;
    cam.width = width;
    cam.height = height;
    cam.near_clip = near_clip;
    cam.far_clip = far_clip;
    return cam;
}

Eigen::Matrix<double, 16, 1> camera_embedding(const Camera& camera) {
    Eigen::Matrix<double, 16, 1> z;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) z[r * 4 + c] = camera.camera_to_world(r, c);
    return z;
}

Mat4 camera_from_embedding(const Eigen::Matrix<double, 16, 1>& zeta) {
    Mat4 m;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m(r, c) = zeta[r * 4 + c];
    return m;
}

void save_camera_json(const Camera& camera, const std::string& path) {
    json j;
    std::vector<double> flat(16);
    auto z = camera_embedding(camera);
    for (int i = 0; i < 16; ++i) flat[i] = z[i];
    j["camera_to_world"] = flat;
    j["fov_y_deg"] = rad_to_deg(camera.fov_y);
    j["width"] = camera.width;
    j["height"] = camera.height;
    j["near"] = camera.near_clip;
    j["far"] = camera.far_clip;
    std::ofstream os(path);
    if (!os) throw InputError("cannot open '" + path + "' for writing");
    os << j.dump(2) << "\n";
}

Camera load_camera_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw InputError("camera JSON parse error in '" + path + "': " + e.what());
    }
    Camera cam;
    try {
        auto flat = j.at("camera_to_world").get<std::vector<double>>();
        if (flat.size() != 16)
            throw InputError("camera_to_world must hold 16 numbers (row-major)");
        Eigen::Matrix<double, 16, 1> z;
        for (int i = 0; i < 16; ++i) z[i] = flat[i];
        cam.camera_to_world = camera_from_embedding(z);
        cam.fov_y = deg_to_rad(j.at("fov_y_deg").get<double>());
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        cam.near_clip = j.value("near", 0.05);
        cam.far_clip = j.value("far", 100.0);
    } catch (const json::exception& e) {
        throw InputError("camera JSON '" + path + "': " + e.what());
    }
    cam.validate();
    return cam;
}

// ---------------------------------------------------------------------------
// Rasterization
// ---------------------------------------------------------------------------

GBuffer rasterize_gbuffer(const Mesh& mesh, const Camera& camera, int threads) {
    camera.validate();
    const int W = camera.width, H = camera.height;
    GBuffer gb;
    gb.width = W;
    gb.height = H;
    gb.mask = Image(H, W, 1, 0.0);
    gb.depth = Image(H, W, 1, camera.far_clip);
    gb.normal = Image(H, W, 3, 0.0);
    gb.coord = Image(H, W, 3, 0.0);
    gb.bary = Image(H, W, 3, 0.0);
    gb.prim_id.assign(static_cast<size_t>(H) * W, -1);
    if (mesh.empty() || mesh.faces.empty()) return gb;

    const Mat3 r_t = camera.rotation().transpose();
    const Vec3 cam_center = camera.center();
    const double focal = 0.5 * H / std::tan(0.5 * camera.fov_y);
    const bool have_normals = mesh.vertex_normals.size() == mesh.vertices.size();

    // Project all vertices once.
    const size_t nv = mesh.vertices.size();
    std::vector<double> px(nv), py(nv), pd(nv);
    for (size_t i = 0; i < nv; ++i) {
        const Vec3 pc = r_t * (mesh.vertices[i] - cam_center);
        const double d = -pc.z();
        pd[i] = d;
        if (d > 1e-12) {
            px[i] = 0.5 * W + focal * pc.x() / d;
            py[i] = 0.5 * H - focal * pc.y() / d;
        } else {
            px[i] = py[i] = 0.0;
        }
    }

    struct ProjTri {
        int face;
        double x[3], y[3], d[3];
        int x0, x1, y0, y1;  // pixel bbox, inclusive
    };
    std::vector<ProjTri> tris;
    tris.reserve(mesh.faces.size());
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        ProjTri t;
        t.face = static_cast<int>(f);
        bool ok = true;
        double minx = 1e300, maxx = -1e300, miny = 1e300, maxy = -1e300;
        for (int k = 0; k < 3; ++k) {
            const int vi = face[k];
            if (pd[vi] <= 1e-12) {
                ok = false;
                break;
            }
            t.x[k] = px[vi];
            t.y[k] = py[vi];
            t.d[k] = pd[vi];
            minx = std::min(minx, t.x[k]);
            maxx = std::max(maxx, t.x[k]);
            miny = std::min(miny, t.y[k]);
            maxy = std::max(maxy, t.y[k]);
        }
        if (!ok) continue;
        t.x0 = std::max(0, static_cast<int>(std::floor(minx - 0.5)));
        t.x1 = std::min(W - 1, static_cast<int>(std::ceil(maxx - 0.5)));
        t.y0 = std::max(0, static_cast<int>(std::floor(miny - 0.5)));
        t.y1 = std::min(H - 1, static_cast<int>(std::ceil(maxy - 0.5)));
        if (t.x0 > t.x1 || t.y0 > t.y1) continue;
        tris.push_back(t);
    }

    parallel_chunks(H, 16, threads, [&](int64_t row_b, int64_t row_e) {
        for (const ProjTri& t : tris) {
            const int yb = std::max<int>(t.y0, static_cast<int>(row_b));
            const int ye = std::min<int>(t.y1, static_cast<int>(row_e) - 1);
            if (yb > ye) continue;
            const double ax = t.x[0], ay = t.y[0];
            const double bx = t.x[1], by = t.y[1];
            const double cx = t.x[2], cy = t.y[2];
            const double area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
            if (std::abs(area) < 1e-14) continue;
            const double inv_area = 1.0 / area;
            for (int yi = yb; yi <= ye; ++yi) {
                const double sy = yi + 0.5;
                for (int xi = t.x0; xi <= t.x1; ++xi) {
                    const double sx = xi + 0.5;
                    const double w0 = (bx - sx) * (cy - sy) - (by - sy) * (cx - sx);
                    const double w1 = (cx - sx) * (ay - sy) - (cy - sy) * (ax - sx);
                    const double w2 = (ax - sx) * (by - sy) - (ay - sy) * (bx - sx);
                    const bool pos = w0 >= 0 && w1 >= 0 && w2 >= 0;
                    const bool neg = w0 <= 0 && w1 <= 0 && w2 <= 0;
                    if (!pos && !neg) continue;
                    const double l0 = w0 * inv_area, l1 = w1 * inv_area, l2 = w2 * inv_area;
                    const double inv_d =
                        l0 / t.d[0] + l1 / t.d[1] + l2 / t.d[2];
                    if (inv_d <= 0) continue;
                    const double depth = 1.0 / inv_d;
                    if (depth < camera.near_clip || depth > camera.far_clip) continue;
                    if (depth >= gb.depth.at(yi, xi)) continue;
                    const double b0 = (l0 / t.d[0]) * depth;
                    const double b1 = (l1 / t.d[1]) * depth;
                    const double b2 = (l2 / t.d[2]) * depth;
                    const auto& face = mesh.faces[t.face];
                    const Vec3 pos_w = b0 * mesh.vertices[face[0]] +
                                       b1 * mesh.vertices[face[1]] +
                                       b2 * mesh.vertices[face[2]];
                    Vec3 n;
                    if (have_normals) {
                        n = b0 * mesh.vertex_normals[face[0]] +
                            b1 * mesh.vertex_normals[face[1]] +
                            b2 * mesh.vertex_normals[face[2]];
                    } else {
                        n = (mesh.vertices[face[1]] - mesh.vertices[face[0]])
                                .cross(mesh.vertices[face[2]] - mesh.vertices[face[0]]);
                    }
                    const double nl = n.norm();
                    if (nl > 1e-20) n /= nl;
                    gb.mask.at(yi, xi) = 1.0;
                    gb.depth.at(yi, xi) = depth;
                    gb.normal.set_pixel3(yi, xi, n);
                    gb.coord.set_pixel3(yi, xi, pos_w);
                    gb.bary.set_pixel3(yi, xi, Vec3(b0, b1, b2));
                    gb.prim_id[static_cast<size_t>(yi) * W + xi] = t.face;
                }
            }
        }
    });
    return gb;
}

Image transform_normals_local_to_global(const Image& normal_map, const Camera& camera) {
    if (normal_map.channels != 3)
        throw InputError("transform_normals: expected a 3-channel map");
    const Mat3 r = camera.rotation();
    Image out(normal_map.height, normal_map.width, 3, 0.0);
    for (int y = 0; y < normal_map.height; ++y) {
        for (int x = 0; x < normal_map.width; ++x) {
            Vec3 n = normal_map.pixel3(y, x);
            if (n.squaredNorm() < 1e-24) continue;  // background stays zero
            Vec3 w = r * n;
            const double len = w.norm();
            if (len > 1e-20) w /= len;
            out.set_pixel3(y, x, w);
        }
    }
    return out;
}

Image transform_normals_global_to_local(const Image& normal_map, const Camera& camera) {
    Camera inv = camera;
    inv.camera_to_world.topLeftCorner<3, 3>() = camera.rotation().transpose();
    return transform_normals_local_to_global(normal_map, inv);
}

std::vector<Camera> sample_views(int count, uint64_t seed, const ViewSampleConfig& config) {
    if (count < 1) throw InputError("sample_views: count must be >= 1");
    std::vector<Camera> cams;
    cams.reserve(count);
    for (int i = 0; i < count; ++i) {
        Rng rng(hash_combine(seed, 0x71e3 + static_cast<uint64_t>(i)));
        const double az = rng.uniform(0.0, 2.0 * kPi);
        const double el = rng.uniform(config.elevation_lo, config.elevation_hi);
        const Vec3 eye = config.radius *
                         Vec3(std::cos(el) * std::cos(az), std::sin(el),
                              std::cos(el) * std::sin(az));
        cams.push_back(Camera::look_at(eye, Vec3::Zero(), Vec3(0, 1, 0), config.fov_y,
                                       config.width, config.height, config.near_clip,
                                       config.far_clip));
    }
    return cams;
}

}  // namespace meshfit
