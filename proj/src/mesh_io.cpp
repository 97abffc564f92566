#include "meshfit/mesh_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace meshfit {

void save_obj(const Mesh& mesh, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot open '" + path + "' for writing");
    os.precision(12);
    const bool has_normals = mesh.vertex_normals.size() == mesh.vertices.size();
    for (const Vec3& v : mesh.vertices)
        os << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
    if (has_normals)
        for (const Vec3& n : mesh.vertex_normals)
            os << "vn " << n.x() << " " << n.y() << " " << n.z() << "\n";
    for (const auto& f : mesh.faces) {
        if (has_normals)
            os << "f " << f[0] + 1 << "//" << f[0] + 1 << " " << f[1] + 1 << "//" << f[1] + 1
               << " " << f[2] + 1 << "//" << f[2] + 1 << "\n";
        else
            os << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
    }
    if (!os) throw InputError("write failed for '" + path + "'");
}

namespace {
// "3", "3/1", "3//2", "3/1/2" -> vertex index (1-based in file).
int parse_obj_index(const std::string& token, size_t vertex_count) {
    const size_t slash = token.find('/');
    const std::string head = slash == std::string::npos ? token : token.substr(0, slash);
    int idx = 0;
    try {
        idx = std::stoi(head);
    } catch (...) {
        throw InputError("OBJ: bad face index '" + token + "'");
    }
    if (idx < 0) idx = static_cast<int>(vertex_count) + idx + 1;  // negative = relative
    if (idx < 1 || idx > static_cast<int>(vertex_count))
        throw InputError("OBJ: face index out of range: " + token);
    return idx - 1;
}
}  // namespace

Mesh load_obj(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open '" + path + "'");
    Mesh mesh;
    std::vector<Vec3> normals;
    std::string line;
    size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ss >> v.x() >> v.y() >> v.z()))
                throw InputError("OBJ: bad vertex at line " + std::to_string(line_no));
            mesh.vertices.push_back(v);
        } else if (tag == "vn") {
            Vec3 n;
            if (!(ss >> n.x() >> n.y() >> n.z()))
                throw InputError("OBJ: bad normal at line " + std::to_string(line_no));
            normals.push_back(n);
        } else if (tag == "f") {
            std::vector<int> poly;
            std::string tok;
            while (ss >> tok) poly.push_back(parse_obj_index(tok, mesh.vertices.size()));
            if (poly.size() < 3)
                throw InputError("OBJ: face with fewer than 3 vertices at line " +
                                 std::to_string(line_no));
            for (size_t k = 2; k < poly.size(); ++k)
                mesh.faces.push_back({poly[0], poly[k - 1], poly[k]});
        }
    }
    if (normals.size() == mesh.vertices.size()) mesh.vertex_normals = std::move(normals);
    return mesh;
}

// ---------------------------------------------------------------------------
// PLY
// ---------------------------------------------------------------------------

void save_ply(const Mesh& mesh, const std::string& path, const std::vector<Vec3>* colors) {
    if (colors && colors->size() != mesh.vertices.size())
        throw InputError("save_ply: color count mismatch");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open '" + path + "' for writing");
    const bool has_normals = mesh.vertex_normals.size() == mesh.vertices.size();
    os << "ply\nformat binary_little_endian 1.0\n";
    os << "element vertex " << mesh.vertices.size() << "\n";
    os << "property float x\nproperty float y\nproperty float z\n";
    if (has_normals) os << "property float nx\nproperty float ny\nproperty float nz\n";
    if (colors) os << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    os << "element face " << mesh.faces.size() << "\n";
    os << "property list uchar int vertex_indices\nend_header\n";
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        float xyz[3] = {static_cast<float>(mesh.vertices[i].x()),
                        static_cast<float>(mesh.vertices[i].y()),
                        static_cast<float>(mesh.vertices[i].z())};
        os.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
        if (has_normals) {
            float n[3] = {static_cast<float>(mesh.vertex_normals[i].x()),
                          static_cast<float>(mesh.vertex_normals[i].y()),
                          static_cast<float>(mesh.vertex_normals[i].z())};
            os.write(reinterpret_cast<const char*>(n), sizeof(n));
        }
        if (colors) {
            const Vec3& c = (*colors)[i];
            unsigned char rgb[3];
            for (int k = 0; k < 3; ++k)
                rgb[k] = static_cast<unsigned char>(
                    std::lround(std::clamp(c[k], 0.0, 1.0) * 255.0));
            os.write(reinterpret_cast<const char*>(rgb), sizeof(rgb));
        }
    }
    for (const auto& f : mesh.faces) {
        const unsigned char n = 3;
        os.write(reinterpret_cast<const char*>(&n), 1);
        int32_t idx[3] = {f[0], f[1], f[2]};
        os.write(reinterpret_cast<const char*>(idx), sizeof(idx));
    }
    if (!os) throw InputError("write failed for '" + path + "'");
}

Mesh load_ply(const std::string& path, std::vector<Vec3>* colors) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(is, line) || line != "ply") throw InputError("'" + path + "': not a PLY");
    size_t n_verts = 0, n_faces = 0;
    bool has_normals = false, has_colors = false, binary_le = false;
    std::vector<std::string> vertex_props;
    std::string element;
    while (std::getline(is, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "format") {
            std::string fmt;
            ss >> fmt;
            binary_le = fmt == "binary_little_endian";
        } else if (tag == "element") {
            std::string name;
            size_t count;
            ss >> name >> count;
            element = name;
            if (name == "vertex") n_verts = count;
            if (name == "face") n_faces = count;
        } else if (tag == "property" && element == "vertex") {
            std::string type, name;
            ss >> type >> name;
            vertex_props.push_back(name);
            if (name == "nx") has_normals = true;
            if (name == "red") has_colors = true;
        } else if (tag == "end_header") {
            break;
        }
    }
    if (!binary_le) throw InputError("'" + path + "': only binary_little_endian PLY supported");

    Mesh mesh;
    mesh.vertices.resize(n_verts);
    if (has_normals) mesh.vertex_normals.resize(n_verts);
    if (colors) colors->assign(has_colors ? n_verts : 0, Vec3::Zero());

    for (size_t i = 0; i < n_verts; ++i) {
        float xyz[3];
        is.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
        mesh.vertices[i] = Vec3(xyz[0], xyz[1], xyz[2]);
        if (has_normals) {
            float nrm[3];
            is.read(reinterpret_cast<char*>(nrm), sizeof(nrm));
            mesh.vertex_normals[i] = Vec3(nrm[0], nrm[1], nrm[2]);
        }
        if (has_colors) {
            unsigned char rgb[3];
            is.read(reinterpret_cast<char*>(rgb), 3);
            if (colors) (*colors)[i] = Vec3(rgb[0], rgb[1], rgb[2]) / 255.0;
        }
    }
    for (size_t f = 0; f < n_faces; ++f) {
        unsigned char count;
        is.read(reinterpret_cast<char*>(&count), 1);
        std::vector<int32_t> idx(count);
        is.read(reinterpret_cast<char*>(idx.data()), count * sizeof(int32_t));
        for (size_t k = 2; k < idx.size(); ++k)
            mesh.faces.push_back({idx[0], idx[k - 1], idx[k]});
    }
    if (!is) throw InputError("'" + path + "': truncated PLY");
    return mesh;
}

namespace {
bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}
}  // namespace

void save_mesh(const Mesh& mesh, const std::string& path, const std::vector<Vec3>* colors) {
    if (ends_with(path, ".obj"))
        save_obj(mesh, path);
    else if (ends_with(path, ".ply"))
        save_ply(mesh, path, colors);
    else
        throw InputError("save_mesh: unsupported extension (want .obj or .ply): " + path);
}

Mesh load_mesh(const std::string& path) {
    if (ends_with(path, ".obj")) return load_obj(path);
    if (ends_with(path, ".ply")) return load_ply(path);
    throw InputError("load_mesh: unsupported extension (want .obj or .ply): " + path);
}

}  // namespace meshfit
