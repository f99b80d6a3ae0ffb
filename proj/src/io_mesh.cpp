#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "carve/error.hpp"
#include "carve/io.hpp"

namespace carve {

namespace {

std::string lower_ext(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext;
}

[[noreturn]] void fail(const std::string& path, int line, const std::string& what) {
    throw io_error(path + ":" + std::to_string(line) + ": " + what);
}

// ---------------------------------------------------------------------------
// OBJ
// ---------------------------------------------------------------------------

struct ObjCorner {
    int v = 0;   // 1-based as parsed
    int vt = 0;  // 0 = absent
};

ObjCorner parse_corner(const std::string& path, int line, const std::string& tok) {
    ObjCorner c;
    // Accepted: "v", "v/vt", "v//vn", "v/vt/vn".
    const char* s = tok.c_str();
    char* end = nullptr;
    c.v = static_cast<int>(std::strtol(s, &end, 10));
    if (end == s) fail(path, line, "face corner '" + tok + "' has no vertex index");
    if (*end == '/') {
        const char* s2 = end + 1;
        if (*s2 != '/' && *s2 != '\0') {
            c.vt = static_cast<int>(std::strtol(s2, &end, 10));
            if (end == s2) fail(path, line, "face corner '" + tok + "' has a malformed texture index");
        }
        // A trailing "/vn" part is parsed and ignored; normals are derived.
    }
    return c;
}

TriMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("load_mesh: cannot open '" + path + "'");

    std::vector<Vec3> positions;
    std::vector<Vec2> texcoords;
    std::vector<std::array<ObjCorner, 3>> corners;

    std::string line_text;
    int line = 0;
    while (std::getline(in, line_text)) {
        ++line;
        std::istringstream ls(line_text);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) fail(path, line, "vertex needs 3 coordinates");
            positions.emplace_back(x, y, z);
        } else if (tag == "vt") {
            double u, v;
            if (!(ls >> u >> v)) fail(path, line, "texture coordinate needs 2 values");
            texcoords.emplace_back(u, v);
        } else if (tag == "f") {
            std::vector<ObjCorner> poly;
            std::string tok;
            while (ls >> tok) poly.push_back(parse_corner(path, line, tok));
            if (poly.size() < 3) fail(path, line, "face needs at least 3 corners");
            auto resolve = [&](ObjCorner c) -> ObjCorner {
                // OBJ indices are 1-based; negative counts from the end.
                if (c.v < 0) c.v = static_cast<int>(positions.size()) + 1 + c.v;
                if (c.vt < 0) c.vt = static_cast<int>(texcoords.size()) + 1 + c.vt;
                if (c.v < 1 || c.v > static_cast<int>(positions.size()))
                    fail(path, line,
                         "vertex index " + std::to_string(c.v) + " outside [1, " +
                             std::to_string(positions.size()) + "]");
                if (c.vt != 0 && (c.vt < 1 || c.vt > static_cast<int>(texcoords.size())))
                    fail(path, line,
                         "texture index " + std::to_string(c.vt) + " outside [1, " +
                             std::to_string(texcoords.size()) + "]");
                return c;
            };
            for (auto& c : poly) c = resolve(c);
            for (std::size_t k = 2; k < poly.size(); ++k)  // fan triangulation
                corners.push_back({poly[0], poly[k - 1], poly[k]});
        }
        // Other tags (vn, o, g, s, usemtl, mtllib, ...) are ignored.
    }

    TriMesh mesh;
    if (texcoords.empty()) {
        mesh.vertices = positions;
        mesh.faces.reserve(corners.size());
        for (const auto& t : corners)
            mesh.faces.push_back({t[0].v - 1, t[1].v - 1, t[2].v - 1});
    } else {
        // Split by (position, texcoord) pair so UVs become per-vertex.
        std::map<std::pair<int, int>, int> remap;
        mesh.faces.reserve(corners.size());
        for (const auto& t : corners) {
            std::array<int, 3> tri;
            for (int k = 0; k < 3; ++k) {
                const std::pair<int, int> key{t[k].v, t[k].vt};
                auto it = remap.find(key);
                if (it == remap.end()) {
                    it = remap.emplace(key, static_cast<int>(mesh.vertices.size())).first;
                    mesh.vertices.push_back(positions[t[k].v - 1]);
                    mesh.uvs.push_back(t[k].vt > 0 ? texcoords[t[k].vt - 1] : Vec2(0, 0));
                }
                tri[k] = it->second;
            }
            mesh.faces.push_back(tri);
        }
    }
    validate(mesh);
    return mesh;
}

void save_obj(const std::string& path, const TriMesh& mesh) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("save_mesh: cannot open '" + path + "' for writing");
    std::fprintf(f, "# %zu vertices, %zu faces\n", mesh.vertices.size(),
                 mesh.faces.size());
    for (const Vec3& p : mesh.vertices)
        std::fprintf(f, "v %.9g %.9g %.9g\n", p.x(), p.y(), p.z());
    if (mesh.has_uvs())
        for (const Vec2& uv : mesh.uvs) std::fprintf(f, "vt %.9g %.9g\n", uv.x(), uv.y());
    for (const auto& t : mesh.faces) {
        if (mesh.has_uvs())
            std::fprintf(f, "f %d/%d %d/%d %d/%d\n", t[0] + 1, t[0] + 1, t[1] + 1,
                         t[1] + 1, t[2] + 1, t[2] + 1);
        else
            std::fprintf(f, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    std::fclose(f);
}

// ---------------------------------------------------------------------------
// PLY (binary little-endian)
// ---------------------------------------------------------------------------

struct PlyProperty {
    std::string type;
    std::string name;
    bool is_list = false;
    std::string count_type;
};

struct PlyElement {
    std::string name;
    long count = 0;
    std::vector<PlyProperty> props;
};

int scalar_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
        t == "float32")
        return 4;
    if (t == "double" || t == "float64") return 8;
    return 0;
}

double read_scalar(std::ifstream& in, const std::string& type) {
    unsigned char buf[8];
    const int n = scalar_size(type);
    in.read(reinterpret_cast<char*>(buf), n);
    if (type == "float" || type == "float32") {
        float v;
        std::memcpy(&v, buf, 4);
        return v;
    }
    if (type == "double" || type == "float64") {
        double v;
        std::memcpy(&v, buf, 8);
        return v;
    }
    // Integers, little-endian, sign-extended where applicable.
    std::uint64_t u = 0;
    for (int i = n - 1; i >= 0; --i) u = (u << 8) | buf[i];
    if (type == "char" || type == "int8") return static_cast<std::int8_t>(u);
    if (type == "short" || type == "int16") return static_cast<std::int16_t>(u);
    if (type == "int" || type == "int32") return static_cast<std::int32_t>(u);
    return static_cast<double>(u);
}

TriMesh load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("load_mesh: cannot open '" + path + "'");

    std::string line_text;
    int line = 0;
    auto next_line = [&]() -> std::string {
        if (!std::getline(in, line_text)) fail(path, line, "unexpected end of header");
        ++line;
        if (!line_text.empty() && line_text.back() == '\r') line_text.pop_back();
        return line_text;
    };

    if (next_line() != "ply") fail(path, line, "not a PLY file (missing 'ply' magic)");
    std::vector<PlyElement> elements;
    bool little_endian = false;
    for (;;) {
        std::istringstream ls(next_line());
        std::string tag;
        ls >> tag;
        if (tag == "comment") continue;
        if (tag == "format") {
            std::string fmt, ver;
            ls >> fmt >> ver;
            if (fmt == "binary_little_endian")
                little_endian = true;
            else
                fail(path, line,
                     "unsupported PLY format '" + fmt + "' (binary_little_endian only)");
        } else if (tag == "element") {
            PlyElement e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        } else if (tag == "property") {
            if (elements.empty()) fail(path, line, "property before any element");
            PlyProperty p;
            std::string t;
            ls >> t;
            if (t == "list") {
                p.is_list = true;
                ls >> p.count_type >> p.type >> p.name;
            } else {
                p.type = t;
                ls >> p.name;
            }
            if (scalar_size(p.type) == 0 || (p.is_list && scalar_size(p.count_type) == 0))
                fail(path, line, "unknown PLY property type");
            elements.back().props.push_back(p);
        } else if (tag == "end_header") {
            break;
        } else {
            fail(path, line, "unrecognized header line '" + line_text + "'");
        }
    }
    if (!little_endian) fail(path, line, "missing format line");

    TriMesh mesh;
    for (const PlyElement& e : elements) {
        if (e.name == "vertex") {
            int ix = -1, iy = -1, iz = -1;
            for (std::size_t i = 0; i < e.props.size(); ++i) {
                if (e.props[i].name == "x") ix = static_cast<int>(i);
                if (e.props[i].name == "y") iy = static_cast<int>(i);
                if (e.props[i].name == "z") iz = static_cast<int>(i);
            }
            if (ix < 0 || iy < 0 || iz < 0)
                throw io_error(path + ": PLY vertex element lacks x/y/z properties");
            mesh.vertices.reserve(e.count);
            for (long v = 0; v < e.count; ++v) {
                double xyz[3] = {0, 0, 0};
                for (std::size_t i = 0; i < e.props.size(); ++i) {
                    if (e.props[i].is_list)
                        throw io_error(path + ": list property on vertex element");
                    const double val = read_scalar(in, e.props[i].type);
                    if (static_cast<int>(i) == ix) xyz[0] = val;
                    if (static_cast<int>(i) == iy) xyz[1] = val;
                    if (static_cast<int>(i) == iz) xyz[2] = val;
                }
                mesh.vertices.emplace_back(xyz[0], xyz[1], xyz[2]);
            }
        } else if (e.name == "face") {
            mesh.faces.reserve(e.count);
            for (long fidx = 0; fidx < e.count; ++fidx) {
                for (const PlyProperty& p : e.props) {
                    if (!p.is_list) {
                        read_scalar(in, p.type);
                        continue;
                    }
                    const int n = static_cast<int>(read_scalar(in, p.count_type));
                    std::vector<int> poly(n);
                    for (int k = 0; k < n; ++k)
                        poly[k] = static_cast<int>(read_scalar(in, p.type));
                    if (p.name == "vertex_indices" || p.name == "vertex_index") {
                        if (n < 3)
                            throw io_error(path + ": face " + std::to_string(fidx) +
                                           " has fewer than 3 indices");
                        for (int k = 2; k < n; ++k)
                            mesh.faces.push_back({poly[0], poly[k - 1], poly[k]});
                    }
                }
            }
        } else {
            // Skip unknown elements byte-accurately.
            for (long v = 0; v < e.count; ++v)
                for (const PlyProperty& p : e.props) {
                    if (p.is_list) {
                        const int n = static_cast<int>(read_scalar(in, p.count_type));
                        for (int k = 0; k < n; ++k) read_scalar(in, p.type);
                    } else {
                        read_scalar(in, p.type);
                    }
                }
        }
        if (!in) throw io_error(path + ": truncated PLY payload");
    }
    validate(mesh);
    return mesh;
}

void save_ply(const std::string& path, const TriMesh& mesh) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("save_mesh: cannot open '" + path + "' for writing");
    std::fprintf(f,
                 "ply\nformat binary_little_endian 1.0\n"
                 "element vertex %zu\n"
                 "property double x\nproperty double y\nproperty double z\n"
                 "element face %zu\n"
                 "property list uchar int vertex_indices\nend_header\n",
                 mesh.vertices.size(), mesh.faces.size());
    for (const Vec3& p : mesh.vertices) {
        const double xyz[3] = {p.x(), p.y(), p.z()};
        std::fwrite(xyz, sizeof(double), 3, f);
    }
    for (const auto& t : mesh.faces) {
        const unsigned char n = 3;
        std::fwrite(&n, 1, 1, f);
        const std::int32_t idx[3] = {t[0], t[1], t[2]};
        std::fwrite(idx, sizeof(std::int32_t), 3, f);
    }
    std::fclose(f);
}

}  // namespace

TriMesh load_mesh(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "obj") return load_obj(path);
    if (ext == "ply") return load_ply(path);
    throw io_error("load_mesh: unsupported extension '" + ext + "' for '" + path +
                   "' (obj|ply)");
}

void save_mesh(const std::string& path, const TriMesh& mesh) {
    validate(mesh);
    const std::string ext = lower_ext(path);
    if (ext == "obj") return save_obj(path, mesh);
    if (ext == "ply") return save_ply(path, mesh);
    throw io_error("save_mesh: unsupported extension '" + ext + "' for '" + path +
                   "' (obj|ply)");
}

std::vector<std::string> expand_glob(const std::string& pattern) {
    namespace fs = std::filesystem;
    const auto star = pattern.find('*');
    if (star == std::string::npos) return {pattern};
    const auto slash = pattern.find_last_of('/');
    const std::string dir = slash == std::string::npos ? "." : pattern.substr(0, slash);
    const std::string base = slash == std::string::npos ? pattern : pattern.substr(slash + 1);
    const auto bstar = base.find('*');
    if (bstar == std::string::npos)
        throw io_error("expand_glob: '*' must be in the filename component: " + pattern);
    const std::string prefix = base.substr(0, bstar);
    const std::string suffix = base.substr(bstar + 1);

    std::vector<std::string> hits;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        const std::string name = entry.path().filename().string();
        if (name.size() < prefix.size() + suffix.size()) continue;
        if (name.compare(0, prefix.size(), prefix) != 0) continue;
        if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
            continue;
        hits.push_back((slash == std::string::npos ? name : dir + "/" + name));
    }
    if (ec) throw io_error("expand_glob: cannot read directory '" + dir + "'");
    std::sort(hits.begin(), hits.end());
    return hits;
}

}  // namespace carve
