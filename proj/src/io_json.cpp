#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "carve/error.hpp"
#include "carve/io.hpp"

namespace carve {

namespace {

using nlohmann::json;

json parse_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw io_error(std::string(what) + ": cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw io_error(path + ": " + e.what());
    }
}

void write_file(const std::string& path, const json& j, const char* what) {
    std::ofstream out(path);
    if (!out) throw io_error(std::string(what) + ": cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
}

Vec3 read_vec3(const json& j, const std::string& path, const char* field) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
        !j[2].is_number())
        throw io_error(path + ": field '" + field + "' must be a 3-number array");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

// ---------------------------------------------------------------------------
// Camera rigs: JSON array of camera records.
// ---------------------------------------------------------------------------

std::vector<Camera> load_camera_rig(const std::string& path) {
    const json root = parse_file(path, "load_camera_rig");
    if (!root.is_array() || root.empty())
        throw io_error(path + ": camera rig must be a non-empty JSON array");
    std::vector<Camera> rig;
    rig.reserve(root.size());
    for (std::size_t i = 0; i < root.size(); ++i) {
        const json& rec = root[i];
        const std::string where = path + ": camera " + std::to_string(i);
        if (!rec.is_object()) throw io_error(where + " is not an object");
        for (const char* field : {"position", "look_at", "up"})
            if (!rec.contains(field))
                throw io_error(where + " is missing field '" + field + "'");
        Camera cam;
        cam.position = read_vec3(rec["position"], where, "position");
        cam.look_at = read_vec3(rec["look_at"], where, "look_at");
        cam.up = read_vec3(rec["up"], where, "up");
        if (rec.contains("fov_y")) {
            if (!rec["fov_y"].is_number()) throw io_error(where + ": 'fov_y' must be a number");
            cam.fov_y_deg = rec["fov_y"].get<double>();
        }
        if (rec.contains("width")) {
            if (!rec["width"].is_number_integer())
                throw io_error(where + ": 'width' must be an integer");
            cam.width = rec["width"].get<int>();
        }
        if (rec.contains("height")) {
            if (!rec["height"].is_number_integer())
                throw io_error(where + ": 'height' must be an integer");
            cam.height = rec["height"].get<int>();
        }
        if (rec.contains("view_tag")) {
            if (!rec["view_tag"].is_string())
                throw io_error(where + ": 'view_tag' must be a string");
            try {
                cam.view_tag = view_tag_from_string(rec["view_tag"].get<std::string>());
            } catch (const validation_error& e) {
                throw io_error(where + ": " + e.what());
            }
        }
        try {
            validate(cam);
        } catch (const validation_error& e) {
            throw io_error(where + ": " + e.what());
        }
        rig.push_back(cam);
    }
    return rig;
}

void save_camera_rig(const std::string& path, const std::vector<Camera>& rig) {
    json root = json::array();
    for (const Camera& cam : rig) {
        validate(cam);
        root.push_back({{"position", vec3_to_json(cam.position)},
                        {"look_at", vec3_to_json(cam.look_at)},
                        {"up", vec3_to_json(cam.up)},
                        {"fov_y", cam.fov_y_deg},
                        {"width", cam.width},
                        {"height", cam.height},
                        {"view_tag", to_string(cam.view_tag)}});
    }
    write_file(path, root, "save_camera_rig");
}

// ---------------------------------------------------------------------------
// Skeletons: {"joints":[{"name":str,"p":[x,y,z]}],"bones":[[i,j],...]}
// ---------------------------------------------------------------------------

Skeleton load_skeleton(const std::string& path) {
    const json root = parse_file(path, "load_skeleton");
    if (!root.is_object() || !root.contains("joints") || !root["joints"].is_array())
        throw io_error(path + ": skeleton needs a 'joints' array");
    Skeleton skel;
    for (std::size_t i = 0; i < root["joints"].size(); ++i) {
        const json& rec = root["joints"][i];
        const std::string where = path + ": joint " + std::to_string(i);
        if (!rec.is_object() || !rec.contains("name") || !rec["name"].is_string() ||
            !rec.contains("p"))
            throw io_error(where + " needs string 'name' and 3-vector 'p'");
        Joint joint;
        joint.name = rec["name"].get<std::string>();
        joint.p = read_vec3(rec["p"], where, "p");
        skel.joints.push_back(joint);
    }
    if (root.contains("bones")) {
        if (!root["bones"].is_array()) throw io_error(path + ": 'bones' must be an array");
        for (std::size_t i = 0; i < root["bones"].size(); ++i) {
            const json& rec = root["bones"][i];
            if (!rec.is_array() || rec.size() != 2 || !rec[0].is_number_integer() ||
                !rec[1].is_number_integer())
                throw io_error(path + ": bone " + std::to_string(i) +
                               " must be a pair of joint indices");
            skel.bones.push_back({rec[0].get<int>(), rec[1].get<int>()});
        }
    }
    try {
        validate(skel);
    } catch (const validation_error& e) {
        throw io_error(path + ": " + e.what());
    }
    return skel;
}

void save_skeleton(const std::string& path, const Skeleton& skel) {
    validate(skel);
    json joints = json::array();
    for (const Joint& joint : skel.joints)
        joints.push_back({{"name", joint.name}, {"p", vec3_to_json(joint.p)}});
    json bones = json::array();
    for (const auto& bone : skel.bones) bones.push_back({bone[0], bone[1]});
    write_file(path, json{{"joints", joints}, {"bones", bones}}, "save_skeleton");
}

// ---------------------------------------------------------------------------
// Part labels: {"labels":[int,...]} sidecar keyed by vertex index.
// ---------------------------------------------------------------------------

std::vector<int> load_labels(const std::string& path) {
    const json root = parse_file(path, "load_labels");
    if (!root.is_object() || !root.contains("labels") || !root["labels"].is_array())
        throw io_error(path + ": labels file needs a 'labels' array");
    std::vector<int> labels;
    labels.reserve(root["labels"].size());
    for (std::size_t i = 0; i < root["labels"].size(); ++i) {
        const json& v = root["labels"][i];
        if (!v.is_number_integer())
            throw io_error(path + ": label " + std::to_string(i) + " is not an integer");
        const int label = v.get<int>();
        if (label < 0)
            throw io_error(path + ": label " + std::to_string(i) + " is negative");
        labels.push_back(label);
    }
    return labels;
}

void save_labels(const std::string& path, const std::vector<int>& labels) {
    write_file(path, json{{"labels", labels}}, "save_labels");
}

}  // namespace carve
