#pragma once

#include <string>
#include <vector>

#include "carve/camera.hpp"
#include "carve/image.hpp"
#include "carve/mesh.hpp"
#include "carve/skeleton.hpp"

// File formats:
//  - meshes: Wavefront OBJ (text) or binary little-endian PLY, picked by
//    extension. OBJ carries per-vertex UVs (vt) when present; part labels
//    travel in a JSON sidecar ({"labels": [...]}) loaded/saved separately.
//  - images: PFM for float data (bit-exact round trip, bottom-up scanlines,
//    little-endian) and 8-bit PNG for everything quantized.
//  - camera rigs, skeletons, labels: JSON.
// All loaders throw io_error with the path (and line number for text
// formats) on malformed input, or validation_error when the decoded object
// violates its type invariants.

namespace carve {

TriMesh load_mesh(const std::string& path);
void save_mesh(const std::string& path, const TriMesh& mesh);

std::vector<int> load_labels(const std::string& path);
void save_labels(const std::string& path, const std::vector<int>& labels);

ImagePlane load_image(const std::string& path, ImageKind kind);
void save_image(const std::string& path, const ImagePlane& img);

std::vector<Camera> load_camera_rig(const std::string& path);
void save_camera_rig(const std::string& path, const std::vector<Camera>& rig);

Skeleton load_skeleton(const std::string& path);
void save_skeleton(const std::string& path, const Skeleton& skel);

// Shell-style '*' expansion over one directory component, sorted by name;
// used by the CLI for --normals 'n_*.pfm' style arguments.
std::vector<std::string> expand_glob(const std::string& pattern);

}  // namespace carve
