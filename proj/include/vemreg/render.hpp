#pragma once

#include "vemreg/camera.hpp"
#include "vemreg/mesh.hpp"
#include "vemreg/scan.hpp"

namespace vemreg {

// Range-image synthesis: per-pixel ray casting against the mesh (nearest
// front-facing triangle), producing a full depth grid, back-projected points
// and interpolated vertex normals flipped toward the camera. Deterministic:
// identical inputs give bit-identical scans. Throws std::runtime_error
// "mesh out of frustum" when no pixel hits.
PartialScan render_scan(const TriangleMesh& mesh, const Camera& camera, int jobs = 1);

// Camera at `position` looking at `target` with a deterministic up vector
// (optionally rolled about the view axis). Principal point at the image
// center.
Camera make_camera(const Vec3& position, const Vec3& target, int width, int height,
                   double focal_px, double roll_rad = 0.0);

}  // namespace vemreg
