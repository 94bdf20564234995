#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vemreg/camera.hpp"
#include "vemreg/kdtree.hpp"
#include "vemreg/se3.hpp"

namespace vemreg {

// One oriented point set captured from a single viewpoint. Point and normal
// coordinates are kept float32-representable so binary scan files round-trip
// bit-exactly. depth values are along the camera view axis, 0 = no return.
struct PartialScan {
  std::vector<Vec3> points;   // world frame, mm
  std::vector<Vec3> normals;  // unit, facing the camera
  Camera camera;
  int grid_width = 0;
  int grid_height = 0;
  std::vector<float> depth_grid;  // row-major height x width, mm

  bool has_depth_grid() const { return !depth_grid.empty(); }
  std::size_t size() const { return points.size(); }

  // Throws std::invalid_argument naming the violated field:
  // point/normal count match, projection inside the image rectangle,
  // normals facing the camera, grid depth consistency within 0.5 mm.
  void validate() const;
};

// Deterministic uniform-random subset of point/normal pairs; camera and
// depth grid carried through unchanged. target >= size returns the scan as
// is.
PartialScan downsample(const PartialScan& scan, std::size_t target, std::uint64_t seed);

// Applies one rigid motion to the whole capture: points, normals and the
// camera move together, the depth grid is view-relative and stays valid.
PartialScan transform_scan(const PartialScan& scan, const RigidTransform& T);

// Acceleration queries against one scan: ray/depth-grid intersection plus
// exact nearest-neighbor indexes in 3D and on the camera view plane. Scans
// without a depth grid get one splatted from their points at construction.
// The referenced scan must outlive the index.
class ScanIndex {
 public:
  explicit ScanIndex(const PartialScan& scan);

  const PartialScan& scan() const { return *scan_; }
  const Camera& camera() const { return scan_->camera; }

  struct RayProbe {
    bool hit = false;    // grid returned a surface along the ray
    double z = 0;        // depth of the query point along the view axis
    double depth = 0;    // grid depth at the pierced pixel
    Vec3 rel{0, 0, 0};   // query point relative to the camera position
  };

  // Pierces the depth grid with the ray camera->x. Throws
  // std::invalid_argument when x coincides with the camera position.
  RayProbe probe_ray(const Vec3& x) const;

  // First surface point of the scan hit by the ray camera->x, or nullopt
  // when the ray exits through a no-return pixel or the image boundary.
  std::optional<Vec3> ray_intersect(const Vec3& x) const;

  // Exact nearest scan point to x when both are projected onto the plane
  // orthogonal to the view direction. Returns the point index; fills the
  // squared in-plane distance when dist2 is non-null.
  int nearest_in_view_plane(const Vec3& x, double* dist2 = nullptr) const;

  // Exact nearest scan point in 3D.
  int nearest_3d(const Vec3& x, double* dist2 = nullptr) const;

  // In-plane coordinates used by the 2D index (basis {right, up}).
  std::array<double, 2> plane_coords(const Vec3& x) const;

 private:
  const PartialScan* scan_;
  std::vector<float> splat_grid_;  // used only when the scan has no grid
  const float* grid_ = nullptr;
  int gw_ = 0, gh_ = 0;
  Vec3 right_;
  KdTree2 plane_tree_;
  KdTree3 space_tree_;
};

// Half-width of the bilinear neighbourhood gate: interpolation is only used
// when all four neighbouring depths agree within this many millimeters.
inline constexpr double kDepthContinuityGateMm = 20.0;

}  // namespace vemreg
