#include "vemreg/scan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "vemreg/rng.hpp"

namespace vemreg {

void PartialScan::validate() const {
  camera.validate();
  if (points.size() != normals.size()) {
    throw std::invalid_argument("scan: point count " + std::to_string(points.size()) +
                                " != normal count " + std::to_string(normals.size()));
  }
  if (has_depth_grid() &&
      depth_grid.size() != static_cast<std::size_t>(grid_width) * grid_height) {
    throw std::invalid_argument("scan: depth grid size does not match width*height");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    double u, v, z;
    if (!camera.project(points[i], u, v, z) || !camera.inside_image(u, v)) {
      throw std::invalid_argument("scan: point " + std::to_string(i) +
                                  " projects outside the image rectangle");
    }
    if (normals[i].dot(camera.position - points[i]) <= 0.0) {
      throw std::invalid_argument("scan: normal " + std::to_string(i) +
                                  " does not face the camera");
    }
    if (has_depth_grid()) {
      const int iu = std::clamp(static_cast<int>(std::lround(u)), 0, grid_width - 1);
      const int iv = std::clamp(static_cast<int>(std::lround(v)), 0, grid_height - 1);
      const float d = depth_grid[static_cast<std::size_t>(iv) * grid_width + iu];
      if (std::abs(z - d) > 0.5) {
        throw std::invalid_argument("scan: point " + std::to_string(i) +
                                    " depth disagrees with grid by more than 0.5 mm");
      }
    }
  }
}

PartialScan downsample(const PartialScan& scan, std::size_t target, std::uint64_t seed) {
  if (target >= scan.size()) return scan;
  const std::size_t n = scan.size();
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  Rng rng(stream_key(seed, static_cast<std::uint64_t>(RngStream::kDownsample), n, target));
  for (std::size_t i = 0; i < target; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(target);
  std::sort(idx.begin(), idx.end());
  PartialScan out;
  out.camera = scan.camera;
  out.grid_width = scan.grid_width;
  out.grid_height = scan.grid_height;
  out.depth_grid = scan.depth_grid;
  out.points.reserve(target);
  out.normals.reserve(target);
  for (const auto i : idx) {
    out.points.push_back(scan.points[i]);
    out.normals.push_back(scan.normals[i]);
  }
  return out;
}

PartialScan transform_scan(const PartialScan& scan, const RigidTransform& T) {
  PartialScan out = scan;
  for (auto& p : out.points) p = T.apply(p);
  for (auto& n : out.normals) n = T.rotate(n);
  out.camera.position = T.apply(scan.camera.position);
  out.camera.view = T.rotate(scan.camera.view);
  out.camera.up = T.rotate(scan.camera.up);
  return out;
}

namespace {

std::vector<float> splat_points(const PartialScan& scan) {
  const Camera& cam = scan.camera;
  std::vector<float> grid(static_cast<std::size_t>(cam.width) * cam.height, 0.0f);
  for (const auto& p : scan.points) {
    double u, v, z;
    if (!cam.project(p, u, v, z)) continue;
    if (!cam.inside_image(u, v)) continue;
    const int iu = std::clamp(static_cast<int>(std::lround(u)), 0, cam.width - 1);
    const int iv = std::clamp(static_cast<int>(std::lround(v)), 0, cam.height - 1);
    float& cell = grid[static_cast<std::size_t>(iv) * cam.width + iu];
    if (cell == 0.0f || z < cell) cell = static_cast<float>(z);
  }
  return grid;
}

}  // namespace

ScanIndex::ScanIndex(const PartialScan& scan) : scan_(&scan) {
  scan.camera.validate();
  if (scan.has_depth_grid()) {
    grid_ = scan.depth_grid.data();
    gw_ = scan.grid_width;
    gh_ = scan.grid_height;
  } else {
    splat_grid_ = splat_points(scan);
    grid_ = splat_grid_.data();
    gw_ = scan.camera.width;
    gh_ = scan.camera.height;
  }
  right_ = scan.camera.right();

  std::vector<KdTree2::Point> plane_pts(scan.points.size());
  std::vector<KdTree3::Point> space_pts(scan.points.size());
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    const Vec3& p = scan.points[i];
    plane_pts[i] = {p.dot(right_), p.dot(scan.camera.up)};
    space_pts[i] = {p.x(), p.y(), p.z()};
  }
  plane_tree_ = KdTree2(std::move(plane_pts));
  space_tree_ = KdTree3(std::move(space_pts));
}

ScanIndex::RayProbe ScanIndex::probe_ray(const Vec3& x) const {
  const Camera& cam = scan_->camera;
  RayProbe probe;
  probe.rel = x - cam.position;
  if (probe.rel.squaredNorm() == 0.0) {
    throw std::invalid_argument("ray_intersect: query coincides with the camera position");
  }
  probe.z = probe.rel.dot(cam.view);
  if (probe.z <= 0.0) return probe;  // behind the camera: no intersection
  const double u = cam.fx * probe.rel.dot(right_) / probe.z + cam.cx;
  const double v = cam.fy * probe.rel.dot(-cam.up) / probe.z + cam.cy;
  if (u < -0.5 || u >= gw_ - 0.5 || v < -0.5 || v >= gh_ - 0.5) return probe;

  const int i0 = static_cast<int>(std::floor(u));
  const int j0 = static_cast<int>(std::floor(v));
  double depth = 0.0;
  bool interpolated = false;
  if (i0 >= 0 && i0 + 1 < gw_ && j0 >= 0 && j0 + 1 < gh_) {
    const float d00 = grid_[static_cast<std::size_t>(j0) * gw_ + i0];
    const float d10 = grid_[static_cast<std::size_t>(j0) * gw_ + i0 + 1];
    const float d01 = grid_[static_cast<std::size_t>(j0 + 1) * gw_ + i0];
    const float d11 = grid_[static_cast<std::size_t>(j0 + 1) * gw_ + i0 + 1];
    if (d00 > 0 && d10 > 0 && d01 > 0 && d11 > 0) {
      const float lo = std::min(std::min(d00, d10), std::min(d01, d11));
      const float hi = std::max(std::max(d00, d10), std::max(d01, d11));
      if (hi - lo <= kDepthContinuityGateMm) {
        const double fu = u - i0, fv = v - j0;
        depth = (1 - fv) * ((1 - fu) * d00 + fu * d10) + fv * ((1 - fu) * d01 + fu * d11);
        interpolated = true;
      }
    }
  }
  if (!interpolated) {
    // Nearest pixel; never interpolate across a depth discontinuity.
    const int iu = std::clamp(static_cast<int>(std::lround(u)), 0, gw_ - 1);
    const int iv = std::clamp(static_cast<int>(std::lround(v)), 0, gh_ - 1);
    depth = grid_[static_cast<std::size_t>(iv) * gw_ + iu];
  }
  if (depth <= 0.0) return probe;  // no-return pixel
  probe.hit = true;
  probe.depth = depth;
  return probe;
}

std::optional<Vec3> ScanIndex::ray_intersect(const Vec3& x) const {
  const RayProbe probe = probe_ray(x);
  if (!probe.hit) return std::nullopt;
  return scan_->camera.position + probe.rel * (probe.depth / probe.z);
}

std::array<double, 2> ScanIndex::plane_coords(const Vec3& x) const {
  return {x.dot(right_), x.dot(scan_->camera.up)};
}

int ScanIndex::nearest_in_view_plane(const Vec3& x, double* dist2) const {
  const auto [idx, d2] = plane_tree_.nearest(plane_coords(x));
  if (dist2) *dist2 = d2;
  return idx;
}

int ScanIndex::nearest_3d(const Vec3& x, double* dist2) const {
  const auto [idx, d2] = space_tree_.nearest({x.x(), x.y(), x.z()});
  if (dist2) *dist2 = d2;
  return idx;
}

}  // namespace vemreg
