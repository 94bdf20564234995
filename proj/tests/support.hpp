#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <functional>
#include <string>

#include "vemreg/mesh.hpp"
#include "vemreg/render.hpp"
#include "vemreg/rng.hpp"
#include "vemreg/scan.hpp"
#include "vemreg/se3.hpp"

namespace testutil {

using vemreg::Camera;
using vemreg::PartialScan;
using vemreg::Quat;
using vemreg::RigidTransform;
using vemreg::Vec3;

inline Quat axis_angle(const Vec3& axis, double deg) {
  return Quat(Eigen::AngleAxisd(deg * M_PI / 180.0, axis.normalized()));
}

// Camera at the origin looking along +z with square pixels.
inline Camera origin_camera(int width = 64, int height = 48, double focal = 80.0) {
  Camera cam;
  cam.position = Vec3::Zero();
  cam.view = Vec3(0, 0, 1);
  cam.up = Vec3(0, 1, 0);
  cam.fx = cam.fy = focal;
  cam.cx = (width - 1) / 2.0;
  cam.cy = (height - 1) / 2.0;
  cam.width = width;
  cam.height = height;
  return cam;
}

// Synthetic flat-wall scan at constant view depth z, with an optional pixel
// mask carving the silhouette. Points sit exactly at pixel centers.
inline PartialScan plane_scan(double z_mm, const Camera& cam,
                              const std::function<bool(int, int)>& mask = nullptr) {
  PartialScan scan;
  scan.camera = cam;
  scan.grid_width = cam.width;
  scan.grid_height = cam.height;
  scan.depth_grid.assign(static_cast<std::size_t>(cam.width) * cam.height, 0.0f);
  for (int j = 0; j < cam.height; ++j) {
    for (int i = 0; i < cam.width; ++i) {
      if (mask && !mask(i, j)) continue;
      scan.depth_grid[static_cast<std::size_t>(j) * cam.width + i] = static_cast<float>(z_mm);
      scan.points.push_back(cam.backproject(i, j, z_mm));
      scan.normals.push_back(-cam.view);
    }
  }
  return scan;
}

// Rigid motion with rotation `deg` about `axis` plus translation t.
inline RigidTransform rigid(const Vec3& axis, double deg, const Vec3& t) {
  return RigidTransform(axis_angle(axis, deg), t);
}

inline RigidTransform random_rigid(vemreg::Rng& rng, double max_translation_mm) {
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const Quat q(b * std::cos(2 * M_PI * u3), a * std::sin(2 * M_PI * u2),
               a * std::cos(2 * M_PI * u2), b * std::sin(2 * M_PI * u3));
  const Vec3 t(rng.uniform(-1, 1) * max_translation_mm, rng.uniform(-1, 1) * max_translation_mm,
               rng.uniform(-1, 1) * max_translation_mm);
  return RigidTransform(q, t);
}

inline Quat random_quat(vemreg::Rng& rng) { return random_rigid(rng, 0).q; }

// Unique writable directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("vemreg_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Lat-long unit sphere (outward winding), for analytic-normal fixtures.
inline vemreg::TriangleMesh sphere_mesh(int rings = 48, int segments = 64) {
  vemreg::TriangleMesh mesh;
  mesh.vertices.emplace_back(0, 0, 1);
  for (int i = 1; i < rings; ++i) {
    const double theta = M_PI * i / rings;
    for (int j = 0; j < segments; ++j) {
      const double phi = 2.0 * M_PI * j / segments;
      mesh.vertices.emplace_back(std::sin(theta) * std::cos(phi),
                                 std::sin(theta) * std::sin(phi), std::cos(theta));
    }
  }
  const int bottom = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(0, 0, -1);
  const auto grid = [&](int i, int j) { return 1 + (i - 1) * segments + (j % segments); };
  for (int j = 0; j < segments; ++j) mesh.triangles.push_back({0, grid(1, j), grid(1, j + 1)});
  for (int i = 1; i < rings - 1; ++i) {
    for (int j = 0; j < segments; ++j) {
      const int a = grid(i, j), b = grid(i, j + 1), c = grid(i + 1, j), d = grid(i + 1, j + 1);
      mesh.triangles.push_back({a, d, b});
      mesh.triangles.push_back({a, c, d});
    }
  }
  for (int j = 0; j < segments; ++j) {
    mesh.triangles.push_back({bottom, grid(rings - 1, j + 1), grid(rings - 1, j)});
  }
  mesh.filter_degenerate();
  return mesh;
}

// Axis-aligned cube centered at the origin.
inline vemreg::TriangleMesh cube_mesh(double side) {
  vemreg::TriangleMesh mesh;
  const double s = side / 2;
  for (int z = 0; z < 2; ++z) {
    for (int y = 0; y < 2; ++y) {
      for (int x = 0; x < 2; ++x) {
        mesh.vertices.emplace_back(x ? s : -s, y ? s : -s, z ? s : -s);
      }
    }
  }
  const int quads[6][4] = {
      {0, 2, 3, 1},  // z = -s, outward -z
      {4, 5, 7, 6},  // z = +s
      {0, 1, 5, 4},  // y = -s
      {2, 6, 7, 3},  // y = +s
      {0, 4, 6, 2},  // x = -s
      {1, 3, 7, 5},  // x = +s
  };
  for (const auto& q : quads) {
    mesh.triangles.push_back({q[0], q[1], q[2]});
    mesh.triangles.push_back({q[0], q[2], q[3]});
  }
  return mesh;
}

// A normalized blob scan pair rendered from viewpoints `sep_deg` apart.
struct RenderedPair {
  PartialScan scan1, scan2;
  double overlap = 0;
};

inline RenderedPair rendered_pair(int blob_variant, double sep_deg, int width = 120,
                                  int height = 90) {
  vemreg::TriangleMesh mesh = vemreg::make_blob(blob_variant);
  mesh.normalize_scale(1000.0);
  const double dist = 2000.0;
  const double focal = 0.5 * std::min(width, height) /
                       (std::tan(std::asin(500.0 / dist)) * 1.3);
  const Vec3 dir1 = Vec3(0.3, -0.5, 0.81).normalized();
  const Vec3 ortho = dir1.unitOrthogonal();
  const double sep = sep_deg * M_PI / 180.0;
  const Vec3 dir2 = dir1 * std::cos(sep) + ortho * std::sin(sep);
  RenderedPair pair;
  pair.scan1 = vemreg::render_scan(
      mesh, vemreg::make_camera(dir1 * dist, Vec3::Zero(), width, height, focal));
  pair.scan2 = vemreg::render_scan(
      mesh, vemreg::make_camera(dir2 * dist, Vec3::Zero(), width, height, focal));
  return pair;
}

}  // namespace testutil
