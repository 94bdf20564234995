#include "vemreg/render.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "vemreg/parallel.hpp"

namespace vemreg {

Camera make_camera(const Vec3& position, const Vec3& target, int width, int height,
                   double focal_px, double roll_rad) {
  Camera cam;
  cam.position = position;
  cam.view = (target - position).normalized();
  const Vec3 hint = std::abs(cam.view.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
  Vec3 up = (hint - cam.view * cam.view.dot(hint)).normalized();
  if (roll_rad != 0.0) {
    up = Eigen::AngleAxisd(roll_rad, cam.view) * up;
  }
  cam.up = up;
  cam.fx = cam.fy = focal_px;
  cam.cx = (width - 1) / 2.0;
  cam.cy = (height - 1) / 2.0;
  cam.width = width;
  cam.height = height;
  cam.validate();
  return cam;
}

namespace {

// Uniform-grid triangle accelerator walked with a 3D DDA.
struct GridAccel {
  Vec3 lo, hi, cell;
  int nx, ny, nz;
  std::vector<std::vector<int>> cells;

  explicit GridAccel(const TriangleMesh& mesh) {
    lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    hi = -lo;
    for (const auto& v : mesh.vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    const Vec3 extent = (hi - lo).cwiseMax(1e-9);
    lo -= extent * 1e-6;
    hi += extent * 1e-6;
    const int n = std::clamp(
        static_cast<int>(std::cbrt(static_cast<double>(mesh.triangles.size()))) + 1, 4, 64);
    nx = ny = nz = n;
    cell = (hi - lo).cwiseQuotient(Vec3(nx, ny, nz));
    cells.resize(static_cast<std::size_t>(nx) * ny * nz);
    for (int f = 0; f < static_cast<int>(mesh.triangles.size()); ++f) {
      const auto& t = mesh.triangles[static_cast<std::size_t>(f)];
      Vec3 tlo = Vec3::Constant(std::numeric_limits<double>::infinity());
      Vec3 thi = -tlo;
      for (const int idx : t) {
        tlo = tlo.cwiseMin(mesh.vertices[static_cast<std::size_t>(idx)]);
        thi = thi.cwiseMax(mesh.vertices[static_cast<std::size_t>(idx)]);
      }
      const auto clamp_idx = [&](double x, int axis, int n_axis) {
        return std::clamp(static_cast<int>((x - lo[axis]) / cell[axis]), 0, n_axis - 1);
      };
      const int x0 = clamp_idx(tlo.x(), 0, nx), x1 = clamp_idx(thi.x(), 0, nx);
      const int y0 = clamp_idx(tlo.y(), 1, ny), y1 = clamp_idx(thi.y(), 1, ny);
      const int z0 = clamp_idx(tlo.z(), 2, nz), z1 = clamp_idx(thi.z(), 2, nz);
      for (int z = z0; z <= z1; ++z) {
        for (int y = y0; y <= y1; ++y) {
          for (int x = x0; x <= x1; ++x) {
            cells[(static_cast<std::size_t>(z) * ny + y) * nx + x].push_back(f);
          }
        }
      }
    }
  }

  const std::vector<int>& at(int x, int y, int z) const {
    return cells[(static_cast<std::size_t>(z) * ny + y) * nx + x];
  }
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int face = -1;
  double bu = 0, bv = 0;  // barycentric weights of vertices 1 and 2
};

// Möller-Trumbore, one-sided (back faces culled by the determinant sign).
bool intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                        const Vec3& c, double& t, double& bu, double& bv) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (det <= 1e-12) return false;
  const double inv = 1.0 / det;
  const Vec3 tvec = origin - a;
  const double u = tvec.dot(pvec) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  const double tt = e2.dot(qvec) * inv;
  if (tt <= 1e-9) return false;
  t = tt;
  bu = u;
  bv = v;
  return true;
}

Hit trace(const GridAccel& grid, const TriangleMesh& mesh, const Vec3& origin, const Vec3& dir) {
  Hit best;
  // Slab test for the parametric entry/exit of the grid bounds.
  double t_enter = 0.0, t_exit = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    if (std::abs(dir[axis]) < 1e-15) {
      if (origin[axis] < grid.lo[axis] || origin[axis] > grid.hi[axis]) return best;
      continue;
    }
    double t0 = (grid.lo[axis] - origin[axis]) / dir[axis];
    double t1 = (grid.hi[axis] - origin[axis]) / dir[axis];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter > t_exit) return best;

  const Vec3 start = origin + dir * (t_enter + 1e-12);
  int ix = std::clamp(static_cast<int>((start.x() - grid.lo.x()) / grid.cell.x()), 0, grid.nx - 1);
  int iy = std::clamp(static_cast<int>((start.y() - grid.lo.y()) / grid.cell.y()), 0, grid.ny - 1);
  int iz = std::clamp(static_cast<int>((start.z() - grid.lo.z()) / grid.cell.z()), 0, grid.nz - 1);

  const int step[3] = {dir.x() > 0 ? 1 : -1, dir.y() > 0 ? 1 : -1, dir.z() > 0 ? 1 : -1};
  double t_max[3], t_delta[3];
  int idx[3] = {ix, iy, iz};
  const int dims[3] = {grid.nx, grid.ny, grid.nz};
  for (int axis = 0; axis < 3; ++axis) {
    if (std::abs(dir[axis]) < 1e-15) {
      t_max[axis] = std::numeric_limits<double>::infinity();
      t_delta[axis] = std::numeric_limits<double>::infinity();
      continue;
    }
    const double next_boundary =
        grid.lo[axis] + (idx[axis] + (step[axis] > 0 ? 1 : 0)) * grid.cell[axis];
    t_max[axis] = (next_boundary - origin[axis]) / dir[axis];
    t_delta[axis] = grid.cell[axis] / std::abs(dir[axis]);
  }

  while (true) {
    for (const int f : grid.at(idx[0], idx[1], idx[2])) {
      const auto& tri = mesh.triangles[static_cast<std::size_t>(f)];
      double t, bu, bv;
      if (intersect_triangle(origin, dir, mesh.vertices[static_cast<std::size_t>(tri[0])],
                             mesh.vertices[static_cast<std::size_t>(tri[1])],
                             mesh.vertices[static_cast<std::size_t>(tri[2])], t, bu, bv) &&
          t < best.t) {
        best = {t, f, bu, bv};
      }
    }
    const int axis = t_max[0] <= t_max[1] ? (t_max[0] <= t_max[2] ? 0 : 2)
                                          : (t_max[1] <= t_max[2] ? 1 : 2);
    if (best.face >= 0 && best.t <= t_max[axis]) break;  // hit inside this cell
    idx[axis] += step[axis];
    if (idx[axis] < 0 || idx[axis] >= dims[axis] || t_max[axis] > t_exit) break;
    t_max[axis] += t_delta[axis];
  }
  return best;
}

double snap_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace

PartialScan render_scan(const TriangleMesh& mesh, const Camera& camera, int jobs) {
  camera.validate();
  if (mesh.triangles.empty()) throw std::runtime_error("mesh out of frustum");
  const GridAccel grid(mesh);
  const std::vector<Vec3> vnormals = mesh.vertex_normals();

  const int w = camera.width, h = camera.height;
  const Vec3 right = camera.right();
  const Vec3 down = -camera.up;

  struct Pixel {
    float depth = 0;
    Vec3 point, normal;
  };
  std::vector<Pixel> pixels(static_cast<std::size_t>(w) * h);

  parallel_for(static_cast<std::size_t>(h), jobs, [&](std::size_t row) {
    const int j = static_cast<int>(row);
    for (int i = 0; i < w; ++i) {
      // dir is scaled so dir . view == 1: ray parameter == depth along view.
      const Vec3 dir = right * ((i - camera.cx) / camera.fx) +
                       down * ((j - camera.cy) / camera.fy) + camera.view;
      const Hit hit = trace(grid, mesh, camera.position, dir);
      if (hit.face < 0) continue;
      Pixel& px = pixels[static_cast<std::size_t>(j) * w + i];
      px.depth = static_cast<float>(hit.t);
      const Vec3 point = camera.position + dir * hit.t;
      const auto& tri = mesh.triangles[static_cast<std::size_t>(hit.face)];
      Vec3 n = vnormals[static_cast<std::size_t>(tri[0])] * (1.0 - hit.bu - hit.bv) +
               vnormals[static_cast<std::size_t>(tri[1])] * hit.bu +
               vnormals[static_cast<std::size_t>(tri[2])] * hit.bv;
      const double len = n.norm();
      n = len > 1e-12 ? Vec3(n / len) : mesh.face_normal(hit.face);
      const Vec3 to_cam = (camera.position - point).normalized();
      double facing = n.dot(to_cam);
      if (facing < 0) {
        n = -n;
        facing = -facing;
      }
      if (facing < 1e-5) {
        // Grazing normals get a margin so float32 rounding cannot flip the
        // camera-facing invariant.
        n = (n + to_cam * (2e-5 - facing)).normalized();
      }
      px.point = Vec3(snap_f32(point.x()), snap_f32(point.y()), snap_f32(point.z()));
      px.normal = Vec3(snap_f32(n.x()), snap_f32(n.y()), snap_f32(n.z()));
    }
  });

  PartialScan scan;
  scan.camera = camera;
  scan.grid_width = w;
  scan.grid_height = h;
  scan.depth_grid.resize(pixels.size(), 0.0f);
  for (std::size_t k = 0; k < pixels.size(); ++k) {
    if (pixels[k].depth <= 0) continue;
    scan.depth_grid[k] = pixels[k].depth;
    scan.points.push_back(pixels[k].point);
    scan.normals.push_back(pixels[k].normal);
  }
  if (scan.points.empty()) throw std::runtime_error("mesh out of frustum");
  return scan;
}

}  // namespace vemreg
