#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "vemreg/kdtree.hpp"
#include "vemreg/scan.hpp"
#include "vemreg/scan_io.hpp"
#include "vemreg/vem.hpp"

using namespace vemreg;
using testutil::origin_camera;
using testutil::plane_scan;
using testutil::TempDir;

TEST_CASE("kd-tree answers match exhaustive search") {
  Rng rng(31);
  std::vector<KdTree3::Point> pts(500);
  for (auto& p : pts) p = {rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
  const KdTree3 tree(pts);
  for (int trial = 0; trial < 100; ++trial) {
    const KdTree3::Point q{rng.uniform(-12, 12), rng.uniform(-12, 12), rng.uniform(-12, 12)};
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
      double d2 = 0;
      for (int k = 0; k < 3; ++k) d2 += (pts[static_cast<std::size_t>(i)][k] - q[k]) *
                                        (pts[static_cast<std::size_t>(i)][k] - q[k]);
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    const auto [idx, d2] = tree.nearest(q);
    CHECK(d2 == doctest::Approx(best_d2));
    CHECK(idx == best);
  }
  SUBCASE("knn matches brute force") {
    const KdTree3::Point q{0, 0, 0};
    auto got = tree.knn(q, 8);
    std::vector<std::pair<double, int>> brute;
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
      double d2 = 0;
      for (int k = 0; k < 3; ++k) d2 += pts[static_cast<std::size_t>(i)][k] *
                                        pts[static_cast<std::size_t>(i)][k];
      brute.emplace_back(d2, i);
    }
    std::sort(brute.begin(), brute.end());
    REQUIRE(got.size() == 8);
    for (int k = 0; k < 8; ++k) {
      CHECK(got[static_cast<std::size_t>(k)].second ==
            doctest::Approx(brute[static_cast<std::size_t>(k)].first));
    }
  }
}

TEST_CASE("view-plane projector") {
  Camera cam = origin_camera();
  SUBCASE("axis-aligned example") {
    const Vec3 p = project_to_view_plane(cam, {3, 4, 7});
    CHECK(p.isApprox(Vec3(3, 4, 0), 1e-15));
  }
  SUBCASE("view direction is the nullspace") {
    CHECK(project_to_view_plane(cam, cam.view).norm() < 1e-15);
  }
  SUBCASE("idempotent and linear") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      const Vec3 x(rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-9, 9));
      const Vec3 y(rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-9, 9));
      const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
      const Vec3 px = project_to_view_plane(cam, x);
      CHECK((project_to_view_plane(cam, px) - px).norm() < 1e-9);
      const Vec3 lhs = project_to_view_plane(cam, a * x + b * y);
      const Vec3 rhs = a * px + b * project_to_view_plane(cam, y);
      CHECK((lhs - rhs).norm() < 1e-9);
    }
    CHECK((project_to_view_plane(cam, Vec3(1, 2, 3)).dot(cam.view)) < 1e-9);
  }
}

TEST_CASE("ray intersection against a flat wall") {
  const Camera cam = origin_camera();
  const PartialScan wall = plane_scan(1000.0, cam);
  REQUIRE_NOTHROW(wall.validate());
  const ScanIndex index(wall);

  SUBCASE("closed-form plane hit") {
    const auto hit = index.ray_intersect({0, 0, 1500});
    REQUIRE(hit.has_value());
    CHECK(hit->isApprox(Vec3(0, 0, 1000), 1e-9));
    // Off-axis ray: intersection scales the query onto the z=1000 plane.
    const Vec3 q(120, -80, 1500);
    const auto off = index.ray_intersect(q);
    REQUIRE(off.has_value());
    CHECK(off->isApprox(q * (1000.0 / 1500.0), 1e-6));
  }
  SUBCASE("self hit: a scan occludes itself exactly") {
    for (std::size_t i = 0; i < wall.points.size(); i += 97) {
      const auto hit = index.ray_intersect(wall.points[i]);
      REQUIRE(hit.has_value());
      CHECK((*hit - wall.points[i]).norm() < 1e-9);
    }
  }
  SUBCASE("no-return pixel gives no intersection") {
    const PartialScan holed =
        plane_scan(1000.0, cam, [](int i, int j) { return i > 10 || j > 10; });
    const ScanIndex hindex(holed);
    // Ray through pixel (0, 0), well inside the carved-out corner.
    const Vec3 through_hole = cam.backproject(0, 0, 1500.0);
    CHECK(!hindex.ray_intersect(through_hole).has_value());
  }
  SUBCASE("ray exits image boundary") {
    CHECK(!index.ray_intersect(cam.backproject(-30, 5, 900)).has_value());
  }
  SUBCASE("point behind the camera") {
    CHECK(!index.ray_intersect({0, 0, -500}).has_value());
  }
  SUBCASE("query at the camera position is invalid") {
    CHECK_THROWS_AS(index.ray_intersect(cam.position), std::invalid_argument);
  }
}

TEST_CASE("scan validation names the violated field") {
  const Camera cam = origin_camera();
  PartialScan scan = plane_scan(1000.0, cam);
  SUBCASE("flipped normal") {
    scan.normals[3] = -scan.normals[3];
    CHECK_THROWS_WITH_AS(scan.validate(), doctest::Contains("normal"), std::invalid_argument);
  }
  SUBCASE("point outside the image") {
    scan.points[0] = cam.backproject(-50, 0, 1000.0);
    CHECK_THROWS_WITH_AS(scan.validate(), doctest::Contains("image rectangle"),
                         std::invalid_argument);
  }
  SUBCASE("grid mismatch") {
    scan.depth_grid[scan.depth_grid.size() / 2 ] = 400.0f;
    CHECK_THROWS_WITH_AS(scan.validate(), doctest::Contains("0.5 mm"), std::invalid_argument);
  }
  SUBCASE("count mismatch") {
    scan.normals.pop_back();
    CHECK_THROWS_AS(scan.validate(), std::invalid_argument);
  }
}

TEST_CASE("downsample") {
  const PartialScan scan = plane_scan(800.0, origin_camera());
  SUBCASE("target at least size returns the scan unchanged") {
    const PartialScan same = downsample(scan, scan.size() + 10, 1);
    CHECK(same.size() == scan.size());
  }
  SUBCASE("subset of the original with camera carried through") {
    const PartialScan sub = downsample(scan, 100, 7);
    REQUIRE(sub.size() == 100);
    CHECK(sub.depth_grid == scan.depth_grid);
    for (const auto& p : sub.points) {
      bool found = false;
      for (const auto& q : scan.points) {
        if (p == q) {
          found = true;
          break;
        }
      }
      CHECK(found);
    }
    REQUIRE_NOTHROW(sub.validate());
  }
  SUBCASE("deterministic per seed") {
    const PartialScan a = downsample(scan, 64, 99);
    const PartialScan b = downsample(scan, 64, 99);
    const PartialScan c = downsample(scan, 64, 100);
    CHECK(a.points == b.points);
    CHECK(a.points != c.points);
  }
}

TEST_CASE("transform_scan keeps a scan self-consistent") {
  Rng rng(17);
  const PartialScan scan = plane_scan(900.0, origin_camera());
  const RigidTransform t = testutil::random_rigid(rng, 400);
  const PartialScan moved = transform_scan(scan, t);
  REQUIRE_NOTHROW(moved.validate());
  CHECK(moved.depth_grid == scan.depth_grid);
}

TEST_CASE("scan file round-trip") {
  TempDir dir("scanio");
  // float32-representable coordinates so binary IO is bit-exact.
  PartialScan scan;
  scan.camera = origin_camera(8, 6, 10.0);
  scan.points = {Vec3(0.5, 0.25, 100.0), Vec3(-1.25, 2.0, 101.5), Vec3(3.0, -0.75, 99.0)};
  scan.normals = {Vec3(0, 0, -1), Vec3(0, -0.6, -0.8), Vec3(-0.6, 0, -0.8)};
  REQUIRE_NOTHROW(scan.validate());

  SUBCASE("binary preserves points and normals bit-exactly") {
    const std::string path = dir.file("scan.ply");
    save_scan(scan, path);
    const PartialScan back = load_scan(path);
    REQUIRE(back.size() == scan.size());
    for (std::size_t i = 0; i < scan.size(); ++i) {
      CHECK(back.points[i] == scan.points[i]);
      CHECK(back.normals[i] == scan.normals[i]);
    }
    CHECK(back.camera.position == scan.camera.position);
    CHECK(back.camera.fx == scan.camera.fx);
    CHECK(back.camera.width == scan.camera.width);
  }
  SUBCASE("ascii mode") {
    const std::string path = dir.file("scan_ascii.ply");
    save_scan(scan, path, false);
    const PartialScan back = load_scan(path);
    REQUIRE(back.size() == scan.size());
    for (std::size_t i = 0; i < scan.size(); ++i) {
      CHECK(back.points[i] == scan.points[i]);
    }
  }
  SUBCASE("depth grid round-trips through the PNG within quantization") {
    PartialScan with_grid = plane_scan(1000.0, origin_camera(16, 12, 20.0));
    const std::string path = dir.file("grid.ply");
    save_scan(with_grid, path);
    const PartialScan back = load_scan(path);
    REQUIRE(back.has_depth_grid());
    REQUIRE(back.depth_grid.size() == with_grid.depth_grid.size());
    for (std::size_t k = 0; k < back.depth_grid.size(); ++k) {
      CHECK(std::abs(back.depth_grid[k] - with_grid.depth_grid[k]) <= 0.5);
    }
  }
  SUBCASE("missing camera sidecar") {
    const std::string path = dir.file("orphan.ply");
    save_scan(scan, path);
    std::filesystem::remove(camera_sidecar_path(path));
    CHECK_THROWS_WITH_AS(load_scan(path), doctest::Contains("camera sidecar not found"),
                         FormatError);
  }
  SUBCASE("normals are required") {
    const std::string path = dir.file("nonormals.ply");
    {
      std::ofstream out(path);
      out << "ply\nformat ascii 1.0\nelement vertex 1\n"
             "property float x\nproperty float y\nproperty float z\nend_header\n"
             "0 0 100\n";
    }
    {
      std::ofstream cam(camera_sidecar_path(path));
      cam << camera_to_json(scan.camera).dump();
    }
    CHECK_THROWS_WITH_AS(load_scan(path), doctest::Contains("normals"), FormatError);
  }
  SUBCASE("missing file names the path") {
    CHECK_THROWS_WITH_AS(load_scan(dir.file("absent.ply")), doctest::Contains("absent.ply"),
                         FormatError);
  }
}

TEST_CASE("splat fallback for scans without a grid") {
  PartialScan scan = plane_scan(1000.0, origin_camera());
  scan.depth_grid.clear();
  scan.grid_width = scan.grid_height = 0;
  const ScanIndex index(scan);
  const auto hit = index.ray_intersect({0, 0, 1500});
  REQUIRE(hit.has_value());
  CHECK(hit->isApprox(Vec3(0, 0, 1000), 1e-6));
}

TEST_CASE("exact nearest neighbors through the scan index") {
  Rng rng(23);
  const PartialScan scan = plane_scan(700.0, origin_camera());
  const ScanIndex index(scan);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 q(rng.uniform(-400, 400), rng.uniform(-300, 300), rng.uniform(500, 900));
    double d2;
    const int got = index.nearest_in_view_plane(q, &d2);
    // Exhaustive oracle in the projected metric.
    double best = std::numeric_limits<double>::infinity();
    int best_idx = -1;
    for (int i = 0; i < static_cast<int>(scan.size()); ++i) {
      const Vec3 diff = project_to_view_plane(scan.camera, q - scan.points[static_cast<std::size_t>(i)]);
      if (diff.squaredNorm() < best) {
        best = diff.squaredNorm();
        best_idx = i;
      }
    }
    CHECK(d2 == doctest::Approx(best));
    CHECK(got == best_idx);

    const int got3 = index.nearest_3d(q, &d2);
    best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(scan.size()); ++i) {
      const double cand = (q - scan.points[static_cast<std::size_t>(i)]).squaredNorm();
      if (cand < best) {
        best = cand;
        best_idx = i;
      }
    }
    CHECK(got3 == best_idx);
  }
}
