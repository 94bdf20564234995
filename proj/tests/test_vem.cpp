#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "vemreg/vem.hpp"

using namespace vemreg;
using testutil::origin_camera;
using testutil::plane_scan;
using testutil::random_rigid;

namespace {

// Source points marched a fixed distance toward the camera along each ray,
// i.e. every residual against the original wall has exactly that norm.
std::vector<Vec3> march_toward_camera(const PartialScan& scan, double offset_mm) {
  std::vector<Vec3> out;
  out.reserve(scan.size());
  for (const auto& p : scan.points) {
    const Vec3 rel = p - scan.camera.position;
    out.push_back(scan.camera.position + rel * (1.0 - offset_mm / rel.norm()));
  }
  return out;
}

}  // namespace

TEST_CASE("classify_point basics on a flat wall") {
  const Camera cam = origin_camera();
  const PartialScan wall = plane_scan(1000.0, cam);
  const ScanIndex index(wall);

  SUBCASE("a scan point against its own scan is occluded with zero residual") {
    const auto c = classify_point(wall.points[137], index);
    CHECK(c.label == RegionLabel::kOccluded);
    CHECK(c.residual.norm() == 0.0);
  }
  SUBCASE("point behind the wall is occluded") {
    const auto c = classify_point({10, 5, 1200}, index);
    CHECK(c.label == RegionLabel::kOccluded);
    CHECK(c.residual.norm() == 0.0);
  }
  SUBCASE("point 10 mm in front along the ray") {
    const Vec3 p = wall.points[200];
    const Vec3 x = cam.position + (p - cam.position) * (1.0 - 10.0 / (p - cam.position).norm());
    const auto c = classify_point(x, index);
    CHECK(c.label == RegionLabel::kFront);
    CHECK(c.residual.norm() == doctest::Approx(10.0).epsilon(1e-6));
  }
  SUBCASE("small depth violations are gated to zero energy but stay Front") {
    const Vec3 p = wall.points[200];
    const Vec3 x = cam.position + (p - cam.position) * (1.0 - 1.0 / (p - cam.position).norm());
    const auto c = classify_point(x, index);
    CHECK(c.label == RegionLabel::kFront);
    CHECK(c.gated);
    CHECK(c.residual.norm() == 0.0);
  }
  SUBCASE("point beside the silhouette uses the view-plane nearest neighbor") {
    // Wall only on the left half; query projects into the carved right half.
    const PartialScan half = plane_scan(1000.0, cam, [&](int i, int) { return i < cam.width / 2; });
    const ScanIndex hindex(half);
    const Vec3 x = cam.backproject(cam.width - 2, cam.height / 2, 1000.0);
    const auto c = classify_point(x, hindex);
    CHECK(c.label == RegionLabel::kBeside);
    // Exhaustive oracle over projected points.
    double best = std::numeric_limits<double>::infinity();
    for (const auto& y : half.points) {
      best = std::min(best, project_to_view_plane(cam, x - y).squaredNorm());
    }
    CHECK(c.residual.squaredNorm() == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("directed energy") {
  const Camera cam = origin_camera();
  const PartialScan wall = plane_scan(1000.0, cam);
  const ScanIndex index(wall);

  SUBCASE("scan against itself is all occluded with zero energy") {
    const VemBreakdown b = directed_energy(wall, index);
    CHECK(b.total() == 0.0);
    CHECK(b.count_o == static_cast<long>(wall.size()));
    CHECK(b.count_f == 0);
    CHECK(b.count_b == 0);
  }
  SUBCASE("plane offset toward the camera along rays costs offset^2 per point") {
    const auto source = march_toward_camera(wall, 5.0);
    const VemBreakdown b = directed_energy_points(source, index);
    CHECK(b.count_f == static_cast<long>(source.size()));
    CHECK(b.total() ==
          doctest::Approx(25.0 * static_cast<double>(source.size())).epsilon(1e-9));
  }
  SUBCASE("disjoint silhouettes are all Beside") {
    const PartialScan left = plane_scan(1000.0, cam, [&](int i, int) { return i < 10; });
    const PartialScan right = plane_scan(1000.0, cam, [&](int i, int) { return i > 40; });
    const ScanIndex right_index(right);
    const VemBreakdown b = directed_energy(left, right_index);
    CHECK(b.count_o == 0);
    CHECK(b.count_f == 0);
    CHECK(b.count_b == static_cast<long>(left.size()));
    CHECK(b.total() > 0.0);
  }
  SUBCASE("breakdown counts partition the evaluated points") {
    Rng rng(3);
    const RigidTransform t = random_rigid(rng, 100);
    std::vector<Vec3> moved;
    for (const auto& p : wall.points) moved.push_back(t.apply(p));
    const VemBreakdown b = directed_energy_points(moved, index);
    CHECK(b.evaluated() == static_cast<long>(wall.size()));
    CHECK(b.total() == b.energy_f + b.energy_b);
    CHECK(b.energy_f >= 0.0);
    CHECK(b.energy_b >= 0.0);
  }
}

TEST_CASE("monotone burial: deeper occlusion never increases energy") {
  const Camera cam = origin_camera();
  const PartialScan wall = plane_scan(1000.0, cam);
  const ScanIndex index(wall);
  double previous = std::numeric_limits<double>::infinity();
  for (const double depth_offset : {-8.0, -4.0, 0.0, 4.0, 8.0, 16.0}) {
    const auto source = march_toward_camera(wall, -depth_offset);  // negative = behind
    const double e = directed_energy_points(source, index).total();
    CHECK(e <= previous + 1e-9);
    previous = e;
    if (depth_offset >= 0) CHECK(e == 0.0);  // at or behind the wall: occluded
  }
}

TEST_CASE("vem of a pair") {
  const auto pair = testutil::rendered_pair(0, 35.0);
  const ScanIndex s1(pair.scan1), s2(pair.scan2);

  SUBCASE("identity on identical scans is zero") {
    const VemBreakdown b = vem(RigidTransform::identity(), s1, s1);
    CHECK(b.total() == 0.0);
  }
  SUBCASE("aligned rendered pair is near zero per point") {
    const VemBreakdown b = vem(RigidTransform::identity(), s1, s2);
    CHECK(b.total() / static_cast<double>(b.evaluated()) < 1.0);  // mm^2 per point
  }
  SUBCASE("symmetry under swapping scans and inverting the transform") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
      const RigidTransform t = random_rigid(rng, 500);
      const double a = vem(t, s1, s2).total();
      const double b = vem(t.inverse(), s2, s1).total();
      CHECK(a == doctest::Approx(b).epsilon(1e-9));
    }
  }
  SUBCASE("ground truth is a near-global minimum") {
    Rng rng(13);
    const double at_truth = vem(RigidTransform::identity(), s1, s2).total();
    for (int trial = 0; trial < 1000; ++trial) {
      const RigidTransform t = random_rigid(rng, 500);
      CHECK(at_truth <= vem(t, s1, s2).total());
    }
  }
  SUBCASE("rigid equivariance under a common world motion") {
    Rng rng(17);
    const RigidTransform t = random_rigid(rng, 200);
    const double base = vem(t, s1, s2).total();
    const RigidTransform world = random_rigid(rng, 800);
    const PartialScan m1 = transform_scan(pair.scan1, world);
    const PartialScan m2 = transform_scan(pair.scan2, world);
    const ScanIndex w1(m1), w2(m2);
    const RigidTransform conjugated = world.compose(t).compose(world.inverse());
    const double moved = vem(conjugated, w1, w2).total();
    CHECK(moved == doctest::Approx(base).epsilon(1e-6));
  }
}

TEST_CASE("residual vector is consistent with the energy") {
  const auto pair = testutil::rendered_pair(1, 30.0);
  const ScanIndex s1(pair.scan1), s2(pair.scan2);
  Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const RigidTransform t = random_rigid(rng, 400);
    const auto rows = residual_vector(t, s1, s2);
    double sum = 0;
    for (const auto& r : rows) sum += r.residual.squaredNorm();
    const double total = vem(t, s1, s2).total();
    CHECK(sum == doctest::Approx(total).epsilon(1e-9));
  }
  SUBCASE("aligned identical scans give an empty residual") {
    CHECK(residual_vector(RigidTransform::identity(), s1, s1).empty());
  }
}

TEST_CASE("single front point yields exactly its ray residual") {
  const Camera cam = origin_camera();
  const PartialScan wall = plane_scan(1000.0, cam);
  const ScanIndex wall_index(wall);
  // One source point 20 mm in front of the wall along its ray.
  const Vec3 p = wall.points[300];
  const Vec3 x = cam.position + (p - cam.position) * (1.0 - 20.0 / (p - cam.position).norm());
  std::vector<ResidualRecord> records;
  const VemBreakdown b = directed_energy_points({x}, wall_index, 1, &records);
  CHECK(b.count_f == 1);
  REQUIRE(records.size() == 1);
  const auto hit = wall_index.ray_intersect(x);
  REQUIRE(hit.has_value());
  CHECK(records[0].residual.isApprox(x - *hit, 1e-12));
  CHECK(records[0].residual.norm() == doctest::Approx(20.0).epsilon(1e-6));
}

TEST_CASE("frozen residual model matches finite differences") {
  const auto pair = testutil::rendered_pair(2, 40.0);
  const PartialScan e1 = downsample(pair.scan1, 400, 5);
  const PartialScan e2 = downsample(pair.scan2, 400, 6);
  const ScanIndex s1(e1), s2(e2);
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const RigidTransform t = random_rigid(rng, 300);
    const FrozenResidualModel model(t, s1, s2);
    if (model.record_count() == 0) continue;
    const Eigen::MatrixXd j = model.jacobian();
    Eigen::MatrixXd fd(model.rows(), 6);
    const double h = 1e-5;
    for (int col = 0; col < 6; ++col) {
      Eigen::Matrix<double, 6, 1> step = Eigen::Matrix<double, 6, 1>::Zero();
      step[col] = h;
      const auto plus = model.residuals(TangentVector::from_stacked(step));
      const auto minus = model.residuals(TangentVector::from_stacked(-step));
      fd.col(col) = (plus - minus) / (2 * h);
    }
    const double scale = std::max(1e-12, j.cwiseAbs().maxCoeff());
    CHECK((fd - j).cwiseAbs().maxCoeff() / scale < 1e-3);
  }
}
