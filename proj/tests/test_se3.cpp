#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "vemreg/se3.hpp"

using namespace vemreg;
using testutil::axis_angle;
using testutil::random_quat;
using testutil::random_rigid;

namespace {

// Rotation-part oracle: truncated power series of expm([u]x), left-applied.
Eigen::Matrix3d expm_series(const Vec3& u) {
  Eigen::Matrix3d cross;
  cross << 0, -u.z(), u.y(), u.z(), 0, -u.x(), -u.y(), u.x(), 0;
  Eigen::Matrix3d sum = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d term = Eigen::Matrix3d::Identity();
  for (int k = 1; k <= 20; ++k) {
    term = term * cross / k;
    sum += term;
  }
  return sum;
}

// Expected rotation angle under the uniform measure on SO(3):
// (1/pi) * integral of theta (1 - cos theta) over [0, pi], by Simpson.
double haar_mean_angle_deg() {
  const int n = 20000;
  const double h = M_PI / n;
  double sum = 0;
  for (int k = 0; k <= n; ++k) {
    const double theta = k * h;
    const double f = theta * (1.0 - std::cos(theta)) / M_PI;
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    sum += w * f;
  }
  return (sum * h / 3.0) * 180.0 / M_PI;
}

}  // namespace

TEST_CASE("rotation distance basics") {
  const Quat id(1, 0, 0, 0);
  CHECK(rotation_distance_deg(id, id) == doctest::Approx(0.0));
  const Quat rz30 = axis_angle({0, 0, 1}, 30.0);
  CHECK(rotation_distance_deg(id, rz30) == doctest::Approx(30.0).epsilon(1e-9));
  const Quat q = axis_angle({1, 2, -1}, 77.0);
  const Quat nq(-q.w(), -q.x(), -q.y(), -q.z());
  CHECK(rotation_distance_deg(q, nq) == doctest::Approx(0.0));
  CHECK(rotation_distance_deg(rz30, id) == doctest::Approx(30.0).epsilon(1e-9));
  CHECK_THROWS_AS(rotation_distance_deg(Quat(2, 0, 0, 0), id), std::invalid_argument);
}

TEST_CASE("rotation distance triangle inequality and bi-invariance") {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const Quat a = random_quat(rng), b = random_quat(rng), c = random_quat(rng);
    const double ab = rotation_distance_deg(a, b);
    const double bc = rotation_distance_deg(b, c);
    const double ac = rotation_distance_deg(a, c);
    CHECK(ac <= ab + bc + 1e-6);
  }
  for (int trial = 0; trial < 200; ++trial) {
    const Quat a = random_quat(rng), b = random_quat(rng), q = random_quat(rng);
    const double base = rotation_distance_deg(a, b);
    const Quat qa = (q * a).normalized(), qb = (q * b).normalized();
    CHECK(rotation_distance_deg(qa, qb) == doctest::Approx(base).epsilon(1e-6));
  }
}

TEST_CASE("exp_at basics") {
  const RigidTransform id;
  SUBCASE("zero tangent returns the transform exactly") {
    Rng rng(3);
    const RigidTransform t = random_rigid(rng, 100);
    const RigidTransform back = exp_at(t, TangentVector{});
    CHECK(back.q.coeffs() == t.q.coeffs());
    CHECK(back.t == t.t);
  }
  SUBCASE("quarter turn about z") {
    const RigidTransform r = exp_at(id, {Vec3(0, 0, M_PI / 2), Vec3::Zero()});
    const Vec3 moved = r.apply(Vec3(1, 0, 0));
    CHECK(moved.isApprox(Vec3(0, 1, 0), 1e-12));
  }
  SUBCASE("pure translation moves points only") {
    const RigidTransform t = exp_at(id, {Vec3::Zero(), Vec3(5, -3, 2)});
    CHECK(t.q.coeffs() == Quat(1, 0, 0, 0).coeffs());
    CHECK(t.t == Vec3(5, -3, 2));
  }
  SUBCASE("pure rotation keeps translation") {
    Rng rng(4);
    const RigidTransform base = random_rigid(rng, 50);
    const RigidTransform r = exp_at(base, {Vec3(0.1, 0.2, -0.05), Vec3::Zero()});
    CHECK(r.t == base.t);
  }
}

TEST_CASE("exp_at matches the left-multiplied matrix exponential") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const RigidTransform base = random_rigid(rng, 200);
    const Vec3 u(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3));
    const Vec3 v(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20));
    const RigidTransform stepped = exp_at(base, {u, v});
    const Eigen::Matrix3d expected = expm_series(u) * base.q.toRotationMatrix();
    CHECK((stepped.q.toRotationMatrix() - expected).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((stepped.t - (base.t + v)).norm() < 1e-12);
  }
}

TEST_CASE("compose and inverse") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const RigidTransform t = random_rigid(rng, 500);
    const RigidTransform round = t.compose(t.inverse());
    CHECK(rotation_distance_deg(round.q, Quat(1, 0, 0, 0)) < 1e-9);
    CHECK(round.t.norm() < 1e-9);
    CHECK(t.q.w() >= 0.0);  // canonical form
  }
}

TEST_CASE("pso coordinates round-trip") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const RigidTransform t = random_rigid(rng, 300);
    const PsoCoordinates c = PsoCoordinates::from_transform(t);
    CHECK(c.q.norm() <= 1.0 + 1e-12);
    const RigidTransform back = c.to_transform();
    CHECK(rotation_distance_deg(back.q, t.q) < 1e-9);
    CHECK((back.t - t.t).norm() < 1e-12);
  }
  SUBCASE("coordinates outside the ball renormalize onto it") {
    PsoCoordinates c{Vec3(1.5, 0, 0), Vec3::Zero()};
    const RigidTransform t = c.to_transform();
    CHECK(t.q.norm() == doctest::Approx(1.0));
    CHECK(t.q.w() == doctest::Approx(0.0));
    c.clamp_to_ball();
    CHECK(c.q.norm() == doctest::Approx(1.0));
  }
}

TEST_CASE("uniform rotation sampling") {
  const auto quats = sample_uniform_rotations(1600, 42);
  REQUIRE(quats.size() == 1600);
  for (const auto& q : quats) {
    CHECK(std::abs(q.norm() - 1.0) < 1e-12);
    CHECK(q.w() >= 0.0);
  }
  SUBCASE("deterministic for a fixed seed") {
    const auto again = sample_uniform_rotations(1600, 42);
    for (std::size_t i = 0; i < quats.size(); ++i) {
      CHECK(quats[i].coeffs() == again[i].coeffs());
    }
    const auto other = sample_uniform_rotations(1600, 43);
    CHECK(other[0].coeffs() != quats[0].coeffs());
  }
  SUBCASE("mean angle matches the Haar density") {
    const auto sample = sample_uniform_rotations(100000, 1234);
    const Quat id(1, 0, 0, 0);
    double mean = 0;
    for (const auto& q : sample) mean += rotation_distance_deg(q, id);
    mean /= static_cast<double>(sample.size());
    CHECK(std::abs(mean - haar_mean_angle_deg()) < 1.0);
  }
}

TEST_CASE("transform JSON round-trip") {
  Rng rng(21);
  const RigidTransform t = random_rigid(rng, 1000);
  const nlohmann::json j = transform_to_json(t);
  REQUIRE(j.contains("q"));
  REQUIRE(j.contains("t"));
  const RigidTransform back = transform_from_json(j);
  CHECK(rotation_distance_deg(back.q, t.q) < 1e-12);
  CHECK((back.t - t.t).norm() < 1e-12);
  CHECK_THROWS_AS(transform_from_json(nlohmann::json{{"q", {1, 0, 0, 0}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(transform_from_json(nlohmann::json{{"q", {1, 0, 0}}, {"t", {0, 0, 0}}}),
                  std::invalid_argument);
}
