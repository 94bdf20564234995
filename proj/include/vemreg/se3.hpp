#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cstdint>
#include <vector>

#include <json.hpp>

namespace vemreg {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

// Returns q or -q such that w >= 0; at w == 0 the first nonzero imaginary
// component is made positive so the representative is unique.
Quat canonical_quat(const Quat& q);

// Unit quaternion from a rotation vector (angle * axis), stable near zero.
Quat quat_from_rotvec(const Vec3& u);

// Rigid motion of 3-space: x -> R x + t. Rotation stored as a unit
// quaternion in canonical form (w >= 0), translation in millimeters.
struct RigidTransform {
  Quat q{1, 0, 0, 0};
  Vec3 t{0, 0, 0};

  RigidTransform() = default;
  RigidTransform(const Quat& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& x) const { return q * x + t; }
  Vec3 rotate(const Vec3& v) const { return q * v; }

  RigidTransform inverse() const;
  RigidTransform compose(const RigidTransform& other) const;  // this ∘ other
};

// Tangent perturbation at a transform: u is the rotation part (radians),
// v the translation part (mm).
struct TangentVector {
  Vec3 u{0, 0, 0};
  Vec3 v{0, 0, 0};

  Eigen::Matrix<double, 6, 1> stacked() const {
    Eigen::Matrix<double, 6, 1> m;
    m << u, v;
    return m;
  }
  static TangentVector from_stacked(const Eigen::Matrix<double, 6, 1>& m) {
    return {m.head<3>(), m.tail<3>()};
  }
};

// Chart used by the swarm: imaginary part of the canonical quaternion plus
// the translation. ||q|| <= 1 always; conversions renormalize if violated.
struct PsoCoordinates {
  Vec3 q{0, 0, 0};
  Vec3 t{0, 0, 0};

  Eigen::Matrix<double, 6, 1> stacked() const {
    Eigen::Matrix<double, 6, 1> m;
    m << q, t;
    return m;
  }

  static PsoCoordinates from_transform(const RigidTransform& T);
  RigidTransform to_transform() const;
  // Projects q back onto the closed unit ball (no-op when already inside).
  void clamp_to_ball();
};

// Bi-invariant SO(3) distance: least rotation angle taking one rotation to
// the other, in degrees, in [0, 180]. Throws std::invalid_argument if either
// quaternion is off unit norm by more than 1e-6.
double rotation_distance_deg(const Quat& ra, const Quat& rb);

// Left-translated exponential at T: (Rodrigues(u) * R, t + v).
RigidTransform exp_at(const RigidTransform& T, const TangentVector& m);

// Deterministic uniform samples on SO(3) (subgroup-algorithm construction).
std::vector<Quat> sample_uniform_rotations(int n, std::uint64_t seed);

// JSON form: {"q": [w, x, y, z], "t": [x, y, z]}, t in mm.
nlohmann::json transform_to_json(const RigidTransform& T);
RigidTransform transform_from_json(const nlohmann::json& j);

}  // namespace vemreg
