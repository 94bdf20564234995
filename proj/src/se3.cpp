#include "vemreg/se3.hpp"

#include <cmath>
#include <stdexcept>

#include "vemreg/rng.hpp"

namespace vemreg {

Quat canonical_quat(const Quat& q) {
  Quat r = q.normalized();
  bool flip = r.w() < 0.0;
  if (r.w() == 0.0) {
    if (r.x() != 0.0) {
      flip = r.x() < 0.0;
    } else if (r.y() != 0.0) {
      flip = r.y() < 0.0;
    } else {
      flip = r.z() < 0.0;
    }
  }
  if (flip) r.coeffs() = -r.coeffs();
  return r;
}

Quat quat_from_rotvec(const Vec3& u) {
  const double theta = u.norm();
  double half = 0.5 * theta;
  double scale;
  if (theta < 1e-12) {
    scale = 0.5 - theta * theta / 48.0;  // sin(t/2)/t series
  } else {
    scale = std::sin(half) / theta;
  }
  return Quat(std::cos(half), u.x() * scale, u.y() * scale, u.z() * scale);
}

RigidTransform::RigidTransform(const Quat& rotation, const Vec3& translation)
    : q(canonical_quat(rotation)), t(translation) {}

RigidTransform RigidTransform::inverse() const {
  const Quat qi = canonical_quat(q.conjugate());
  return {qi, -(qi * t)};
}

RigidTransform RigidTransform::compose(const RigidTransform& other) const {
  return {q * other.q, q * other.t + t};
}

PsoCoordinates PsoCoordinates::from_transform(const RigidTransform& T) {
  const Quat c = canonical_quat(T.q);
  return {Vec3(c.x(), c.y(), c.z()), T.t};
}

void PsoCoordinates::clamp_to_ball() {
  const double n = q.norm();
  if (n > 1.0) q /= n;
}

RigidTransform PsoCoordinates::to_transform() const {
  Vec3 im = q;
  double n2 = im.squaredNorm();
  if (n2 > 1.0) {
    im /= std::sqrt(n2);
    n2 = 1.0;
  }
  const double w = std::sqrt(std::max(0.0, 1.0 - n2));
  return {Quat(w, im.x(), im.y(), im.z()), t};
}

double rotation_distance_deg(const Quat& ra, const Quat& rb) {
  const double na = ra.norm(), nb = rb.norm();
  if (std::abs(na - 1.0) > 1e-6 || std::abs(nb - 1.0) > 1e-6) {
    throw std::invalid_argument("rotation_distance_deg: non-unit quaternion");
  }
  const double dot = std::abs(ra.coeffs().dot(rb.coeffs()));
  const double angle = 2.0 * std::acos(std::min(1.0, dot));
  return angle * 180.0 / M_PI;
}

RigidTransform exp_at(const RigidTransform& T, const TangentVector& m) {
  if (m.u.isZero() && m.v.isZero()) return T;
  return {quat_from_rotvec(m.u) * T.q, T.t + m.v};
}

std::vector<Quat> sample_uniform_rotations(int n, std::uint64_t seed) {
  Rng rng(stream_key(seed, static_cast<std::uint64_t>(RngStream::kRotationSampling)));
  std::vector<Quat> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double u1 = rng.uniform();
    const double u2 = rng.uniform();
    const double u3 = rng.uniform();
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    const double s2 = std::sin(2.0 * M_PI * u2), c2 = std::cos(2.0 * M_PI * u2);
    const double s3 = std::sin(2.0 * M_PI * u3), c3 = std::cos(2.0 * M_PI * u3);
    out.push_back(canonical_quat(Quat(b * c3, a * s2, a * c2, b * s3)));
  }
  return out;
}

nlohmann::json transform_to_json(const RigidTransform& T) {
  return nlohmann::json{{"q", {T.q.w(), T.q.x(), T.q.y(), T.q.z()}},
                        {"t", {T.t.x(), T.t.y(), T.t.z()}}};
}

RigidTransform transform_from_json(const nlohmann::json& j) {
  if (!j.contains("q") || !j.contains("t")) {
    throw std::invalid_argument("transform JSON requires \"q\" and \"t\"");
  }
  const auto& q = j.at("q");
  const auto& t = j.at("t");
  if (!q.is_array() || q.size() != 4 || !t.is_array() || t.size() != 3) {
    throw std::invalid_argument("transform JSON: q must be [w,x,y,z], t must be [x,y,z]");
  }
  return {Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
               q[3].get<double>()),
          Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>())};
}

}  // namespace vemreg
