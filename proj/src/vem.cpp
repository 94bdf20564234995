#include "vemreg/vem.hpp"

namespace vemreg {

PointClassification classify_point(const Vec3& x, const ScanIndex& target) {
  PointClassification out;
  const ScanIndex::RayProbe probe = target.probe_ray(x);
  if (probe.hit) {
    if (probe.z >= probe.depth) {
      out.label = RegionLabel::kOccluded;
      return out;
    }
    out.label = RegionLabel::kFront;
    out.anchor = target.camera().position + probe.rel * (probe.depth / probe.z);
    const Vec3 r = x - out.anchor;
    if (r.norm() < kFrontGateMm) {
      out.gated = true;  // small depth violation: surface noise, no energy
    } else {
      out.residual = r;
    }
    return out;
  }
  out.label = RegionLabel::kBeside;
  const int nn = target.nearest_in_view_plane(x);
  out.anchor = target.scan().points[static_cast<std::size_t>(nn)];
  out.residual = project_to_view_plane(target.camera(), x - out.anchor);
  return out;
}

VemBreakdown directed_energy_points(const std::vector<Vec3>& points, const ScanIndex& target,
                                    int direction, std::vector<ResidualRecord>* records) {
  VemBreakdown sum;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const PointClassification c = classify_point(points[i], target);
    switch (c.label) {
      case RegionLabel::kOccluded:
        ++sum.count_o;
        break;
      case RegionLabel::kFront:
        ++sum.count_f;
        sum.energy_f += c.residual.squaredNorm();
        break;
      case RegionLabel::kBeside:
        ++sum.count_b;
        sum.energy_b += c.residual.squaredNorm();
        break;
    }
    if (records) {
      records->push_back({direction, static_cast<int>(i), c.label, c.gated, points[i],
                          c.residual, c.anchor});
    }
  }
  return sum;
}

VemBreakdown directed_energy(const PartialScan& source, const ScanIndex& target) {
  return directed_energy_points(source.points, target);
}

VemBreakdown directed_energy(const PartialScan& source, const PartialScan& target) {
  const ScanIndex index(target);
  return directed_energy(source, index);
}

namespace {
std::vector<Vec3> apply_to_points(const RigidTransform& T, const std::vector<Vec3>& pts) {
  std::vector<Vec3> out(pts.size());
  const Eigen::Matrix3d R = T.q.toRotationMatrix();
  for (std::size_t i = 0; i < pts.size(); ++i) out[i] = R * pts[i] + T.t;
  return out;
}
}  // namespace

VemBreakdown vem(const RigidTransform& T, const ScanIndex& s1, const ScanIndex& s2,
                 std::vector<ResidualRecord>* records) {
  const RigidTransform Tinv = T.inverse();
  // Records keep the untransformed source coordinates so the LM model can
  // re-apply its own perturbed transform.
  const std::size_t mark0 = records ? records->size() : 0;
  VemBreakdown sum =
      directed_energy_points(apply_to_points(Tinv, s1.scan().points), s2, 0, records);
  if (records) {
    for (std::size_t i = mark0; i < records->size(); ++i) {
      auto& rec = (*records)[i];
      rec.source = s1.scan().points[static_cast<std::size_t>(rec.point_index)];
    }
  }
  const std::size_t mark1 = records ? records->size() : 0;
  sum += directed_energy_points(apply_to_points(T, s2.scan().points), s1, 1, records);
  if (records) {
    for (std::size_t i = mark1; i < records->size(); ++i) {
      auto& rec = (*records)[i];
      rec.source = s2.scan().points[static_cast<std::size_t>(rec.point_index)];
    }
  }
  return sum;
}

VemBreakdown vem(const RigidTransform& T, const PartialScan& p1, const PartialScan& p2) {
  const ScanIndex s1(p1), s2(p2);
  return vem(T, s1, s2);
}

double normalized_vem(const RigidTransform& T, const ScanIndex& s1, const ScanIndex& s2) {
  const VemBreakdown b = vem(T, s1, s2);
  const long n = b.evaluated();
  return n == 0 ? 0.0 : b.total() / static_cast<double>(n);
}

std::vector<ResidualRecord> residual_vector(const RigidTransform& T, const ScanIndex& s1,
                                            const ScanIndex& s2) {
  std::vector<ResidualRecord> records;
  vem(T, s1, s2, &records);
  std::vector<ResidualRecord> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    if (r.label == RegionLabel::kOccluded) continue;
    if (r.label == RegionLabel::kFront && r.gated) continue;
    rows.push_back(r);
  }
  return rows;
}

FrozenResidualModel::FrozenResidualModel(const RigidTransform& T, const ScanIndex& s1,
                                         const ScanIndex& s2)
    : base_(T), view1_(s1.camera().view), view2_(s2.camera().view) {
  rows_ = residual_vector(T, s1, s2);
}

namespace {
Vec3 plane_project(const Vec3& v, const Vec3& view) { return v - view * view.dot(v); }

Eigen::Matrix3d skew(const Vec3& w) {
  Eigen::Matrix3d m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}
}  // namespace

Eigen::VectorXd FrozenResidualModel::residuals(const TangentVector& m) const {
  const RigidTransform T = exp_at(base_, m);
  const RigidTransform Tinv = T.inverse();
  Eigen::VectorXd r(rows());
  for (int k = 0; k < record_count(); ++k) {
    const ResidualRecord& row = rows_[static_cast<std::size_t>(k)];
    Vec3 res;
    if (row.direction == 1) {
      const Vec3 p = T.apply(row.source);
      res = p - row.anchor;
      if (row.label == RegionLabel::kBeside) res = plane_project(res, view1_);
    } else {
      const Vec3 p = Tinv.apply(row.source);
      res = p - row.anchor;
      if (row.label == RegionLabel::kBeside) res = plane_project(res, view2_);
    }
    r.segment<3>(3 * k) = res;
  }
  return r;
}

Eigen::MatrixXd FrozenResidualModel::jacobian() const {
  const Eigen::Matrix3d R = base_.q.toRotationMatrix();
  const Eigen::Matrix3d Rt = R.transpose();
  Eigen::MatrixXd J(rows(), 6);
  const Eigen::Matrix3d P1 = Eigen::Matrix3d::Identity() - view1_ * view1_.transpose();
  const Eigen::Matrix3d P2 = Eigen::Matrix3d::Identity() - view2_ * view2_.transpose();
  for (int k = 0; k < record_count(); ++k) {
    const ResidualRecord& row = rows_[static_cast<std::size_t>(k)];
    Eigen::Matrix3d du, dv;
    if (row.direction == 1) {
      // p(m) = exp([u]x) R x + t + v
      du = -skew(R * row.source);
      dv = Eigen::Matrix3d::Identity();
      if (row.label == RegionLabel::kBeside) {
        du = P1 * du;
        dv = P1 * dv;
      }
    } else {
      // p(m) = R^T exp(-[u]x) (x - t - v)
      du = Rt * skew(row.source - base_.t);
      dv = -Rt;
      if (row.label == RegionLabel::kBeside) {
        du = P2 * du;
        dv = P2 * dv;
      }
    }
    J.block<3, 3>(3 * k, 0) = du;
    J.block<3, 3>(3 * k, 3) = dv;
  }
  return J;
}

}  // namespace vemreg
