#pragma once

#include <vector>

#include "vemreg/scan.hpp"
#include "vemreg/se3.hpp"

namespace vemreg {

// Region of one point relative to a target scan, viewed from the target's
// camera: occluded by the target (consistent), in front of it (depth
// violation), or beside it (the ray misses the target entirely).
enum class RegionLabel { kOccluded, kFront, kBeside };

// Depth violations smaller than this are treated as surface noise and
// contribute no energy (the label stays Front so counts are continuous).
inline constexpr double kFrontGateMm = 3.0;

struct VemBreakdown {
  long count_o = 0;
  long count_f = 0;
  long count_b = 0;
  double energy_f = 0;  // mm^2
  double energy_b = 0;  // mm^2

  double total() const { return energy_f + energy_b; }
  long evaluated() const { return count_o + count_f + count_b; }

  VemBreakdown& operator+=(const VemBreakdown& o) {
    count_o += o.count_o;
    count_f += o.count_f;
    count_b += o.count_b;
    energy_f += o.energy_f;
    energy_b += o.energy_b;
    return *this;
  }
};

struct PointClassification {
  RegionLabel label = RegionLabel::kOccluded;
  bool gated = false;   // Front point inside the noise gate
  Vec3 residual{0, 0, 0};
  Vec3 anchor{0, 0, 0};  // I(x) for Front, nearest view-plane point for Beside
};

// Classifies one world point against a target scan. Front residual is
// x - I(x); Beside residual is the view-plane offset to the nearest target
// point; Occluded points carry zero residual.
PointClassification classify_point(const Vec3& x, const ScanIndex& target);

// Per-point evaluation record kept for diagnostics and for the LM model.
struct ResidualRecord {
  int direction;  // 0: T^-1 P1 against P2, 1: T P2 against P1
  int point_index;
  RegionLabel label;
  bool gated;
  Vec3 source;    // untransformed source point
  Vec3 residual;
  Vec3 anchor;
};

// Directed energy d(source -> target): sum of squared Front/Beside
// residuals over the given points. `direction` only tags the records.
VemBreakdown directed_energy_points(const std::vector<Vec3>& points, const ScanIndex& target,
                                    int direction = 0,
                                    std::vector<ResidualRecord>* records = nullptr);

// Directed energy of a scan's own points against a target.
VemBreakdown directed_energy(const PartialScan& source, const ScanIndex& target);
VemBreakdown directed_energy(const PartialScan& source, const PartialScan& target);

// Visibility error metric of a candidate alignment T taking scan 2 into
// scan 1's frame: d(T^-1 P1, P2) + d(T P2, P1). Cameras do not move; each
// directed term is viewed from the untransformed scan's own sensor.
VemBreakdown vem(const RigidTransform& T, const ScanIndex& s1, const ScanIndex& s2,
                 std::vector<ResidualRecord>* records = nullptr);
VemBreakdown vem(const RigidTransform& T, const PartialScan& p1, const PartialScan& p2);

// Energy per evaluated point; scale-free across different resolutions.
double normalized_vem(const RigidTransform& T, const ScanIndex& s1, const ScanIndex& s2);

// Stacked residual vector: all Front (beyond the gate) and Beside residual
// 3-vectors from both directed terms. The sum of squared entries equals the
// VEM total.
std::vector<ResidualRecord> residual_vector(const RigidTransform& T, const ScanIndex& s1,
                                            const ScanIndex& s2);

// Residuals as a function of a tangent perturbation m at T, with labels and
// correspondences frozen at m = 0. This is the nonlinear least-squares model
// the LM steps minimize; the analytic Jacobian matches central finite
// differences of residuals().
class FrozenResidualModel {
 public:
  FrozenResidualModel(const RigidTransform& T, const ScanIndex& s1, const ScanIndex& s2);

  int record_count() const { return static_cast<int>(rows_.size()); }
  int rows() const { return 3 * record_count(); }
  const RigidTransform& base() const { return base_; }

  Eigen::VectorXd residuals(const TangentVector& m) const;
  Eigen::MatrixXd jacobian() const;  // rows() x 6, evaluated at m = 0

 private:
  RigidTransform base_;
  Vec3 view1_, view2_;  // target view directions for Beside projectors
  std::vector<ResidualRecord> rows_;
};

}  // namespace vemreg
