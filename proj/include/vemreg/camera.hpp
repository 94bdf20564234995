#pragma once

#include <json.hpp>

#include "vemreg/se3.hpp"

namespace vemreg {

// Pinhole sensor pose + intrinsics. The image frame is {right, down, view}
// with right = up × view; pixel (u, v) has its center at integer
// coordinates, so valid image coordinates span [-0.5, width - 0.5) etc.
struct Camera {
  Vec3 position{0, 0, 0};
  Vec3 view{0, 0, 1};  // unit
  Vec3 up{0, 1, 0};    // unit, orthogonal to view
  double fx = 1, fy = 1;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  Vec3 right() const { return up.cross(view); }

  // Throws std::invalid_argument naming the violated field.
  void validate() const;

  // Perspective projection. Returns false when the point is on or behind
  // the camera plane (z <= 0); otherwise fills (u, v) and depth z along the
  // view axis.
  bool project(const Vec3& x, double& u, double& v, double& z) const;

  bool inside_image(double u, double v) const {
    return u >= -0.5 && u < width - 0.5 && v >= -0.5 && v < height - 0.5;
  }

  // World point of pixel coordinate (u, v) at depth z along the view axis.
  Vec3 backproject(double u, double v, double z) const;
};

// Orthographic projector I - view viewᵀ applied to x.
Vec3 project_to_view_plane(const Camera& camera, const Vec3& x);

nlohmann::json camera_to_json(const Camera& c);
Camera camera_from_json(const nlohmann::json& j);

}  // namespace vemreg
