#include "vemreg/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace vemreg {

void Camera::validate() const {
  if (std::abs(view.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("camera view_dir must be unit length");
  }
  if (std::abs(up.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("camera up must be unit length");
  }
  if (std::abs(view.dot(up)) > 1e-9) {
    throw std::invalid_argument("camera up must be orthogonal to view_dir");
  }
  if (fx <= 0 || fy <= 0) {
    throw std::invalid_argument("camera focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("camera image size must be positive");
  }
}

bool Camera::project(const Vec3& x, double& u, double& v, double& z) const {
  const Vec3 rel = x - position;
  z = rel.dot(view);
  if (z <= 0.0) return false;
  u = fx * rel.dot(right()) / z + cx;
  v = fy * rel.dot(-up) / z + cy;
  return true;
}

Vec3 Camera::backproject(double u, double v, double z) const {
  return position + right() * ((u - cx) / fx * z) + (-up) * ((v - cy) / fy * z) + view * z;
}

Vec3 project_to_view_plane(const Camera& camera, const Vec3& x) {
  return x - camera.view * camera.view.dot(x);
}

nlohmann::json camera_to_json(const Camera& c) {
  return nlohmann::json{
      {"position", {c.position.x(), c.position.y(), c.position.z()}},
      {"view_dir", {c.view.x(), c.view.y(), c.view.z()}},
      {"up", {c.up.x(), c.up.y(), c.up.z()}},
      {"fx", c.fx},
      {"fy", c.fy},
      {"cx", c.cx},
      {"cy", c.cy},
      {"width", c.width},
      {"height", c.height}};
}

namespace {
Vec3 vec3_field(const nlohmann::json& j, const char* name) {
  if (!j.contains(name) || !j.at(name).is_array() || j.at(name).size() != 3) {
    throw std::invalid_argument(std::string("camera JSON field \"") + name +
                                "\" must be a 3-array");
  }
  const auto& a = j.at(name);
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

double num_field(const nlohmann::json& j, const char* name) {
  if (!j.contains(name) || !j.at(name).is_number()) {
    throw std::invalid_argument(std::string("camera JSON field \"") + name +
                                "\" must be a number");
  }
  return j.at(name).get<double>();
}
}  // namespace

Camera camera_from_json(const nlohmann::json& j) {
  Camera c;
  c.position = vec3_field(j, "position");
  c.view = vec3_field(j, "view_dir");
  c.up = vec3_field(j, "up");
  c.fx = num_field(j, "fx");
  c.fy = num_field(j, "fy");
  c.cx = num_field(j, "cx");
  c.cy = num_field(j, "cy");
  c.width = static_cast<int>(num_field(j, "width"));
  c.height = static_cast<int>(num_field(j, "height"));
  c.validate();
  return c;
}

}  // namespace vemreg
