#include "vemreg/mesh.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vemreg/ply.hpp"

namespace vemreg {

Vec3 TriangleMesh::face_normal(int f) const {
  const auto& t = triangles[static_cast<std::size_t>(f)];
  const Vec3& a = vertices[static_cast<std::size_t>(t[0])];
  const Vec3& b = vertices[static_cast<std::size_t>(t[1])];
  const Vec3& c = vertices[static_cast<std::size_t>(t[2])];
  return (b - a).cross(c - a).normalized();
}

Vec3 TriangleMesh::centroid() const {
  Vec3 sum{0, 0, 0};
  for (const auto& v : vertices) sum += v;
  return vertices.empty() ? sum : Vec3(sum / static_cast<double>(vertices.size()));
}

double TriangleMesh::diameter() const {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return vertices.empty() ? 0.0 : (hi - lo).norm();
}

void TriangleMesh::filter_degenerate() {
  std::vector<std::array<int, 3>> kept;
  kept.reserve(triangles.size());
  const int n = static_cast<int>(vertices.size());
  for (const auto& t : triangles) {
    for (const int idx : t) {
      if (idx < 0 || idx >= n) throw FormatError("mesh: face index out of range");
    }
    const Vec3& a = vertices[static_cast<std::size_t>(t[0])];
    const Vec3& b = vertices[static_cast<std::size_t>(t[1])];
    const Vec3& c = vertices[static_cast<std::size_t>(t[2])];
    if ((b - a).cross(c - a).squaredNorm() > 1e-20) kept.push_back(t);
  }
  triangles = std::move(kept);
}

void TriangleMesh::normalize_scale(double diameter_mm) {
  const double d = diameter();
  if (d <= 0) return;
  const Vec3 c = centroid();
  const double s = diameter_mm / d;
  for (auto& v : vertices) v = (v - c) * s;
}

std::vector<Vec3> TriangleMesh::vertex_normals() const {
  std::vector<Vec3> normals(vertices.size(), Vec3::Zero());
  for (const auto& t : triangles) {
    const Vec3& a = vertices[static_cast<std::size_t>(t[0])];
    const Vec3& b = vertices[static_cast<std::size_t>(t[1])];
    const Vec3& c = vertices[static_cast<std::size_t>(t[2])];
    const Vec3 weighted = (b - a).cross(c - a);  // area-weighted
    for (const int idx : t) normals[static_cast<std::size_t>(idx)] += weighted;
  }
  for (auto& n : normals) {
    const double len = n.norm();
    if (len > 0) n /= len;
  }
  return normals;
}

namespace {

TriangleMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  TriangleMesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw FormatError("OBJ: malformed vertex: " + line);
      mesh.vertices.emplace_back(x, y, z);
    } else if (word == "f") {
      std::vector<int> face;
      std::string token;
      while (ls >> token) {
        // "v", "v/vt", "v//vn", "v/vt/vn" forms; only the position index is used.
        const std::size_t slash = token.find('/');
        const std::string head = slash == std::string::npos ? token : token.substr(0, slash);
        int idx;
        try {
          idx = std::stoi(head);
        } catch (...) {
          throw FormatError("OBJ: malformed face token \"" + token + "\"");
        }
        if (idx < 0) {
          idx = static_cast<int>(mesh.vertices.size()) + idx;  // relative index
        } else {
          idx -= 1;  // OBJ is 1-based
        }
        face.push_back(idx);
      }
      if (face.size() < 3) throw FormatError("OBJ: face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < face.size(); ++k) {
        mesh.triangles.push_back({face[0], face[k], face[k + 1]});
      }
    }
  }
  return mesh;
}

TriangleMesh load_ply_mesh(const std::string& path) {
  const PlyData ply = PlyData::read(path);
  if (!ply.has_element("vertex")) throw FormatError("mesh PLY missing vertex element");
  if (!ply.has_element("face")) throw FormatError("mesh PLY missing face element");
  TriangleMesh mesh;
  const auto& xs = ply.column("vertex", "x");
  const auto& ys = ply.column("vertex", "y");
  const auto& zs = ply.column("vertex", "z");
  mesh.vertices.resize(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) mesh.vertices[i] = Vec3(xs[i], ys[i], zs[i]);
  const char* face_prop = ply.has_property("face", "vertex_indices") ? "vertex_indices"
                                                                     : "vertex_index";
  for (const auto& face : ply.lists("face", face_prop)) {
    if (face.size() < 3) throw FormatError("mesh PLY: face with fewer than 3 vertices");
    for (std::size_t k = 1; k + 1 < face.size(); ++k) {
      mesh.triangles.push_back({face[0], face[k], face[k + 1]});
    }
  }
  return mesh;
}

}  // namespace

TriangleMesh load_mesh(const std::string& path) {
  if (!std::filesystem::exists(path)) throw FormatError("mesh file not found: " + path);
  const std::string ext = std::filesystem::path(path).extension().string();
  TriangleMesh mesh;
  if (ext == ".obj" || ext == ".OBJ") {
    mesh = load_obj(path);
  } else if (ext == ".ply" || ext == ".PLY") {
    mesh = load_ply_mesh(path);
  } else {
    throw FormatError("unsupported mesh extension: " + path);
  }
  mesh.filter_degenerate();
  if (mesh.vertices.empty() || mesh.triangles.empty()) {
    throw FormatError("mesh has no usable geometry: " + path);
  }
  return mesh;
}

void save_mesh_ply(const TriangleMesh& mesh, const std::string& path, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << "ply\n";
  out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
  out << "element vertex " << mesh.vertices.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "element face " << mesh.triangles.size() << "\n";
  out << "property list uchar int vertex_indices\n";
  out << "end_header\n";
  if (binary) {
    for (const auto& v : mesh.vertices) {
      const float row[3] = {static_cast<float>(v.x()), static_cast<float>(v.y()),
                            static_cast<float>(v.z())};
      out.write(reinterpret_cast<const char*>(row), sizeof(row));
    }
    for (const auto& t : mesh.triangles) {
      const unsigned char n = 3;
      out.write(reinterpret_cast<const char*>(&n), 1);
      const std::int32_t idx[3] = {t[0], t[1], t[2]};
      out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
    }
  } else {
    char buf[96];
    for (const auto& v : mesh.vertices) {
      std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", v.x(), v.y(), v.z());
      out << buf;
    }
    for (const auto& t : mesh.triangles) {
      out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
    }
  }
}

namespace {

// Shared lat-long sphere topology with a radial displacement function.
template <typename RadiusFn>
TriangleMesh latlong_surface(int rings, int segments, RadiusFn&& radius) {
  TriangleMesh mesh;
  // rings latitudinal bands between the poles; vertex grid excludes poles.
  const int rows = rings - 1;
  mesh.vertices.reserve(static_cast<std::size_t>(rows) * segments + 2);
  const auto vertex_at = [&](double theta, double phi) {
    const Vec3 dir(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                   std::cos(theta));
    return Vec3(dir * radius(theta, phi));
  };
  const int top = 0;
  mesh.vertices.push_back(vertex_at(0.0, 0.0));
  for (int i = 1; i < rings; ++i) {
    const double theta = M_PI * i / rings;
    for (int j = 0; j < segments; ++j) {
      mesh.vertices.push_back(vertex_at(theta, 2.0 * M_PI * j / segments));
    }
  }
  const int bottom = static_cast<int>(mesh.vertices.size());
  mesh.vertices.push_back(vertex_at(M_PI, 0.0));

  const auto grid = [&](int i, int j) { return 1 + (i - 1) * segments + (j % segments); };
  for (int j = 0; j < segments; ++j) {
    mesh.triangles.push_back({top, grid(1, j), grid(1, j + 1)});
  }
  for (int i = 1; i < rings - 1; ++i) {
    for (int j = 0; j < segments; ++j) {
      const int a = grid(i, j), b = grid(i, j + 1), c = grid(i + 1, j), d = grid(i + 1, j + 1);
      mesh.triangles.push_back({a, d, b});
      mesh.triangles.push_back({a, c, d});
    }
  }
  for (int j = 0; j < segments; ++j) {
    mesh.triangles.push_back({bottom, grid(rows, j + 1), grid(rows, j)});
  }
  mesh.filter_degenerate();
  return mesh;
}

}  // namespace

TriangleMesh make_blob(int variant, int rings, int segments) {
  // Smooth, clearly asymmetric radial fields; amplitudes keep the surface
  // star-shaped so the mesh stays watertight and self-intersection free.
  return latlong_surface(rings, segments, [variant](double theta, double phi) {
    switch (variant % 3) {
      case 0:
        return 1.0 + 0.22 * std::sin(3 * theta) * std::cos(2 * phi) +
               0.14 * std::cos(5 * phi) * std::sin(theta) * std::sin(theta) +
               0.10 * std::cos(2 * theta);
      case 1:
        return 1.0 + 0.25 * std::sin(2 * theta) * std::sin(3 * phi) +
               0.12 * std::cos(4 * theta) + 0.08 * std::sin(7 * phi) * std::sin(theta);
      default:
        return 1.0 + 0.18 * std::cos(3 * theta) * std::cos(phi) +
               0.16 * std::sin(4 * phi) * std::sin(2 * theta) + 0.07 * std::sin(6 * theta);
    }
  });
}

TriangleMesh make_torus(double major, double minor, int rings, int segments) {
  TriangleMesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(rings) * segments);
  for (int i = 0; i < rings; ++i) {
    const double u = 2.0 * M_PI * i / rings;  // around the hole
    for (int j = 0; j < segments; ++j) {
      const double v = 2.0 * M_PI * j / segments;  // around the tube
      const double r = major + minor * std::cos(v);
      mesh.vertices.emplace_back(r * std::cos(u), r * std::sin(u), minor * std::sin(v));
    }
  }
  const auto grid = [&](int i, int j) {
    return ((i % rings + rings) % rings) * segments + ((j % segments + segments) % segments);
  };
  for (int i = 0; i < rings; ++i) {
    for (int j = 0; j < segments; ++j) {
      const int a = grid(i, j), b = grid(i + 1, j), c = grid(i, j + 1), d = grid(i + 1, j + 1);
      mesh.triangles.push_back({a, b, d});
      mesh.triangles.push_back({a, d, c});
    }
  }
  mesh.filter_degenerate();
  return mesh;
}

TriangleMesh make_step_block() {
  // Asymmetric L-shaped prism: CCW cross-section extruded along z.
  const std::vector<std::pair<double, double>> section = {
      {0, 0}, {3, 0}, {3, 1}, {1, 1}, {1, 2.4}, {0, 2.4}};
  const double z0 = 0.0, z1 = 1.3;
  TriangleMesh mesh;
  const int n = static_cast<int>(section.size());
  for (const auto& [x, y] : section) mesh.vertices.emplace_back(x, y, z0);
  for (const auto& [x, y] : section) mesh.vertices.emplace_back(x, y, z1);
  // Side walls, outward because the section is CCW.
  for (int k = 0; k < n; ++k) {
    const int a = k, b = (k + 1) % n;
    mesh.triangles.push_back({a, b, b + n});
    mesh.triangles.push_back({a, b + n, a + n});
  }
  // Caps. The corner (0,1) is not a section vertex; add it per z level so
  // the L tiles exactly.
  const int c0 = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(0.0, 1.0, z0);
  const int c1 = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(0.0, 1.0, z1);
  // Bottom (normal -z, clockwise seen from +z).
  mesh.triangles.push_back({0, 2, 1});
  mesh.triangles.push_back({0, 3, 2});
  mesh.triangles.push_back({0, c0, 3});
  mesh.triangles.push_back({c0, 4, 3});
  mesh.triangles.push_back({c0, 5, 4});
  // Top (normal +z).
  mesh.triangles.push_back({n + 0, n + 1, n + 2});
  mesh.triangles.push_back({n + 0, n + 2, n + 3});
  mesh.triangles.push_back({n + 0, n + 3, c1});
  mesh.triangles.push_back({c1, n + 3, n + 4});
  mesh.triangles.push_back({c1, n + 4, n + 5});
  mesh.filter_degenerate();
  return mesh;
}

TriangleMesh make_cylinder(double radius, double height, int segments) {
  TriangleMesh mesh;
  const double z0 = -height / 2, z1 = height / 2;
  for (int j = 0; j < segments; ++j) {
    const double a = 2.0 * M_PI * j / segments;
    mesh.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), z0);
  }
  for (int j = 0; j < segments; ++j) {
    const double a = 2.0 * M_PI * j / segments;
    mesh.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), z1);
  }
  const int bottom_center = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(0, 0, z0);
  const int top_center = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(0, 0, z1);
  for (int j = 0; j < segments; ++j) {
    const int a = j, b = (j + 1) % segments;
    mesh.triangles.push_back({a, b, b + segments});
    mesh.triangles.push_back({a, b + segments, a + segments});
    mesh.triangles.push_back({bottom_center, b, a});
    mesh.triangles.push_back({top_center, a + segments, b + segments});
  }
  mesh.filter_degenerate();
  return mesh;
}

std::vector<std::pair<std::string, TriangleMesh>> builtin_benchmark_meshes() {
  std::vector<std::pair<std::string, TriangleMesh>> out;
  out.emplace_back("blob0", make_blob(0));
  out.emplace_back("blob1", make_blob(1));
  out.emplace_back("blob2", make_blob(2));
  out.emplace_back("torus", make_torus());
  out.emplace_back("step_block", make_step_block());
  return out;
}

}  // namespace vemreg
