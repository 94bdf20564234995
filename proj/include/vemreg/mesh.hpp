#pragma once

#include <array>
#include <string>
#include <vector>

#include "vemreg/se3.hpp"

namespace vemreg {

struct TriangleMesh {
  std::vector<Vec3> vertices;                 // mm
  std::vector<std::array<int, 3>> triangles;  // CCW winding, outward normals

  Vec3 face_normal(int f) const;  // unit
  Vec3 centroid() const;          // vertex centroid
  double diameter() const;        // bounding-box diagonal

  // Drops zero-area triangles and checks index ranges. Throws FormatError
  // on out-of-range indices.
  void filter_degenerate();

  // Uniform scale + translation so the bounding-box diagonal is `diameter`
  // and the centroid sits at the origin.
  void normalize_scale(double diameter_mm);

  // Area-weighted vertex normals.
  std::vector<Vec3> vertex_normals() const;
};

// PLY (ascii / binary little-endian) or OBJ by extension; positions and
// faces only, polygon faces fan-triangulated. Throws FormatError.
TriangleMesh load_mesh(const std::string& path);
void save_mesh_ply(const TriangleMesh& mesh, const std::string& path, bool binary = true);

// Deterministic test solids, roughly unit scale (callers normalize).
// Blobs are spheres with smooth radial harmonics; `variant` switches the
// harmonic mix so several distinct shapes come out of one generator.
TriangleMesh make_blob(int variant, int rings = 48, int segments = 64);
TriangleMesh make_torus(double major = 1.0, double minor = 0.42, int rings = 48,
                        int segments = 72);
TriangleMesh make_step_block();
TriangleMesh make_cylinder(double radius = 0.5, double height = 2.0, int segments = 96);

// The asymmetric solids used by the synthetic benchmark.
std::vector<std::pair<std::string, TriangleMesh>> builtin_benchmark_meshes();

}  // namespace vemreg
