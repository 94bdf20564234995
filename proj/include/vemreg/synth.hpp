#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vemreg/mesh.hpp"
#include "vemreg/render.hpp"
#include "vemreg/scan.hpp"

namespace vemreg {

// One synthetic trial: two rendered views of a mesh, the second displaced by
// a random rigid perturbation. gt_transform = perturbation^-1 re-aligns
// scan 2 to scan 1.
struct PairSpec {
  std::string id;
  std::string mesh_name;
  std::string scan1;  // paths relative to the manifest
  std::string scan2;
  RigidTransform perturbation;
  RigidTransform gt_transform;
  double overlap_ratio = 0;  // measured at ground truth
};

// Fraction of points with a counterpart in the other scan within
// tau = 2 x median nearest-neighbor spacing of P1; reported value is the
// minimum of both directions. P2 must already be placed at ground truth.
double overlap_ratio(const PartialScan& p1, const PartialScan& p2_aligned);

struct SynthOptions {
  int width = 160;
  int height = 120;
  double mesh_diameter_mm = 1000.0;
  double camera_distance = 2.0;  // in mesh diameters
  int jobs = 1;
};

struct SynthesizedPair {
  PartialScan scan1;
  PartialScan scan2;  // perturbation already applied
  RigidTransform perturbation;
  RigidTransform gt_transform;
  double overlap = 0;
};

// Renders one pair whose ground-truth overlap lands near the requested band
// (camera separation is searched; the realized overlap is measured and
// recorded, not prescribed). The mesh must already be normalized.
SynthesizedPair synthesize_pair(const TriangleMesh& mesh, std::uint64_t seed,
                                std::uint64_t pair_index, double target_overlap_lo,
                                double target_overlap_hi, const SynthOptions& opt);

// Renders n_pairs pairs over the given meshes with overlap targets cycling
// through 10%-wide bins across [0.05, 0.95], writes scan files and the
// manifest JSON into out_dir, and returns the specs. Mesh load failures are
// skipped with a warning; fewer than n_pairs/2 successes is an error.
std::vector<PairSpec> generate_benchmark(const std::vector<std::string>& mesh_files,
                                         int n_pairs, std::uint64_t seed,
                                         const std::string& out_dir, const SynthOptions& opt);

void write_manifest(const std::vector<PairSpec>& specs, const std::string& path);
std::vector<PairSpec> load_manifest(const std::string& path);

}  // namespace vemreg
