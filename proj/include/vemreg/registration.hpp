#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "vemreg/rng.hpp"
#include "vemreg/scan.hpp"
#include "vemreg/se3.hpp"
#include "vemreg/vem.hpp"

namespace vemreg {

struct SwarmConfig {
  int n_particles = 1600;
  double theta_r_deg = 30.0;        // guide suppression / local-best radius
  double omega_p = 0.2;             // previous-velocity weight
  double omega_b = 0.3;             // personal-best weight
  double omega_g = 0.3;             // local-best weight
  double lambda_lm = 0.1;           // LM damping
  double normal_angle_max_deg = 20.0;
  double hough_bin_mm = 10.0;
  double termination_eps = 1e-4;    // mm^2 best-energy improvement
  int max_iterations = 25;
  std::uint64_t seed = 0;

  int swarm_points = 1500;    // per-scan evaluation budget while swarming
  int refine_points = 6000;   // budget for the final re-score + refinement
  int hough_points = 300;     // voting subset size per scan
  bool stochastic_pso = true; // uniform(0,1) factors; false = fixed weights
  bool enable_guides = true;  // LM guide updates (off = traditional PSO)
  bool enable_pso = true;     // regular-particle updates (off = guides only)
  int jobs = 1;

  void validate() const;  // throws std::invalid_argument
};

struct Particle {
  RigidTransform state;
  PsoCoordinates coords;
  Eigen::Matrix<double, 6, 1> velocity = Eigen::Matrix<double, 6, 1>::Zero();
  double energy = std::numeric_limits<double>::infinity();
  PsoCoordinates best_coords;
  double best_energy = std::numeric_limits<double>::infinity();
  bool is_guide = false;

  void set_state(const RigidTransform& T) {
    state = T;
    coords = PsoCoordinates::from_transform(T);
  }
  void set_coords(const PsoCoordinates& c) {
    coords = c;
    coords.clamp_to_ball();
    state = coords.to_transform();
  }
};

struct RegistrationResult {
  RigidTransform transform;
  double energy = 0;              // VEM at the refinement budget
  int iterations = 0;
  std::vector<double> trace;      // best energy after each swarm iteration
  std::vector<int> guide_counts;  // guides selected per iteration
};

// Translation voting: normal-compatible pairs (x in P1, y in rotated P2)
// vote x - y into cubic bins; returns the centroid of the winning bin, i.e.
// the translation t with R*P2 + t aligned to P1. Throws std::runtime_error
// "no compatible normal pairs" when no pair passes the normal gate.
Vec3 hough_vote(const std::vector<Vec3>& pts1, const std::vector<Vec3>& nrm1,
                const std::vector<Vec3>& pts2_rotated, const std::vector<Vec3>& nrm2_rotated,
                double bin_mm, double normal_angle_max_deg);

// Convenience wrapper over whole scans (P2 already rotated); subsamples each
// side to cfg.hough_points.
Vec3 hough_translation(const PartialScan& p1, const PartialScan& p2_rotated,
                       const SwarmConfig& cfg);

// Greedy non-maximum suppression: repeatedly promote the lowest-energy
// remaining particle and drop everything within theta_r of it. Particles
// with infinite energy never become guides.
std::vector<int> select_guides(const std::vector<Particle>& particles, double theta_r_deg);

struct LmOutcome {
  RigidTransform transform;
  double energy = 0;       // energy at the returned transform
  bool accepted = false;   // an energy-decreasing step was found
  bool singular = false;   // normal equations unsolvable, pose unchanged
  double step_norm = 0;    // |delta m| of the applied step
};

// One Levenberg-Marquardt step on the frozen-correspondence model: solves
// (J^T J + lambda I) dm = -J^T r, accepts exp_at(T, dm) only if the true
// re-evaluated energy decreased, retrying with lambda x10 up to 3 times.
LmOutcome lm_step(const RigidTransform& T, const ScanIndex& s1, const ScanIndex& s2,
                  const SwarmConfig& cfg, double current_energy = -1.0);

// Traditional PSO update in chart coordinates; re-evaluates the particle and
// refreshes its personal best through energy_fn.
void pso_step(Particle& particle, const PsoCoordinates& local_best, const SwarmConfig& cfg,
              Rng& rng, const std::function<double(const RigidTransform&)>& energy_fn);

// Global registration of P2 onto P1 by swarm search over SE(3). Throws
// std::invalid_argument for degenerate scans (< 50 points).
RegistrationResult register_pair(const PartialScan& p1, const PartialScan& p2,
                                 const SwarmConfig& cfg);

}  // namespace vemreg
