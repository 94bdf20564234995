#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "vemreg/registration.hpp"

namespace vemreg {

// Complete graph of pairwise registrations over M scans. Edges are stored
// once per unordered pair (i < j); the opposite direction is the exact
// inverse. Failed pairs carry infinite energy.
struct RegistrationGraph {
  struct Edge {
    int i = 0, j = 0;             // i < j
    RigidTransform transform;     // maps scan j into scan i's frame
    double energy = std::numeric_limits<double>::infinity();
  };
  int scan_count = 0;
  std::vector<Edge> edges;  // M(M-1)/2 entries, (0,1), (0,2), ... order

  const Edge& edge(int i, int j) const;
  bool edge_usable(int i, int j) const;
};

// Transforms T_1i taking scan i into scan 0's frame; entry 0 is identity.
struct TransformSet {
  std::vector<RigidTransform> to_reference;
  double overall_energy = 0;  // mm^2, see overall_vem
};

// All spanning trees of the complete graph K_M via Prüfer sequences
// (M^(M-2) trees). Guarded at M <= 6; larger M throws "multiview fanout
// cap". Each tree is a list of (i, j) edges with i < j.
std::vector<std::vector<std::pair<int, int>>> enumerate_spanning_trees(int m);

// Overall alignment energy of a transform set: for every unordered scan
// pair, both directed energies under the composite transform
// T_1j^-1 T_1i. With M = 2 this equals the pairwise metric.
double overall_vem(const TransformSet& ts, const std::vector<const ScanIndex*>& scans);

// Per-source-point normalized variant used to score candidate sets, so
// scans of different sizes contribute comparably.
double overall_vem_normalized(const TransformSet& ts,
                              const std::vector<const ScanIndex*>& scans);

// Composes the edge transforms of a spanning tree into a transform set
// (path products toward scan 0).
TransformSet compose_tree(const RegistrationGraph& graph,
                          const std::vector<std::pair<int, int>>& tree);

struct MultiviewResult {
  TransformSet transforms;
  RegistrationGraph graph;
  int refine_iterations = 0;
};

// Global registration of M scans: pairwise registration on all pairs,
// spanning-tree candidate selection under the overall VEM, then joint LM
// refinement of the stacked 6(M-1) parameters. `prior` (e.g. the previous
// frame's result) joins the candidate pool when supplied.
MultiviewResult register_multiview(const std::vector<PartialScan>& scans,
                                   const SwarmConfig& cfg,
                                   const std::optional<TransformSet>& prior = std::nullopt);

// One joint LM pass (frozen correspondences, accept/reject on the overall
// energy); exposed for tests. Returns true when a step was accepted.
bool joint_refine_step(TransformSet& ts, const std::vector<const ScanIndex*>& scans,
                       const SwarmConfig& cfg);

}  // namespace vemreg
