#include "vemreg/multiview.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vemreg/log.hpp"
#include "vemreg/parallel.hpp"

namespace vemreg {

const RegistrationGraph::Edge& RegistrationGraph::edge(int i, int j) const {
  if (i > j) std::swap(i, j);
  for (const auto& e : edges) {
    if (e.i == i && e.j == j) return e;
  }
  throw std::out_of_range("registration graph: missing edge");
}

bool RegistrationGraph::edge_usable(int i, int j) const {
  return std::isfinite(edge(i, j).energy);
}

std::vector<std::vector<std::pair<int, int>>> enumerate_spanning_trees(int m) {
  if (m < 2) throw std::invalid_argument("spanning trees need at least 2 vertices");
  if (m > 6) throw std::invalid_argument("multiview fanout cap");
  std::vector<std::vector<std::pair<int, int>>> trees;
  const int seq_len = m - 2;
  long total = 1;
  for (int k = 0; k < seq_len; ++k) total *= m;
  trees.reserve(static_cast<std::size_t>(total));

  std::vector<int> seq(static_cast<std::size_t>(std::max(seq_len, 0)), 0);
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int k = 0; k < seq_len; ++k) {
      seq[static_cast<std::size_t>(k)] = static_cast<int>(c % m);
      c /= m;
    }
    // Prüfer decode.
    std::vector<int> degree(static_cast<std::size_t>(m), 1);
    for (const int v : seq) ++degree[static_cast<std::size_t>(v)];
    std::vector<std::pair<int, int>> tree;
    tree.reserve(static_cast<std::size_t>(m - 1));
    std::vector<bool> used(static_cast<std::size_t>(m), false);
    for (int k = 0; k < seq_len; ++k) {
      int leaf = -1;
      for (int v = 0; v < m; ++v) {
        if (degree[static_cast<std::size_t>(v)] == 1 && !used[static_cast<std::size_t>(v)]) {
          leaf = v;
          break;
        }
      }
      const int other = seq[static_cast<std::size_t>(k)];
      tree.emplace_back(std::min(leaf, other), std::max(leaf, other));
      used[static_cast<std::size_t>(leaf)] = true;
      --degree[static_cast<std::size_t>(other)];
    }
    int a = -1, b = -1;
    for (int v = 0; v < m; ++v) {
      if (!used[static_cast<std::size_t>(v)] && degree[static_cast<std::size_t>(v)] == 1) {
        (a < 0 ? a : b) = v;
      }
    }
    tree.emplace_back(std::min(a, b), std::max(a, b));
    trees.push_back(std::move(tree));
  }
  return trees;
}

namespace {

RigidTransform composite(const TransformSet& ts, int i, int j) {
  // Takes scan i coordinates into scan j's frame.
  return ts.to_reference[static_cast<std::size_t>(j)].inverse().compose(
      ts.to_reference[static_cast<std::size_t>(i)]);
}

std::vector<Vec3> transformed_points(const RigidTransform& T, const std::vector<Vec3>& pts) {
  std::vector<Vec3> out(pts.size());
  const Eigen::Matrix3d R = T.q.toRotationMatrix();
  for (std::size_t k = 0; k < pts.size(); ++k) out[k] = R * pts[k] + T.t;
  return out;
}

}  // namespace

double overall_vem(const TransformSet& ts, const std::vector<const ScanIndex*>& scans) {
  const int m = static_cast<int>(scans.size());
  double total = 0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      const RigidTransform t_ij = composite(ts, i, j);
      total += directed_energy_points(transformed_points(t_ij, scans[static_cast<std::size_t>(i)]->scan().points),
                                      *scans[static_cast<std::size_t>(j)])
                   .total();
    }
  }
  return total;
}

double overall_vem_normalized(const TransformSet& ts,
                              const std::vector<const ScanIndex*>& scans) {
  const int m = static_cast<int>(scans.size());
  double total = 0;
  for (int i = 0; i < m; ++i) {
    const auto n = static_cast<double>(scans[static_cast<std::size_t>(i)]->scan().size());
    if (n == 0) continue;
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      const RigidTransform t_ij = composite(ts, i, j);
      total += directed_energy_points(transformed_points(t_ij, scans[static_cast<std::size_t>(i)]->scan().points),
                                      *scans[static_cast<std::size_t>(j)])
                   .total() /
               n;
    }
  }
  return total;
}

TransformSet compose_tree(const RegistrationGraph& graph,
                          const std::vector<std::pair<int, int>>& tree) {
  const int m = graph.scan_count;
  TransformSet ts;
  ts.to_reference.assign(static_cast<std::size_t>(m), RigidTransform::identity());
  std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(m));
  for (const auto& [i, j] : tree) {
    adjacency[static_cast<std::size_t>(i)].push_back(j);
    adjacency[static_cast<std::size_t>(j)].push_back(i);
  }
  std::vector<bool> visited(static_cast<std::size_t>(m), false);
  std::vector<int> stack{0};
  visited[0] = true;
  while (!stack.empty()) {
    const int parent = stack.back();
    stack.pop_back();
    for (const int child : adjacency[static_cast<std::size_t>(parent)]) {
      if (visited[static_cast<std::size_t>(child)]) continue;
      visited[static_cast<std::size_t>(child)] = true;
      const auto& e = graph.edge(parent, child);
      // e.transform maps scan e.j into scan e.i's frame.
      const RigidTransform parent_from_child =
          (e.i == parent) ? e.transform : e.transform.inverse();
      ts.to_reference[static_cast<std::size_t>(child)] =
          ts.to_reference[static_cast<std::size_t>(parent)].compose(parent_from_child);
      stack.push_back(child);
    }
  }
  return ts;
}

namespace {

Eigen::Matrix3d skew(const Vec3& w) {
  Eigen::Matrix3d m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

struct JointRow {
  int i, j;  // source scan, target scan
  Vec3 source;
  Vec3 anchor;
  bool beside;
};

// Frozen rows for all ordered pairs at the current transform set.
std::vector<JointRow> collect_rows(const TransformSet& ts,
                                   const std::vector<const ScanIndex*>& scans) {
  const int m = static_cast<int>(scans.size());
  std::vector<JointRow> rows;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      const RigidTransform t_ij = composite(ts, i, j);
      const auto& pts = scans[static_cast<std::size_t>(i)]->scan().points;
      const Eigen::Matrix3d R = t_ij.q.toRotationMatrix();
      for (const auto& x : pts) {
        const PointClassification c =
            classify_point(R * x + t_ij.t, *scans[static_cast<std::size_t>(j)]);
        if (c.label == RegionLabel::kOccluded) continue;
        if (c.label == RegionLabel::kFront && c.gated) continue;
        rows.push_back({i, j, x, c.anchor, c.label == RegionLabel::kBeside});
      }
    }
  }
  return rows;
}

}  // namespace

bool joint_refine_step(TransformSet& ts, const std::vector<const ScanIndex*>& scans,
                       const SwarmConfig& cfg) {
  const int m = static_cast<int>(scans.size());
  const int params = 6 * (m - 1);
  const std::vector<JointRow> rows = collect_rows(ts, scans);
  if (rows.empty()) return false;

  Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(params, params);
  Eigen::VectorXd jtr = Eigen::VectorXd::Zero(params);
  for (const auto& row : rows) {
    const RigidTransform& a = ts.to_reference[static_cast<std::size_t>(row.i)];
    const RigidTransform& b = ts.to_reference[static_cast<std::size_t>(row.j)];
    const Eigen::Matrix3d rbt = b.q.toRotationMatrix().transpose();
    const Vec3 w = a.apply(row.source) - b.t;  // R_i x + t_i - t_j
    const Vec3 p = rbt * w;
    Vec3 res = p - row.anchor;

    // d p / d (u_i, v_i, u_j, v_j); scan 0 is the fixed reference.
    Eigen::Matrix3d dui = -rbt * skew(a.rotate(row.source));
    Eigen::Matrix3d dvi = rbt;
    Eigen::Matrix3d duj = rbt * skew(w);
    Eigen::Matrix3d dvj = -rbt;
    if (row.beside) {
      const Vec3& view = scans[static_cast<std::size_t>(row.j)]->camera().view;
      const Eigen::Matrix3d proj = Eigen::Matrix3d::Identity() - view * view.transpose();
      res = proj * res;
      dui = proj * dui;
      dvi = proj * dvi;
      duj = proj * duj;
      dvj = proj * dvj;
    }

    Eigen::Matrix<double, 3, 12> blocks;
    blocks << dui, dvi, duj, dvj;
    const int ci = row.i > 0 ? 6 * (row.i - 1) : -1;
    const int cj = row.j > 0 ? 6 * (row.j - 1) : -1;
    const auto accumulate = [&](int col_a, int block_a, int col_b, int block_b) {
      if (col_a < 0 || col_b < 0) return;
      jtj.block<6, 6>(col_a, col_b) +=
          blocks.block<3, 6>(0, block_a).transpose() * blocks.block<3, 6>(0, block_b);
    };
    accumulate(ci, 0, ci, 0);
    accumulate(ci, 0, cj, 6);
    accumulate(cj, 6, ci, 0);
    accumulate(cj, 6, cj, 6);
    if (ci >= 0) jtr.segment<6>(ci) += blocks.block<3, 6>(0, 0).transpose() * res;
    if (cj >= 0) jtr.segment<6>(cj) += blocks.block<3, 6>(0, 6).transpose() * res;
  }

  const double e0 = overall_vem(ts, scans);
  double lambda = cfg.lambda_lm;
  for (int attempt = 0; attempt < 4; ++attempt, lambda *= 10.0) {
    const Eigen::MatrixXd a =
        jtj + lambda * Eigen::MatrixXd::Identity(params, params);
    const Eigen::VectorXd dm = a.ldlt().solve(-jtr);
    if (!dm.allFinite()) return false;
    TransformSet candidate = ts;
    for (int k = 1; k < m; ++k) {
      const Eigen::Matrix<double, 6, 1> seg = dm.segment<6>(6 * (k - 1));
      candidate.to_reference[static_cast<std::size_t>(k)] =
          exp_at(ts.to_reference[static_cast<std::size_t>(k)],
                 TangentVector{seg.head<3>(), seg.tail<3>()});
    }
    const double e = overall_vem(candidate, scans);
    if (e < e0) {
      candidate.overall_energy = e;
      ts = std::move(candidate);
      return true;
    }
  }
  return false;
}

MultiviewResult register_multiview(const std::vector<PartialScan>& scans,
                                   const SwarmConfig& cfg,
                                   const std::optional<TransformSet>& prior) {
  const int m = static_cast<int>(scans.size());
  if (m < 2) throw std::invalid_argument("register_multiview: need at least 2 scans");
  if (m > 6) throw std::invalid_argument("multiview fanout cap");
  for (const auto& s : scans) {
    if (s.size() < 50) {
      throw std::invalid_argument("register_multiview: degenerate scan (< 50 points)");
    }
  }
  const int jobs = cfg.jobs > 0 ? cfg.jobs : default_jobs();

  MultiviewResult result;
  RegistrationGraph& graph = result.graph;
  graph.scan_count = m;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) graph.edges.push_back({i, j, RigidTransform::identity()});
  }
  SwarmConfig pair_cfg = cfg;
  pair_cfg.jobs = 1;  // pairs run concurrently instead
  parallel_for(graph.edges.size(), jobs, [&](std::size_t e) {
    auto& edge = graph.edges[e];
    SwarmConfig ecfg = pair_cfg;
    ecfg.seed = stream_key(cfg.seed, 301, static_cast<std::uint64_t>(edge.i),
                           static_cast<std::uint64_t>(edge.j));
    try {
      const RegistrationResult r = register_pair(scans[static_cast<std::size_t>(edge.i)],
                                                 scans[static_cast<std::size_t>(edge.j)], ecfg);
      edge.transform = r.transform;
      edge.energy = r.energy;
    } catch (const std::exception& ex) {
      VEMREG_WARN("pairwise registration (%d, %d) failed: %s", edge.i, edge.j, ex.what());
    }
  });

  // Evaluation subsets for candidate scoring and joint refinement.
  std::vector<PartialScan> eval(static_cast<std::size_t>(m));
  std::vector<std::unique_ptr<ScanIndex>> index(static_cast<std::size_t>(m));
  std::vector<const ScanIndex*> views(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    eval[static_cast<std::size_t>(i)] =
        downsample(scans[static_cast<std::size_t>(i)], static_cast<std::size_t>(cfg.refine_points),
                   stream_key(cfg.seed, 302, static_cast<std::uint64_t>(i)));
    index[static_cast<std::size_t>(i)] =
        std::make_unique<ScanIndex>(eval[static_cast<std::size_t>(i)]);
    views[static_cast<std::size_t>(i)] = index[static_cast<std::size_t>(i)].get();
  }

  // Candidate pool: one transform set per spanning tree, plus the prior.
  std::vector<TransformSet> candidates;
  for (const auto& tree : enumerate_spanning_trees(m)) {
    bool usable = true;
    for (const auto& [i, j] : tree) usable = usable && graph.edge_usable(i, j);
    if (!usable) continue;
    candidates.push_back(compose_tree(graph, tree));
  }
  if (prior) {
    if (static_cast<int>(prior->to_reference.size()) != m) {
      throw std::invalid_argument("prior transform set size does not match scan count");
    }
    candidates.push_back(*prior);
  }
  if (candidates.empty()) {
    std::string detail;
    for (const auto& e : graph.edges) {
      detail += " (" + std::to_string(e.i) + "," + std::to_string(e.j) + "):" +
                (std::isfinite(e.energy) ? std::to_string(e.energy) : "failed");
    }
    throw std::runtime_error("register_multiview: no usable candidate transform set;" + detail);
  }

  std::vector<double> scores(candidates.size());
  parallel_for(candidates.size(), jobs,
               [&](std::size_t c) { scores[c] = overall_vem_normalized(candidates[c], views); });
  std::size_t best = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    if (scores[c] < scores[best]) best = c;
  }

  TransformSet selected = candidates[best];
  selected.overall_energy = overall_vem(selected, views);
  for (int it = 0; it < 10; ++it) {
    if (!joint_refine_step(selected, views, cfg)) break;
    result.refine_iterations = it + 1;
  }
  selected.overall_energy = overall_vem(selected, views);
  result.transforms = std::move(selected);
  return result;
}

}  // namespace vemreg
