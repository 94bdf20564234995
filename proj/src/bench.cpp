#include "vemreg/bench.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "vemreg/kdtree.hpp"
#include "vemreg/log.hpp"
#include "vemreg/parallel.hpp"
#include "vemreg/scan_io.hpp"

namespace vemreg {

namespace {

// Local surface area estimate: squared mean distance to the 8 nearest
// neighbors. Sparse regions get heavier weights, balancing uneven sampling.
std::vector<double> area_weights(const PartialScan& scan) {
  const std::size_t n = scan.points.size();
  std::vector<KdTree3::Point> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = {scan.points[i].x(), scan.points[i].y(), scan.points[i].z()};
  }
  const KdTree3 tree(pts);
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto neighbors = tree.knn(tree.point(static_cast<int>(i)), 8, static_cast<int>(i));
    double mean = 0;
    for (const auto& [idx, d2] : neighbors) mean += std::sqrt(d2);
    mean /= std::max<std::size_t>(1, neighbors.size());
    weights[i] = mean * mean;
  }
  return weights;
}

}  // namespace

RigidTransform pca_align(const PartialScan& p1, const PartialScan& p2) {
  return pca_align(p1, p2, SwarmConfig{});
}

RigidTransform pca_align(const PartialScan& p1, const PartialScan& p2,
                         const SwarmConfig& cfg) {
  if (p1.size() < 4 || p2.size() < 4) {
    throw std::invalid_argument("pca_align: need at least 4 points per scan");
  }
  struct Axes {
    Vec3 mean;
    Eigen::Matrix3d basis;
    Eigen::Vector3d eigenvalues;
  };
  const auto principal_axes = [](const PartialScan& scan) {
    const std::vector<double> w = area_weights(scan);
    double wsum = 0;
    Vec3 mean = Vec3::Zero();
    for (std::size_t i = 0; i < scan.size(); ++i) {
      mean += w[i] * scan.points[i];
      wsum += w[i];
    }
    mean /= wsum;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < scan.size(); ++i) {
      const Vec3 d = scan.points[i] - mean;
      cov += w[i] * d * d.transpose();
    }
    cov /= wsum;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    Axes axes{mean, eig.eigenvectors(), eig.eigenvalues()};
    if (axes.basis.determinant() < 0) axes.basis.col(0) *= -1;
    return axes;
  };

  const Axes a1 = principal_axes(p1);
  const Axes a2 = principal_axes(p2);
  for (const Axes* a : {&a1, &a2}) {
    const auto& ev = a->eigenvalues;
    const double scale = std::max(ev[2], 1e-12);
    if (ev[2] <= 0 || (ev[1] - ev[0]) / scale < 0.02 || (ev[2] - ev[1]) / scale < 0.02) {
      throw std::runtime_error("degenerate principal axes");
    }
  }

  // Four right-handed sign assignments; VEM arbitrates.
  const int signs[4][3] = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  const PartialScan e1 = downsample(p1, static_cast<std::size_t>(cfg.swarm_points), cfg.seed);
  const PartialScan e2 = downsample(p2, static_cast<std::size_t>(cfg.swarm_points), cfg.seed);
  const ScanIndex i1(e1), i2(e2);
  RigidTransform best;
  double best_energy = std::numeric_limits<double>::infinity();
  for (const auto& s : signs) {
    Eigen::Matrix3d flipped = a2.basis;
    for (int c = 0; c < 3; ++c) flipped.col(c) *= s[c];
    const Eigen::Matrix3d rot = a1.basis * flipped.transpose();
    const RigidTransform candidate(Quat(rot), a1.mean - rot * a2.mean);
    const double e = vem(candidate, i1, i2).total();
    if (e < best_energy) {
      best_energy = e;
      best = candidate;
    }
  }
  return best;
}

RigidTransform run_external_adapter(const std::string& command, const std::string& scan1_path,
                                    const std::string& scan2_path) {
  int to_child[2], from_child[2];
  if (pipe(to_child) != 0 || pipe(from_child) != 0) {
    throw std::runtime_error("adapter: pipe failed");
  }
  const pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("adapter: fork failed");
  if (pid == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    close(to_child[0]);
    close(to_child[1]);
    close(from_child[0]);
    close(from_child[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(to_child[0]);
  close(from_child[1]);
  const std::string input = scan1_path + "\n" + scan2_path + "\n";
  ssize_t ignored = write(to_child[1], input.data(), input.size());
  (void)ignored;
  close(to_child[1]);
  std::string output;
  char buf[4096];
  ssize_t got;
  while ((got = read(from_child[0], buf, sizeof(buf))) > 0) {
    output.append(buf, static_cast<std::size_t>(got));
  }
  close(from_child[0]);
  int status = 0;
  waitpid(pid, &status, 0);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw std::runtime_error("adapter: command failed: " + command);
  }
  return transform_from_json(nlohmann::json::parse(output));
}

bool is_known_method(const std::string& method) {
  return method == "vem-pso" || method == "vem-pso-no-guides" ||
         method == "vem-guides-only" || method == "vem-initial-only" || method == "pca" ||
         method == "external-adapter";
}

std::vector<BenchRecord> evaluate_method(const std::string& method,
                                         const std::vector<PairSpec>& pairs,
                                         const std::string& base_dir, const SwarmConfig& cfg,
                                         int jobs, const std::string& adapter_cmd) {
  if (!is_known_method(method)) {
    throw std::invalid_argument("unknown method: " + method);
  }
  std::vector<BenchRecord> records(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t k) {
    const PairSpec& pair = pairs[k];
    BenchRecord& rec = records[k];
    rec.pair_id = pair.id;
    rec.method = method;
    rec.overlap_ratio = pair.overlap_ratio;

    const std::string path1 = (std::filesystem::path(base_dir) / pair.scan1).string();
    const std::string path2 = (std::filesystem::path(base_dir) / pair.scan2).string();
    const auto t0 = std::chrono::steady_clock::now();
    try {
      SwarmConfig pair_cfg = cfg;
      pair_cfg.jobs = 1;  // pairs run concurrently instead
      pair_cfg.seed = stream_key(cfg.seed, 777, k);
      RigidTransform estimate;
      if (method == "external-adapter") {
        if (adapter_cmd.empty()) throw std::invalid_argument("external-adapter needs a command");
        estimate = run_external_adapter(adapter_cmd, std::filesystem::absolute(path1).string(),
                                        std::filesystem::absolute(path2).string());
      } else {
        const PartialScan p1 = load_scan(path1);
        const PartialScan p2 = load_scan(path2);
        if (method == "pca") {
          estimate = pca_align(p1, p2, pair_cfg);
        } else {
          if (method == "vem-pso-no-guides") pair_cfg.enable_guides = false;
          if (method == "vem-guides-only") pair_cfg.enable_pso = false;
          if (method == "vem-initial-only") pair_cfg.max_iterations = 0;
          estimate = register_pair(p1, p2, pair_cfg).transform;
        }
      }
      rec.rotation_error_deg = rotation_distance_deg(estimate.q, pair.gt_transform.q);
    } catch (const std::exception& e) {
      VEMREG_DEBUG("%s on %s failed: %s", method.c_str(), pair.id.c_str(), e.what());
      rec.rotation_error_deg = 180.0;
    }
    rec.success = rec.rotation_error_deg < kSuccessMaxRotationDeg;
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  return records;
}

BenchReport make_report(const std::vector<BenchRecord>& records, int bin_width_pct) {
  if (records.empty()) throw std::invalid_argument("make_report: no records");
  BenchReport report;
  report.bin_width_pct = bin_width_pct;
  const int nbins = (100 + bin_width_pct - 1) / bin_width_pct;
  for (const auto& rec : records) {
    if (report.bins.find(rec.method) == report.bins.end()) {
      report.methods.push_back(rec.method);
      auto& bins = report.bins[rec.method];
      bins.resize(static_cast<std::size_t>(nbins));
      for (int b = 0; b < nbins; ++b) {
        bins[static_cast<std::size_t>(b)].lo_pct = b * bin_width_pct;
        bins[static_cast<std::size_t>(b)].hi_pct = std::min(100, (b + 1) * bin_width_pct);
      }
    }
    const int bin = std::clamp(static_cast<int>(rec.overlap_ratio * 100.0) / bin_width_pct, 0,
                               nbins - 1);
    BenchBin& b = report.bins[rec.method][static_cast<std::size_t>(bin)];
    ++b.n;
    if (rec.success) ++b.successes;
    b.time_sum_s += rec.wall_time_s;
  }
  for (const auto& method : report.methods) {
    double sum = 0;
    long n = 0;
    for (const auto& b : report.bins[method]) {
      sum += b.time_sum_s;
      n += b.n;
    }
    report.mean_time_s[method] = n == 0 ? 0.0 : sum / static_cast<double>(n);
  }
  return report;
}

std::string report_to_csv(const BenchReport& report, bool zero_times) {
  std::ostringstream out;
  out << "method,bin_low,bin_high,n,success_pct,mean_time_s\n";
  char buf[160];
  for (const auto& method : report.methods) {
    for (const auto& b : report.bins.at(method)) {
      std::snprintf(buf, sizeof(buf), "%s,%d,%d,%ld,%.2f,%.3f\n", method.c_str(), b.lo_pct,
                    b.hi_pct, b.n, b.success_pct(), zero_times ? 0.0 : b.mean_time_s());
      out << buf;
    }
  }
  return out.str();
}

std::string records_to_csv(const std::vector<BenchRecord>& records, bool zero_times) {
  std::ostringstream out;
  out << "pair_id,method,overlap_ratio,rotation_error_deg,success,wall_time_s\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%d,%.3f\n", r.pair_id.c_str(),
                  r.method.c_str(), r.overlap_ratio, r.rotation_error_deg, r.success ? 1 : 0,
                  zero_times ? 0.0 : r.wall_time_s);
    out << buf;
  }
  return out.str();
}

}  // namespace vemreg
