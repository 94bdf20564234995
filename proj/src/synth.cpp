#include "vemreg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "vemreg/kdtree.hpp"
#include "vemreg/log.hpp"
#include "vemreg/parallel.hpp"
#include "vemreg/ply.hpp"
#include "vemreg/rng.hpp"
#include "vemreg/scan_io.hpp"

namespace vemreg {

double overlap_ratio(const PartialScan& p1, const PartialScan& p2_aligned) {
  if (p1.points.empty() || p2_aligned.points.empty()) return 0.0;
  const auto to_kd = [](const std::vector<Vec3>& pts) {
    std::vector<KdTree3::Point> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = {pts[i].x(), pts[i].y(), pts[i].z()};
    return out;
  };
  const KdTree3 t1(to_kd(p1.points));
  const KdTree3 t2(to_kd(p2_aligned.points));

  std::vector<double> spacing(p1.points.size());
  for (int i = 0; i < static_cast<int>(p1.points.size()); ++i) {
    spacing[static_cast<std::size_t>(i)] =
        t1.nearest_excluding(t1.point(i), i).second;
  }
  const std::size_t mid = spacing.size() / 2;
  std::nth_element(spacing.begin(), spacing.begin() + static_cast<long>(mid), spacing.end());
  const double tau = 2.0 * std::sqrt(spacing[mid]);
  const double tau2 = tau * tau;

  const auto covered = [&](const std::vector<Vec3>& pts, const KdTree3& other) {
    std::size_t hit = 0;
    for (const auto& p : pts) {
      if (other.nearest({p.x(), p.y(), p.z()}).second <= tau2) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(pts.size());
  };
  return std::min(covered(p2_aligned.points, t1), covered(p1.points, t2));
}

namespace {

Vec3 random_unit(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * M_PI);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

Quat random_rotation(Rng& rng) {
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  return canonical_quat(Quat(b * std::cos(2 * M_PI * u3), a * std::sin(2 * M_PI * u2),
                             a * std::cos(2 * M_PI * u2), b * std::sin(2 * M_PI * u3)));
}

Vec3 random_in_ball(Rng& rng, double radius) {
  for (;;) {
    const Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (v.squaredNorm() <= 1.0) return v * radius;
  }
}

double focal_for(const SynthOptions& opt, double diameter, double distance) {
  const double half_angle = std::asin(std::min(0.9, (diameter / 2) / distance));
  return 0.5 * std::min(opt.width, opt.height) / (std::tan(half_angle) * 1.3);
}

}  // namespace

SynthesizedPair synthesize_pair(const TriangleMesh& mesh, std::uint64_t seed,
                                std::uint64_t pair_index, double target_overlap_lo,
                                double target_overlap_hi, const SynthOptions& opt) {
  Rng rng(stream_key(seed, static_cast<std::uint64_t>(RngStream::kBenchmarkCamera), pair_index));
  const Vec3 center = mesh.centroid();
  const double diameter = mesh.diameter();
  const double distance = opt.camera_distance * diameter;
  const double focal = focal_for(opt, diameter, distance);

  const Vec3 dir1 = random_unit(rng);
  const double roll1 = rng.uniform(0.0, 2.0 * M_PI);
  const Camera cam1 =
      make_camera(center + dir1 * distance, center, opt.width, opt.height, focal, roll1);
  SynthesizedPair out;
  out.scan1 = render_scan(mesh, cam1, opt.jobs);

  // Great-circle direction for the second viewpoint.
  Vec3 ortho = random_unit(rng);
  ortho = (ortho - dir1 * dir1.dot(ortho));
  if (ortho.norm() < 1e-6) ortho = dir1.unitOrthogonal();
  ortho.normalize();
  const double roll2 = rng.uniform(0.0, 2.0 * M_PI);

  PartialScan scan2;
  double overlap = 0;
  double lo = 0.02, hi = 0.92 * M_PI;  // separation brackets: ~full overlap .. none
  for (int probe = 0; probe < 8; ++probe) {
    const double delta = 0.5 * (lo + hi);
    const Vec3 dir2 = dir1 * std::cos(delta) + ortho * std::sin(delta);
    const Camera cam2 =
        make_camera(center + dir2 * distance, center, opt.width, opt.height, focal, roll2);
    scan2 = render_scan(mesh, cam2, opt.jobs);
    overlap = overlap_ratio(out.scan1, scan2);
    if (overlap >= target_overlap_lo && overlap < target_overlap_hi) break;
    if (overlap >= target_overlap_hi) {
      lo = delta;  // too much overlap: separate further
    } else {
      hi = delta;
    }
  }
  out.overlap = overlap;

  Rng prng(stream_key(seed, static_cast<std::uint64_t>(RngStream::kBenchmarkPerturbation),
                      pair_index));
  out.perturbation = RigidTransform(random_rotation(prng), random_in_ball(prng, 0.5 * diameter));
  out.gt_transform = out.perturbation.inverse();
  out.scan2 = transform_scan(scan2, out.perturbation);
  return out;
}

std::vector<PairSpec> generate_benchmark(const std::vector<std::string>& mesh_files,
                                         int n_pairs, std::uint64_t seed,
                                         const std::string& out_dir, const SynthOptions& opt) {
  if (n_pairs < 1) throw std::invalid_argument("generate_benchmark: n_pairs must be >= 1");
  std::vector<std::pair<std::string, TriangleMesh>> meshes;
  for (const auto& file : mesh_files) {
    try {
      TriangleMesh mesh = load_mesh(file);
      mesh.normalize_scale(opt.mesh_diameter_mm);
      meshes.emplace_back(std::filesystem::path(file).stem().string(), std::move(mesh));
    } catch (const std::exception& e) {
      VEMREG_WARN("skipping mesh %s: %s", file.c_str(), e.what());
    }
  }
  if (meshes.empty()) throw std::runtime_error("generate_benchmark: no loadable meshes");

  std::filesystem::create_directories(out_dir);
  std::vector<PairSpec> specs(static_cast<std::size_t>(n_pairs));
  std::vector<char> ok(static_cast<std::size_t>(n_pairs), 0);

  SynthOptions pair_opt = opt;
  pair_opt.jobs = 1;  // pairs run concurrently instead
  parallel_for(static_cast<std::size_t>(n_pairs), opt.jobs, [&](std::size_t p) {
    // Overlap bands cycle over [0.05, 0.95) in 10%-wide bins.
    const int bin = static_cast<int>(p % 9);
    const double lo = 0.05 + 0.10 * bin, hi = lo + 0.10;
    const auto& [mesh_name, mesh] = meshes[p % meshes.size()];
    char id[32];
    std::snprintf(id, sizeof(id), "pair_%04zu", p);
    try {
      const SynthesizedPair sp = synthesize_pair(mesh, seed, p, lo, hi, pair_opt);
      PairSpec& spec = specs[p];
      spec.id = id;
      spec.mesh_name = mesh_name;
      spec.scan1 = std::string(id) + "_a.ply";
      spec.scan2 = std::string(id) + "_b.ply";
      spec.perturbation = sp.perturbation;
      spec.gt_transform = sp.gt_transform;
      spec.overlap_ratio = sp.overlap;
      save_scan(sp.scan1, (std::filesystem::path(out_dir) / spec.scan1).string());
      save_scan(sp.scan2, (std::filesystem::path(out_dir) / spec.scan2).string());
      ok[p] = 1;
    } catch (const std::exception& e) {
      VEMREG_WARN("pair %s failed: %s", id, e.what());
    }
  });

  std::vector<PairSpec> kept;
  for (std::size_t p = 0; p < specs.size(); ++p) {
    if (ok[p]) kept.push_back(std::move(specs[p]));
  }
  if (static_cast<int>(kept.size()) < (n_pairs + 1) / 2) {
    throw std::runtime_error("generate_benchmark: only " + std::to_string(kept.size()) +
                             " of " + std::to_string(n_pairs) + " pairs succeeded");
  }
  write_manifest(kept, (std::filesystem::path(out_dir) / "pairs.json").string());
  return kept;
}

void write_manifest(const std::vector<PairSpec>& specs, const std::string& path) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& s : specs) {
    pairs.push_back({{"id", s.id},
                     {"mesh", s.mesh_name},
                     {"scan1", s.scan1},
                     {"scan2", s.scan2},
                     {"perturbation", transform_to_json(s.perturbation)},
                     {"gt", transform_to_json(s.gt_transform)},
                     {"overlap", s.overlap_ratio}});
  }
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << nlohmann::json{{"pairs", pairs}}.dump(2) << "\n";
}

std::vector<PairSpec> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("manifest not found: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path + ": " + e.what());
  }
  if (!j.contains("pairs") || !j.at("pairs").is_array()) {
    throw FormatError("manifest " + path + ": missing \"pairs\" array");
  }
  std::vector<PairSpec> specs;
  for (const auto& item : j.at("pairs")) {
    PairSpec s;
    s.id = item.at("id").get<std::string>();
    s.mesh_name = item.value("mesh", std::string());
    s.scan1 = item.at("scan1").get<std::string>();
    s.scan2 = item.at("scan2").get<std::string>();
    s.perturbation = transform_from_json(item.at("perturbation"));
    s.gt_transform = transform_from_json(item.at("gt"));
    s.overlap_ratio = item.at("overlap").get<double>();
    specs.push_back(std::move(s));
  }
  return specs;
}

}  // namespace vemreg
