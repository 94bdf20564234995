#include "vemreg/registration.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "vemreg/log.hpp"
#include "vemreg/parallel.hpp"

namespace vemreg {

void SwarmConfig::validate() const {
  if (n_particles < 1) throw std::invalid_argument("n_particles must be >= 1");
  if (theta_r_deg <= 0 || normal_angle_max_deg <= 0 || hough_bin_mm <= 0 ||
      termination_eps <= 0 || lambda_lm <= 0) {
    throw std::invalid_argument("swarm thresholds must be positive");
  }
  auto in_unit = [](double w) { return w > 0.0 && w < 1.0; };
  if (!in_unit(omega_p) || !in_unit(omega_b) || !in_unit(omega_g)) {
    throw std::invalid_argument("PSO weights must lie in (0, 1)");
  }
  if (max_iterations < 0) throw std::invalid_argument("max_iterations must be >= 0");
  if (swarm_points < 1 || refine_points < 1 || hough_points < 1) {
    throw std::invalid_argument("evaluation budgets must be >= 1");
  }
}

namespace {

// Signed 20-bit per axis, packed so the winning-bin tie break is a plain
// integer comparison.
std::uint64_t pack_bin(const Vec3& v, double bin) {
  const auto c = [bin](double x) {
    return static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(x / bin)) + (1 << 20));
  };
  return (c(v.x()) << 42) | (c(v.y()) << 21) | c(v.z());
}

struct Bin {
  int count = 0;
  Vec3 sum{0, 0, 0};
};

}  // namespace

Vec3 hough_vote(const std::vector<Vec3>& pts1, const std::vector<Vec3>& nrm1,
                const std::vector<Vec3>& pts2_rotated, const std::vector<Vec3>& nrm2_rotated,
                double bin_mm, double normal_angle_max_deg) {
  const double cos_gate = std::cos(normal_angle_max_deg * M_PI / 180.0);
  std::unordered_map<std::uint64_t, Bin> bins;
  bins.reserve(4096);
  for (std::size_t i = 0; i < pts1.size(); ++i) {
    const Vec3& n1 = nrm1[i];
    const Vec3& x = pts1[i];
    for (std::size_t j = 0; j < pts2_rotated.size(); ++j) {
      if (n1.dot(nrm2_rotated[j]) <= cos_gate) continue;
      const Vec3 v = x - pts2_rotated[j];
      Bin& b = bins[pack_bin(v, bin_mm)];
      ++b.count;
      b.sum += v;
    }
  }
  if (bins.empty()) throw std::runtime_error("no compatible normal pairs");
  const Bin* winner = nullptr;
  std::uint64_t winner_key = 0;
  for (const auto& [key, bin] : bins) {
    if (!winner || bin.count > winner->count ||
        (bin.count == winner->count && key < winner_key)) {
      winner = &bin;
      winner_key = key;
    }
  }
  return winner->sum / winner->count;
}

Vec3 hough_translation(const PartialScan& p1, const PartialScan& p2_rotated,
                       const SwarmConfig& cfg) {
  const PartialScan a = downsample(p1, static_cast<std::size_t>(cfg.hough_points),
                                   stream_key(cfg.seed, 103));
  const PartialScan b = downsample(p2_rotated, static_cast<std::size_t>(cfg.hough_points),
                                   stream_key(cfg.seed, 104));
  return hough_vote(a.points, a.normals, b.points, b.normals, cfg.hough_bin_mm,
                    cfg.normal_angle_max_deg);
}

std::vector<int> select_guides(const std::vector<Particle>& particles, double theta_r_deg) {
  const double cos_half = std::cos(0.5 * theta_r_deg * M_PI / 180.0);
  std::vector<int> order;
  order.reserve(particles.size());
  for (int i = 0; i < static_cast<int>(particles.size()); ++i) {
    if (std::isfinite(particles[static_cast<std::size_t>(i)].energy)) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ea = particles[static_cast<std::size_t>(a)].energy;
    const double eb = particles[static_cast<std::size_t>(b)].energy;
    return ea != eb ? ea < eb : a < b;
  });
  std::vector<char> suppressed(particles.size(), 0);
  std::vector<int> guides;
  for (const int i : order) {
    if (suppressed[static_cast<std::size_t>(i)]) continue;
    guides.push_back(i);
    const Quat& qi = particles[static_cast<std::size_t>(i)].state.q;
    for (const int j : order) {
      if (suppressed[static_cast<std::size_t>(j)]) continue;
      const Quat& qj = particles[static_cast<std::size_t>(j)].state.q;
      if (std::abs(qi.coeffs().dot(qj.coeffs())) >= cos_half) {
        suppressed[static_cast<std::size_t>(j)] = 1;
      }
    }
  }
  return guides;
}

LmOutcome lm_step(const RigidTransform& T, const ScanIndex& s1, const ScanIndex& s2,
                  const SwarmConfig& cfg, double current_energy) {
  LmOutcome out;
  out.transform = T;
  out.energy = current_energy >= 0 ? current_energy : vem(T, s1, s2).total();
  const FrozenResidualModel model(T, s1, s2);
  if (model.record_count() == 0) return out;  // zero residual, nothing to move

  const Eigen::VectorXd r = model.residuals(TangentVector{});
  const Eigen::MatrixXd J = model.jacobian();
  const Eigen::Matrix<double, 6, 6> jtj = J.transpose() * J;
  const Eigen::Matrix<double, 6, 1> jtr = J.transpose() * r;
  if (!jtj.allFinite() || !jtr.allFinite()) {
    out.singular = true;
    return out;
  }

  double lambda = cfg.lambda_lm;
  for (int attempt = 0; attempt < 4; ++attempt, lambda *= 10.0) {
    const Eigen::Matrix<double, 6, 6> a =
        jtj + lambda * Eigen::Matrix<double, 6, 6>::Identity();
    const Eigen::Matrix<double, 6, 1> dm = a.ldlt().solve(-jtr);
    if (!dm.allFinite()) {
      out.singular = true;
      return out;
    }
    const RigidTransform candidate =
        exp_at(T, TangentVector{dm.head<3>(), dm.tail<3>()});
    const double e = vem(candidate, s1, s2).total();
    if (e < out.energy) {
      out.transform = candidate;
      out.energy = e;
      out.accepted = true;
      out.step_norm = dm.norm();
      return out;
    }
  }
  return out;
}

void pso_step(Particle& particle, const PsoCoordinates& local_best, const SwarmConfig& cfg,
              Rng& rng, const std::function<double(const RigidTransform&)>& energy_fn) {
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  const Vec6 pos = particle.coords.stacked();
  const Vec6 toward_best = particle.best_coords.stacked() - pos;
  const Vec6 toward_local = local_best.stacked() - pos;
  Vec6 xi_b = Vec6::Ones(), xi_g = Vec6::Ones();
  if (cfg.stochastic_pso) {
    for (int k = 0; k < 6; ++k) xi_b[k] = rng.uniform();
    for (int k = 0; k < 6; ++k) xi_g[k] = rng.uniform();
  }
  const Vec6 proposed = pos + cfg.omega_p * particle.velocity +
                        cfg.omega_b * xi_b.cwiseProduct(toward_best) +
                        cfg.omega_g * xi_g.cwiseProduct(toward_local);
  PsoCoordinates next{proposed.head<3>(), proposed.tail<3>()};
  next.clamp_to_ball();
  particle.velocity = next.stacked() - pos;  // applied displacement
  particle.set_coords(next);
  particle.energy = energy_fn(particle.state);
  if (particle.energy < particle.best_energy) {
    particle.best_energy = particle.energy;
    particle.best_coords = particle.coords;
  }
}

namespace {

// Downsampled scan pair plus its indexes; the evaluation unit for particles.
struct PairEval {
  PartialScan s1, s2;
  std::unique_ptr<ScanIndex> i1, i2;

  PairEval(const PartialScan& p1, const PartialScan& p2, int budget, std::uint64_t seed) {
    s1 = downsample(p1, static_cast<std::size_t>(budget), stream_key(seed, 101));
    s2 = downsample(p2, static_cast<std::size_t>(budget), stream_key(seed, 102));
    i1 = std::make_unique<ScanIndex>(s1);
    i2 = std::make_unique<ScanIndex>(s2);
  }
  PairEval(const PairEval&) = delete;

  double energy(const RigidTransform& T) const { return vem(T, *i1, *i2).total(); }
};

Quat sample_rotation(Rng& rng) {
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  return canonical_quat(Quat(b * std::cos(2 * M_PI * u3), a * std::sin(2 * M_PI * u2),
                             a * std::cos(2 * M_PI * u2), b * std::sin(2 * M_PI * u3)));
}

struct Snapshot {
  Quat q;
  PsoCoordinates coords;
  double energy;
};

}  // namespace

RegistrationResult register_pair(const PartialScan& p1, const PartialScan& p2,
                                 const SwarmConfig& cfg) {
  cfg.validate();
  if (p1.size() < 50 || p2.size() < 50) {
    throw std::invalid_argument("register_pair: degenerate scan (< 50 points)");
  }
  const int jobs = cfg.jobs > 0 ? cfg.jobs : default_jobs();

  const PairEval eval(p1, p2, cfg.swarm_points, cfg.seed);
  const PartialScan vote1 = downsample(eval.s1, static_cast<std::size_t>(cfg.hough_points),
                                       stream_key(cfg.seed, 103));
  const PartialScan vote2 = downsample(eval.s2, static_cast<std::size_t>(cfg.hough_points),
                                       stream_key(cfg.seed, 104));

  const auto place_particle = [&](Particle& p, const Quat& rotation) {
    std::vector<Vec3> rp(vote2.points.size()), rn(vote2.normals.size());
    const Eigen::Matrix3d R = rotation.toRotationMatrix();
    for (std::size_t k = 0; k < vote2.points.size(); ++k) {
      rp[k] = R * vote2.points[k];
      rn[k] = R * vote2.normals[k];
    }
    try {
      const Vec3 t = hough_vote(vote1.points, vote1.normals, rp, rn, cfg.hough_bin_mm,
                                cfg.normal_angle_max_deg);
      p.set_state(RigidTransform(rotation, t));
      p.energy = eval.energy(p.state);
    } catch (const std::runtime_error&) {
      p.set_state(RigidTransform(rotation, Vec3::Zero()));
      p.energy = std::numeric_limits<double>::infinity();
    }
    p.velocity.setZero();
    p.best_coords = p.coords;
    p.best_energy = p.energy;
  };

  // Initial swarm: uniform rotations, voted translations.
  const std::vector<Quat> rotations =
      sample_uniform_rotations(cfg.n_particles, cfg.seed);
  std::vector<Particle> particles(static_cast<std::size_t>(cfg.n_particles));
  parallel_for(particles.size(), jobs,
               [&](std::size_t i) { place_particle(particles[i], rotations[i]); });

  long infinite = 0;
  for (const auto& p : particles) {
    if (!std::isfinite(p.energy)) ++infinite;
  }
  if (infinite * 10 > cfg.n_particles) {
    throw std::runtime_error("register_pair: translation voting failed for " +
                             std::to_string(infinite) + " of " +
                             std::to_string(cfg.n_particles) +
                             " particles; scans may share no compatible geometry");
  }

  RegistrationResult result;
  double best_energy = std::numeric_limits<double>::infinity();
  RigidTransform best_state;
  const auto track_best = [&]() {
    for (const auto& p : particles) {
      if (p.energy < best_energy) {
        best_energy = p.energy;
        best_state = p.state;
      }
    }
  };
  track_best();

  const double cos_half = std::cos(0.5 * cfg.theta_r_deg * M_PI / 180.0);
  int stall = 0;
  const int stall_limit = cfg.enable_guides ? 1 : 5;

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    for (auto& p : particles) p.is_guide = false;
    std::vector<int> guides;
    if (cfg.enable_guides) {
      guides = select_guides(particles, cfg.theta_r_deg);
      for (const int g : guides) particles[static_cast<std::size_t>(g)].is_guide = true;
      parallel_for(guides.size(), jobs, [&](std::size_t k) {
        Particle& p = particles[static_cast<std::size_t>(guides[k])];
        const LmOutcome out = lm_step(p.state, *eval.i1, *eval.i2, cfg, p.energy);
        if (out.accepted) {
          p.set_state(out.transform);
          p.energy = out.energy;
          if (p.energy < p.best_energy) {
            p.best_energy = p.energy;
            p.best_coords = p.coords;
          }
        }
      });
    }

    if (cfg.enable_pso) {
      // Regular particles chase the refreshed guide positions (or, without
      // guides, the best snapshot particle within the rotation radius).
      std::vector<Snapshot> anchors;
      if (cfg.enable_guides) {
        anchors.reserve(guides.size());
        for (const int g : guides) {
          const Particle& p = particles[static_cast<std::size_t>(g)];
          anchors.push_back({p.state.q, p.coords, p.energy});
        }
      } else {
        anchors.reserve(particles.size());
        for (const auto& p : particles) {
          if (std::isfinite(p.energy)) anchors.push_back({p.state.q, p.coords, p.energy});
        }
      }
      int global_anchor = 0;
      for (int a = 1; a < static_cast<int>(anchors.size()); ++a) {
        if (anchors[static_cast<std::size_t>(a)].energy <
            anchors[static_cast<std::size_t>(global_anchor)].energy) {
          global_anchor = a;
        }
      }
      parallel_for(particles.size(), jobs, [&](std::size_t i) {
        Particle& p = particles[i];
        if (p.is_guide || !std::isfinite(p.energy) || anchors.empty()) return;
        int local = -1;
        for (int a = 0; a < static_cast<int>(anchors.size()); ++a) {
          const Snapshot& s = anchors[static_cast<std::size_t>(a)];
          if (std::abs(s.q.coeffs().dot(p.state.q.coeffs())) < cos_half) continue;
          if (local < 0 || s.energy < anchors[static_cast<std::size_t>(local)].energy) {
            local = a;
          }
        }
        if (local < 0) local = global_anchor;
        Rng rng(stream_key(cfg.seed, static_cast<std::uint64_t>(RngStream::kPsoUpdate),
                           static_cast<std::uint64_t>(iter), i));
        pso_step(p, anchors[static_cast<std::size_t>(local)].coords, cfg, rng,
                 [&](const RigidTransform& T) { return eval.energy(T); });
      });
    }

    // Failed-voting particles try again from a fresh rotation.
    parallel_for(particles.size(), jobs, [&](std::size_t i) {
      Particle& p = particles[i];
      if (std::isfinite(p.energy)) return;
      Rng rng(stream_key(cfg.seed, static_cast<std::uint64_t>(RngStream::kReseed),
                         static_cast<std::uint64_t>(iter), i));
      place_particle(p, sample_rotation(rng));
    });

    const double previous_best = best_energy;
    track_best();
    result.trace.push_back(best_energy);
    result.guide_counts.push_back(static_cast<int>(guides.size()));
    result.iterations = iter;

    stall = (previous_best - best_energy <= cfg.termination_eps) ? stall + 1 : 0;
    if (stall >= stall_limit) break;
  }

  // Re-score and polish the best particle at the refinement budget.
  const PairEval refine(p1, p2, cfg.refine_points, stream_key(cfg.seed, 105));
  RigidTransform T = best_state;
  double energy = refine.energy(T);
  for (int it = 0; it < 15; ++it) {
    const LmOutcome out = lm_step(T, *refine.i1, *refine.i2, cfg, energy);
    if (!out.accepted) break;
    T = out.transform;
    energy = out.energy;
    if (out.step_norm < 1e-8) break;
  }
  result.transform = T;
  result.energy = energy;
  return result;
}

}  // namespace vemreg
