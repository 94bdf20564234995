#include "vemreg/config.hpp"

#include <fstream>

#include "vemreg/ply.hpp"

namespace vemreg {

nlohmann::json GlobalConfig::to_json() const {
  return nlohmann::json{{"n_particles", swarm.n_particles},
                        {"theta_r", swarm.theta_r_deg},
                        {"omega_p", swarm.omega_p},
                        {"omega_b", swarm.omega_b},
                        {"omega_g", swarm.omega_g},
                        {"lambda_lm", swarm.lambda_lm},
                        {"normal_angle_max", swarm.normal_angle_max_deg},
                        {"hough_bin", swarm.hough_bin_mm},
                        {"termination_eps", swarm.termination_eps},
                        {"max_iterations", swarm.max_iterations},
                        {"seed", swarm.seed},
                        {"swarm_points", swarm.swarm_points},
                        {"refine_points", swarm.refine_points},
                        {"hough_points", swarm.hough_points},
                        {"stochastic_pso", swarm.stochastic_pso},
                        {"enable_guides", swarm.enable_guides},
                        {"enable_pso", swarm.enable_pso},
                        {"jobs", swarm.jobs},
                        {"deterministic", deterministic},
                        {"log_level", log_level}};
}

GlobalConfig GlobalConfig::from_json(const nlohmann::json& j) {
  GlobalConfig cfg;
  const nlohmann::json known = cfg.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      throw std::invalid_argument("unknown config key: \"" + key + "\"");
    }
  }
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("n_particles", cfg.swarm.n_particles);
  get("theta_r", cfg.swarm.theta_r_deg);
  get("omega_p", cfg.swarm.omega_p);
  get("omega_b", cfg.swarm.omega_b);
  get("omega_g", cfg.swarm.omega_g);
  get("lambda_lm", cfg.swarm.lambda_lm);
  get("normal_angle_max", cfg.swarm.normal_angle_max_deg);
  get("hough_bin", cfg.swarm.hough_bin_mm);
  get("termination_eps", cfg.swarm.termination_eps);
  get("max_iterations", cfg.swarm.max_iterations);
  get("seed", cfg.swarm.seed);
  get("swarm_points", cfg.swarm.swarm_points);
  get("refine_points", cfg.swarm.refine_points);
  get("hough_points", cfg.swarm.hough_points);
  get("stochastic_pso", cfg.swarm.stochastic_pso);
  get("enable_guides", cfg.swarm.enable_guides);
  get("enable_pso", cfg.swarm.enable_pso);
  get("jobs", cfg.swarm.jobs);
  get("deterministic", cfg.deterministic);
  get("log_level", cfg.log_level);
  cfg.swarm.validate();
  return cfg;
}

GlobalConfig GlobalConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("config not found: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config " + path + ": " + e.what());
  }
  return from_json(j);
}

std::string GlobalConfig::defaults_digest() {
  const std::string dump = GlobalConfig{}.to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (const unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace vemreg
