#pragma once

#include <string>

#include <json.hpp>

#include "vemreg/registration.hpp"

namespace vemreg {

// Tool-wide configuration: the swarm parameters plus evaluation budgets (all
// inside SwarmConfig), the determinism switch and logging. JSON keys mirror
// the fields one to one; unknown keys are a hard error so typos cannot
// silently fall back to defaults.
struct GlobalConfig {
  SwarmConfig swarm;
  bool deterministic = false;
  std::string log_level = "info";

  nlohmann::json to_json() const;
  static GlobalConfig from_json(const nlohmann::json& j);
  static GlobalConfig load_file(const std::string& path);

  // Stable digest of the built-in defaults, printed by --version.
  static std::string defaults_digest();
};

}  // namespace vemreg
