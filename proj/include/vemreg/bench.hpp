#pragma once

#include <map>
#include <string>
#include <vector>

#include "vemreg/registration.hpp"
#include "vemreg/synth.hpp"

namespace vemreg {

// Rotation error below this counts as a successful registration.
inline constexpr double kSuccessMaxRotationDeg = 10.0;

struct BenchRecord {
  std::string pair_id;
  std::string method;
  double overlap_ratio = 0;
  double rotation_error_deg = 0;
  bool success = false;  // rotation_error_deg < 10, exactly
  double wall_time_s = 0;
};

struct BenchBin {
  int lo_pct = 0, hi_pct = 0;
  long n = 0;
  long successes = 0;
  double time_sum_s = 0;

  double success_pct() const { return n == 0 ? 0.0 : 100.0 * successes / n; }
  double mean_time_s() const { return n == 0 ? 0.0 : time_sum_s / n; }
};

struct BenchReport {
  int bin_width_pct = 10;
  std::vector<std::string> methods;  // evaluation order
  std::map<std::string, std::vector<BenchBin>> bins;
  std::map<std::string, double> mean_time_s;  // per method, all pairs
};

// Baseline: aligns weighted-PCA principal axes (weights estimated from local
// surface area). Among the four right-handed axis sign assignments the one
// with minimum VEM wins. Throws "degenerate principal axes" on (near-)tied
// eigenvalues, e.g. spheres.
RigidTransform pca_align(const PartialScan& p1, const PartialScan& p2);
RigidTransform pca_align(const PartialScan& p1, const PartialScan& p2, const SwarmConfig& cfg);

// Subprocess contract: two scan paths on stdin, one transform JSON object on
// stdout.
RigidTransform run_external_adapter(const std::string& command, const std::string& scan1_path,
                                    const std::string& scan2_path);

bool is_known_method(const std::string& method);

// Runs one method over all pairs (scan paths resolved against base_dir).
// Per-pair failures are recorded as 180 degree errors, never aborted.
std::vector<BenchRecord> evaluate_method(const std::string& method,
                                         const std::vector<PairSpec>& pairs,
                                         const std::string& base_dir, const SwarmConfig& cfg,
                                         int jobs, const std::string& adapter_cmd = "");

BenchReport make_report(const std::vector<BenchRecord>& records, int bin_width_pct = 10);

// CSV emission; zero_times replaces wall-clock columns with zeros so files
// are byte-identical across deterministic runs.
std::string report_to_csv(const BenchReport& report, bool zero_times);
std::string records_to_csv(const std::vector<BenchRecord>& records, bool zero_times);

}  // namespace vemreg
