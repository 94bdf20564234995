#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "vemreg/bench.hpp"
#include "vemreg/config.hpp"
#include "vemreg/log.hpp"
#include "vemreg/multiview.hpp"
#include "vemreg/parallel.hpp"
#include "vemreg/registration.hpp"
#include "vemreg/scan_io.hpp"
#include "vemreg/synth.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool deterministic = false;
  std::string log_level;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Config JSON (defaults for absent fields)");
    cmd->add_option("--seed", seed, "RNG seed");
    cmd->add_option("--jobs", jobs, "Worker parallelism (default: all cores)");
    cmd->add_flag("--deterministic", deterministic,
                  "Byte-identical outputs for a fixed seed (zeroes timing columns)");
    cmd->add_option("--log-level", log_level, "debug|info|warn|error");
  }

  vemreg::GlobalConfig resolve() const {
    vemreg::GlobalConfig cfg;
    if (!config_path.empty()) cfg = vemreg::GlobalConfig::load_file(config_path);
    if (seed) cfg.swarm.seed = *seed;
    if (jobs) cfg.swarm.jobs = *jobs;
    if (deterministic) cfg.deterministic = true;
    if (!log_level.empty()) cfg.log_level = log_level;
    if (cfg.swarm.jobs <= 0) cfg.swarm.jobs = vemreg::default_jobs();
    vemreg::set_log_level(vemreg::log_level_from_string(cfg.log_level));
    cfg.swarm.validate();
    return cfg;
  }
};

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw vemreg::FormatError("cannot write " + path);
  out << content;
}

int run_register_pair(const std::string& scan1, const std::string& scan2,
                      const std::string& out_path, const std::string& trace_path,
                      const CommonOpts& common) {
  const vemreg::GlobalConfig cfg = common.resolve();
  const vemreg::PartialScan p1 = vemreg::load_scan(scan1);
  const vemreg::PartialScan p2 = vemreg::load_scan(scan2);
  const vemreg::RegistrationResult result = vemreg::register_pair(p1, p2, cfg.swarm);
  VEMREG_INFO("register-pair: energy %.6g mm^2 after %d iterations", result.energy,
              result.iterations);

  nlohmann::json j = vemreg::transform_to_json(result.transform);
  j["energy"] = result.energy;
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text(out_path, text);
  }
  if (!trace_path.empty()) {
    std::string csv = "iteration,best_energy_mm2,guide_count\n";
    char buf[96];
    for (std::size_t k = 0; k < result.trace.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%zu,%.9g,%d\n", k + 1, result.trace[k],
                    result.guide_counts[k]);
      csv += buf;
    }
    write_text(trace_path, csv);
  }
  return 0;
}

int run_register_multi(const std::vector<std::string>& scan_paths, const std::string& prior_path,
                       const std::string& out_path, const CommonOpts& common) {
  const vemreg::GlobalConfig cfg = common.resolve();
  std::vector<vemreg::PartialScan> scans;
  scans.reserve(scan_paths.size());
  for (const auto& path : scan_paths) scans.push_back(vemreg::load_scan(path));

  std::optional<vemreg::TransformSet> prior;
  if (!prior_path.empty()) {
    std::ifstream in(prior_path);
    if (!in) throw vemreg::FormatError("prior not found: " + prior_path);
    nlohmann::json j;
    in >> j;
    vemreg::TransformSet ts;
    ts.to_reference.push_back(vemreg::RigidTransform::identity());
    for (const auto& item : j.at("transforms")) {
      ts.to_reference.push_back(vemreg::transform_from_json(item));
    }
    prior = std::move(ts);
  }

  const vemreg::MultiviewResult result = vemreg::register_multiview(scans, cfg.swarm, prior);
  VEMREG_INFO("register-multi: overall energy %.6g mm^2, %d refine iterations",
              result.transforms.overall_energy, result.refine_iterations);

  nlohmann::json transforms = nlohmann::json::array();
  for (std::size_t i = 1; i < result.transforms.to_reference.size(); ++i) {
    transforms.push_back(vemreg::transform_to_json(result.transforms.to_reference[i]));
  }
  const nlohmann::json j{{"transforms", transforms},
                         {"energy", result.transforms.overall_energy}};
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text(out_path, text);
  }
  return 0;
}

int run_synth(const std::string& mesh_dir, int pairs, const std::string& out_dir,
              const std::string& emit_meshes_dir, const std::string& emit_symmetric,
              const CommonOpts& common) {
  const vemreg::GlobalConfig cfg = common.resolve();
  if (!emit_meshes_dir.empty()) {
    std::filesystem::create_directories(emit_meshes_dir);
    for (const auto& [name, mesh] : vemreg::builtin_benchmark_meshes()) {
      const std::string path = (std::filesystem::path(emit_meshes_dir) / (name + ".ply")).string();
      vemreg::save_mesh_ply(mesh, path);
      VEMREG_INFO("wrote %s", path.c_str());
    }
  }
  if (!emit_symmetric.empty()) {
    vemreg::save_mesh_ply(vemreg::make_cylinder(), emit_symmetric);
    VEMREG_INFO("wrote %s", emit_symmetric.c_str());
  }
  if (mesh_dir.empty()) {
    if (emit_meshes_dir.empty() && emit_symmetric.empty()) {
      throw std::invalid_argument("synth: nothing to do (need --meshes or --emit-meshes)");
    }
    return 0;
  }

  std::vector<std::string> mesh_files;
  for (const auto& entry : std::filesystem::directory_iterator(mesh_dir)) {
    const std::string ext = entry.path().extension().string();
    if (ext == ".ply" || ext == ".obj" || ext == ".PLY" || ext == ".OBJ") {
      mesh_files.push_back(entry.path().string());
    }
  }
  std::sort(mesh_files.begin(), mesh_files.end());
  if (mesh_files.empty()) throw std::invalid_argument("synth: no meshes in " + mesh_dir);

  vemreg::SynthOptions opt;
  opt.jobs = cfg.swarm.jobs;
  const auto specs =
      vemreg::generate_benchmark(mesh_files, pairs, cfg.swarm.seed, out_dir, opt);
  VEMREG_INFO("synth: %zu pairs written to %s", specs.size(), out_dir.c_str());
  return 0;
}

int run_bench(const std::string& manifest_path, const std::string& methods_csv,
              const std::string& out_path, const std::string& records_path,
              const std::string& adapter_cmd, const CommonOpts& common) {
  const vemreg::GlobalConfig cfg = common.resolve();
  const auto pairs = vemreg::load_manifest(manifest_path);
  const std::string base_dir = std::filesystem::path(manifest_path).parent_path().string();

  std::vector<std::string> methods;
  std::stringstream ss(methods_csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) methods.push_back(item);
  }
  if (methods.empty()) throw std::invalid_argument("bench: no methods given");
  for (const auto& m : methods) {
    if (!vemreg::is_known_method(m)) throw std::invalid_argument("bench: unknown method " + m);
  }

  std::vector<vemreg::BenchRecord> records;
  for (const auto& method : methods) {
    VEMREG_INFO("bench: running %s over %zu pairs", method.c_str(), pairs.size());
    auto part = vemreg::evaluate_method(method, pairs, base_dir, cfg.swarm, cfg.swarm.jobs,
                                        adapter_cmd);
    records.insert(records.end(), part.begin(), part.end());
  }
  const vemreg::BenchReport report = vemreg::make_report(records);
  write_text(out_path, vemreg::report_to_csv(report, cfg.deterministic));
  if (!records_path.empty()) {
    write_text(records_path, vemreg::records_to_csv(records, cfg.deterministic));
  }
  return 0;
}

int run_dump_vem(const std::string& scan1, const std::string& scan2,
                 const std::string& transform_path, const std::string& out_path,
                 const CommonOpts& common) {
  common.resolve();
  const vemreg::PartialScan p1 = vemreg::load_scan(scan1);
  const vemreg::PartialScan p2 = vemreg::load_scan(scan2);
  vemreg::RigidTransform T;
  if (!transform_path.empty()) {
    std::ifstream in(transform_path);
    if (!in) throw vemreg::FormatError("transform not found: " + transform_path);
    nlohmann::json j;
    in >> j;
    T = vemreg::transform_from_json(j);
  }
  const vemreg::ScanIndex s1(p1), s2(p2);
  std::vector<vemreg::ResidualRecord> records;
  const vemreg::VemBreakdown breakdown = vemreg::vem(T, s1, s2, &records);
  VEMREG_INFO("vem: total %.6g mm^2 (F %.6g, B %.6g; counts O %ld F %ld B %ld)",
              breakdown.total(), breakdown.energy_f, breakdown.energy_b, breakdown.count_o,
              breakdown.count_f, breakdown.count_b);

  std::string csv = "point_index,direction,label,residual_norm_mm\n";
  char buf[96];
  for (const auto& r : records) {
    const char* label = r.label == vemreg::RegionLabel::kOccluded
                            ? "O"
                            : (r.label == vemreg::RegionLabel::kFront ? "F" : "B");
    std::snprintf(buf, sizeof(buf), "%d,%s,%s,%.6f\n", r.point_index,
                  r.direction == 0 ? "1to2" : "2to1", label, r.residual.norm());
    csv += buf;
  }
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    write_text(out_path, csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Global registration of low-overlap partial scans by swarm search over a "
               "visibility error metric"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "Print version and config defaults digest");

  CommonOpts pair_common, multi_common, synth_common, bench_common, dump_common;

  auto* pair_cmd = app.add_subcommand("register-pair", "Align scan 2 onto scan 1");
  std::string pair_scan1, pair_scan2, pair_out, pair_trace;
  pair_cmd->add_option("scan1", pair_scan1, "Reference scan (PLY)")->required();
  pair_cmd->add_option("scan2", pair_scan2, "Scan to align (PLY)")->required();
  pair_cmd->add_option("--out", pair_out, "Output transform JSON");
  pair_cmd->add_option("--trace", pair_trace, "Per-iteration best-energy CSV");
  pair_common.attach(pair_cmd);

  auto* multi_cmd = app.add_subcommand("register-multi", "Align 2..6 scans into scan 1's frame");
  std::vector<std::string> multi_scans;
  std::string multi_prior, multi_out;
  multi_cmd->add_option("scans", multi_scans, "Scans (PLY), first is the reference")
      ->required()
      ->expected(2, 6);
  multi_cmd->add_option("--prior", multi_prior, "Previous frame transform set JSON");
  multi_cmd->add_option("--out", multi_out, "Output transform set JSON");
  multi_common.attach(multi_cmd);

  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic benchmark pairs");
  std::string synth_meshes, synth_out, synth_emit, synth_emit_sym;
  int synth_pairs = 0;
  synth_cmd->add_option("--meshes", synth_meshes, "Directory of PLY/OBJ meshes");
  synth_cmd->add_option("--pairs", synth_pairs, "Number of pairs to generate");
  synth_cmd->add_option("--out", synth_out, "Output directory");
  synth_cmd->add_option("--emit-meshes", synth_emit, "Write the built-in benchmark meshes here");
  synth_cmd->add_option("--emit-symmetric-mesh", synth_emit_sym,
                        "Write the rotationally symmetric test mesh (cylinder) to this file");
  synth_common.attach(synth_cmd);

  auto* bench_cmd = app.add_subcommand("bench", "Evaluate methods over a generated benchmark");
  std::string bench_manifest, bench_methods, bench_out, bench_records, bench_adapter;
  bench_cmd->add_option("--manifest", bench_manifest, "pairs.json from synth")->required();
  bench_cmd->add_option("--methods", bench_methods,
                        "Comma list: vem-pso,vem-pso-no-guides,vem-guides-only,"
                        "vem-initial-only,pca,external-adapter")
      ->required();
  bench_cmd->add_option("--out", bench_out, "Report CSV")->required();
  bench_cmd->add_option("--records", bench_records, "Raw per-trial records CSV");
  bench_cmd->add_option("--adapter", bench_adapter, "Command for external-adapter");
  bench_common.attach(bench_cmd);

  auto* dump_cmd = app.add_subcommand("dump-vem", "Per-point metric breakdown for a pair");
  std::string dump_scan1, dump_scan2, dump_transform, dump_out;
  dump_cmd->add_option("scan1", dump_scan1)->required();
  dump_cmd->add_option("scan2", dump_scan2)->required();
  dump_cmd->add_option("--transform", dump_transform, "Transform JSON (default identity)");
  dump_cmd->add_option("--out", dump_out, "Output CSV");
  dump_common.attach(dump_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (show_version) {
    std::cout << "vemreg " << kVersion << " (config defaults digest "
              << vemreg::GlobalConfig::defaults_digest() << ")\n";
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 2;
  }

  try {
    if (pair_cmd->parsed()) {
      return run_register_pair(pair_scan1, pair_scan2, pair_out, pair_trace, pair_common);
    }
    if (multi_cmd->parsed()) {
      return run_register_multi(multi_scans, multi_prior, multi_out, multi_common);
    }
    if (synth_cmd->parsed()) {
      return run_synth(synth_meshes, synth_pairs, synth_out, synth_emit, synth_emit_sym,
                       synth_common);
    }
    if (bench_cmd->parsed()) {
      return run_bench(bench_manifest, bench_methods, bench_out, bench_records, bench_adapter,
                       bench_common);
    }
    if (dump_cmd->parsed()) {
      return run_dump_vem(dump_scan1, dump_scan2, dump_transform, dump_out, dump_common);
    }
  } catch (const vemreg::FormatError& e) {
    VEMREG_ERROR("%s", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    VEMREG_ERROR("%s", e.what());
    return 2;
  } catch (const std::exception& e) {
    VEMREG_ERROR("internal error: %s", e.what());
    return 1;
  }
  return 2;
}
