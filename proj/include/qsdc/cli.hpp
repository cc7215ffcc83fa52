#pragma once

// Command-line front end (CLI11): run, scenarios, validate, compare.
// Exit codes: 0 success, 1 validation, 2 numerical divergence, 3 I/O.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qsdc/config.hpp"
#include "qsdc/errors.hpp"
#include "qsdc/run.hpp"

namespace qsdc {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitDivergence = 2, kExitIo = 3 };

inline constexpr char kOutDirEnv[] = "QSDC_OUT_DIR";

inline std::filesystem::path default_out_dir() {
  if (const char* e = std::getenv(kOutDirEnv); e && *e) return e;
  return "qsdc_out";
}

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_traj;
  std::optional<std::string> method;
};

inline ScenarioConfig load_with_overrides(const std::filesystem::path& path, const ScenarioRegistry& reg,
                                          const CliOverrides& o) {
  Json j = read_json_file(path);
  if (!j.is_object()) throw ConfigError("", "configuration must be an object");
  if (o.seed) j["ensemble"]["seed"] = *o.seed;
  if (o.n_traj) j["ensemble"]["n_traj"] = *o.n_traj;
  if (o.method) j["method"] = *o.method;
  return parse_config_json(std::move(j), reg, std::filesystem::absolute(path).parent_path());
}

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"qsdc: quantum state diffusion correlations and output spectra"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::vector<std::string> register_files;
  std::string config_path;
  std::string out_dir;
  unsigned threads = 0;
  CliOverrides ov;
  std::uint64_t seed = 0;
  std::size_t n_traj = 0;
  bool emit = false;

  auto add_run_flags = [&](CLI::App* s) {
    s->add_option("config", config_path, "scenario configuration (JSON, comments allowed)")->required();
    s->add_option("--seed", seed, "override ensemble.seed");
    s->add_option("--n-traj", n_traj, "override ensemble.n_traj");
    s->add_option("--out-dir", out_dir, std::string("output directory (default $") + kOutDirEnv + " or ./qsdc_out)");
    s->add_option("--threads", threads, "worker threads, 0 = all cores (outputs do not depend on it)");
    s->add_option("--register", register_files, "register custom scenarios from files");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run a scenario and write CSV tables plus manifest.json");
  add_run_flags(run_cmd);
  std::string method_override;
  run_cmd->add_option("--method", method_override, "override method");
  CLI::App* cmp_cmd = app.add_subcommand("compare", "run qrt, qsd-coupled and diad spectra and compare them");
  add_run_flags(cmp_cmd);
  CLI::App* list_cmd = app.add_subcommand("scenarios", "list registered scenarios");
  list_cmd->add_option("--register", register_files, "register custom scenarios from files");
  CLI::App* val_cmd = app.add_subcommand("validate", "parse and validate a configuration");
  val_cmd->add_option("config", config_path, "scenario configuration")->required();
  val_cmd->add_option("--register", register_files, "register custom scenarios from files");
  val_cmd->add_flag("--emit", emit, "print the canonical configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    ScenarioRegistry reg = ScenarioRegistry::stock();
    for (const auto& f : register_files) reg.register_file(f);

    if (list_cmd->parsed()) {
      out << reg.listing();
      return kExitOk;
    }
    if (val_cmd->parsed()) {
      const ScenarioConfig c = parse_config(config_path, reg);
      if (emit) out << canonical_text(c);
      else out << "ok: " << config_path << " (method " << to_string(c.method) << ")\n";
      return kExitOk;
    }
    CLI::App* cmd = run_cmd->parsed() ? run_cmd : cmp_cmd;
    if (cmd->count("--seed")) ov.seed = seed;
    if (cmd->count("--n-traj")) ov.n_traj = n_traj;
    if (cmd == cmp_cmd) ov.method = "compare";
    else if (run_cmd->count("--method")) ov.method = method_override;
    const ScenarioConfig c = load_with_overrides(config_path, reg, ov);
    const std::filesystem::path dir = out_dir.empty() ? default_out_dir() : std::filesystem::path(out_dir);
    const RunResult r = run(c, dir, {threads});
    if (!r.report.empty()) out << r.report;
    out << "wrote";
    for (const auto& f : r.files) out << " " << (dir / f).string();
    out << "\nconfig_hash " << r.config_hash << " n_dropped " << r.n_dropped << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Divergence& e) {
    err << "numerical divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace qsdc
