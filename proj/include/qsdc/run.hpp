#pragma once

// Run orchestration for a ScenarioConfig: dispatch to the method, write CSV
// tables (17 significant digits), a manifest that reproduces them, and a
// separate timings file (the only non-deterministic output).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "qsdc/config.hpp"
#include "qsdc/correlation.hpp"
#include "qsdc/diad.hpp"
#include "qsdc/lindblad.hpp"
#include "qsdc/outputmode.hpp"
#include "qsdc/qsd.hpp"
#include "qsdc/spectra.hpp"

#ifndef QSDC_VERSION
#define QSDC_VERSION "0.1.0"
#endif

namespace qsdc {

inline constexpr char kVersion[] = QSDC_VERSION;

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : columns_(header.size()) { row(header); }

  template <class... Cells>
  void add(const Cells&... cells) {
    std::vector<std::string> r;
    (r.push_back(cell(cells)), ...);
    if (r.size() != columns_) throw InvalidArgument("csv: wrong number of cells");
    row(r);
  }

  const std::string& text() const noexcept { return text_; }

 private:
  static std::string cell(double x) { return fmt17(x); }
  static std::string cell(std::size_t n) { return std::to_string(n); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
    text_ += "\n";
  }

  std::size_t columns_;
  std::string text_;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

// --- tables -----------------------------------------------------------------

inline CsvTable qrt_table(const CorrelationSeries& g) {
  CsvTable t({"t1", "t2", "re", "im"});
  for (std::size_t i = 0; i < g.t_grid.size(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const Complex v = g.at(i, j);
      t.add(g.t_grid[j], g.t_grid[i], v.real(), v.imag());
    }
  return t;
}

inline CsvTable correlation_table(const CorrelationSeries& g) {
  CsvTable t({"t1", "t2", "t_final", "re_mean", "im_mean", "re_stderr", "im_stderr", "n_traj", "method"});
  for (std::size_t i = 0; i < g.t_grid.size(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const std::size_t k = CorrelationSeries::tri(i, j);
      const Complex v = g.values[k];
      t.add(g.t_grid[j], g.t_grid[i], std::string(), v.real(), v.imag(), g.se_re.empty() ? 0.0 : g.se_re[k],
            g.se_im.empty() ? 0.0 : g.se_im[k], g.n_traj, g.method);
    }
  return t;
}

inline CsvTable correlation_table(const CorrelationTable& c) {
  CsvTable t({"t1", "t2", "t_final", "re_mean", "im_mean", "re_stderr", "im_stderr", "n_traj", "method"});
  for (const auto& p : c.points)
    t.add(p.t1, p.t2, p.t_final ? fmt17(*p.t_final) : std::string(), p.value.mean.real(), p.value.mean.imag(),
          p.value.se_re, p.value.se_im, c.n_traj, c.method);
  return t;
}

inline CsvTable intensity_table(const IntensitySeries& s) {
  CsvTable t({"t", "mean", "stderr", "n_traj", "n_dropped"});
  for (std::size_t g = 0; g < s.t_grid.size(); ++g) t.add(s.t_grid[g], s.mean[g], s.std_error[g], s.n_traj, s.n_dropped);
  return t;
}

inline void append_spectrum(CsvTable& t, const SpectrumSeries& s) {
  for (std::size_t w = 0; w < s.size(); ++w)
    t.add(s.omega_grid[w], s.intensity[w], s.std_error[w], s.method, s.epsilon, s.t_measure, s.n_traj);
}

inline CsvTable spectrum_table(const std::vector<SpectrumSeries>& series) {
  CsvTable t({"omega", "intensity", "stderr", "method", "epsilon", "t_measure", "n_traj"});
  for (const auto& s : series) append_spectrum(t, s);
  return t;
}

// --- run --------------------------------------------------------------------

struct RunOptions {
  unsigned threads = 0;  // 0 = hardware concurrency; never changes the outputs
};

struct RunResult {
  std::vector<std::string> files;  // written, relative to the output directory
  std::size_t n_dropped = 0;
  std::string config_hash;
  std::string report;  // comparison report text (method compare)
  double runtime_seconds = 0.0;
};

namespace detail {

struct RunContext {
  const ScenarioConfig& cfg;
  LindbladModel model;
  StateVector psi0;
  std::vector<double> grid;
  QsdOptions qsd;
  DiadOptions diad;
  unsigned threads;
};

inline StepScheme parse_scheme(const std::string& s) {
  return s == "euler_maruyama" ? StepScheme::euler_maruyama : StepScheme::exponential_euler;
}

inline std::vector<double> frequencies(const ScenarioConfig& c) {
  if (!c.output_mode.omega_grid.empty()) return c.output_mode.omega_grid;
  if (c.output_mode.omega) return {*c.output_mode.omega};
  return {};
}

}  // namespace detail

inline Json run_metadata(const ScenarioConfig& c) {
  return Json{{"frame", kOutputModeFrame},
              {"time_order_policy", kTimeOrderPolicy},
              {"correlation_ordering", "<O2(t2) O1(t1)> = Tr{O2 S(O1 rho(t1))}"},
              {"spectrum_kernel", "eps^2 * integral e^{-i w (t'-t'')} G(t',t'') + c.c., trapezoid"},
              {"scheme", c.numerics.scheme},
              {"diad_gauge", c.numerics.diad_gauge},
              {"diad_insertion", c.numerics.diad_insertion},
              {"rng", "philox4x32-10, key = splitmix64(splitmix64(seed) + trajectory)"}};
}

inline RunResult run(const ScenarioConfig& c, const std::filesystem::path& out_dir, const RunOptions& ro = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  detail::RunContext ctx{c, build_model(c.model), initial_state(c), c.time_grid(), {}, {}, ro.threads};
  ctx.qsd.dt = c.grid.dt;
  ctx.qsd.scheme = detail::parse_scheme(c.numerics.scheme);
  ctx.diad.qsd = ctx.qsd;
  ctx.diad.gauge = c.numerics.diad_gauge == "balance_norms" ? DiadGauge::balance_norms : DiadGauge::none;
  ctx.diad.insertion = c.numerics.diad_insertion == "bra" ? DiadInsertion::bra : DiadInsertion::ket;
  const Operator q = named_operator(c.observables.q, c.model);
  const Operator o2 = named_operator(c.observables.o2, c.model);
  const Operator o1 = named_operator(c.observables.o1, c.model);
  const DensityOperator rho0 = DensityOperator::pure(ctx.psi0);
  const PropagationConfig pc{c.grid.dt, {}};
  const std::vector<double> omegas = detail::frequencies(c);
  const double t = c.grid.t_max, h = c.grid.step(), eps = c.output_mode.epsilon;
  const std::size_t n = c.ensemble.n_traj;
  const std::uint64_t seed = c.ensemble.seed;

  std::vector<std::pair<std::string, std::string>> files;  // name, content
  std::vector<SpectrumSeries> spectra;
  RunResult res;
  Json timings = Json::object();

  switch (c.method) {
    case Method::qrt: {
      files.emplace_back("correlation.csv", qrt_table(qrt_correlation_series(ctx.model, o2, o1, rho0, ctx.grid, pc)).text());
      if (!c.output_mode.omega_grid.empty()) spectra.push_back(spectrum_qrt(ctx.model, q, omegas, eps, rho0, t, h, pc));
      break;
    }
    case Method::qsd_corr: {
      const CorrelationSeries g = qsd_correlation_series(ctx.model, o2, o1, ctx.psi0, ctx.grid, seed, n, ctx.qsd, ro.threads);
      res.n_dropped = g.n_dropped;
      files.emplace_back("correlation.csv", correlation_table(g).text());
      break;
    }
    case Method::diad: {
      const CorrelationSeries g = diad_correlation_series(ctx.model, o2, o1, ctx.psi0, ctx.grid, seed, n, ctx.diad, ro.threads);
      res.n_dropped = g.n_dropped;
      files.emplace_back("correlation.csv", correlation_table(g).text());
      if (!c.output_mode.omega_grid.empty())
        spectra.push_back(spectrum_diad(ctx.model, q, eps, omegas, ctx.psi0, t, h, n, seed, ctx.diad, ro.threads));
      break;
    }
    case Method::qsd_coupled:
    case Method::qsd_fullspace: {
      const bool coupled = c.method == Method::qsd_coupled;
      if (c.output_mode.omega) {
        const OutputModeSpec spec{*c.output_mode.omega, eps, q};
        const IntensitySeries s =
            coupled ? coupled_intensity_ensemble(ctx.model, spec, ctx.psi0, ctx.grid, seed, n, ctx.qsd, ro.threads)
                    : full_space_intensity_ensemble(ctx.model, spec, ctx.psi0, c.output_mode.mode_levels, ctx.grid, seed,
                                                    n, ctx.qsd, ro.threads);
        res.n_dropped = std::max(res.n_dropped, s.n_dropped);
        files.emplace_back("intensity.csv", intensity_table(s).text());
      }
      if (!c.output_mode.omega_grid.empty())
        spectra.push_back(coupled ? spectrum_direct(ctx.model, q, eps, omegas, ctx.psi0, t, n, seed, ctx.qsd, ro.threads)
                                  : spectrum_full_space(ctx.model, q, eps, omegas, ctx.psi0, t, n, seed, ctx.qsd,
                                                        ro.threads, c.output_mode.mode_levels));
      break;
    }
    case Method::compare: {
      spectra.push_back(spectrum_qrt(ctx.model, q, omegas, eps, rho0, t, h, pc));
      spectra.push_back(spectrum_direct(ctx.model, q, eps, omegas, ctx.psi0, t, n, seed, ctx.qsd, ro.threads));
      spectra.push_back(spectrum_diad(ctx.model, q, eps, omegas, ctx.psi0, t, h, n, seed, ctx.diad, ro.threads));
      const RouteReport rep = compare_routes(spectra);
      res.report = to_text(rep);
      files.emplace_back("comparison.txt", res.report);
      timings["routes"] = runtime_text(rep);
      break;
    }
  }
  if (!spectra.empty()) {
    files.emplace_back("spectrum.csv", spectrum_table(spectra).text());
    for (const auto& s : spectra) {
      res.n_dropped = std::max(res.n_dropped, s.n_dropped);
      timings["spectrum_" + s.method + "_s"] = s.runtime_seconds;
    }
  }

  const std::string canon = canonical_text(c);
  res.config_hash = hex64(fnv1a64(canon));
  Json outputs = Json::array();
  for (const auto& f : files) outputs.push_back(f.first);
  const Json manifest{{"config", to_json(c)},         {"config_hash", res.config_hash},
                      {"seed", c.ensemble.seed},      {"n_traj", c.ensemble.n_traj},
                      {"version", kVersion},          {"method", to_string(c.method)},
                      {"n_dropped", res.n_dropped},   {"outputs", outputs},
                      {"metadata", run_metadata(c)}};
  files.emplace_back("manifest.json", manifest.dump(2) + "\n");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  for (const auto& [name, text] : files) {
    write_text_file(out_dir / name, text);
    res.files.push_back(name);
  }
  res.runtime_seconds = detail::elapsed_since(t0);
  timings["total_s"] = res.runtime_seconds;
  write_text_file(out_dir / "timings.json", timings.dump(2) + "\n");
  res.files.push_back("timings.json");
  return res;
}

}  // namespace qsdc
