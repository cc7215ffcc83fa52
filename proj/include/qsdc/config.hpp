#pragma once

// Scenario configuration: structured text (JSON with comments) parsed into a
// validated ScenarioConfig with every violation reported by field path, the
// scenario registry, and named operators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qsdc/errors.hpp"
#include "qsdc/grid.hpp"
#include "qsdc/hilbert.hpp"
#include "qsdc/lindblad.hpp"

namespace qsdc {

enum class Method { qrt, qsd_corr, qsd_coupled, qsd_fullspace, diad, compare };

inline const std::vector<std::pair<Method, std::string>>& method_names() {
  static const std::vector<std::pair<Method, std::string>> names{
      {Method::qrt, "qrt"},         {Method::qsd_corr, "qsd-corr"}, {Method::qsd_coupled, "qsd-coupled"},
      {Method::qsd_fullspace, "qsd-fullspace"}, {Method::diad, "diad"},         {Method::compare, "compare"}};
  return names;
}

inline std::string to_string(Method m) {
  for (const auto& [k, v] : method_names())
    if (k == m) return v;
  return "?";
}

inline std::optional<Method> parse_method(const std::string& s) {
  for (const auto& [k, v] : method_names())
    if (v == s) return k;
  return std::nullopt;
}

struct ModelConfig {
  std::string kind;  // damped_oscillator | driven_two_level | custom
  int dim = 0;       // damped_oscillator truncation
  double omega0 = 0.0;
  double gamma = 0.0;
  double rabi = 0.0;      // driven_two_level
  double detuning = 0.0;  // driven_two_level
  std::string matrices;   // custom: absolute path of the matrices file
  bool operator==(const ModelConfig&) const = default;
};

struct InitialStateConfig {
  std::optional<int> basis;  // either a basis index ...
  std::vector<double> re;    // ... or explicit amplitudes (normalized on use)
  std::vector<double> im;
  bool operator==(const InitialStateConfig&) const = default;
};

struct GridConfig {
  double t_max = 0.0;
  double dt = 0.0;  // integrator step
  int stride = 10;  // output grid step = stride * dt
  double step() const { return stride * dt; }
  bool operator==(const GridConfig&) const = default;
};

struct EnsembleConfig {
  std::size_t n_traj = 1000;
  std::uint64_t seed = 1;
  bool operator==(const EnsembleConfig&) const = default;
};

struct OutputModeConfig {
  std::optional<double> omega;
  std::vector<double> omega_grid;
  double epsilon = 0.05;
  int mode_levels = 2;
  bool operator==(const OutputModeConfig&) const = default;
};

struct ObservablesConfig {
  std::string q = "q";   // output-mode coupling operator
  std::string o2 = "q";  // correlation <O2(t2) O1(t1)>
  std::string o1 = "q";
  bool operator==(const ObservablesConfig&) const = default;
};

struct NumericsConfig {
  std::string scheme = "exponential_euler";  // | euler_maruyama
  std::string diad_gauge = "none";           // | balance_norms
  std::string diad_insertion = "ket";        // | bra
  bool operator==(const NumericsConfig&) const = default;
};

struct ScenarioConfig {
  std::string scenario;  // registry entry the config was based on (may be empty)
  ModelConfig model;
  InitialStateConfig initial_state;
  Method method = Method::qrt;
  GridConfig grid;
  EnsembleConfig ensemble;
  OutputModeConfig output_mode;
  ObservablesConfig observables;
  NumericsConfig numerics;
  bool operator==(const ScenarioConfig&) const = default;

  std::vector<double> time_grid() const { return uniform_grid(grid.t_max, grid.step()); }
};

// ---------------------------------------------------------------------------
// Scenario registry

struct ScenarioEntry {
  std::string name;
  std::string description;
  std::vector<std::pair<std::string, std::string>> parameters;  // field -> documentation
  Json defaults;                                                // config fragment patched by the user's file
};

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str(), nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", path.string() + ": " + e.what());
  }
}

class ScenarioRegistry {
 public:
  static ScenarioRegistry stock() {
    ScenarioRegistry r;
    r.add({"damped_oscillator",
           "zero-temperature damped harmonic oscillator, H = omega0 a^dag a, L = sqrt(gamma) a",
           {{"model.dim", "Fock truncation (default 10)"},
            {"model.omega0", "oscillator frequency (default 5)"},
            {"model.gamma", "damping rate >= 0 (default 1)"},
            {"initial_state.basis", "Fock state index (default 1)"}},
           Json{{"model", {{"kind", "damped_oscillator"}, {"dim", 10}, {"omega0", 5.0}, {"gamma", 1.0}}},
                {"initial_state", {{"basis", 1}}}}});
    r.add({"driven_two_level",
           "resonance fluorescence, H = detuning/2 (s+s- - s-s+) + rabi/2 sigma_x, L = sqrt(gamma) s-",
           {{"model.rabi", "Rabi frequency (default 10)"},
            {"model.detuning", "laser detuning (default 0)"},
            {"model.gamma", "spontaneous emission rate >= 0 (default 1)"},
            {"initial_state.basis", "0 = ground, 1 = excited (default 0)"}},
           Json{{"model", {{"kind", "driven_two_level"}, {"rabi", 10.0}, {"detuning", 0.0}, {"gamma", 1.0}}},
                {"initial_state", {{"basis", 0}}},
                {"observables", {{"o2", "sigma_plus"}, {"o1", "sigma_minus"}}}}});
    return r;
  }

  void add(ScenarioEntry e) {
    if (e.name.empty()) throw InvalidArgument("scenario name is empty");
    entries_[e.name] = std::move(e);
  }

  // File form: {"name": ..., "description": ..., "parameters": {field: doc}, "config": {...}}.
  // Relative matrices paths inside "config" resolve against the file's directory.
  void register_file(const std::filesystem::path& path) {
    const Json j = read_json_file(path);
    std::vector<FieldError> errs;
    if (!j.is_object()) throw ConfigError("", "scenario file must hold an object");
    if (!j.contains("name") || !j["name"].is_string()) errs.push_back({"name", "missing or not a string"});
    if (!j.contains("config") || !j["config"].is_object()) errs.push_back({"config", "missing or not an object"});
    if (!errs.empty()) throw ConfigError(errs);
    ScenarioEntry e{j["name"].get<std::string>(), j.value("description", std::string("custom scenario")), {},
                    j["config"]};
    if (j.contains("parameters") && j["parameters"].is_object())
      for (const auto& [k, v] : j["parameters"].items()) e.parameters.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
    if (e.defaults.contains("model") && e.defaults["model"].is_object() && e.defaults["model"].contains("matrices") &&
        e.defaults["model"]["matrices"].is_string()) {
      auto& m = e.defaults["model"];
      std::filesystem::path p = m["matrices"].get<std::string>();
      if (p.is_relative()) m["matrices"] = (std::filesystem::absolute(path).parent_path() / p).lexically_normal().string();
    }
    add(std::move(e));
  }

  const ScenarioEntry* find(const std::string& name) const {
    const auto it = entries_.find(name);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
  }

  std::string listing() const {
    std::ostringstream os;
    for (const auto& [name, e] : entries_) {
      os << name << "\n  " << e.description << "\n";
      for (const auto& [field, doc] : e.parameters) os << "    " << field << ": " << doc << "\n";
    }
    return os.str();
  }

 private:
  std::map<std::string, ScenarioEntry> entries_;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class FieldReader {
 public:
  FieldReader(const Json& j, std::string path, std::vector<FieldError>& errs) : j_(j), path_(std::move(path)), errs_(errs) {
    if (!j_.is_object()) error("", "must be an object");
  }

  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  void error(const std::string& key, const std::string& msg) const { errs_.push_back({key.empty() ? path_ : path(key), msg}); }
  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key) && !j_.at(key).is_null(); }
  const Json& at(const std::string& key) const { return j_.at(key); }

  std::optional<double> number(const std::string& key, bool required = false) const {
    if (!has(key)) {
      if (required) error(key, "missing field");
      return std::nullopt;
    }
    if (!at(key).is_number()) {
      error(key, "expected a number");
      return std::nullopt;
    }
    return at(key).get<double>();
  }

  std::optional<long long> integer(const std::string& key, bool required = false) const {
    if (!has(key)) {
      if (required) error(key, "missing field");
      return std::nullopt;
    }
    const Json& v = at(key);
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>() && std::abs(v.get<double>()) < 9e15)
      return static_cast<long long>(v.get<double>());
    error(key, "expected an integer");
    return std::nullopt;
  }

  std::optional<std::string> string(const std::string& key, bool required = false) const {
    if (!has(key)) {
      if (required) error(key, "missing field");
      return std::nullopt;
    }
    if (!at(key).is_string()) {
      error(key, "expected a string");
      return std::nullopt;
    }
    return at(key).get<std::string>();
  }

  std::optional<std::vector<double>> numbers(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    if (!at(key).is_array()) {
      error(key, "expected an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (const auto& v : at(key)) {
      if (!v.is_number()) {
        error(key, "expected an array of numbers");
        return std::nullopt;
      }
      out.push_back(v.get<double>());
    }
    return out;
  }

  void reject_unknown(std::initializer_list<const char*> known) const {
    if (!j_.is_object()) return;
    for (const auto& [k, v] : j_.items())
      if (std::none_of(known.begin(), known.end(), [&](const char* n) { return k == n; })) error(k, "unknown field");
  }

 private:
  const Json& j_;
  std::string path_;
  std::vector<FieldError>& errs_;
};

inline const Json& section(const Json& root, const char* key) {
  static const Json empty = Json::object();
  return root.contains(key) ? root.at(key) : empty;
}

}  // namespace detail

// dt default: 1e-3 times the shortest time scale among the model's rates.
inline double default_dt(const ModelConfig& m) {
  std::vector<double> rates{m.gamma};
  if (m.kind == "damped_oscillator") rates.push_back(std::abs(m.omega0));
  if (m.kind == "driven_two_level") {
    rates.push_back(std::abs(m.rabi));
    rates.push_back(std::abs(m.detuning));
  }
  double fastest = 0.0;
  for (double r : rates) fastest = std::max(fastest, r);
  return fastest > 0.0 ? 1e-3 / fastest : 1e-3;
}

inline Index model_dim(const ModelConfig& m);
inline Operator named_operator(const std::string& name, const ModelConfig& m);

// Validates a parsed JSON document (with `base_dir` resolving relative paths)
// against the registry; throws ConfigError listing every violation.
inline ScenarioConfig parse_config_json(Json root, const ScenarioRegistry& registry,
                                        const std::filesystem::path& base_dir = std::filesystem::current_path()) {
  using detail::FieldReader;
  std::vector<FieldError> errs;
  if (!root.is_object()) throw ConfigError("", "configuration must be an object");
  ScenarioConfig c;
  if (root.contains("scenario")) {
    if (!root["scenario"].is_string()) {
      errs.push_back({"scenario", "expected a string"});
    } else {
      c.scenario = root["scenario"].get<std::string>();
      if (const ScenarioEntry* e = registry.find(c.scenario)) {
        Json merged = e->defaults;
        merged.merge_patch(root);
        root = std::move(merged);
      } else {
        errs.push_back({"scenario", "unknown scenario '" + c.scenario + "'"});
      }
    }
  }
  const FieldReader top(root, "", errs);
  top.reject_unknown({"scenario", "model", "initial_state", "method", "grid", "ensemble", "output_mode", "observables",
                      "numerics"});

  // model
  if (!root.contains("model")) errs.push_back({"model", "missing field"});
  const std::size_t errors_before_model = errs.size();
  const FieldReader model(detail::section(root, "model"), "model", errs);
  c.model.kind = model.string("kind", true).value_or("");
  const auto& k = c.model.kind;
  if (k == "damped_oscillator") {
    model.reject_unknown({"kind", "dim", "omega0", "gamma"});
    c.model.dim = static_cast<int>(model.integer("dim", true).value_or(0));
    c.model.omega0 = model.number("omega0", true).value_or(0.0);
    c.model.gamma = model.number("gamma", true).value_or(0.0);
    if (model.has("dim") && c.model.dim < 2) model.error("dim", "must be >= 2");
  } else if (k == "driven_two_level") {
    model.reject_unknown({"kind", "rabi", "detuning", "gamma"});
    c.model.rabi = model.number("rabi", true).value_or(0.0);
    c.model.detuning = model.number("detuning").value_or(0.0);
    c.model.gamma = model.number("gamma", true).value_or(0.0);
  } else if (k == "custom") {
    model.reject_unknown({"kind", "matrices"});
    if (const auto p = model.string("matrices", true)) {
      std::filesystem::path path = *p;
      if (path.is_relative()) path = base_dir / path;
      c.model.matrices = std::filesystem::absolute(path).lexically_normal().string();
      if (!std::filesystem::exists(path)) model.error("matrices", "file does not exist: " + path.string());
    }
  } else if (!k.empty()) {
    model.error("kind", "unknown model kind '" + k + "' (damped_oscillator, driven_two_level, custom)");
  }
  if (!(c.model.gamma >= 0.0) || !std::isfinite(c.model.gamma)) model.error("gamma", "must be a finite rate >= 0");
  for (const char* key : {"omega0", "rabi", "detuning"})
    if (model.has(key) && model.number(key) && !std::isfinite(*model.number(key))) model.error(key, "must be finite");

  Index dim = 0;
  if (errs.size() == errors_before_model) {
    try {
      dim = model_dim(c.model);
    } catch (const Error& e) {
      if (k == "custom" && !c.model.matrices.empty() && std::filesystem::exists(c.model.matrices))
        model.error("matrices", e.what());
    }
  }

  // initial state
  const FieldReader init(detail::section(root, "initial_state"), "initial_state", errs);
  init.reject_unknown({"basis", "re", "im"});
  if (init.has("basis")) {
    if (const auto b = init.integer("basis")) {
      c.initial_state.basis = static_cast<int>(*b);
      if (*b < 0 || (dim > 0 && *b >= dim)) init.error("basis", "index outside the Hilbert space");
    }
    if (init.has("re")) init.error("re", "give either basis or amplitudes, not both");
  } else if (init.has("re")) {
    c.initial_state.re = init.numbers("re").value_or(std::vector<double>{});
    c.initial_state.im = init.numbers("im").value_or(std::vector<double>(c.initial_state.re.size(), 0.0));
    if (c.initial_state.im.size() != c.initial_state.re.size()) init.error("im", "length differs from re");
    if (dim > 0 && static_cast<Index>(c.initial_state.re.size()) != dim) init.error("re", "length differs from the model dimension");
    double n = 0.0;
    for (std::size_t i = 0; i < c.initial_state.re.size() && i < c.initial_state.im.size(); ++i)
      n += c.initial_state.re[i] * c.initial_state.re[i] + c.initial_state.im[i] * c.initial_state.im[i];
    if (!(n > 0.0) || !std::isfinite(n)) init.error("re", "amplitudes must be finite and not all zero");
  } else {
    c.initial_state.basis = 0;
  }

  // method
  if (const auto m = top.string("method", true)) {
    if (const auto mm = parse_method(*m))
      c.method = *mm;
    else
      top.error("method", "unknown method '" + *m + "' (qrt, qsd-corr, qsd-coupled, qsd-fullspace, diad, compare)");
  }

  // grid
  if (!root.contains("grid")) errs.push_back({"grid", "missing field"});
  const FieldReader grid(detail::section(root, "grid"), "grid", errs);
  grid.reject_unknown({"t_max", "dt", "stride"});
  c.grid.t_max = grid.number("t_max", true).value_or(0.0);
  c.grid.dt = grid.number("dt").value_or(default_dt(c.model));
  c.grid.stride = static_cast<int>(grid.integer("stride").value_or(10));
  const bool t_ok = c.grid.t_max > 0.0 && std::isfinite(c.grid.t_max);
  const bool dt_ok = c.grid.dt > 0.0 && std::isfinite(c.grid.dt);
  if (!t_ok) grid.error("t_max", "must be > 0");
  if (!dt_ok) grid.error("dt", "must be > 0");
  if (c.grid.stride < 1) grid.error("stride", "must be >= 1");
  if (t_ok && dt_ok && c.grid.stride >= 1) {
    const double n = c.grid.t_max / c.grid.step();
    if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n))
      grid.error("t_max", "must be a whole number of output steps (stride * dt)");
  }

  // ensemble
  const FieldReader ens(detail::section(root, "ensemble"), "ensemble", errs);
  ens.reject_unknown({"n_traj", "seed"});
  if (const auto n = ens.integer("n_traj")) {
    if (*n < 1) ens.error("n_traj", "must be >= 1");
    else c.ensemble.n_traj = static_cast<std::size_t>(*n);
  }
  if (ens.has("seed")) {
    const Json& s = ens.at("seed");
    if (s.is_number_unsigned()) c.ensemble.seed = s.get<std::uint64_t>();
    else if (s.is_number_integer() && s.get<long long>() >= 0) c.ensemble.seed = static_cast<std::uint64_t>(s.get<long long>());
    else ens.error("seed", "expected a non-negative integer");
  }

  // output mode
  const FieldReader om(detail::section(root, "output_mode"), "output_mode", errs);
  om.reject_unknown({"omega", "omega_grid", "epsilon", "mode_levels"});
  c.output_mode.omega = om.number("omega");
  if (om.has("omega_grid")) {
    const Json& g = om.at("omega_grid");
    if (g.is_array()) {
      c.output_mode.omega_grid = om.numbers("omega_grid").value_or(std::vector<double>{});
    } else if (g.is_object()) {
      const FieldReader gr(g, "output_mode.omega_grid", errs);
      gr.reject_unknown({"min", "max", "n"});
      const double lo = gr.number("min", true).value_or(0.0), hi = gr.number("max", true).value_or(0.0);
      const long long n = gr.integer("n", true).value_or(0);
      if (n < 1) gr.error("n", "must be >= 1");
      else if (n > 1 && !(hi > lo)) gr.error("max", "must exceed min");
      else {
        c.output_mode.omega_grid.resize(static_cast<std::size_t>(n));
        for (long long i = 0; i < n; ++i)
          c.output_mode.omega_grid[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
      }
    } else {
      om.error("omega_grid", "expected an array or {min, max, n}");
    }
    for (std::size_t i = 1; i < c.output_mode.omega_grid.size(); ++i)
      if (!(c.output_mode.omega_grid[i] > c.output_mode.omega_grid[i - 1])) {
        om.error("omega_grid", "frequencies must be strictly increasing");
        break;
      }
  }
  c.output_mode.epsilon = om.number("epsilon").value_or(0.05);
  if (!(c.output_mode.epsilon >= 0.0) || !std::isfinite(c.output_mode.epsilon)) om.error("epsilon", "must be >= 0");
  c.output_mode.mode_levels = static_cast<int>(om.integer("mode_levels").value_or(2));
  if (c.output_mode.mode_levels != 2 && c.output_mode.mode_levels != 3) om.error("mode_levels", "must be 2 or 3");
  const bool has_omega = c.output_mode.omega.has_value() || !c.output_mode.omega_grid.empty();
  if ((c.method == Method::qsd_coupled || c.method == Method::qsd_fullspace) && !has_omega)
    om.error("omega", "method " + to_string(c.method) + " needs output_mode.omega or output_mode.omega_grid");
  if (c.method == Method::compare && c.output_mode.omega_grid.empty())
    om.error("omega_grid", "method compare needs output_mode.omega_grid");

  // observables
  const FieldReader obs(detail::section(root, "observables"), "observables", errs);
  obs.reject_unknown({"q", "o2", "o1"});
  c.observables.q = obs.string("q").value_or("q");
  c.observables.o2 = obs.string("o2").value_or("q");
  c.observables.o1 = obs.string("o1").value_or("q");
  if (dim > 0)
    for (const auto& [key, name] : {std::pair<const char*, std::string>{"q", c.observables.q}, {"o2", c.observables.o2},
                                    {"o1", c.observables.o1}}) {
      try {
        named_operator(name, c.model);
      } catch (const Error& e) {
        obs.error(key, e.what());
      }
    }

  // numerics
  const FieldReader num(detail::section(root, "numerics"), "numerics", errs);
  num.reject_unknown({"scheme", "diad_gauge", "diad_insertion"});
  c.numerics.scheme = num.string("scheme").value_or("exponential_euler");
  if (c.numerics.scheme != "exponential_euler" && c.numerics.scheme != "euler_maruyama")
    num.error("scheme", "must be exponential_euler or euler_maruyama");
  c.numerics.diad_gauge = num.string("diad_gauge").value_or("none");
  if (c.numerics.diad_gauge != "none" && c.numerics.diad_gauge != "balance_norms")
    num.error("diad_gauge", "must be none or balance_norms");
  c.numerics.diad_insertion = num.string("diad_insertion").value_or("ket");
  if (c.numerics.diad_insertion != "ket" && c.numerics.diad_insertion != "bra")
    num.error("diad_insertion", "must be ket or bra");

  if (!errs.empty()) throw ConfigError(errs);
  return c;
}

inline ScenarioConfig parse_config(const std::filesystem::path& path,
                                   const ScenarioRegistry& registry = ScenarioRegistry::stock()) {
  return parse_config_json(read_json_file(path), registry, std::filesystem::absolute(path).parent_path());
}

// Canonical form: every field explicit, resolved defaults included, keys sorted.
inline Json to_json(const ScenarioConfig& c) {
  Json model{{"kind", c.model.kind}};
  if (c.model.kind == "damped_oscillator") {
    model["dim"] = c.model.dim;
    model["omega0"] = c.model.omega0;
    model["gamma"] = c.model.gamma;
  } else if (c.model.kind == "driven_two_level") {
    model["rabi"] = c.model.rabi;
    model["detuning"] = c.model.detuning;
    model["gamma"] = c.model.gamma;
  } else {
    model["matrices"] = c.model.matrices;
  }
  Json init = Json::object();
  if (c.initial_state.basis) {
    init["basis"] = *c.initial_state.basis;
  } else {
    init["re"] = c.initial_state.re;
    init["im"] = c.initial_state.im;
  }
  Json om{{"epsilon", c.output_mode.epsilon}, {"mode_levels", c.output_mode.mode_levels}};
  if (c.output_mode.omega) om["omega"] = *c.output_mode.omega;
  if (!c.output_mode.omega_grid.empty()) om["omega_grid"] = c.output_mode.omega_grid;
  Json j{{"model", model},
         {"initial_state", init},
         {"method", to_string(c.method)},
         {"grid", {{"t_max", c.grid.t_max}, {"dt", c.grid.dt}, {"stride", c.grid.stride}}},
         {"ensemble", {{"n_traj", c.ensemble.n_traj}, {"seed", c.ensemble.seed}}},
         {"output_mode", om},
         {"observables", {{"q", c.observables.q}, {"o2", c.observables.o2}, {"o1", c.observables.o1}}},
         {"numerics",
          {{"scheme", c.numerics.scheme}, {"diad_gauge", c.numerics.diad_gauge}, {"diad_insertion", c.numerics.diad_insertion}}}};
  if (!c.scenario.empty()) j["scenario"] = c.scenario;
  return j;
}

inline std::string canonical_text(const ScenarioConfig& c) { return to_json(c).dump(2) + "\n"; }

// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Models and named operators

struct CustomMatrices {
  Operator hamiltonian;
  std::vector<Operator> lindblads;
  std::map<std::string, Operator> operators;
};

// Matrices file: {"hamiltonian": M, "lindblads": [M, ...], "operators": {"q": M, ...}}
// with M = {"dim": d, "re": [...], "im": [...]} row-major.
inline CustomMatrices load_custom_matrices(const std::string& path) {
  const Json j = read_json_file(path);
  try {
    CustomMatrices m{operator_from_json(j.at("hamiltonian")), {}, {}};
    if (j.contains("lindblads"))
      for (const auto& l : j.at("lindblads")) m.lindblads.push_back(operator_from_json(l));
    if (j.contains("operators"))
      for (const auto& [k, v] : j.at("operators").items()) m.operators.emplace(k, operator_from_json(v));
    return m;
  } catch (const Json::exception& e) {
    throw InvalidArgument(std::string("matrices file: ") + e.what());
  }
}

inline Index model_dim(const ModelConfig& m) {
  if (m.kind == "damped_oscillator") return m.dim;
  if (m.kind == "driven_two_level") return 2;
  if (m.kind == "custom") return load_custom_matrices(m.matrices).hamiltonian.dim();
  throw InvalidArgument("unknown model kind");
}

inline LindbladModel build_model(const ModelConfig& m) {
  if (m.kind == "damped_oscillator")
    return LindbladModel(m.omega0 * number_operator(m.dim), {std::sqrt(m.gamma) * annihilation(m.dim)});
  if (m.kind == "driven_two_level") {
    const Operator sp = sigma_plus(), sm = sigma_minus();
    const Operator h = (0.5 * m.detuning) * (sp * sm - sm * sp) + (0.5 * m.rabi) * sigma_x();
    return LindbladModel(Operator::hermitian(h.matrix()), {std::sqrt(m.gamma) * sm});
  }
  if (m.kind == "custom") {
    CustomMatrices c = load_custom_matrices(m.matrices);
    return LindbladModel(Operator::hermitian(c.hamiltonian.matrix()), std::move(c.lindblads));
  }
  throw InvalidArgument("unknown model kind '" + m.kind + "'");
}

// Names: identity; oscillator a, adag, n, q = a + a^dag, x, p; two-level
// sigma_minus, sigma_plus, sigma_x, sigma_y, sigma_z, q = sigma_x, a = sigma_minus,
// adag = sigma_plus, n = sigma_plus sigma_minus; custom: the file's "operators".
inline Operator named_operator(const std::string& name, const ModelConfig& m) {
  const Index d = model_dim(m);
  if (name == "identity") return Operator::identity(d);
  if (m.kind == "damped_oscillator") {
    const Operator a = annihilation(d), ad = creation(d);
    if (name == "a") return a;
    if (name == "adag") return ad;
    if (name == "n") return number_operator(d);
    if (name == "q" || name == "x") return a + ad;
    if (name == "p") return Complex(0.0, 1.0) * (ad - a);
  } else if (m.kind == "driven_two_level") {
    if (name == "sigma_minus" || name == "a") return sigma_minus();
    if (name == "sigma_plus" || name == "adag") return sigma_plus();
    if (name == "sigma_x" || name == "q") return sigma_x();
    if (name == "sigma_y") return sigma_y();
    if (name == "sigma_z") return sigma_z();
    if (name == "n") return sigma_plus() * sigma_minus();
  } else if (m.kind == "custom") {
    const CustomMatrices c = load_custom_matrices(m.matrices);
    if (const auto it = c.operators.find(name); it != c.operators.end()) return it->second;
  }
  throw InvalidArgument("unknown operator '" + name + "' for model " + m.kind);
}

inline StateVector initial_state(const ScenarioConfig& c) {
  const Index d = model_dim(c.model);
  if (c.initial_state.basis) return StateVector::basis(d, *c.initial_state.basis);
  Vector v(d);
  for (Index i = 0; i < d; ++i) v(i) = Complex(c.initial_state.re.at(static_cast<std::size_t>(i)), c.initial_state.im.at(static_cast<std::size_t>(i)));
  return StateVector::normalize(v);
}

}  // namespace qsdc
