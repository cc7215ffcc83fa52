#pragma once

// Quantum state diffusion:
//   d|psi> = -iH|psi> dt + sum_m (<L_m^dag> L_m - 1/2 L_m^dag L_m - 1/2 <L_m^dag><L_m>)|psi> dt
//            + sum_m (L_m - <L_m>)|psi> dxi_m
// integrated in the Ito sense, one renormalization per step.
//
// The step used everywhere in the library is
//   v' = E v + sum_m (conj(l_m) L_m v - 1/2 |l_m|^2 v) dt + sum_m (L_m v - l_m v) dxi_m
// with l_m = <L_m> taken at the start of the step. E is either the exact
// propagator exp(K dt) of the constant part K = -iH - 1/2 sum L^dag L
// (exponential Euler) or I + K dt (plain Euler-Maruyama). For fixed l_m the
// map is linear in v, which is what the replay propagator T relies on.

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qsdc/ensemble.hpp"
#include "qsdc/grid.hpp"
#include "qsdc/hilbert.hpp"
#include "qsdc/lindblad.hpp"
#include "qsdc/noise.hpp"

namespace qsdc {

enum class StepScheme { exponential_euler, euler_maruyama };

inline const char* to_string(StepScheme s) {
  return s == StepScheme::exponential_euler ? "exponential_euler" : "euler_maruyama";
}

inline Matrix constant_step_propagator(const Matrix& generator, double dt, StepScheme scheme) {
  if (scheme == StepScheme::euler_maruyama)
    return Matrix(Matrix::Identity(generator.rows(), generator.cols()) + dt * generator);
  Eigen::MatrixXcd k = dt * generator;
  return Matrix(k.exp());
}

// Precomputed data for stepping one model at a fixed dt.
class QsdStepper {
 public:
  QsdStepper(LindbladModel model, double dt, StepScheme scheme = StepScheme::exponential_euler)
      : model_(std::move(model)), dt_(dt), scheme_(scheme) {
    if (!(dt > 0.0)) throw InvalidArgument("QSD step needs dt > 0");
    e_ = constant_step_propagator(model_.effective_generator(), dt, scheme);
  }

  const LindbladModel& model() const noexcept { return model_; }
  double dt() const noexcept { return dt_; }
  StepScheme scheme() const noexcept { return scheme_; }
  Index dim() const noexcept { return model_.dim(); }
  int n_channels() const noexcept { return model_.n_channels(); }
  const Matrix& constant_propagator() const noexcept { return e_; }

  struct Workspace {
    std::vector<Vector> lv;
    explicit Workspace(const QsdStepper& s) : lv(static_cast<std::size_t>(s.n_channels()), Vector(s.dim())) {}
  };

  // lv[m] = L_m v
  void apply_lindblads(const Vector& v, Workspace& ws) const {
    for (int m = 0; m < n_channels(); ++m) ws.lv[static_cast<std::size_t>(m)].noalias() = model_.lindblad(m) * v;
  }

  // l[m] = <v|L_m|v> / <v|v>, using ws.lv from apply_lindblads(v).
  void expectations(const Vector& v, const Workspace& ws, Complex* l) const {
    const double n2 = v.squaredNorm();
    for (int m = 0; m < n_channels(); ++m) l[m] = v.dot(ws.lv[static_cast<std::size_t>(m)]) / n2;
  }

  // out = linear update of v with frozen l and increments dxi (ws.lv must hold L_m v).
  void linear_update(const Vector& v, const Workspace& ws, const Complex* l, const Complex* dxi,
                     Vector& out) const {
    out.noalias() = e_ * v;
    for (int m = 0; m < n_channels(); ++m) {
      const auto& lv = ws.lv[static_cast<std::size_t>(m)];
      const Complex lm = l[m];
      const Complex a = std::conj(lm) * dt_ + dxi[m];
      const Complex b = -0.5 * std::norm(lm) * dt_ - lm * dxi[m];
      out += a * lv + b * v;
    }
  }

  // One linear step of the frozen-coefficient equation, divided by `norm`.
  void replay_step(const Vector& v, const Complex* l, const Complex* dxi, double norm, Workspace& ws,
                   Vector& out) const {
    apply_lindblads(v, ws);
    linear_update(v, ws, l, dxi, out);
    out /= norm;
  }


  // Column-block version of replay_step: every column of x is advanced by the
  // same frozen linear step.
  void replay_block(const Eigen::MatrixXcd& x, const Complex* l, const Complex* dxi, double norm,
                    Eigen::MatrixXcd& lx, Eigen::MatrixXcd& out) const {
    out.noalias() = e_ * x;
    for (int m = 0; m < n_channels(); ++m) {
      lx.noalias() = model_.lindblad(m) * x;
      const Complex lm = l[m];
      const Complex a = std::conj(lm) * dt_ + dxi[m];
      const Complex b = -0.5 * std::norm(lm) * dt_ - lm * dxi[m];
      out += a * lx + b * x;
    }
    out /= norm;
  }

  // Nonlinear QSD step: fills l with the start-of-step expectations, writes
  // the renormalized state to out and returns the raw update norm.
  double step(const Vector& psi, const Complex* dxi, Workspace& ws, Complex* l, Vector& out) const {
    apply_lindblads(psi, ws);
    expectations(psi, ws, l);
    linear_update(psi, ws, l, dxi, out);
    const double n = out.norm();
    out /= n;
    return n;
  }

 private:
  LindbladModel model_;
  double dt_;
  StepScheme scheme_;
  Matrix e_;
};

struct QsdStepResult {
  StateVector state;
  Vector raw;       // unnormalized update
  double raw_norm;  // |raw|
};

// Single QSD step from a normalized state with explicit increments.
inline QsdStepResult qsd_step(const LindbladModel& model, const StateVector& psi, std::span<const Complex> dxi,
                              double dt, StepScheme scheme = StepScheme::exponential_euler) {
  if (psi.dim() != model.dim()) throw DimensionMismatch("qsd_step: state dimension differs from the model");
  if (static_cast<int>(dxi.size()) != model.n_channels()) throw DimensionMismatch("qsd_step: one increment per channel");
  if (std::abs(psi.amplitudes().squaredNorm() - 1.0) > Tolerances{}.normalized)
    throw InvalidArgument("qsd_step: state must be normalized");
  const QsdStepper stepper(model, dt, scheme);
  QsdStepper::Workspace ws(stepper);
  std::vector<Complex> l(static_cast<std::size_t>(model.n_channels()));
  Vector raw(model.dim());
  stepper.apply_lindblads(psi.amplitudes(), ws);
  stepper.expectations(psi.amplitudes(), ws, l.data());
  stepper.linear_update(psi.amplitudes(), ws, l.data(), dxi.data(), raw);
  const double n = raw.norm();
  if (!all_finite(raw) || !(n > 0.0) || !std::isfinite(n)) throw Divergence("qsd_step", 0);
  return {StateVector::normalize(raw), raw, n};
}

struct QsdOptions {
  double dt = 1e-3;
  StepScheme scheme = StepScheme::exponential_euler;
  std::uint64_t trajectory = 0;    // index into the seed's trajectory family
  bool store_coefficients = true;  // needed for replay
};

// One realization: normalized phi0 at grid times plus everything needed to
// replay the frozen-coefficient linear evolution T(xi, psi0).
struct TrajectoryRecord {
  std::shared_ptr<const QsdStepper> stepper;
  std::vector<double> t_grid;
  std::vector<std::size_t> grid_steps;  // micro-step index of each grid time
  std::vector<StateVector> states;
  std::vector<Complex> coeffs;  // coeffs[k * n_channels + m] = <L_m> at the start of step k
  std::vector<double> step_norms;
  NoisePath noise;

  int n_channels() const { return stepper->n_channels(); }
  double dt() const { return stepper->dt(); }
  std::size_t n_steps() const { return grid_steps.empty() ? 0 : grid_steps.back(); }
  bool has_coefficients() const { return !step_norms.empty(); }

  std::size_t grid_index(double t) const { return find_grid_index(t_grid, t); }
  const StateVector& state_at(double t) const { return states.at(grid_index(t)); }

  Complex coefficient(std::size_t step, int m) const {
    return coeffs.at(step * static_cast<std::size_t>(n_channels()) + static_cast<std::size_t>(m));
  }

  // <L_m^dag> = conj(<L_m>)
  Complex adjoint_coefficient(std::size_t step, int m) const { return std::conj(coefficient(step, m)); }
};

inline std::vector<std::size_t> grid_micro_steps(const std::vector<double>& t_grid, double dt) {
  validate_grid(t_grid);
  std::vector<std::size_t> s;
  s.reserve(t_grid.size());
  for (double t : t_grid) s.push_back(steps_for(t, dt));
  return s;
}

// Hooks into the stepping loop; used to integrate quantities lock-step with
// phi0 (output-mode component, replays) without changing phi0's arithmetic.
struct NullObserver {
  void on_grid(std::size_t /*grid_index*/, const Vector& /*psi*/) {}
  void on_step(std::size_t /*step*/, const Vector& /*psi*/, const Complex* /*l*/, const Complex* /*dxi*/,
               double /*raw_norm*/) {}
};

template <class Observer = NullObserver>
TrajectoryRecord run_trajectory(std::shared_ptr<const QsdStepper> stepper, const StateVector& psi0,
                                const std::vector<double>& t_grid, std::uint64_t seed, const QsdOptions& opts,
                                Observer&& obs) {
  if (psi0.dim() != stepper->dim()) throw DimensionMismatch("run_trajectory: state dimension differs from the model");
  if (std::abs(psi0.amplitudes().squaredNorm() - 1.0) > Tolerances{}.normalized)
    throw InvalidArgument("run_trajectory: psi0 must be normalized");
  TrajectoryRecord rec;
  rec.stepper = stepper;
  rec.t_grid = t_grid;
  rec.grid_steps = grid_micro_steps(t_grid, stepper->dt());
  const std::size_t n_steps = rec.grid_steps.back();
  const int nc = stepper->n_channels();
  rec.noise = NoisePath(seed, opts.trajectory, nc, stepper->dt(), std::max<std::size_t>(n_steps, 1));
  if (opts.store_coefficients) {
    rec.coeffs.resize(n_steps * static_cast<std::size_t>(nc));
    rec.step_norms.resize(n_steps);
  }
  QsdStepper::Workspace ws(*stepper);
  std::vector<Complex> l(static_cast<std::size_t>(nc)), dxi(static_cast<std::size_t>(nc));
  Vector psi = psi0.amplitudes(), next(psi.size());
  std::size_t g = 0;
  rec.states.reserve(t_grid.size());
  for (std::size_t k = 0;; ++k) {
    while (g < rec.grid_steps.size() && rec.grid_steps[g] == k) {
      rec.states.push_back(StateVector::normalized(psi, Tolerances{1e-12, 1e-8}));
      obs.on_grid(g, psi);
      ++g;
    }
    if (k == n_steps) break;
    rec.noise.increments_at(k, dxi.data());
    const double n = stepper->step(psi, dxi.data(), ws, l.data(), next);
    if (!(n > 0.0) || !std::isfinite(n) || !all_finite(next)) throw Divergence("run_trajectory", k);
    if (opts.store_coefficients) {
      for (int m = 0; m < nc; ++m) rec.coeffs[k * static_cast<std::size_t>(nc) + static_cast<std::size_t>(m)] = l[static_cast<std::size_t>(m)];
      rec.step_norms[k] = n;
    }
    obs.on_step(k, psi, l.data(), dxi.data(), n);
    psi.swap(next);
  }
  return rec;
}

inline TrajectoryRecord run_trajectory(std::shared_ptr<const QsdStepper> stepper, const StateVector& psi0,
                                       const std::vector<double>& t_grid, std::uint64_t seed,
                                       const QsdOptions& opts = {}) {
  return run_trajectory(std::move(stepper), psi0, t_grid, seed, opts, NullObserver{});
}

inline TrajectoryRecord run_trajectory(const LindbladModel& model, const StateVector& psi0,
                                       const std::vector<double>& t_grid, std::uint64_t seed,
                                       const QsdOptions& opts = {}) {
  return run_trajectory(std::make_shared<const QsdStepper>(model, opts.dt, opts.scheme), psi0, t_grid, seed, opts);
}

// Runs n_traj records (trajectory indices 0..n_traj-1 of `seed`) and reduces
// fn(record) -> std::vector<double> over them.
template <class Fn>
EnsembleStats trajectory_ensemble(const LindbladModel& model, const StateVector& psi0,
                                  const std::vector<double>& t_grid, std::uint64_t seed, std::size_t n_traj,
                                  const QsdOptions& opts, unsigned threads, Fn&& fn) {
  auto stepper = std::make_shared<const QsdStepper>(model, opts.dt, opts.scheme);
  return run_ensemble(n_traj, threads, [&](std::size_t i) {
    QsdOptions o = opts;
    o.trajectory = i;
    return fn(run_trajectory(stepper, psi0, t_grid, seed, o));
  });
}

// Sorted union of 0 and the given times (duplicates within grid tolerance removed).
inline std::vector<double> merged_grid(std::vector<double> times) {
  times.push_back(0.0);
  std::sort(times.begin(), times.end());
  std::vector<double> g;
  for (double t : times)
    if (g.empty() || !same_time(g.back(), t)) g.push_back(t);
  return g;
}

struct DensityEstimate {
  Matrix mean;
  Eigen::MatrixXd std_error;  // per entry, sqrt(var(re) + var(im)) / sqrt(N)
  std::size_t n_traj = 0;
  std::size_t n_dropped = 0;
};

// Mean of |phi0(t)><phi0(t)| over records.
inline DensityEstimate ensemble_density(std::span<const TrajectoryRecord> records, double t) {
  if (records.empty()) throw InvalidArgument("ensemble_density: empty ensemble");
  std::vector<std::optional<std::vector<double>>> samples;
  samples.reserve(records.size());
  const Index d = records.front().states.front().dim();
  for (const auto& r : records) {
    if (r.states.front().dim() != d) throw DimensionMismatch("ensemble_density: records differ in dimension");
    const Vector& v = r.state_at(t).amplitudes();
    std::vector<double> s;
    s.reserve(static_cast<std::size_t>(2 * d * d));
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) push_complex(s, v(i) * std::conj(v(j)));
    samples.emplace_back(std::move(s));
  }
  const EnsembleStats st = reduce_samples(samples);
  DensityEstimate out{Matrix(d, d), Eigen::MatrixXd(d, d), st.n_traj, st.n_dropped};
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) {
      const auto c = st.complex(static_cast<std::size_t>(i * d + j));
      out.mean(i, j) = c.mean;
      out.std_error(i, j) = std::hypot(c.se_re, c.se_im);
    }
  return out;
}

// Streaming ensemble: per grid time, the mean of <O_k>_{phi0} for each
// observable and (optionally) the mean projector, without keeping records.
struct QsdEnsembleResult {
  std::vector<double> t_grid;
  std::vector<std::vector<ComplexEstimate>> expectations;  // [grid][observable]
  std::vector<DensityEstimate> densities;                  // [grid], if requested
  std::size_t n_traj = 0;
  std::size_t n_dropped = 0;
};

inline QsdEnsembleResult qsd_ensemble(const LindbladModel& model, const StateVector& psi0,
                                      const std::vector<double>& t_grid, std::uint64_t seed, std::size_t n_traj,
                                      const std::vector<Operator>& observables, bool densities,
                                      const QsdOptions& opts = {}, unsigned threads = 0) {
  auto stepper = std::make_shared<const QsdStepper>(model, opts.dt, opts.scheme);
  const Index d = model.dim();
  const std::size_t per_time = 2 * observables.size() + (densities ? static_cast<std::size_t>(2 * d * d) : 0);
  const EnsembleStats st = run_ensemble(n_traj, threads, [&](std::size_t i) {
    QsdOptions o = opts;
    o.trajectory = i;
    o.store_coefficients = false;
    const TrajectoryRecord rec = run_trajectory(stepper, psi0, t_grid, seed, o);
    std::vector<double> s;
    s.reserve(per_time * t_grid.size());
    for (const auto& st : rec.states) {
      const Vector& v = st.amplitudes();
      for (const auto& op : observables) push_complex(s, v.dot(op.matrix() * v));
      if (densities)
        for (Index a = 0; a < d; ++a)
          for (Index b = 0; b < d; ++b) push_complex(s, v(a) * std::conj(v(b)));
    }
    return s;
  });
  QsdEnsembleResult out;
  out.t_grid = t_grid;
  out.n_traj = st.n_traj;
  out.n_dropped = st.n_dropped;
  for (std::size_t g = 0; g < t_grid.size(); ++g) {
    const std::size_t base = g * per_time / 2;
    std::vector<ComplexEstimate> ex;
    for (std::size_t k = 0; k < observables.size(); ++k) ex.push_back(st.complex(base + k));
    out.expectations.push_back(std::move(ex));
    if (densities) {
      DensityEstimate de{Matrix(d, d), Eigen::MatrixXd(d, d), st.n_traj, st.n_dropped};
      for (Index a = 0; a < d; ++a)
        for (Index b = 0; b < d; ++b) {
          const auto c = st.complex(base + observables.size() + static_cast<std::size_t>(a * d + b));
          de.mean(a, b) = c.mean;
          de.std_error(a, b) = std::hypot(c.se_re, c.se_im);
        }
      out.densities.push_back(std::move(de));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structured text form of a record: grid, states, seed (no noise, no frozen
// coefficients; both are regenerated by re-running from the seed).

inline Json to_json(const TrajectoryRecord& rec) {
  Json states = Json::array();
  for (const auto& s : rec.states) states.push_back(to_json(s));
  return Json{{"t_grid", rec.t_grid},
              {"dt", rec.dt()},
              {"scheme", to_string(rec.stepper->scheme())},
              {"seed", rec.noise.seed()},
              {"trajectory", rec.noise.trajectory()},
              {"n_channels", rec.n_channels()},
              {"states", states}};
}

}  // namespace qsdc
