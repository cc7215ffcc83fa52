#pragma once

// System plus one weakly coupled output mode b at frequency omega,
//   H = H1 + omega b^dag b + eps q (b + b^dag),
// on trajectories. Keeping the mode's first excitation only,
// |Psi> = |phi0>|0> + |phi1>|1>, gives
//   phi0: the ordinary QSD equation of the system;
//   phi1: dphi1 = -i omega phi1 dt - i eps q phi0 dt + (QSD linear part with
//         phi0's coefficients) phi1,
// so <b^dag b>_Psi = <phi1|phi1>. phi1 is advanced with the same frozen
// linear step as phi0, phi1 <- e^{-i omega dt} M_k (phi1 - i eps dt q phi0),
// which makes phi1(t) = -i eps sum_k dt e^{-i omega (t - t_k)} T_{t_k}^t q phi0(t_k)
// exactly (the oscillation is applied as an exact phase; no frame error).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qsdc/correlation.hpp"
#include "qsdc/ensemble.hpp"
#include "qsdc/hilbert.hpp"
#include "qsdc/lindblad.hpp"
#include "qsdc/qsd.hpp"

namespace qsdc {

inline constexpr char kOutputModeFrame[] = "co-rotating-exact";

struct OutputModeSpec {
  double omega = 0.0;
  double epsilon = 0.05;
  Operator q = Operator::zero(1);

  // epsilon = 0 is accepted as the undriven limit.
  void validate(Index system_dim, const Tolerances& tol = {}) const {
    if (!std::isfinite(omega)) throw InvalidArgument("output mode: omega must be finite");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("output mode: epsilon must be >= 0");
    if (q.dim() != system_dim) throw DimensionMismatch("output mode: q dimension differs from the system");
    if (!q.is_hermitian(tol.hermitian)) throw InvalidArgument("output mode: q must be Hermitian");
  }
};

struct CoupledState {
  StateVector phi0;
  StateVector phi1;  // unnormalized, O(eps)
};

inline double output_intensity(const CoupledState& s) { return s.phi1.amplitudes().squaredNorm(); }

struct CoupledRun {
  TrajectoryRecord record;                // phi0, identical to run_trajectory
  std::vector<double> omegas;             // one phi1 per frequency, same noise
  std::vector<std::vector<Vector>> phi1;  // [omega][grid]
  double epsilon = 0.0;
  double max_phi1_ratio = 0.0;  // max over grid and omega of |phi1| / eps
  bool first_order_warning = false;
  std::string frame = kOutputModeFrame;

  CoupledState state(std::size_t grid_index, std::size_t omega_index = 0) const {
    return {record.states.at(grid_index), StateVector(phi1.at(omega_index).at(grid_index))};
  }
  double intensity(std::size_t grid_index, std::size_t omega_index = 0) const {
    return phi1.at(omega_index).at(grid_index).squaredNorm();
  }
};

namespace detail {

struct CoupledObserver {
  const QsdStepper& stepper;
  const Matrix& q;
  double eps, dt;
  std::vector<Complex> phase;  // e^{-i omega dt}
  CoupledRun& run;
  Eigen::MatrixXcd x, lx, next;

  void on_grid(std::size_t, const Vector&) {
    for (Index w = 0; w < x.cols(); ++w) {
      run.phi1[static_cast<std::size_t>(w)].push_back(x.col(w));
      if (eps > 0.0) run.max_phi1_ratio = std::max(run.max_phi1_ratio, x.col(w).norm() / eps);
    }
  }

  void on_step(std::size_t, const Vector& psi, const Complex* l, const Complex* dxi, double n) {
    const Vector kick = (-kI * eps * dt) * (q * psi);
    x.colwise() += kick;
    stepper.replay_block(x, l, dxi, n, lx, next);
    for (Index w = 0; w < x.cols(); ++w) x.col(w) = phase[static_cast<std::size_t>(w)] * next.col(w);
  }
};

}  // namespace detail

// phi0 and one phi1 per frequency, all driven by the same noise.
inline CoupledRun run_coupled_sweep(std::shared_ptr<const QsdStepper> stepper, const Operator& q, double epsilon,
                                    const std::vector<double>& omegas, const StateVector& psi0,
                                    const std::vector<double>& t_grid, std::uint64_t seed, const QsdOptions& opts = {}) {
  if (omegas.empty()) throw InvalidArgument("run_coupled: empty frequency list");
  for (double w : omegas) OutputModeSpec{w, epsilon, q}.validate(stepper->dim());
  CoupledRun run;
  run.omegas = omegas;
  run.epsilon = epsilon;
  run.phi1.resize(omegas.size());
  const auto nw = static_cast<Index>(omegas.size());
  const Index d = stepper->dim();
  detail::CoupledObserver obs{*stepper, q.matrix(), epsilon, stepper->dt(), {}, run,
                              Eigen::MatrixXcd::Zero(d, nw), Eigen::MatrixXcd(d, nw), Eigen::MatrixXcd(d, nw)};
  for (double w : omegas) obs.phase.push_back(std::exp(Complex(0.0, -w * stepper->dt())));
  QsdOptions o = opts;
  o.store_coefficients = true;
  run.record = run_trajectory(stepper, psi0, t_grid, seed, o, obs);
  run.first_order_warning = run.max_phi1_ratio > 1.0;
  return run;
}

inline CoupledRun run_coupled(const LindbladModel& model, const OutputModeSpec& spec, const StateVector& psi0,
                              const std::vector<double>& t_grid, std::uint64_t seed, const QsdOptions& opts = {}) {
  return run_coupled_sweep(std::make_shared<const QsdStepper>(model, opts.dt, opts.scheme), spec.q, spec.epsilon,
                           {spec.omega}, psi0, t_grid, seed, opts);
}

// <b^dag b> at the record's final micro-step from the explicit sum of replays
//   phi1(t) = -i eps sum_k dt e^{-i omega (t - t_k)} T_{t_k}^t q phi0(t_k),
// formed as the operator product P10 P01 with P01 = |phi0(t)><phi1(t)|.
// O(n_steps^2); meant for short records as a check of the lock-step route.
inline double intensity_by_replay(const TrajectoryRecord& rec, const OutputModeSpec& spec) {
  spec.validate(rec.stepper->dim());
  const std::size_t n = rec.n_steps();
  const double dt = rec.dt();
  Vector phi0 = rec.states.front().amplitudes();
  Vector phi1 = Vector::Zero(phi0.size());
  for (std::size_t k = 0; k < n; ++k) {
    const Vector src = spec.q.matrix() * phi0;
    const Complex c = -kI * spec.epsilon * dt * std::exp(Complex(0.0, -spec.omega * dt * static_cast<double>(n - k)));
    phi1 += c * replay_micro(rec, src, k, n);
    phi0 = replay_micro(rec, phi0, k, k + 1);
  }
  const Vector& phi_t = rec.states.back().amplitudes();
  const Matrix p01 = phi_t * phi1.adjoint();
  const Matrix p10 = p01.adjoint();
  return (p10 * p01).trace().real();
}

// ---------------------------------------------------------------------------
// Full system (x) mode space

inline LindbladModel output_mode_model(const LindbladModel& model, const OutputModeSpec& spec, Index mode_levels) {
  if (mode_levels != 2 && mode_levels != 3) throw InvalidArgument("run_full_space: mode_levels must be 2 or 3");
  spec.validate(model.dim());
  const Operator id_s = Operator::identity(model.dim()), id_b = Operator::identity(mode_levels);
  const Operator b = annihilation(mode_levels);
  const Operator h = tensor(model.hamiltonian(), id_b) + spec.omega * tensor(id_s, number_operator(mode_levels)) +
                     spec.epsilon * tensor(spec.q, b + b.adjoint());
  std::vector<Operator> ls;
  for (const auto& l : model.lindblads()) ls.push_back(tensor(l, id_b));
  return LindbladModel(Operator::hermitian(0.5 * (h.matrix() + h.matrix().adjoint())), std::move(ls));
}

struct FullSpaceRun {
  TrajectoryRecord record;         // states on H1 (x) H2
  std::vector<double> occupation;  // <b^dag b> per grid time
  Index mode_levels = 2;
};

inline Operator mode_number(Index system_dim, Index mode_levels) {
  return tensor(Operator::identity(system_dim), number_operator(mode_levels));
}

inline FullSpaceRun run_full_space(std::shared_ptr<const QsdStepper> composite, Index system_dim, Index mode_levels,
                                   const StateVector& psi0, const std::vector<double>& t_grid, std::uint64_t seed,
                                   const QsdOptions& opts = {}) {
  FullSpaceRun out;
  out.mode_levels = mode_levels;
  out.record = run_trajectory(composite, tensor(psi0, StateVector::basis(mode_levels, 0)), t_grid, seed, opts);
  const Operator nb = mode_number(system_dim, mode_levels);
  for (const auto& s : out.record.states) out.occupation.push_back(s.amplitudes().dot(nb.matrix() * s.amplitudes()).real());
  return out;
}

inline FullSpaceRun run_full_space(const LindbladModel& model, const OutputModeSpec& spec, const StateVector& psi0,
                                   Index mode_levels, const std::vector<double>& t_grid, std::uint64_t seed,
                                   const QsdOptions& opts = {}) {
  if (psi0.dim() != model.dim()) throw DimensionMismatch("run_full_space: state dimension differs from the model");
  auto st = std::make_shared<const QsdStepper>(output_mode_model(model, spec, mode_levels), opts.dt, opts.scheme);
  return run_full_space(st, model.dim(), mode_levels, psi0, t_grid, seed, opts);
}

// ---------------------------------------------------------------------------
// Ensembles

struct IntensitySeries {
  std::vector<double> t_grid;
  std::vector<double> mean;
  std::vector<double> std_error;
  std::size_t n_traj = 0;
  std::size_t n_dropped = 0;
  std::string method;
  double omega = 0.0;
  double epsilon = 0.0;
  double max_phi1_ratio = 0.0;
};

inline IntensitySeries to_intensity_series(const EnsembleStats& st, const std::vector<double>& grid, std::string method,
                                           double omega, double eps) {
  IntensitySeries s{grid, {}, {}, st.n_traj, st.n_dropped, std::move(method), omega, eps, 0.0};
  for (std::size_t g = 0; g < grid.size(); ++g) {
    s.mean.push_back(st.mean[g]);
    s.std_error.push_back(st.std_error[g]);
  }
  return s;
}

inline IntensitySeries coupled_intensity_ensemble(const LindbladModel& model, const OutputModeSpec& spec,
                                                  const StateVector& psi0, const std::vector<double>& t_grid,
                                                  std::uint64_t seed, std::size_t n_traj, const QsdOptions& opts = {},
                                                  unsigned threads = 0) {
  auto st = std::make_shared<const QsdStepper>(model, opts.dt, opts.scheme);
  const EnsembleStats stats = run_ensemble(n_traj, threads, [&](std::size_t i) {
    QsdOptions o = opts;
    o.trajectory = i;
    const CoupledRun r = run_coupled_sweep(st, spec.q, spec.epsilon, {spec.omega}, psi0, t_grid, seed, o);
    std::vector<double> s;
    for (std::size_t g = 0; g < t_grid.size(); ++g) s.push_back(r.intensity(g));
    s.push_back(r.max_phi1_ratio);
    return s;
  });
  IntensitySeries out = to_intensity_series(stats, t_grid, "qsd-coupled", spec.omega, spec.epsilon);
  out.max_phi1_ratio = stats.mean.back();
  return out;
}

inline IntensitySeries full_space_intensity_ensemble(const LindbladModel& model, const OutputModeSpec& spec,
                                                     const StateVector& psi0, Index mode_levels,
                                                     const std::vector<double>& t_grid, std::uint64_t seed,
                                                     std::size_t n_traj, const QsdOptions& opts = {},
                                                     unsigned threads = 0) {
  auto st = std::make_shared<const QsdStepper>(output_mode_model(model, spec, mode_levels), opts.dt, opts.scheme);
  const EnsembleStats stats = run_ensemble(n_traj, threads, [&](std::size_t i) {
    QsdOptions o = opts;
    o.trajectory = i;
    o.store_coefficients = false;
    return run_full_space(st, model.dim(), mode_levels, psi0, t_grid, seed, o).occupation;
  });
  return to_intensity_series(stats, t_grid, "qsd-fullspace", spec.omega, spec.epsilon);
}

// Rho_11 = M(P10 P01) against M(P10) M(P01) at the final grid time. The
// difference carries a jackknife standard error over trajectory groups.
struct CentralInequality {
  double rho11_trace = 0.0;    // Tr M(P10 P01)
  double product_trace = 0.0;  // Tr M(P10) M(P01)
  double difference = 0.0;
  double std_error = 0.0;
  double z() const { return std_error > 0.0 ? difference / std_error : 0.0; }
  std::size_t n_traj = 0;
};

inline CentralInequality central_inequality(const LindbladModel& model, const OutputModeSpec& spec,
                                            const StateVector& psi0, double t, std::uint64_t seed, std::size_t n_traj,
                                            const QsdOptions& opts = {}, unsigned threads = 0,
                                            std::size_t groups = 20) {
  if (n_traj < 2 * groups) throw InvalidArgument("central_inequality: needs n_traj >= 2 * groups");
  auto st = std::make_shared<const QsdStepper>(model, opts.dt, opts.scheme);
  const Index d = model.dim();
  std::vector<std::optional<std::pair<double, Matrix>>> per(n_traj);
  parallel_for(n_traj, threads, [&](std::size_t i) {
    QsdOptions o = opts;
    o.trajectory = i;
    try {
      const CoupledRun r = run_coupled_sweep(st, spec.q, spec.epsilon, {spec.omega}, psi0, {0.0, t}, seed, o);
      const Vector& p0 = r.record.states.back().amplitudes();
      const Vector& p1 = r.phi1[0].back();
      per[i] = std::make_pair(p1.squaredNorm(), Matrix(p0 * p1.adjoint()));
    } catch (const Divergence&) {
    }
  });
  std::vector<std::pair<double, Matrix>> ok;
  for (auto& p : per)
    if (p) ok.push_back(std::move(*p));
  const std::size_t n = ok.size();
  auto stat = [&](std::size_t skip_group) {
    double a = 0.0;
    Matrix m = Matrix::Zero(d, d);
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (skip_group < groups && i * groups / n == skip_group) continue;
      a += ok[i].first;
      m += ok[i].second;
      ++cnt;
    }
    a /= static_cast<double>(cnt);
    m /= static_cast<double>(cnt);
    const double prod = (m.adjoint() * m).trace().real();
    return std::pair<double, double>{a, prod};
  };
  CentralInequality out;
  out.n_traj = n;
  const auto [a, prod] = stat(groups);
  out.rho11_trace = a;
  out.product_trace = prod;
  out.difference = a - prod;
  std::vector<double> jk;
  for (std::size_t g = 0; g < groups; ++g) {
    const auto [ag, pg] = stat(g);
    jk.push_back(ag - pg);
  }
  const double mean = pairwise_sum(jk) / static_cast<double>(groups);
  double ss = 0.0;
  for (double v : jk) ss += (v - mean) * (v - mean);
  out.std_error = std::sqrt(static_cast<double>(groups - 1) / static_cast<double>(groups) * ss);
  return out;
}

}  // namespace qsdc
