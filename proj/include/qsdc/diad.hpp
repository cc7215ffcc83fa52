#pragma once

// Diad unraveling: a pair (|psi>, <phi|), the bra stored as a ket, with
//   dpsi = (K + <L^dag>_phi L - 1/2 <L^dag>_phi <L>_psi) psi dt + (L - <L>_psi) psi dxi
//   dphi = (K + <L^dag>_psi L - 1/2 <L>_phi <L^dag>_psi) phi dt + (L - <L>_phi) phi dxi
// (summed over channels, K = -iH - 1/2 sum L^dag L, <A>_x = <x|A|x>/<x|x>).
// M(|psi><phi|) follows the Lindblad flow; norms are not preserved. For
// psi = phi the pair reduces to the unnormalized QSD update.
//
// The constant part K is applied through the same step propagator E as the
// QSD integrator (exp(K dt) or I + K dt), so ket = bra steps coincide with
// qsd_step's raw update.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsdc/correlation.hpp"
#include "qsdc/ensemble.hpp"
#include "qsdc/grid.hpp"
#include "qsdc/hilbert.hpp"
#include "qsdc/lindblad.hpp"
#include "qsdc/noise.hpp"
#include "qsdc/qsd.hpp"

namespace qsdc {

inline constexpr double kDiadOverlapFloor = 1e-12;

enum class DiadGauge {
  none,           // pair evolved as is
  balance_norms,  // after every step ket -> c ket, bra -> bra / c with |c ket| = |bra / c|
};

inline const char* to_string(DiadGauge g) { return g == DiadGauge::none ? "none" : "balance_norms"; }

struct DiadState {
  Vector ket;  // |psi>
  Vector bra;  // |phi>, used as <phi|

  // <phi|A|psi>
  Complex traced(const Matrix& a) const { return bra.dot(a * ket); }
  Complex overlap() const { return bra.dot(ket); }
};

struct DiadStepInfo {
  bool degenerate = false;  // |<phi|psi>| below kDiadOverlapFloor * |phi| |psi|
};

// Stepper sharing the QSD step propagator.
class DiadStepper {
 public:
  explicit DiadStepper(std::shared_ptr<const QsdStepper> qsd, DiadGauge gauge = DiadGauge::none)
      : qsd_(std::move(qsd)), gauge_(gauge) {}

  const QsdStepper& qsd() const noexcept { return *qsd_; }
  const std::shared_ptr<const QsdStepper>& qsd_ptr() const noexcept { return qsd_; }
  DiadGauge gauge() const noexcept { return gauge_; }

  struct Workspace {
    std::vector<Vector> lk, lb;
    Vector nk, nb;
    explicit Workspace(const DiadStepper& s)
        : lk(static_cast<std::size_t>(s.qsd().n_channels()), Vector(s.qsd().dim())),
          lb(static_cast<std::size_t>(s.qsd().n_channels()), Vector(s.qsd().dim())),
          nk(s.qsd().dim()),
          nb(s.qsd().dim()) {}
  };

  DiadStepInfo step(DiadState& s, const Complex* dxi, Workspace& ws) const {
    const QsdStepper& q = *qsd_;
    const LindbladModel& model = q.model();
    const double dt = q.dt();
    const double kk = s.ket.squaredNorm(), bb = s.bra.squaredNorm();
    DiadStepInfo info;
    info.degenerate = std::abs(s.overlap()) < kDiadOverlapFloor * std::sqrt(kk * bb);
    ws.nk.noalias() = q.constant_propagator() * s.ket;
    ws.nb.noalias() = q.constant_propagator() * s.bra;
    for (int m = 0; m < q.n_channels(); ++m) {
      const auto c = static_cast<std::size_t>(m);
      ws.lk[c].noalias() = model.lindblad(m) * s.ket;
      ws.lb[c].noalias() = model.lindblad(m) * s.bra;
      const Complex l_psi = s.ket.dot(ws.lk[c]) / kk;  // <L>_psi
      const Complex l_phi = s.bra.dot(ws.lb[c]) / bb;  // <L>_phi
      const Complex ld_phi = std::conj(l_phi), ld_psi = std::conj(l_psi);
      ws.nk += (ld_phi * dt + dxi[m]) * ws.lk[c] + (-0.5 * ld_phi * l_psi * dt - l_psi * dxi[m]) * s.ket;
      ws.nb += (ld_psi * dt + dxi[m]) * ws.lb[c] + (-0.5 * l_phi * ld_psi * dt - l_phi * dxi[m]) * s.bra;
    }
    s.ket.swap(ws.nk);
    s.bra.swap(ws.nb);
    if (gauge_ == DiadGauge::balance_norms) {
      const double a = s.ket.norm(), b = s.bra.norm();
      if (a > 0.0 && b > 0.0) {
        const double c = std::sqrt(b / a);
        s.ket *= c;
        s.bra /= c;
      }
    }
    return info;
  }

 private:
  std::shared_ptr<const QsdStepper> qsd_;
  DiadGauge gauge_;
};

// One diad step with explicit increments.
inline DiadState diad_step(const LindbladModel& model, const DiadState& state, std::span<const Complex> dxi, double dt,
                           StepScheme scheme = StepScheme::exponential_euler, DiadStepInfo* info = nullptr) {
  if (state.ket.size() != model.dim() || state.bra.size() != model.dim())
    throw DimensionMismatch("diad_step: state dimension differs from the model");
  if (static_cast<int>(dxi.size()) != model.n_channels()) throw DimensionMismatch("diad_step: one increment per channel");
  const DiadStepper st(std::make_shared<const QsdStepper>(model, dt, scheme));
  DiadStepper::Workspace ws(st);
  DiadState s = state;
  const DiadStepInfo i = st.step(s, dxi.data(), ws);
  if (!all_finite(s.ket) || !all_finite(s.bra)) throw Divergence("diad_step", 0);
  if (info) *info = i;
  return s;
}

// Side on which O1 is inserted at t1. `ket` gives the Heisenberg ordering
// Tr{O2 S(O1 rho)} = <O2(t2) O1(t1)> (same as qrt_correlation); `bra`
// multiplies <phi| -> <phi| O1 and gives Tr{O2 S(rho O1)} (same as
// qrt_correlation_reversed).
enum class DiadInsertion { ket, bra };

inline const char* to_string(DiadInsertion s) { return s == DiadInsertion::ket ? "ket" : "bra"; }

struct DiadOptions {
  QsdOptions qsd;
  DiadGauge gauge = DiadGauge::none;
  DiadInsertion insertion = DiadInsertion::ket;
};

// Unequal diad created from the QSD state v at t1.
inline DiadState insert_operator(const Operator& o1, const Vector& v, DiadInsertion side) {
  if (side == DiadInsertion::ket) return {o1.matrix() * v, v};
  return {v, o1.matrix().adjoint() * v};
}

// Evolves a diad over micro-steps [a, b) of a noise path.
inline std::size_t evolve_diad(const DiadStepper& st, DiadState& s, const NoisePath& noise, std::size_t a,
                               std::size_t b, double* max_norm_product = nullptr) {
  DiadStepper::Workspace ws(st);
  std::vector<Complex> dxi(static_cast<std::size_t>(st.qsd().n_channels()));
  std::size_t warnings = 0;
  for (std::size_t k = a; k < b; ++k) {
    noise.increments_at(k, dxi.data());
    warnings += st.step(s, dxi.data(), ws).degenerate;
    if (!all_finite(s.ket) || !all_finite(s.bra)) throw Divergence("diad", k);
    if (max_norm_product) *max_norm_product = std::max(*max_norm_product, s.ket.norm() * s.bra.norm());
  }
  return warnings;
}

struct DiadSample {
  Complex value;
  std::size_t degenerate_steps = 0;
  double max_norm_product = 0.0;
};

// One trajectory of the correlation procedure: QSD (ket = bra) up to t1,
// insert O1, unequal diad to t2, output <phi(t2)|O2|psi(t2)>.
inline DiadSample diad_trajectory(const DiadStepper& st, const Operator& o2, double t2, const Operator& o1, double t1,
                                  const StateVector& psi0, std::uint64_t seed, std::uint64_t trajectory,
                                  DiadInsertion side = DiadInsertion::ket) {
  const QsdStepper& q = st.qsd();
  QsdOptions o;
  o.dt = q.dt();
  o.scheme = q.scheme();
  o.trajectory = trajectory;
  o.store_coefficients = false;
  const std::size_t a = steps_for(t1, q.dt()), b = steps_for(t2, q.dt());
  const TrajectoryRecord rec = run_trajectory(st.qsd_ptr(), psi0, merged_grid({t1}), seed, o);
  DiadState s = insert_operator(o1, rec.state_at(t1).amplitudes(), side);
  const NoisePath noise(seed, trajectory, q.n_channels(), q.dt(), std::max<std::size_t>(b, 1));
  DiadSample out;
  out.degenerate_steps = evolve_diad(st, s, noise, a, b, &out.max_norm_product);
  out.value = s.traced(o2.matrix());
  return out;
}

struct DiadCorrelation {
  ComplexEstimate value;
  std::size_t n_traj = 0;
  std::size_t n_dropped = 0;
  double degenerate_steps_mean = 0.0;  // gauge-degeneracy warnings per trajectory
  double max_norm_product_mean = 0.0;
  std::string gauge;
};

// Ensemble mean of the diad procedure; pure initial state, t1 <= t2.
inline DiadCorrelation diad_correlation(const LindbladModel& model, const Operator& o2, double t2, const Operator& o1,
                                        double t1, const StateVector& psi0, std::size_t n_traj, std::uint64_t seed,
                                        const DiadOptions& opts = {}, unsigned threads = 0) {
  if (t1 > t2 && !same_time(t1, t2)) throw InvalidArgument("diad_correlation: needs t1 <= t2");
  if (o1.dim() != model.dim() || o2.dim() != model.dim() || psi0.dim() != model.dim())
    throw DimensionMismatch("diad_correlation: dimension differs from the model");
  const DiadStepper st(std::make_shared<const QsdStepper>(model, opts.qsd.dt, opts.qsd.scheme), opts.gauge);
  const EnsembleStats stats = run_ensemble(n_traj, threads, [&](std::size_t i) {
    const DiadSample d = diad_trajectory(st, o2, t2, o1, t1, psi0, seed, i, opts.insertion);
    return std::vector<double>{d.value.real(), d.value.imag(), static_cast<double>(d.degenerate_steps), d.max_norm_product};
  });
  return {stats.complex(0), stats.n_traj, stats.n_dropped, stats.mean[2], stats.mean[3], to_string(opts.gauge)};
}

// Mean at several (t1, t2) pairs; every pair reuses the same trajectory set.
inline CorrelationTable diad_correlation_ensemble(const LindbladModel& model, const Operator& o2, const Operator& o1,
                                                  const StateVector& psi0,
                                                  const std::vector<std::pair<double, double>>& pairs,
                                                  std::uint64_t seed, std::size_t n_traj, const DiadOptions& opts = {},
                                                  unsigned threads = 0) {
  if (o1.dim() != model.dim() || o2.dim() != model.dim() || psi0.dim() != model.dim())
    throw DimensionMismatch("diad_correlation_ensemble: dimension differs from the model");
  if (pairs.empty()) throw InvalidArgument("diad_correlation_ensemble: no time pairs");
  std::vector<double> starts;
  for (const auto& [t1, t2] : pairs) {
    if (t1 > t2 && !same_time(t1, t2)) throw InvalidArgument("diad_correlation_ensemble: needs t1 <= t2");
    starts.push_back(t1);
  }
  auto qsd = std::make_shared<const QsdStepper>(model, opts.qsd.dt, opts.qsd.scheme);
  const DiadStepper st(qsd, opts.gauge);
  const std::vector<double> grid = merged_grid(starts);
  const EnsembleStats stats = run_ensemble(n_traj, threads, [&](std::size_t i) {
    QsdOptions o = opts.qsd;
    o.trajectory = i;
    o.store_coefficients = false;
    const TrajectoryRecord rec = run_trajectory(qsd, psi0, grid, seed, o);
    const std::size_t horizon = steps_for(std::max_element(pairs.begin(), pairs.end(), [](auto& a, auto& b) {
                                            return a.second < b.second;
                                          })->second, qsd->dt());
    const NoisePath noise(seed, i, qsd->n_channels(), qsd->dt(), std::max<std::size_t>(horizon, 1));
    std::vector<double> s;
    for (const auto& [t1, t2] : pairs) {
      const Vector& v = rec.state_at(t1).amplitudes();
      DiadState d = insert_operator(o1, v, opts.insertion);
      evolve_diad(st, d, noise, steps_for(t1, qsd->dt()), steps_for(t2, qsd->dt()));
      push_complex(s, d.traced(o2.matrix()));
    }
    return s;
  });
  CorrelationTable out;
  out.method = "diad";
  out.n_traj = stats.n_traj;
  out.n_dropped = stats.n_dropped;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    out.points.push_back({pairs[k].first, pairs[k].second, std::nullopt, stats.complex(k)});
  return out;
}

// One trajectory's G(t_k, t_j), k >= j, in CorrelationSeries::tri order:
// the QSD segment is shared and one unequal diad is started at every grid time.
inline std::vector<Complex> diad_series_sample(const DiadStepper& st, const Operator& o2, const Operator& o1,
                                               const StateVector& psi0, const std::vector<double>& t_grid,
                                               std::uint64_t seed, std::uint64_t trajectory, const DiadOptions& opts) {
  QsdOptions o = opts.qsd;
  o.dt = st.qsd().dt();
  o.scheme = st.qsd().scheme();
  o.trajectory = trajectory;
  o.store_coefficients = false;
  const TrajectoryRecord rec = run_trajectory(st.qsd_ptr(), psi0, t_grid, seed, o);
  const std::size_t n = t_grid.size();
  std::vector<Complex> g(CorrelationSeries::tri_size(n));
  for (std::size_t j = 0; j < n; ++j) {
    DiadState d = insert_operator(o1, rec.states[j].amplitudes(), opts.insertion);
    for (std::size_t k = j; k < n; ++k) {
      if (k > j) evolve_diad(st, d, rec.noise, rec.grid_steps[k - 1], rec.grid_steps[k]);
      g[CorrelationSeries::tri(k, j)] = d.traced(o2.matrix());
    }
  }
  return g;
}

inline void check_series_args(const LindbladModel& model, const Operator& o2, const Operator& o1,
                              const StateVector& psi0, const std::vector<double>& t_grid, const char* where) {
  validate_grid(t_grid);
  if (!is_uniform(t_grid)) throw InvalidArgument(std::string(where) + " needs a uniform grid");
  if (o1.dim() != model.dim() || o2.dim() != model.dim() || psi0.dim() != model.dim())
    throw DimensionMismatch(std::string(where) + ": dimension differs from the model");
}

// Ensemble G(t', t'') on all t'' <= t' of a uniform grid.
inline CorrelationSeries diad_correlation_series(const LindbladModel& model, const Operator& o2, const Operator& o1,
                                                 const StateVector& psi0, const std::vector<double>& t_grid,
                                                 std::uint64_t seed, std::size_t n_traj, const DiadOptions& opts = {},
                                                 unsigned threads = 0) {
  check_series_args(model, o2, o1, psi0, t_grid, "diad_correlation_series");
  const DiadStepper st(std::make_shared<const QsdStepper>(model, opts.qsd.dt, opts.qsd.scheme), opts.gauge);
  const EnsembleStats stats = run_ensemble(n_traj, threads, [&](std::size_t i) {
    std::vector<double> s;
    for (const Complex& g : diad_series_sample(st, o2, o1, psi0, t_grid, seed, i, opts)) push_complex(s, g);
    return s;
  });
  CorrelationSeries out;
  out.resize(t_grid);
  out.method = "diad";
  out.n_traj = stats.n_traj;
  out.n_dropped = stats.n_dropped;
  out.se_re.resize(out.values.size());
  out.se_im.resize(out.values.size());
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    const auto c = stats.complex(k);
    out.values[k] = c.mean;
    out.se_re[k] = c.se_re;
    out.se_im[k] = c.se_im;
  }
  return out;
}

// ket = bra started diad against the QSD trajectory with the same noise:
// smallest |<psi_qsd | psi_diad / |psi_diad|>| over the grid.
inline double diad_reduction_overlap(const LindbladModel& model, const StateVector& psi0,
                                     const std::vector<double>& t_grid, std::uint64_t seed,
                                     const QsdOptions& opts = {}) {
  auto qsd = std::make_shared<const QsdStepper>(model, opts.dt, opts.scheme);
  const DiadStepper st(qsd);
  QsdOptions o = opts;
  o.store_coefficients = false;
  const TrajectoryRecord rec = run_trajectory(qsd, psi0, t_grid, seed, o);
  DiadState d{psi0.amplitudes(), psi0.amplitudes()};
  double worst = 1.0;
  for (std::size_t g = 0; g < t_grid.size(); ++g) {
    if (g > 0) evolve_diad(st, d, rec.noise, rec.grid_steps[g - 1], rec.grid_steps[g]);
    // keep the pair O(1) without changing its direction
    const double nk = d.ket.norm();
    d.ket /= nk;
    d.bra /= nk;
    worst = std::min(worst, std::abs(rec.states[g].amplitudes().dot(d.ket)));
  }
  return worst;
}

// One-step ensemble mean of d(|psi><phi|) over n_samples fresh increments,
// with per-entry standard errors (real and imaginary parts separately).
struct MeanFlow {
  Matrix mean;
  Eigen::MatrixXd se_re, se_im;
};

inline MeanFlow diad_mean_flow(const LindbladModel& model, const DiadState& s0, double dt, std::size_t n_samples,
                               std::uint64_t seed, StepScheme scheme = StepScheme::exponential_euler) {
  const Index d = model.dim();
  const DiadStepper st(std::make_shared<const QsdStepper>(model, dt, scheme));
  const Matrix rho0 = s0.ket * s0.bra.adjoint();
  const NoisePath noise(seed, 0, model.n_channels(), dt, n_samples);
  const EnsembleStats stats = run_ensemble(n_samples, 1, [&](std::size_t i) {
    DiadStepper::Workspace ws(st);
    std::vector<Complex> dxi(static_cast<std::size_t>(model.n_channels()));
    noise.increments_at(i, dxi.data());
    DiadState s = s0;
    st.step(s, dxi.data(), ws);
    const Matrix inc = s.ket * s.bra.adjoint() - rho0;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(2 * d * d));
    for (Index a = 0; a < d; ++a)
      for (Index b = 0; b < d; ++b) push_complex(out, inc(a, b));
    return out;
  });
  MeanFlow mf{Matrix(d, d), Eigen::MatrixXd(d, d), Eigen::MatrixXd(d, d)};
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b < d; ++b) {
      const auto c = stats.complex(static_cast<std::size_t>(a * d + b));
      mf.mean(a, b) = c.mean;
      mf.se_re(a, b) = c.se_re;
      mf.se_im(a, b) = c.se_im;
    }
  return mf;
}

}  // namespace qsdc
