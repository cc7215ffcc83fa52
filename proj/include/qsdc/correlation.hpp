#pragma once

// Single-trajectory two-time correlations built on the replay propagator
// T(xi, psi0)_{t1}^{t2}: the linear evolution obtained by freezing the QSD
// coefficients <L_m> (and the per-step renormalization) of one recorded
// realization. Operator insertions follow Heisenberg ordering,
//   <O2(t2) O1(t1)> ~ <O2^dag phi0(t2) | T O1 phi0(t1)>,
// whose noise mean is Tr{O2 S_{t1}^{t2}(O1 rho(t1))}.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qsdc/ensemble.hpp"
#include "qsdc/grid.hpp"
#include "qsdc/hilbert.hpp"
#include "qsdc/qsd.hpp"

namespace qsdc {

namespace detail {

inline std::pair<std::size_t, std::size_t> replay_steps(const TrajectoryRecord& rec, double t1, double t2) {
  if (!rec.has_coefficients()) throw InvalidArgument("replay: record was run without frozen coefficients");
  const std::size_t a = rec.grid_steps.at(rec.grid_index(t1));
  const std::size_t b = rec.grid_steps.at(rec.grid_index(t2));
  if (b < a) throw InvalidArgument("replay: needs t1 <= t2");
  return {a, b};
}

}  // namespace detail

// Replay between micro-step indices a <= b of the record.
inline Vector replay_micro(const TrajectoryRecord& rec, const Vector& v, std::size_t a, std::size_t b) {
  if (!rec.has_coefficients()) throw InvalidArgument("replay: record was run without frozen coefficients");
  if (v.size() != rec.stepper->dim()) throw DimensionMismatch("replay: vector dimension differs from the record");
  if (b < a || b > rec.n_steps()) throw InvalidArgument("replay: step range outside the record");
  const QsdStepper& st = *rec.stepper;
  const int nc = st.n_channels();
  QsdStepper::Workspace ws(st);
  std::vector<Complex> dxi(static_cast<std::size_t>(nc));
  Vector x = v, next(v.size());
  for (std::size_t k = a; k < b; ++k) {
    rec.noise.increments_at(k, dxi.data());
    st.replay_step(x, &rec.coeffs[k * static_cast<std::size_t>(nc)], dxi.data(), rec.step_norms[k], ws, next);
    x.swap(next);
  }
  return x;
}

// T_{t1}^{t2} v for any vector v (no renormalization beyond the recorded
// per-step factors, which make T phi0(t1) = phi0(t2)).
inline Vector replay(const TrajectoryRecord& rec, const Vector& v, double t1, double t2) {
  if (v.size() != rec.stepper->dim()) throw DimensionMismatch("replay: vector dimension differs from the record");
  const auto [a, b] = detail::replay_steps(rec, t1, t2);
  return replay_micro(rec, v, a, b);
}

inline StateVector replay(const TrajectoryRecord& rec, const StateVector& v, double t1, double t2) {
  return StateVector(replay(rec, v.amplitudes(), t1, t2));
}

// T_{t1}^{t2} applied to every column of x.
inline Eigen::MatrixXcd replay_columns(const TrajectoryRecord& rec, const Eigen::MatrixXcd& x, double t1, double t2) {
  if (x.rows() != rec.stepper->dim()) throw DimensionMismatch("replay: block row count differs from the record");
  const auto [a, b] = detail::replay_steps(rec, t1, t2);
  const QsdStepper& st = *rec.stepper;
  const int nc = st.n_channels();
  std::vector<Complex> dxi(static_cast<std::size_t>(nc));
  Eigen::MatrixXcd cur = x, next(x.rows(), x.cols()), lx(x.rows(), x.cols());
  for (std::size_t k = a; k < b; ++k) {
    rec.noise.increments_at(k, dxi.data());
    st.replay_block(cur, &rec.coeffs[k * static_cast<std::size_t>(nc)], dxi.data(), rec.step_norms[k], lx, next);
    cur.swap(next);
  }
  return cur;
}

// T over a fixed interval of one record; S(P) = T P T^dag on operators.
class ReplayPropagator {
 public:
  ReplayPropagator(const TrajectoryRecord& rec, double t1, double t2) : rec_(&rec), t1_(t1), t2_(t2) {
    detail::replay_steps(rec, t1, t2);
  }

  double t1() const noexcept { return t1_; }
  double t2() const noexcept { return t2_; }

  Vector apply(const Vector& v) const { return replay(*rec_, v, t1_, t2_); }
  StateVector apply(const StateVector& v) const { return replay(*rec_, v, t1_, t2_); }

  // T P T^dag = (T (T P)^dag)^dag
  Matrix superoperator(const Matrix& p) const {
    const Eigen::MatrixXcd tp = replay_columns(*rec_, Eigen::MatrixXcd(p), t1_, t2_);
    const Eigen::MatrixXcd tpt = replay_columns(*rec_, Eigen::MatrixXcd(tp.adjoint()), t1_, t2_);
    return Matrix(tpt.adjoint());
  }

 private:
  const TrajectoryRecord* rec_;
  double t1_, t2_;
};

inline void check_record_operator(const TrajectoryRecord& rec, const Operator& o, const char* what) {
  if (o.dim() != rec.stepper->dim()) throw DimensionMismatch(std::string(what) + ": operator dimension differs from the record");
}

// <O2(t2) O1(t1)>_QSD = <O2^dag phi0(t2) | T_{t1}^{t2} O1 phi0(t1)> = Tr{O2 T O1 P00(t1) T^dag}.
// For t1 > t2 the conjugate relation conj(qsd_two_time(O1^dag, t1, O2^dag, t2)) is used.
inline Complex qsd_two_time(const TrajectoryRecord& rec, const Operator& o2, double t2, const Operator& o1, double t1) {
  check_record_operator(rec, o2, "qsd_two_time");
  check_record_operator(rec, o1, "qsd_two_time");
  if (t1 > t2 && !same_time(t1, t2)) return std::conj(qsd_two_time(rec, o1.adjoint(), t1, o2.adjoint(), t2));
  const Vector& p1 = rec.state_at(t1).amplitudes();
  const Vector& p2 = rec.state_at(t2).amplitudes();
  const Vector w = replay(rec, Vector(o1.matrix() * p1), t1, t2);
  return Vector(o2.matrix().adjoint() * p2).dot(w);
}

inline constexpr char kTimeOrderPolicy[] = "t1>t2: conj(qsd_two_time(O1^dag,t1,O2^dag,t2))";

struct MeasurementC {
  Complex value;       // rank-one factorized form
  Complex nested;      // S_{t2}^t( S_{t1}^{t2}(O1 P00(t1)) O2 ) traced, as operators
  double discrepancy;  // |value - nested|
};

// C(O2,t2; O1,t1; t) = Tr{ S_{t2}^t(P00(t2) O2) S_{t1}^t(O1 P00(t1)) }
//   = <T_{t2}^t O2^dag phi0(t2) | T_{t1}^t O1 phi0(t1)> * <T_{t1}^t phi0(t1) | T_{t2}^t phi0(t2)>.
// The nested operator form is evaluated independently; a disagreement beyond
// check_tol * max(1, |C|) throws (it signals misaligned replay data).
inline MeasurementC measurement_dependent_C(const TrajectoryRecord& rec, const Operator& o2, double t2,
                                            const Operator& o1, double t1, double t, double check_tol = 1e-8) {
  check_record_operator(rec, o2, "measurement_dependent_C");
  check_record_operator(rec, o1, "measurement_dependent_C");
  if ((t1 > t2 && !same_time(t1, t2)) || (t2 > t && !same_time(t2, t)))
    throw InvalidArgument("measurement_dependent_C: needs t1 <= t2 <= t");
  const Vector& p1 = rec.state_at(t1).amplitudes();
  const Vector& p2 = rec.state_at(t2).amplitudes();
  Eigen::MatrixXcd from1(p1.size(), 2), from2(p2.size(), 2);
  from1.col(0) = o1.matrix() * p1;
  from1.col(1) = p1;
  from2.col(0) = o2.matrix().adjoint() * p2;
  from2.col(1) = p2;
  const Eigen::MatrixXcd r1 = replay_columns(rec, from1, t1, t);
  const Eigen::MatrixXcd r2 = replay_columns(rec, from2, t2, t);
  const Complex value = r2.col(0).dot(r1.col(0)) * r1.col(1).dot(r2.col(1));

  const Matrix inner = ReplayPropagator(rec, t1, t2).superoperator(Matrix(o1.matrix() * p1 * p1.adjoint()));
  const Matrix outer = ReplayPropagator(rec, t2, t).superoperator(Matrix(inner * o2.matrix()));
  const Complex nested = outer.trace();

  const double disc = std::abs(value - nested);
  if (!(disc <= check_tol * std::max(1.0, std::abs(value))))
    throw Error("measurement_dependent_C: factorized and nested forms differ by " + std::to_string(disc));
  return {value, nested, disc};
}

// Single-trajectory trace caveat: qsd_two_time(I, t2, O1, t1) versus <O1>_{phi0(t1)}.
inline Complex identity_caveat_difference(const TrajectoryRecord& rec, const Operator& o1, double t1, double t2) {
  const Vector& p1 = rec.state_at(t1).amplitudes();
  const Complex direct = p1.dot(o1.matrix() * p1);
  return qsd_two_time(rec, Operator::identity(o1.dim()), t2, o1, t1) - direct;
}

struct IdentityCaveatReport {
  std::vector<double> single_traj_gaps;  // per trajectory
  ComplexEstimate ensemble_difference;   // mean of the signed difference
  double ensemble_gap = 0.0;             // |mean difference|
  std::size_t n_traj = 0;
  std::size_t n_dropped = 0;

  // mean difference within n_sigma standard errors of zero (per component)
  bool ensemble_consistent(double n_sigma) const { return ensemble_difference.within({0.0, 0.0}, n_sigma); }
};

inline IdentityCaveatReport identity_caveat_report(std::span<const TrajectoryRecord> records, const Operator& o1,
                                                   double t1, double t2) {
  if (!(t1 < t2) || same_time(t1, t2)) throw InvalidArgument("identity_caveat_report: needs t1 < t2");
  IdentityCaveatReport rep;
  std::vector<std::optional<std::vector<double>>> samples;
  for (const auto& r : records) {
    const Complex d = identity_caveat_difference(r, o1, t1, t2);
    rep.single_traj_gaps.push_back(std::abs(d));
    samples.emplace_back(std::vector<double>{d.real(), d.imag()});
  }
  const EnsembleStats st = reduce_samples(samples);
  rep.ensemble_difference = st.complex(0);
  rep.ensemble_gap = std::abs(rep.ensemble_difference.mean);
  rep.n_traj = st.n_traj;
  return rep;
}

// Streaming version over trajectory indices 0..n_traj-1; keeps per-trajectory gaps.
inline IdentityCaveatReport identity_caveat_ensemble(const LindbladModel& model, const StateVector& psi0,
                                                     const Operator& o1, double t1, double t2, std::uint64_t seed,
                                                     std::size_t n_traj, const QsdOptions& opts, unsigned threads = 0) {
  if (!(t1 < t2) || same_time(t1, t2)) throw InvalidArgument("identity_caveat_report: needs t1 < t2");
  const auto grid = merged_grid({t1, t2});
  const EnsembleStats st = trajectory_ensemble(model, psi0, grid, seed, n_traj, opts, threads, [&](const TrajectoryRecord& r) {
    const Complex d = identity_caveat_difference(r, o1, t1, t2);
    return std::vector<double>{d.real(), d.imag(), std::abs(d)};
  });
  IdentityCaveatReport rep;
  rep.ensemble_difference = st.complex(0);
  rep.ensemble_gap = std::abs(rep.ensemble_difference.mean);
  rep.n_traj = st.n_traj;
  rep.n_dropped = st.n_dropped;
  return rep;
}

// ---------------------------------------------------------------------------
// Ensemble tables

struct CorrelationPoint {
  double t1 = 0.0;
  double t2 = 0.0;
  std::optional<double> t_final;  // set for measurement-dependent C
  ComplexEstimate value;
};

struct CorrelationTable {
  std::vector<CorrelationPoint> points;
  std::size_t n_traj = 0;
  std::size_t n_dropped = 0;
  std::string method;
  double max_discrepancy = 0.0;  // factorized vs nested C, over all samples
};

// Mean of qsd_two_time over trajectories at the requested (t1, t2) pairs.
inline CorrelationTable qsd_correlation_ensemble(const LindbladModel& model, const Operator& o2, const Operator& o1,
                                                 const StateVector& psi0,
                                                 const std::vector<std::pair<double, double>>& pairs,
                                                 std::uint64_t seed, std::size_t n_traj, const QsdOptions& opts,
                                                 unsigned threads = 0) {
  std::vector<double> times;
  for (const auto& [t1, t2] : pairs) {
    times.push_back(t1);
    times.push_back(t2);
  }
  const auto grid = merged_grid(times);
  const EnsembleStats st = trajectory_ensemble(model, psi0, grid, seed, n_traj, opts, threads, [&](const TrajectoryRecord& r) {
    std::vector<double> s;
    for (const auto& [t1, t2] : pairs) push_complex(s, qsd_two_time(r, o2, t2, o1, t1));
    return s;
  });
  CorrelationTable out;
  out.method = "qsd";
  out.n_traj = st.n_traj;
  out.n_dropped = st.n_dropped;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    out.points.push_back({pairs[k].first, pairs[k].second, std::nullopt, st.complex(k)});
  return out;
}

struct TimeTriple {
  double t1, t2, t;
};

// Mean of the measurement-dependent C at (t1, t2, t) triples.
inline CorrelationTable measurement_C_ensemble(const LindbladModel& model, const Operator& o2, const Operator& o1,
                                               const StateVector& psi0, const std::vector<TimeTriple>& triples,
                                               std::uint64_t seed, std::size_t n_traj, const QsdOptions& opts,
                                               unsigned threads = 0) {
  std::vector<double> times;
  for (const auto& x : triples) times.insert(times.end(), {x.t1, x.t2, x.t});
  const auto grid = merged_grid(times);
  const EnsembleStats st = trajectory_ensemble(model, psi0, grid, seed, n_traj, opts, threads, [&](const TrajectoryRecord& r) {
    std::vector<double> s;
    double worst = 0.0;
    for (const auto& x : triples) {
      const MeasurementC c = measurement_dependent_C(r, o2, x.t2, o1, x.t1, x.t);
      push_complex(s, c.value);
      worst = std::max(worst, c.discrepancy);
    }
    s.push_back(worst);
    return s;
  });
  CorrelationTable out;
  out.method = "qsd-C";
  out.n_traj = st.n_traj;
  out.n_dropped = st.n_dropped;
  for (std::size_t k = 0; k < triples.size(); ++k)
    out.points.push_back({triples[k].t1, triples[k].t2, triples[k].t, st.complex(k)});
  // mean of per-trajectory maxima is a lower bound on the worst case; the
  // per-sample check inside measurement_dependent_C already enforces the bound.
  out.max_discrepancy = st.mean.back();
  return out;
}

// G(t', t'') = M(<O2(t') O1(t'')>_QSD) on all t'' <= t' of a uniform grid.
// Every insertion O1 phi0(t_j) is replayed forward lock-step as one column block.
inline CorrelationSeries qsd_correlation_series(const LindbladModel& model, const Operator& o2, const Operator& o1,
                                                const StateVector& psi0, const std::vector<double>& t_grid,
                                                std::uint64_t seed, std::size_t n_traj, const QsdOptions& opts,
                                                unsigned threads = 0) {
  validate_grid(t_grid);
  if (!is_uniform(t_grid)) throw InvalidArgument("qsd_correlation_series needs a uniform grid");
  if (o1.dim() != model.dim() || o2.dim() != model.dim())
    throw DimensionMismatch("qsd_correlation_series: operator dimension differs from the model");
  const std::size_t n = t_grid.size();
  const EnsembleStats st = trajectory_ensemble(model, psi0, t_grid, seed, n_traj, opts, threads, [&](const TrajectoryRecord& r) {
    std::vector<double> s(2 * CorrelationSeries::tri_size(n));
    const Matrix o2d = o2.matrix().adjoint();
    Eigen::MatrixXcd block(model.dim(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) block = replay_columns(r, block, t_grid[i - 1], t_grid[i]);
      block.conservativeResize(Eigen::NoChange, static_cast<Index>(i + 1));
      block.col(static_cast<Index>(i)) = o1.matrix() * r.states[i].amplitudes();
      const Vector u = o2d * r.states[i].amplitudes();
      for (std::size_t j = 0; j <= i; ++j) {
        const Complex g = u.dot(block.col(static_cast<Index>(j)));
        s[2 * CorrelationSeries::tri(i, j)] = g.real();
        s[2 * CorrelationSeries::tri(i, j) + 1] = g.imag();
      }
    }
    return s;
  });
  CorrelationSeries out;
  out.resize(t_grid);
  out.method = "qsd";
  out.n_traj = st.n_traj;
  out.n_dropped = st.n_dropped;
  out.se_re.resize(out.values.size());
  out.se_im.resize(out.values.size());
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    const auto c = st.complex(k);
    out.values[k] = c.mean;
    out.se_re[k] = c.se_re;
    out.se_im[k] = c.se_im;
  }
  return out;
}

}  // namespace qsdc
