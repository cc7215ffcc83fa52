#pragma once

// Deterministic master-equation evolution by fixed-step RK4, the
// quantum-regression correlation functions built on it, and the
// system/output-mode component equations. This is the reference every
// stochastic route in the library is checked against.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "qsdc/grid.hpp"
#include "qsdc/hilbert.hpp"

namespace qsdc {

class LindbladModel {
 public:
  LindbladModel(Operator hamiltonian, std::vector<Operator> lindblads, const Tolerances& tol = {})
      : h_(std::move(hamiltonian)), l_(std::move(lindblads)) {
    if (!h_.is_hermitian(tol.hermitian)) throw InvalidArgument("Hamiltonian is not Hermitian");
    const Index d = h_.dim();
    Matrix ldl = Matrix::Zero(d, d);
    for (const auto& l : l_) {
      if (l.dim() != d) throw DimensionMismatch("Lindblad operator dimension differs from the Hamiltonian");
      ldl += l.matrix().adjoint() * l.matrix();
      ladj_.push_back(l.matrix().adjoint());
    }
    k_ = -kI * h_.matrix() - 0.5 * ldl;
  }

  Index dim() const noexcept { return h_.dim(); }
  int n_channels() const noexcept { return static_cast<int>(l_.size()); }
  const Operator& hamiltonian() const noexcept { return h_; }
  const std::vector<Operator>& lindblads() const noexcept { return l_; }
  const Matrix& lindblad(int m) const { return l_.at(static_cast<std::size_t>(m)).matrix(); }
  const Matrix& lindblad_adjoint(int m) const { return ladj_.at(static_cast<std::size_t>(m)); }
  // K = -iH - 1/2 sum_m L_m^dag L_m
  const Matrix& effective_generator() const noexcept { return k_; }

 private:
  Operator h_;
  std::vector<Operator> l_;
  std::vector<Matrix> ladj_;
  Matrix k_;
};

// -i[H, rho] + sum_m (L rho L^dag - 1/2 {L^dag L, rho}). Accepts non-Hermitian rho.
inline Matrix lindblad_rhs(const LindbladModel& model, const Matrix& rho) {
  if (rho.rows() != model.dim() || rho.cols() != model.dim())
    throw DimensionMismatch("lindblad_rhs: operand dimension differs from the model");
  const Matrix& k = model.effective_generator();
  Matrix out = k * rho + rho * k.adjoint();
  for (int m = 0; m < model.n_channels(); ++m) out.noalias() += model.lindblad(m) * rho * model.lindblad_adjoint(m);
  return out;
}

inline Operator lindblad_rhs(const LindbladModel& model, const Operator& rho) {
  return Operator(lindblad_rhs(model, rho.matrix()));
}

struct PropagationConfig {
  double dt = 1e-3;
  std::vector<double> t_grid;  // optional output grid

  void validate() const {
    if (!(dt > 0.0)) throw InvalidArgument("PropagationConfig.dt must be > 0");
    if (!t_grid.empty()) {
      validate_grid(t_grid);
      for (double t : t_grid) steps_for(t, dt);
    }
  }
};

namespace detail {

// Number of equal RK4 sub-steps of length <= dt covering an interval.
inline std::size_t rk4_substeps(double interval, double dt) {
  if (interval <= 0.0) return 0;
  const double r = interval / dt;
  return static_cast<std::size_t>(std::max(1.0, std::ceil(r - 1e-9)));
}

}  // namespace detail

inline Matrix rk4_step(const LindbladModel& model, const Matrix& rho, double h) {
  const Matrix k1 = lindblad_rhs(model, rho);
  const Matrix k2 = lindblad_rhs(model, rho + (0.5 * h) * k1);
  const Matrix k3 = lindblad_rhs(model, rho + (0.5 * h) * k2);
  const Matrix k4 = lindblad_rhs(model, rho + h * k3);
  return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// S_{t1}^{t2} rho0 by RK4 with sub-steps of length (t2 - t1)/n <= dt.
inline Matrix propagate(const LindbladModel& model, const Matrix& rho0, double t1, double t2,
                        const PropagationConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw InvalidArgument("propagate: dt must be > 0");
  if (t2 < t1 && !same_time(t1, t2)) throw InvalidArgument("propagate: t2 < t1");
  if (rho0.rows() != model.dim() || rho0.cols() != model.dim())
    throw DimensionMismatch("propagate: operand dimension differs from the model");
  const std::size_t n = same_time(t1, t2) ? 0 : detail::rk4_substeps(t2 - t1, cfg.dt);
  const double h = n ? (t2 - t1) / static_cast<double>(n) : 0.0;
  Matrix rho = rho0;
  for (std::size_t s = 0; s < n; ++s) {
    rho = rk4_step(model, rho, h);
    if (!all_finite(rho)) throw Divergence("propagate", s);
  }
  return rho;
}

inline Operator propagate(const LindbladModel& model, const Operator& rho0, double t1, double t2,
                          const PropagationConfig& cfg) {
  return Operator(propagate(model, rho0.matrix(), t1, t2, cfg));
}

// The RK4 map over one fixed interval as a d^2 x d^2 matrix acting on the
// row-major vectorization. RK4 is linear, so this is the same map as
// stepping, evaluated once for reuse along uniform grids.
class IntervalPropagator {
 public:
  IntervalPropagator(const LindbladModel& model, double interval, const PropagationConfig& cfg)
      : d_(model.dim()), interval_(interval) {
    const Index n = d_ * d_;
    phi_.resize(n, n);
    for (Index c = 0; c < n; ++c) {
      Matrix e = Matrix::Zero(d_, d_);
      e(c / d_, c % d_) = 1.0;
      const Matrix out = propagate(model, e, 0.0, interval, cfg);
      for (Index r = 0; r < n; ++r) phi_(r, c) = out(r / d_, r % d_);
    }
  }

  double interval() const noexcept { return interval_; }

  Matrix apply(const Matrix& x) const {
    Matrix out(d_, d_);
    Eigen::Map<Vector>(out.data(), d_ * d_).noalias() = phi_ * Eigen::Map<const Vector>(x.data(), d_ * d_);
    return out;
  }

 private:
  Index d_;
  double interval_;
  Eigen::MatrixXcd phi_;
};

inline void check_correlation_args(const LindbladModel& model, const Operator& o2, const Operator& o1,
                                   const Matrix& rho0) {
  if (o2.dim() != model.dim() || o1.dim() != model.dim() || rho0.rows() != model.dim())
    throw DimensionMismatch("qrt_correlation: operator dimension differs from the model");
}

// <O2(t2) O1(t1)> = Tr{O2 S_{t1}^{t2}(O1 rho(t1))}, rho(t1) = S_0^{t1} rho0, t2 >= t1.
inline Complex qrt_correlation(const LindbladModel& model, const Operator& o2, double t2, const Operator& o1,
                               double t1, const DensityOperator& rho0, const PropagationConfig& cfg) {
  check_correlation_args(model, o2, o1, rho0.matrix());
  if (t2 < t1 && !same_time(t1, t2)) throw InvalidArgument("qrt_correlation: needs t2 >= t1");
  const Matrix rho1 = propagate(model, rho0.matrix(), 0.0, t1, cfg);
  const Matrix x = propagate(model, Matrix(o1.matrix() * rho1), t1, t2, cfg);
  return (o2.matrix() * x).trace();
}

// Tr{O2 S_{t1}^{t2}(rho(t1) O1)} = <O1(t1) O2(t2)>, the operator written to
// the right of rho. Equals conj(qrt_correlation(O2^dag, t2, O1^dag, t1)).
inline Complex qrt_correlation_reversed(const LindbladModel& model, const Operator& o2, double t2,
                                        const Operator& o1, double t1, const DensityOperator& rho0,
                                        const PropagationConfig& cfg) {
  check_correlation_args(model, o2, o1, rho0.matrix());
  if (t2 < t1 && !same_time(t1, t2)) throw InvalidArgument("qrt_correlation_reversed: needs t2 >= t1");
  const Matrix rho1 = propagate(model, rho0.matrix(), 0.0, t1, cfg);
  const Matrix x = propagate(model, Matrix(rho1 * o1.matrix()), t1, t2, cfg);
  return (o2.matrix() * x).trace();
}

// G(t', t'') = <O2(t') O1(t'')> for all t'' <= t' on a uniform grid.
inline CorrelationSeries qrt_correlation_series(const LindbladModel& model, const Operator& o2, const Operator& o1,
                                                const DensityOperator& rho0, const std::vector<double>& t_grid,
                                                const PropagationConfig& cfg) {
  check_correlation_args(model, o2, o1, rho0.matrix());
  validate_grid(t_grid);
  if (!is_uniform(t_grid)) throw InvalidArgument("qrt_correlation_series needs a uniform grid");
  CorrelationSeries out;
  out.resize(t_grid);
  out.method = "qrt";
  const std::size_t n = t_grid.size();
  if (n == 1) {
    out.values[0] = (o2.matrix() * o1.matrix() * rho0.matrix()).trace();
    return out;
  }
  const IntervalPropagator step(model, t_grid[1] - t_grid[0], cfg);
  std::vector<Matrix> rho(n);
  rho[0] = rho0.matrix();
  for (std::size_t i = 1; i < n; ++i) {
    rho[i] = step.apply(rho[i - 1]);
    if (!all_finite(rho[i])) throw Divergence("qrt_correlation_series", i);
  }
  for (std::size_t j = 0; j < n; ++j) {
    Matrix x = o1.matrix() * rho[j];
    for (std::size_t i = j; i < n; ++i) {
      if (i > j) x = step.apply(x);
      if (!all_finite(x)) throw Divergence("qrt_correlation_series", i);
      out.values[CorrelationSeries::tri(i, j)] = (o2.matrix() * x).trace();
    }
  }
  return out;
}

// Long-time propagation until successive snapshots differ by < tol entrywise.
inline DensityOperator steady_state(const LindbladModel& model, const DensityOperator& rho0,
                                    const PropagationConfig& cfg, double tol = 1e-10, double chunk = 1.0,
                                    double max_time = 1e4) {
  Matrix rho = rho0.matrix();
  for (double t = 0.0; t < max_time; t += chunk) {
    Matrix next = propagate(model, rho, 0.0, chunk, cfg);
    const double diff = max_abs(Matrix(next - rho));
    rho = std::move(next);
    if (diff < tol) return DensityOperator(0.5 * (rho + rho.adjoint()));
  }
  throw InvalidArgument("steady_state: no convergence within max_time");
}

// ---------------------------------------------------------------------------
// System + weakly coupled output mode (H2 = omega b^dag b, H_I = eps q (b + b^dag)),
// truncated to the mode's first excited state:
//   rho00' = L rho00
//   rho01' = L rho01 + i eps rho00 q + i omega rho01
//   rho10' = L rho10 - i eps q rho00 - i omega rho10
//   rho11' = L rho11 - i eps q rho01 + i eps rho10 q

struct ComponentSeries {
  std::vector<double> t_grid;
  std::vector<Matrix> rho00, rho01, rho10, rho11;
  std::vector<double> intensity;  // Tr rho11(t)
  double omega = 0.0;
  double epsilon = 0.0;
};

inline ComponentSeries component_evolution(const LindbladModel& model, double omega, double epsilon,
                                           const Operator& q, const DensityOperator& rho00_0,
                                           const std::vector<double>& t_grid, const PropagationConfig& cfg,
                                           const Tolerances& tol = {}) {
  if (!(epsilon > 0.0)) throw InvalidArgument("component_evolution: epsilon must be > 0");
  if (!q.is_hermitian(tol.hermitian)) throw InvalidArgument("component_evolution: q must be Hermitian");
  if (q.dim() != model.dim() || rho00_0.dim() != model.dim())
    throw DimensionMismatch("component_evolution: dimension differs from the model");
  validate_grid(t_grid);
  const Matrix& qm = q.matrix();
  const Index d = model.dim();
  const Complex ie = kI * epsilon, iw = kI * omega;

  struct State {
    Matrix r00, r01, r10, r11;
  };
  auto rhs = [&](const State& s) {
    return State{lindblad_rhs(model, s.r00), lindblad_rhs(model, s.r01) + ie * (s.r00 * qm) + iw * s.r01,
                 lindblad_rhs(model, s.r10) - ie * (qm * s.r00) - iw * s.r10,
                 lindblad_rhs(model, s.r11) - ie * (qm * s.r01) + ie * (s.r10 * qm)};
  };
  auto axpy = [](const State& s, double h, const State& k) {
    return State{s.r00 + h * k.r00, s.r01 + h * k.r01, s.r10 + h * k.r10, s.r11 + h * k.r11};
  };

  ComponentSeries out;
  out.t_grid = t_grid;
  out.omega = omega;
  out.epsilon = epsilon;
  State s{rho00_0.matrix(), Matrix::Zero(d, d), Matrix::Zero(d, d), Matrix::Zero(d, d)};
  auto record = [&] {
    out.rho00.push_back(s.r00);
    out.rho01.push_back(s.r01);
    out.rho10.push_back(s.r10);
    out.rho11.push_back(s.r11);
    out.intensity.push_back(s.r11.trace().real());
  };
  record();
  std::size_t step_no = 0;
  for (std::size_t g = 1; g < t_grid.size(); ++g) {
    const std::size_t n = detail::rk4_substeps(t_grid[g] - t_grid[g - 1], cfg.dt);
    const double h = (t_grid[g] - t_grid[g - 1]) / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k, ++step_no) {
      const State k1 = rhs(s);
      const State k2 = rhs(axpy(s, 0.5 * h, k1));
      const State k3 = rhs(axpy(s, 0.5 * h, k2));
      const State k4 = rhs(axpy(s, h, k3));
      s.r00 += (h / 6.0) * (k1.r00 + 2.0 * k2.r00 + 2.0 * k3.r00 + k4.r00);
      s.r01 += (h / 6.0) * (k1.r01 + 2.0 * k2.r01 + 2.0 * k3.r01 + k4.r01);
      s.r10 += (h / 6.0) * (k1.r10 + 2.0 * k2.r10 + 2.0 * k3.r10 + k4.r10);
      s.r11 += (h / 6.0) * (k1.r11 + 2.0 * k2.r11 + 2.0 * k3.r11 + k4.r11);
      if (!all_finite(s.r11) || !all_finite(s.r01)) throw Divergence("component_evolution", step_no);
    }
    record();
  }
  return out;
}

// rho11 at the last grid time from the driven form
//   rho11(t) = -i eps int_0^t S_{t'}^t (q rho01(t')) dt' + h.c.,
// trapezoid rule over the series grid (uniform grid required).
inline Matrix rho11_from_coherence(const LindbladModel& model, const ComponentSeries& series, const Operator& q,
                                   const PropagationConfig& cfg) {
  const auto& g = series.t_grid;
  if (g.size() < 2) return Matrix::Zero(model.dim(), model.dim());
  if (!is_uniform(g)) throw InvalidArgument("rho11_from_coherence needs a uniform grid");
  const double h = g[1] - g[0];
  const IntervalPropagator step(model, h, cfg);
  const std::size_t n = g.size() - 1;
  // Horner-style accumulation: acc <- S(acc) + w_k q rho01(t_k)
  Matrix acc = Matrix::Zero(model.dim(), model.dim());
  for (std::size_t k = 0; k <= n; ++k) {
    if (k > 0) acc = step.apply(acc);
    const double w = (k == 0 || k == n) ? 0.5 * h : h;
    acc += w * (q.matrix() * series.rho01[k]);
  }
  const Matrix drive = -kI * series.epsilon * acc;
  return drive + drive.adjoint();
}

}  // namespace qsdc
