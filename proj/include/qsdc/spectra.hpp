#pragma once

// Output spectra. With the output mode coupled through eps q (b + b^dag), the
// mode occupation at time t is
//   I(w) = eps^2 ∬_{t'' <= t' <= t} e^{-i w (t' - t'')} G(t', t'') dt'' dt' + c.c.,
//   G(t', t'') = <q(t') q(t'')> = Tr{q S_{t''}^{t'}(q rho(t''))},
// evaluated by trapezoid quadrature in both times (frequency sweep, no FFT).
// Routes: quadrature of a deterministic or stochastic correlation series,
// the coupled phi0/phi1 ensemble, full system + mode QSD, and per-trajectory
// quadrature of diad correlations.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "qsdc/diad.hpp"
#include "qsdc/ensemble.hpp"
#include "qsdc/grid.hpp"
#include "qsdc/lindblad.hpp"
#include "qsdc/outputmode.hpp"
#include "qsdc/qsd.hpp"

namespace qsdc {

struct SpectrumSeries {
  std::vector<double> omega_grid;
  std::vector<double> intensity;
  std::vector<double> std_error;  // zeros for deterministic routes
  std::string method;             // qrt-integral, qsd-coupled, qsd-fullspace, diad-integral
  double epsilon = 0.0;
  double t_measure = 0.0;
  std::size_t n_traj = 0;  // 0 for deterministic routes
  std::size_t n_dropped = 0;
  double runtime_seconds = 0.0;
  double max_imag = 0.0;  // largest |Im| of the integral plus its conjugate

  bool stochastic() const { return n_traj > 0; }
  std::size_t size() const { return omega_grid.size(); }

  std::size_t peak_index() const {
    if (intensity.empty()) throw InvalidArgument("spectrum: empty series");
    return static_cast<std::size_t>(std::max_element(intensity.begin(), intensity.end()) - intensity.begin());
  }
  double peak_omega() const { return omega_grid.at(peak_index()); }
  double peak_value() const { return intensity.at(peak_index()); }

  // Interior strict local maxima at least `min_fraction` of the global peak.
  std::vector<std::size_t> local_maxima(double min_fraction = 0.0) const {
    std::vector<std::size_t> out;
    const double floor = min_fraction * peak_value();
    for (std::size_t i = 1; i + 1 < intensity.size(); ++i)
      if (intensity[i] > intensity[i - 1] && intensity[i] > intensity[i + 1] && intensity[i] >= floor) out.push_back(i);
    return out;
  }
};

inline void validate_omega_grid(const std::vector<double>& omegas) {
  if (omegas.empty()) throw InvalidArgument("spectrum: empty frequency grid");
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    if (!std::isfinite(omegas[i])) throw InvalidArgument("spectrum: non-finite frequency");
    if (i > 0 && !(omegas[i] > omegas[i - 1])) throw InvalidArgument("spectrum: frequencies must be increasing");
  }
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {a};
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

namespace detail {

inline double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Number of grid intervals up to t; the grid must be uniform, start at 0 and contain t.
inline std::size_t coverage(const std::vector<double>& grid, double t) {
  validate_grid(grid);
  if (!is_uniform(grid)) throw InvalidArgument("spectrum: correlation grid must be uniform");
  if (!(t > 0.0)) throw InvalidArgument("spectrum: measurement time must be positive");
  if (t > grid.back() && !same_time(t, grid.back()))
    throw InvalidArgument("spectrum: correlation grid does not cover [0, t]");
  return find_grid_index(grid, t);
}

// Trapezoid weight of the (i, j) node of the triangle 0 <= t_j <= t_i <= t_n.
inline double triangle_weight(std::size_t i, std::size_t j, std::size_t n, double h) {
  if (i == 0) return 0.0;
  const double outer = (i == n) ? 0.5 : 1.0;
  const double inner = (j == 0 || j == i) ? 0.5 : 1.0;
  return outer * inner * h * h;
}

// eps^2 (X + conj X) for X = sum_ij w_ij e^{-i w (t_i - t_j)} G_ij; `imag`
// receives the largest |Im| of the sum (zero up to rounding).
inline std::vector<double> integrate(const std::vector<Complex>& tri_values, std::size_t n, double h,
                                     const std::vector<double>& omegas, double eps, double* imag = nullptr) {
  std::vector<double> out(omegas.size());
  std::vector<Complex> phase(n + 1);
  for (std::size_t w = 0; w < omegas.size(); ++w) {
    for (std::size_t k = 0; k <= n; ++k) phase[k] = std::exp(Complex(0.0, -omegas[w] * h * static_cast<double>(k)));
    Complex x = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        x += triangle_weight(i, j, n, h) * phase[i - j] * tri_values[CorrelationSeries::tri(i, j)];
    const Complex total = eps * eps * (x + std::conj(x));
    if (imag) *imag = std::max(*imag, std::abs(total.imag()));
    out[w] = total.real();
  }
  return out;
}

// Conservative standard error of the quadrature of a stochastic series whose
// per-node errors may be correlated: sum of |weight| * |se| (triangle inequality).
inline std::vector<double> integrate_error_bound(const CorrelationSeries& corr, std::size_t n, double h,
                                                 std::size_t n_omega, double eps) {
  double s = 0.0;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const std::size_t k = CorrelationSeries::tri(i, j);
      s += triangle_weight(i, j, n, h) * std::hypot(corr.se_re[k], corr.se_im[k]);
    }
  return std::vector<double>(n_omega, 2.0 * eps * eps * s);
}

inline std::string integral_tag(const std::string& corr_method) {
  if (corr_method == "qrt") return "qrt-integral";
  if (corr_method == "diad") return "diad-integral";
  return corr_method + "-integral";
}

}  // namespace detail

// Quadrature of a correlation series over [0, t]^2, t'' <= t'. For stochastic
// series the std_error column is the conservative bound described above; the
// diad route below integrates per trajectory instead.
inline SpectrumSeries spectrum_from_correlation(const CorrelationSeries& corr, const std::vector<double>& omegas,
                                                double eps, double t) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_omega_grid(omegas);
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw InvalidArgument("spectrum: epsilon must be >= 0");
  const std::size_t n = detail::coverage(corr.t_grid, t);
  if (corr.values.size() != CorrelationSeries::tri_size(corr.t_grid.size()))
    throw InvalidArgument("spectrum: correlation series is incomplete");
  const double h = n > 0 ? corr.t_grid[1] - corr.t_grid[0] : 0.0;
  SpectrumSeries s;
  s.omega_grid = omegas;
  s.method = detail::integral_tag(corr.method);
  s.epsilon = eps;
  s.t_measure = t;
  s.n_traj = corr.n_traj;
  s.n_dropped = corr.n_dropped;
  s.intensity = detail::integrate(corr.values, n, h, omegas, eps, &s.max_imag);
  s.std_error = corr.se_re.empty() ? std::vector<double>(omegas.size(), 0.0)
                                   : detail::integrate_error_bound(corr, n, h, omegas.size(), eps);
  s.runtime_seconds = detail::elapsed_since(t0);
  return s;
}

// Largest spread along any diagonal t' - t'' = const, relative to max |G|.
inline double stationarity_deviation(const CorrelationSeries& corr, double t) {
  const std::size_t n = detail::coverage(corr.t_grid, t);
  double scale = 0.0;
  for (std::size_t i = 0; i <= n; ++i)
    for (std::size_t j = 0; j <= i; ++j) scale = std::max(scale, std::abs(corr.at(i, j)));
  if (scale == 0.0) return 0.0;
  double dev = 0.0;
  for (std::size_t lag = 0; lag <= n; ++lag)
    for (std::size_t i = lag + 1; i <= n; ++i) dev = std::max(dev, std::abs(corr.at(i, i - lag) - corr.at(lag, 0)));
  return dev / scale;
}

inline constexpr double kStationaryTolerance = 0.01;

// Fast path for a stationary series: the triangle sum collapses onto lags,
// I = eps^2 sum_k c_k e^{-i w k h} g(k) + c.c. with c_k the summed weights of
// diagonal k and g(k) = G(t_k, 0). Refuses series whose diagonals deviate by
// more than kStationaryTolerance.
inline SpectrumSeries stationary_spectrum(const CorrelationSeries& corr, const std::vector<double>& omegas, double eps,
                                          double t) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_omega_grid(omegas);
  const std::size_t n = detail::coverage(corr.t_grid, t);
  const double dev = stationarity_deviation(corr, t);
  if (dev > kStationaryTolerance)
    throw InvalidArgument("stationary_spectrum: correlation is not stationary (diagonal deviation " +
                          std::to_string(dev) + ")");
  const double h = n > 0 ? corr.t_grid[1] - corr.t_grid[0] : 0.0;
  std::vector<double> c(n + 1, 0.0);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 0; j <= i; ++j) c[i - j] += detail::triangle_weight(i, j, n, h);
  SpectrumSeries s;
  s.omega_grid = omegas;
  s.method = detail::integral_tag(corr.method);
  s.epsilon = eps;
  s.t_measure = t;
  s.n_traj = corr.n_traj;
  s.n_dropped = corr.n_dropped;
  s.std_error.assign(omegas.size(), 0.0);
  for (double w : omegas) {
    Complex x = 0.0;
    for (std::size_t k = 0; k <= n; ++k)
      x += c[k] * std::exp(Complex(0.0, -w * h * static_cast<double>(k))) * corr.at(k, 0);
    s.intensity.push_back(eps * eps * 2.0 * x.real());
  }
  s.runtime_seconds = detail::elapsed_since(t0);
  return s;
}

// Route (a): quadrature of the deterministic regression-theorem correlation
// on a uniform grid of step h covering [0, t].
inline SpectrumSeries spectrum_qrt(const LindbladModel& model, const Operator& q, const std::vector<double>& omegas,
                                   double eps, const DensityOperator& rho0, double t, double h,
                                   const PropagationConfig& cfg = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const CorrelationSeries g = qrt_correlation_series(model, q, q, rho0, uniform_grid(t, h), cfg);
  SpectrumSeries s = spectrum_from_correlation(g, omegas, eps, t);
  s.runtime_seconds = detail::elapsed_since(t0);
  return s;
}

// Route (b): coupled phi0/phi1 ensemble. All frequencies are integrated
// lock-step along each phi0 trajectory, so every omega sees the same noise.
inline SpectrumSeries spectrum_direct(const LindbladModel& model, const Operator& q, double eps,
                                      const std::vector<double>& omegas, const StateVector& psi0, double t,
                                      std::size_t n_traj, std::uint64_t seed, const QsdOptions& opts = {},
                                      unsigned threads = 0) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_omega_grid(omegas);
  auto st = std::make_shared<const QsdStepper>(model, opts.dt, opts.scheme);
  const std::vector<double> grid = merged_grid({t});
  const EnsembleStats stats = run_ensemble(n_traj, threads, [&](std::size_t i) {
    QsdOptions o = opts;
    o.trajectory = i;
    const CoupledRun r = run_coupled_sweep(st, q, eps, omegas, psi0, grid, seed, o);
    std::vector<double> s;
    for (std::size_t w = 0; w < omegas.size(); ++w) s.push_back(r.intensity(grid.size() - 1, w));
    return s;
  });
  SpectrumSeries s{omegas, stats.mean, stats.std_error, "qsd-coupled", eps, t, stats.n_traj, stats.n_dropped};
  s.runtime_seconds = detail::elapsed_since(t0);
  return s;
}

// Route (c): QSD of the system + output mode, one composite model per omega;
// every omega reuses the same seed and trajectory indices.
inline SpectrumSeries spectrum_full_space(const LindbladModel& model, const Operator& q, double eps,
                                          const std::vector<double>& omegas, const StateVector& psi0, double t,
                                          std::size_t n_traj, std::uint64_t seed, const QsdOptions& opts = {},
                                          unsigned threads = 0, Index mode_levels = 2) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_omega_grid(omegas);
  SpectrumSeries s;
  s.omega_grid = omegas;
  s.method = "qsd-fullspace";
  s.epsilon = eps;
  s.t_measure = t;
  const std::vector<double> grid = merged_grid({t});
  for (double w : omegas) {
    const IntensitySeries r =
        full_space_intensity_ensemble(model, {w, eps, q}, psi0, mode_levels, grid, seed, n_traj, opts, threads);
    s.intensity.push_back(r.mean.back());
    s.std_error.push_back(r.std_error.back());
    s.n_traj = r.n_traj;
    s.n_dropped = std::max(s.n_dropped, r.n_dropped);
  }
  s.runtime_seconds = detail::elapsed_since(t0);
  return s;
}

// Diad route: per trajectory, the diad correlation series on a grid of step
// h is integrated; the spectra are then averaged, giving honest errors.
inline SpectrumSeries spectrum_diad(const LindbladModel& model, const Operator& q, double eps,
                                    const std::vector<double>& omegas, const StateVector& psi0, double t, double h,
                                    std::size_t n_traj, std::uint64_t seed, const DiadOptions& opts = {},
                                    unsigned threads = 0) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_omega_grid(omegas);
  const std::vector<double> grid = uniform_grid(t, h);
  check_series_args(model, q, q, psi0, grid, "spectrum_diad");
  const std::size_t n = detail::coverage(grid, t);
  const double step = grid[1] - grid[0];
  const DiadStepper st(std::make_shared<const QsdStepper>(model, opts.qsd.dt, opts.qsd.scheme), opts.gauge);
  const EnsembleStats stats = run_ensemble(n_traj, threads, [&](std::size_t i) {
    return detail::integrate(diad_series_sample(st, q, q, psi0, grid, seed, i, opts), n, step, omegas, eps);
  });
  SpectrumSeries s{omegas, stats.mean, stats.std_error, "diad-integral", eps, t, stats.n_traj, stats.n_dropped};
  s.runtime_seconds = detail::elapsed_since(t0);
  return s;
}

// ---------------------------------------------------------------------------
// Route comparison

struct RoutePair {
  std::string a, b;
  std::vector<double> difference;  // a - b per omega
  std::vector<double> z;           // difference / combined standard error (0 when both are exact and equal)
  double max_abs_z = 0.0;
  double max_abs_difference = 0.0;
  double runtime_ratio = 0.0;  // runtime(a) / runtime(b)
  std::size_t peak_a = 0, peak_b = 0;
};

struct RouteReport {
  std::vector<double> omega_grid;
  double t_measure = 0.0;
  double epsilon = 0.0;
  std::vector<SpectrumSeries> routes;
  std::vector<RoutePair> pairs;  // every unordered pair, in input order
};

inline RoutePair compare_pair(const SpectrumSeries& a, const SpectrumSeries& b) {
  RoutePair p;
  p.a = a.method;
  p.b = b.method;
  for (std::size_t w = 0; w < a.size(); ++w) {
    const double d = a.intensity[w] - b.intensity[w];
    const double se = std::hypot(a.std_error[w], b.std_error[w]);
    const double z = se > 0.0 ? d / se : (d == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), d));
    p.difference.push_back(d);
    p.z.push_back(z);
    p.max_abs_z = std::max(p.max_abs_z, std::abs(z));
    p.max_abs_difference = std::max(p.max_abs_difference, std::abs(d));
  }
  p.runtime_ratio = b.runtime_seconds > 0.0 ? a.runtime_seconds / b.runtime_seconds : 0.0;
  p.peak_a = a.peak_index();
  p.peak_b = b.peak_index();
  return p;
}

inline RouteReport compare_routes(const std::vector<SpectrumSeries>& routes) {
  if (routes.empty()) throw InvalidArgument("compare_routes: no series");
  const SpectrumSeries& ref = routes.front();
  for (const auto& r : routes) {
    if (r.omega_grid.size() != ref.omega_grid.size() || r.intensity.size() != r.omega_grid.size() ||
        r.std_error.size() != r.omega_grid.size())
      throw InvalidArgument("compare_routes: frequency grids differ");
    for (std::size_t w = 0; w < r.omega_grid.size(); ++w)
      if (std::abs(r.omega_grid[w] - ref.omega_grid[w]) > 1e-12 * (1.0 + std::abs(ref.omega_grid[w])))
        throw InvalidArgument("compare_routes: frequency grids differ");
    if (!same_time(r.t_measure, ref.t_measure)) throw InvalidArgument("compare_routes: measurement times differ");
  }
  RouteReport rep{ref.omega_grid, ref.t_measure, ref.epsilon, routes, {}};
  for (std::size_t i = 0; i < routes.size(); ++i)
    for (std::size_t j = i + 1; j < routes.size(); ++j) rep.pairs.push_back(compare_pair(routes[i], routes[j]));
  return rep;
}

namespace detail {
inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}
}  // namespace detail

// Plain-text report: one block per route, then one block per pair listing
// every per-omega difference and z-score.
inline std::string to_text(const RouteReport& rep) {
  std::ostringstream os;
  os << "route comparison: t_measure=" << detail::fmt(rep.t_measure) << " epsilon=" << detail::fmt(rep.epsilon)
     << " n_omega=" << rep.omega_grid.size() << "\n";
  for (const auto& r : rep.routes)
    os << "route " << r.method << ": n_traj=" << r.n_traj << " n_dropped=" << r.n_dropped
       << " peak_omega=" << detail::fmt(r.peak_omega()) << " peak=" << detail::fmt(r.peak_value()) << "\n";
  for (const auto& p : rep.pairs) {
    os << "pair " << p.a << " vs " << p.b << ": max|z|=" << detail::fmt(p.max_abs_z)
       << " max|diff|=" << detail::fmt(p.max_abs_difference) << " peak_shift=" << (static_cast<long>(p.peak_a) - static_cast<long>(p.peak_b))
       << "\n";
    for (std::size_t w = 0; w < p.z.size(); ++w)
      os << "  omega=" << detail::fmt(rep.omega_grid[w]) << " diff=" << detail::fmt(p.difference[w])
         << " z=" << detail::fmt(p.z[w]) << "\n";
  }
  return os.str();
}

// Runtime ratios are wall-clock measurements; kept out of the deterministic report.
inline std::string runtime_text(const RouteReport& rep) {
  std::ostringstream os;
  for (const auto& r : rep.routes) os << "route " << r.method << ": runtime_s=" << detail::fmt(r.runtime_seconds) << "\n";
  for (const auto& p : rep.pairs) os << "pair " << p.a << " vs " << p.b << ": runtime_ratio=" << detail::fmt(p.runtime_ratio) << "\n";
  return os.str();
}

}  // namespace qsdc
