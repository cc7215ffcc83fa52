#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qsdc/spectra.hpp"
#include "test_helpers.hpp"

using namespace qsdc;

namespace {

LindbladModel damped_oscillator(Index dim, double omega0, double gamma) {
  return LindbladModel(omega0 * number_operator(dim), {std::sqrt(gamma) * annihilation(dim)});
}

// G(t', t'') = e^{(-i w0 - g/2)(t' - t'')} sampled on a uniform grid.
CorrelationSeries synthetic_decay(double w0, double g, double t, double h) {
  CorrelationSeries c;
  c.resize(uniform_grid(t, h));
  c.method = "qrt";
  for (std::size_t i = 0; i < c.t_grid.size(); ++i)
    for (std::size_t j = 0; j <= i; ++j)
      c.values[CorrelationSeries::tri(i, j)] = std::exp(Complex(-0.5 * g, -w0) * (c.t_grid[i] - c.t_grid[j]));
  return c;
}

// Closed form of eps^2 ∬ e^{-i w tau} e^{(-i w0 - g/2) tau} + c.c. over the triangle:
// 2 eps^2 Re[t / z - (1 - e^{-z t}) / z^2], z = i (w + w0) + g / 2.
double decay_oracle(double w, double w0, double g, double eps, double t) {
  const Complex z(0.5 * g, w + w0);
  return 2.0 * eps * eps * (t / z - (1.0 - std::exp(-z * t)) / (z * z)).real();
}

}  // namespace

TEST(SpectrumFromCorrelation, ZeroCorrelationGivesZero) {
  CorrelationSeries c;
  c.resize(uniform_grid(2.0, 0.1));
  const SpectrumSeries s = spectrum_from_correlation(c, linspace(-3.0, 3.0, 7), 0.05, 2.0);
  for (double v : s.intensity) EXPECT_EQ(v, 0.0);
}

TEST(SpectrumFromCorrelation, MatchesClosedFormDecay) {
  const double w0 = 5.0, g = 1.0, eps = 0.05, t = 4.0;
  const CorrelationSeries c = synthetic_decay(w0, g, t, 0.005);
  const std::vector<double> omegas = linspace(-10.0, 10.0, 21);
  const SpectrumSeries s = spectrum_from_correlation(c, omegas, eps, t);
  EXPECT_EQ(s.method, "qrt-integral");
  double peak = 0.0;
  for (std::size_t w = 0; w < omegas.size(); ++w) peak = std::max(peak, decay_oracle(omegas[w], w0, g, eps, t));
  for (std::size_t w = 0; w < omegas.size(); ++w)
    EXPECT_NEAR(s.intensity[w], decay_oracle(omegas[w], w0, g, eps, t), 1e-4 * peak) << omegas[w];
  EXPECT_DOUBLE_EQ(s.peak_omega(), -5.0);
  EXPECT_LT(s.max_imag, 1e-12);
}

TEST(SpectrumFromCorrelation, HalfWidthApproachesHalfGamma) {
  const double w0 = 5.0, g = 1.0, t = 40.0;
  const CorrelationSeries c = synthetic_decay(w0, g, t, 0.02);
  const SpectrumSeries s = spectrum_from_correlation(c, {-5.5, -5.0, -4.5}, 0.05, t);
  EXPECT_NEAR(s.intensity[0] / s.intensity[1], 0.5, 0.05);
  EXPECT_NEAR(s.intensity[2] / s.intensity[1], 0.5, 0.05);
}

TEST(SpectrumFromCorrelation, EpsilonSquaredScalingIsExact) {
  const CorrelationSeries c = synthetic_decay(2.0, 1.0, 2.0, 0.02);
  const std::vector<double> omegas = linspace(-4.0, 4.0, 9);
  const SpectrumSeries a = spectrum_from_correlation(c, omegas, 0.05, 2.0);
  const SpectrumSeries b = spectrum_from_correlation(c, omegas, 0.1, 2.0);
  for (std::size_t w = 0; w < omegas.size(); ++w) EXPECT_EQ(b.intensity[w], 4.0 * a.intensity[w]);
}

TEST(SpectrumFromCorrelation, UsesOnlyTheCoveredWindow) {
  const CorrelationSeries c = synthetic_decay(1.0, 1.0, 3.0, 0.01);
  const SpectrumSeries s = spectrum_from_correlation(c, {-1.0, 0.0}, 0.05, 2.0);
  EXPECT_NEAR(s.intensity[0], decay_oracle(-1.0, 1.0, 1.0, 0.05, 2.0), 1e-6);
  EXPECT_DOUBLE_EQ(s.t_measure, 2.0);
}

TEST(SpectrumFromCorrelation, CoverageErrors) {
  const CorrelationSeries c = synthetic_decay(1.0, 1.0, 1.0, 0.1);
  EXPECT_THROW(spectrum_from_correlation(c, {0.0}, 0.05, 1.5), InvalidArgument);
  EXPECT_THROW(spectrum_from_correlation(c, {0.0}, 0.05, 0.55), OffGrid);
  EXPECT_THROW(spectrum_from_correlation(c, {0.0}, 0.05, 0.0), InvalidArgument);
  EXPECT_THROW(spectrum_from_correlation(c, {}, 0.05, 1.0), InvalidArgument);
  EXPECT_THROW(spectrum_from_correlation(c, {1.0, 0.0}, 0.05, 1.0), InvalidArgument);
  CorrelationSeries bad = c;
  bad.t_grid = {0.0, 0.1, 0.3};
  bad.values.resize(CorrelationSeries::tri_size(3));
  EXPECT_THROW(spectrum_from_correlation(bad, {0.0}, 0.05, 0.3), InvalidArgument);
}

TEST(StationarySpectrum, MatchesFullQuadrature) {
  const CorrelationSeries c = synthetic_decay(3.0, 0.5, 3.0, 0.01);
  const std::vector<double> omegas = linspace(-6.0, 6.0, 13);
  const SpectrumSeries a = spectrum_from_correlation(c, omegas, 0.05, 3.0);
  const SpectrumSeries b = stationary_spectrum(c, omegas, 0.05, 3.0);
  EXPECT_LT(stationarity_deviation(c, 3.0), 1e-12);
  for (std::size_t w = 0; w < omegas.size(); ++w) EXPECT_NEAR(a.intensity[w], b.intensity[w], 1e-12 * a.peak_value());
}

TEST(StationarySpectrum, RefusesTransientCorrelation) {
  // Decay from |1>: G(t', t'') carries e^{-g t''}, not a function of the lag alone.
  const auto m = damped_oscillator(4, 2.0, 1.0);
  const Operator q = annihilation(4) + creation(4);
  const auto g = qrt_correlation_series(m, q, q, DensityOperator::pure(StateVector::basis(4, 1)), uniform_grid(2.0, 0.05), {1e-3});
  EXPECT_GT(stationarity_deviation(g, 2.0), kStationaryTolerance);
  EXPECT_THROW(stationary_spectrum(g, {0.0}, 0.05, 2.0), InvalidArgument);
}

TEST(SpectrumQrt, MatchesOutputModeOccupation) {
  // Tr rho_11 of the co-integrated components is an independent evaluation.
  const auto m = damped_oscillator(5, 3.0, 1.0);
  const Operator q = annihilation(5) + creation(5);
  const auto rho0 = DensityOperator::pure(StateVector::basis(5, 1));
  const std::vector<double> omegas{-3.0, -1.0, 2.0};
  const SpectrumSeries s = spectrum_qrt(m, q, omegas, 0.05, rho0, 2.0, 0.01);
  for (std::size_t w = 0; w < omegas.size(); ++w) {
    const auto comp = component_evolution(m, omegas[w], 0.05, q, rho0, uniform_grid(2.0, 0.01), {1e-3});
    EXPECT_NEAR(s.intensity[w], comp.intensity.back(), 0.01 * std::abs(comp.intensity.back())) << omegas[w];
  }
  EXPECT_EQ(s.n_traj, 0u);
  EXPECT_FALSE(s.stochastic());
}

TEST(SpectrumQrt, VacuumPeakAtMinusOmega0) {
  const auto m = damped_oscillator(4, 5.0, 1.0);
  const Operator q = annihilation(4) + creation(4);
  const SpectrumSeries s = spectrum_qrt(m, q, linspace(-10.0, 10.0, 21), 0.05,
                                        DensityOperator::pure(StateVector::basis(4, 0)), 4.0, 0.02);
  EXPECT_DOUBLE_EQ(s.peak_omega(), -5.0);
  for (double v : s.intensity) EXPECT_GE(v, 0.0);
}

TEST(SpectrumDirect, ZeroCouplingOperator) {
  const auto m = damped_oscillator(3, 1.0, 1.0);
  const SpectrumSeries s = spectrum_direct(m, Operator::zero(3), 0.05, {-1.0, 0.0, 1.0}, StateVector::basis(3, 1), 1.0,
                                           8, 3, {1e-2});
  for (double v : s.intensity) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(s.method, "qsd-coupled");
}

struct RouteFixture : ::testing::Test {
  LindbladModel model = damped_oscillator(4, 2.0, 1.0);
  Operator q = annihilation(4) + creation(4);
  StateVector psi0 = StateVector::basis(4, 1);
  std::vector<double> omegas = linspace(-4.0, 4.0, 9);
  double t = 2.0, eps = 0.05;
  SpectrumSeries exact = spectrum_qrt(model, q, omegas, eps, DensityOperator::pure(psi0), t, 0.01);

  void expect_agrees(const SpectrumSeries& s) {
    for (std::size_t w = 0; w < omegas.size(); ++w)
      EXPECT_LE(std::abs(s.intensity[w] - exact.intensity[w]), std::max(4.0 * s.std_error[w], 0.1 * exact.peak_value()))
          << s.method << " omega=" << omegas[w];
    EXPECT_LE(std::abs(static_cast<long>(s.peak_index()) - static_cast<long>(exact.peak_index())), 1) << s.method;
  }
};

TEST_F(RouteFixture, CoupledRouteAgrees) {
  const SpectrumSeries s = spectrum_direct(model, q, eps, omegas, psi0, t, 400, 11, {5e-3});
  EXPECT_EQ(s.n_traj, 400u);
  expect_agrees(s);
}

TEST_F(RouteFixture, FullSpaceRouteAgrees) {
  const SpectrumSeries s = spectrum_full_space(model, q, eps, omegas, psi0, t, 400, 12, {5e-3});
  EXPECT_EQ(s.method, "qsd-fullspace");
  expect_agrees(s);
}

TEST_F(RouteFixture, DiadRouteAgrees) {
  DiadOptions o;
  o.qsd.dt = 5e-3;
  const SpectrumSeries s = spectrum_diad(model, q, eps, omegas, psi0, t, 0.05, 400, 13, o);
  EXPECT_EQ(s.method, "diad-integral");
  expect_agrees(s);
}

TEST_F(RouteFixture, CoupledEpsilonScalingWithinError) {
  const SpectrumSeries a = spectrum_direct(model, q, 0.05, omegas, psi0, t, 100, 14, {5e-3});
  const SpectrumSeries b = spectrum_direct(model, q, 0.1, omegas, psi0, t, 100, 14, {5e-3});
  // phi1 is linear in eps along each trajectory: the ratio is 4 up to rounding.
  for (std::size_t w = 0; w < omegas.size(); ++w) EXPECT_NEAR(b.intensity[w], 4.0 * a.intensity[w], 1e-12);
}

TEST_F(RouteFixture, CompareWithSelfIsZero) {
  const RouteReport r = compare_routes({exact, exact});
  ASSERT_EQ(r.pairs.size(), 1u);
  for (double d : r.pairs[0].difference) EXPECT_EQ(d, 0.0);
  EXPECT_EQ(r.pairs[0].max_abs_z, 0.0);
}

TEST_F(RouteFixture, CompareReportListsEveryZ) {
  const SpectrumSeries s = spectrum_direct(model, q, eps, omegas, psi0, t, 100, 15, {5e-3});
  const RouteReport r = compare_routes({exact, s});
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0].z.size(), omegas.size());
  const std::string text = to_text(r);
  EXPECT_NE(text.find("pair qrt-integral vs qsd-coupled"), std::string::npos);
  std::size_t count = 0;
  for (std::size_t p = text.find(" z="); p != std::string::npos; p = text.find(" z=", p + 1)) ++count;
  EXPECT_EQ(count, omegas.size());
  EXPECT_NE(runtime_text(r).find("runtime_ratio"), std::string::npos);
}

TEST_F(RouteFixture, CompareRejectsGridMismatch) {
  SpectrumSeries other = exact;
  other.omega_grid[0] = -5.0;
  EXPECT_THROW(compare_routes({exact, other}), InvalidArgument);
  other = exact;
  other.t_measure = 3.0;
  EXPECT_THROW(compare_routes({exact, other}), InvalidArgument);
}

TEST(LocalMaxima, FindsInteriorPeaks) {
  SpectrumSeries s;
  s.omega_grid = linspace(0.0, 6.0, 7);
  s.intensity = {0.0, 1.0, 0.5, 3.0, 0.2, 0.25, 0.1};
  EXPECT_EQ(s.local_maxima(), (std::vector<std::size_t>{1, 3, 5}));
  EXPECT_EQ(s.local_maxima(0.2), (std::vector<std::size_t>{1, 3}));
}
