#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qsdc/diad.hpp"
#include "qsdc/lindblad.hpp"
#include "test_helpers.hpp"

using namespace qsdc;

namespace {

LindbladModel random_model(Index d, std::uint32_t seed) {
  return LindbladModel(Operator::hermitian(test::random_hermitian(d, seed)),
                       {Operator(0.6 * test::random_matrix(d, seed + 1)), Operator(0.4 * test::random_matrix(d, seed + 2))});
}

LindbladModel damped_oscillator(Index dim, double omega0, double gamma) {
  return LindbladModel(omega0 * number_operator(dim), {std::sqrt(gamma) * annihilation(dim)});
}

std::vector<Complex> increments(int n, std::uint32_t seed, double dt) {
  const Vector v = test::random_vector(n, seed) * std::sqrt(dt / 2.0);
  return {v.data(), v.data() + n};
}

}  // namespace

TEST(Diad, KetEqualsBraReducesToQsdRawUpdate) {
  const LindbladModel model = random_model(4, 5);
  const double dt = 1e-3;
  for (StepScheme scheme : {StepScheme::exponential_euler, StepScheme::euler_maruyama}) {
    for (std::uint32_t s = 0; s < 5; ++s) {
      const StateVector psi = test::random_state(4, 20 + s);
      const auto dxi = increments(2, 40 + s, dt);
      const QsdStepResult q = qsd_step(model, psi, dxi, dt, scheme);
      const DiadState d = diad_step(model, {psi.amplitudes(), psi.amplitudes()}, dxi, dt, scheme);
      EXPECT_LT(max_abs(Vector(d.ket - q.raw)), 1e-12);
      EXPECT_LT(max_abs(Vector(d.bra - q.raw)), 1e-12);
    }
  }
}

TEST(Diad, HandEvaluatedEulerStep) {
  // One channel, plain Euler-Maruyama: every term written out explicitly.
  const Index d = 3;
  const Matrix h = test::random_hermitian(d, 1), l = 0.7 * test::random_matrix(d, 2);
  const LindbladModel model(Operator::hermitian(h), {Operator(l)});
  const double dt = 2e-3;
  const Vector psi = test::random_vector(d, 3), phi = test::random_vector(d, 4);
  const Complex dxi(0.013, -0.021);
  const Matrix k = -kI * h - 0.5 * l.adjoint() * l;
  const Complex lpsi = psi.dot(l * psi) / psi.squaredNorm();
  const Complex lphi = phi.dot(l * phi) / phi.squaredNorm();
  const Complex ldag_phi = phi.dot(l.adjoint() * phi) / phi.squaredNorm();
  const Complex ldag_psi = psi.dot(l.adjoint() * psi) / psi.squaredNorm();
  const Vector dpsi = (k * psi + ldag_phi * (l * psi) - 0.5 * ldag_phi * lpsi * psi) * dt + (l * psi - lpsi * psi) * dxi;
  const Vector dphi = (k * phi + ldag_psi * (l * phi) - 0.5 * lphi * ldag_psi * phi) * dt + (l * phi - lphi * phi) * dxi;
  const std::vector<Complex> inc{dxi};
  const DiadState out = diad_step(model, {psi, phi}, inc, dt, StepScheme::euler_maruyama);
  EXPECT_LT(max_abs(Vector(out.ket - (psi + dpsi))), 1e-13);
  EXPECT_LT(max_abs(Vector(out.bra - (phi + dphi))), 1e-13);
}

TEST(Diad, MeanFlowIsLindbladFlow) {
  const LindbladModel model = random_model(3, 11);
  const double dt = 1e-3;
  const DiadState s0{test::random_vector(3, 12), test::random_vector(3, 13)};
  const MeanFlow mf = diad_mean_flow(model, s0, dt, 100000, 99);
  const Matrix expect = lindblad_rhs(model, Matrix(s0.ket * s0.bra.adjoint())) * dt;
  for (Index a = 0; a < 3; ++a)
    for (Index b = 0; b < 3; ++b) {
      EXPECT_LE(std::abs(mf.mean(a, b).real() - expect(a, b).real()), 4.0 * mf.se_re(a, b) + 1e-6) << a << "," << b;
      EXPECT_LE(std::abs(mf.mean(a, b).imag() - expect(a, b).imag()), 4.0 * mf.se_im(a, b) + 1e-6) << a << "," << b;
    }
  // The drift is resolved, not hidden in the noise.
  EXPECT_GT(max_abs(expect), 5.0 * mf.se_re.maxCoeff());
}

TEST(Diad, GaugeDoesNotChangeOutput) {
  const LindbladModel model = random_model(3, 21);
  const StateVector psi0 = test::random_state(3, 22);
  const Operator o1(test::random_matrix(3, 23)), o2(test::random_matrix(3, 24));
  DiadOptions plain, balanced;
  balanced.gauge = DiadGauge::balance_norms;
  const auto a = diad_correlation(model, o2, 0.8, o1, 0.3, psi0, 40, 5, plain, 1);
  const auto b = diad_correlation(model, o2, 0.8, o1, 0.3, psi0, 40, 5, balanced, 1);
  EXPECT_LT(std::abs(a.value.mean - b.value.mean), 1e-10 * std::max(1.0, std::abs(a.value.mean)));
  EXPECT_EQ(a.gauge, "none");
  EXPECT_EQ(b.gauge, "balance_norms");
}

TEST(Diad, GaugeStepIsCovariant) {
  const LindbladModel model = random_model(3, 31);
  const DiadState s{test::random_vector(3, 32), test::random_vector(3, 33)};
  const auto dxi = increments(2, 34, 1e-3);
  const Complex c(1.7, -0.4);
  const DiadState a = diad_step(model, s, dxi, 1e-3);
  const DiadState b = diad_step(model, {c * s.ket, s.bra / std::conj(c)}, dxi, 1e-3);
  EXPECT_LT(max_abs(Vector(b.ket - c * a.ket)), 1e-13);
  EXPECT_LT(max_abs(Vector(b.bra - a.bra / std::conj(c))), 1e-13);
  const Matrix o = test::random_matrix(3, 35);
  EXPECT_LT(std::abs(a.traced(o) - b.traced(o)), 1e-12);
}

TEST(Diad, CorrelationMatchesQrt) {
  const LindbladModel model = random_model(3, 41);
  const StateVector psi0 = test::random_state(3, 42);
  const Operator o1(test::random_matrix(3, 43)), o2(test::random_matrix(3, 44));
  const DensityOperator rho0 = DensityOperator::pure(psi0);
  const std::vector<std::pair<double, double>> pairs{{0.0, 0.5}, {0.3, 0.3}, {0.4, 1.2}};
  const CorrelationTable t = diad_correlation_ensemble(model, o2, o1, psi0, pairs, 3, 2000);
  EXPECT_EQ(t.method, "diad");
  EXPECT_EQ(t.n_traj, 2000u);
  for (const auto& p : t.points) {
    const Complex ref = qrt_correlation(model, o2, p.t2, o1, p.t1, rho0, {1e-3});
    EXPECT_TRUE(p.value.within(ref, 4.0, 1e-3)) << p.t1 << "," << p.t2 << " " << p.value.mean << " vs " << ref;
  }
}

TEST(Diad, EqualTimeIsExpectation) {
  // t1 = t2: <phi|O2 O1|psi> with psi = phi = the QSD state.
  const LindbladModel model = random_model(3, 51);
  const StateVector psi0 = test::random_state(3, 52);
  const Operator o1(test::random_matrix(3, 53)), o2(test::random_matrix(3, 54));
  const auto d = diad_correlation(model, o2, 0.4, o1, 0.4, psi0, 30, 8, {}, 1);
  const auto q = diad_correlation(model, o2 * o1, 0.4, Operator::identity(3), 0.4, psi0, 30, 8, {}, 1);
  EXPECT_LT(std::abs(d.value.mean - q.value.mean), 1e-12);
}

TEST(Diad, SeriesMatchesTable) {
  const LindbladModel model = random_model(3, 61);
  const StateVector psi0 = test::random_state(3, 62);
  const Operator o1(test::random_matrix(3, 63)), o2(test::random_matrix(3, 64));
  const std::vector<double> grid = uniform_grid(0.6, 0.2);
  const CorrelationSeries s = diad_correlation_series(model, o2, o1, psi0, grid, 4, 20);
  const CorrelationTable t = diad_correlation_ensemble(model, o2, o1, psi0, {{0.2, 0.6}, {0.0, 0.4}}, 4, 20);
  EXPECT_EQ(s.method, "diad");
  EXPECT_LT(std::abs(s.at(3, 1) - t.points[0].value.mean), 1e-10);
  EXPECT_LT(std::abs(s.at(2, 0) - t.points[1].value.mean), 1e-10);
}

TEST(Diad, ReductionOverlap) {
  const LindbladModel model = random_model(4, 71);
  const double worst = diad_reduction_overlap(model, test::random_state(4, 72), uniform_grid(2.0, 0.1), 9);
  EXPECT_GT(worst, 1.0 - 1e-8);
}

TEST(Diad, OrthogonalPairIsFlagged) {
  // Vacuum start with O1 = a^dag: ket |1>, bra |0>, zero overlap.
  const LindbladModel model = damped_oscillator(4, 1.0, 1.0);
  const auto r = diad_correlation(model, annihilation(4), 0.1, creation(4), 0.0, StateVector::basis(4, 0), 5, 1, {}, 1);
  EXPECT_GT(r.degenerate_steps_mean, 0.0);
  EXPECT_TRUE(std::isfinite(r.value.mean.real()));
}

TEST(Diad, DampedOscillatorCorrelation) {
  // <a^dag(t2) a(t1)> from |1>: exp((i w0 - g/2)(t2 - t1)) exp(-g t1).
  const double w0 = 2.0, g = 1.0;
  const LindbladModel model = damped_oscillator(5, w0, g);
  const auto r = diad_correlation(model, creation(5), 1.0, annihilation(5), 0.5, StateVector::basis(5, 1), 2000, 12);
  const Complex ref = std::exp(Complex(-0.5 * g, w0) * 0.5) * std::exp(-g * 0.5);
  EXPECT_TRUE(r.value.within(ref, 4.0, 1e-3)) << r.value.mean << " vs " << ref;
  EXPECT_EQ(r.n_dropped, 0u);
}

TEST(Diad, Errors) {
  const LindbladModel model = random_model(3, 81);
  const StateVector psi0 = test::random_state(3, 82);
  const Operator o = Operator::identity(3);
  EXPECT_THROW(diad_correlation(model, o, 0.2, o, 0.5, psi0, 2, 1), InvalidArgument);
  EXPECT_THROW(diad_correlation(model, Operator::identity(2), 0.5, o, 0.2, psi0, 2, 1), DimensionMismatch);
  EXPECT_THROW(diad_correlation_ensemble(model, o, o, psi0, {}, 1, 2), InvalidArgument);
  const std::vector<Complex> one{Complex(0.0)};
  EXPECT_THROW(diad_step(model, {psi0.amplitudes(), psi0.amplitudes()}, one, 1e-3), DimensionMismatch);
}

TEST(Diad, VacuumFixedPoint) {
  const LindbladModel model = damped_oscillator(4, 3.0, 1.0);
  const Vector v = StateVector::basis(4, 0).amplitudes();
  const DiadState out = diad_step(model, {v, v}, increments(1, 91, 1e-3), 1e-3);
  EXPECT_LT(max_abs(Vector(out.ket - v)), 1e-15);
  EXPECT_LT(max_abs(Vector(out.bra - v)), 1e-15);
}

TEST(Diad, IdentityInsertionPreservesTrace) {
  const LindbladModel model = random_model(3, 92);
  const Operator id = Operator::identity(3);
  const auto r = diad_correlation(model, id, 1.0, id, 0.4, test::random_state(3, 93), 500, 6);
  EXPECT_TRUE(r.value.within(Complex(1.0), 3.0, 1e-12)) << r.value.mean;
}

TEST(Diad, VacuumDecayOfCoherence) {
  const double w0 = 2.0, g = 1.0;
  const LindbladModel model = damped_oscillator(5, w0, g);
  const auto r = diad_correlation(model, annihilation(5), 1.5, creation(5), 0.5, StateVector::basis(5, 0), 2000, 14);
  const Complex ref = std::exp(Complex(-0.5 * g, -w0) * 1.0);
  EXPECT_TRUE(r.value.within(ref, 3.0, 1e-3)) << r.value.mean << " vs " << ref;
}

TEST(Diad, BraInsertionMatchesReversedQrt) {
  const LindbladModel model = random_model(3, 94);
  const StateVector psi0 = test::random_state(3, 95);
  const Operator o1(test::random_matrix(3, 96)), o2(test::random_matrix(3, 97));
  DiadOptions opts;
  opts.insertion = DiadInsertion::bra;
  const auto r = diad_correlation(model, o2, 0.9, o1, 0.3, psi0, 2000, 7, opts);
  const Complex ref = qrt_correlation_reversed(model, o2, 0.9, o1, 0.3, DensityOperator::pure(psi0), {1e-3});
  EXPECT_TRUE(r.value.within(ref, 4.0, 1e-3)) << r.value.mean << " vs " << ref;
}
