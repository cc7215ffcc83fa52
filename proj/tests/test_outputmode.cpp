#include <gtest/gtest.h>

#include <cmath>

#include "qsdc/lindblad.hpp"
#include "qsdc/outputmode.hpp"
#include "test_helpers.hpp"

using namespace qsdc;

namespace {

LindbladModel damped_oscillator(Index dim, double omega0, double gamma) {
  return LindbladModel(omega0 * number_operator(dim), {std::sqrt(gamma) * annihilation(dim)});
}

Operator position(Index dim) { return annihilation(dim) + creation(dim); }

}  // namespace

TEST(OutputModeSpec, Validation) {
  EXPECT_NO_THROW((OutputModeSpec{1.0, 0.05, position(3)}.validate(3)));
  EXPECT_THROW((OutputModeSpec{1.0, -0.1, position(3)}.validate(3)), InvalidArgument);
  EXPECT_THROW((OutputModeSpec{1.0, 0.05, annihilation(3)}.validate(3)), InvalidArgument);
  EXPECT_THROW((OutputModeSpec{1.0, 0.05, position(4)}.validate(3)), DimensionMismatch);
}

TEST(RunCoupled, ZeroCouplingLeavesPhi1Empty) {
  const auto m = damped_oscillator(4, 5.0, 1.0);
  const auto r = run_coupled(m, {5.0, 0.0, position(4)}, StateVector::basis(4, 1), uniform_grid(1.0, 0.25), 3, {1e-3});
  for (std::size_t g = 0; g < r.record.t_grid.size(); ++g) EXPECT_EQ(r.intensity(g), 0.0);
}

TEST(RunCoupled, Phi0IsTheQsdTrajectory) {
  const auto m = damped_oscillator(5, 5.0, 1.0);
  const auto grid = uniform_grid(2.0, 0.1);
  const auto psi0 = test::random_state(5, 1);
  const auto r = run_coupled(m, {4.0, 0.05, position(5)}, psi0, grid, 12, {1e-3});
  const auto rec = run_trajectory(m, psi0, grid, 12, {1e-3});
  for (std::size_t g = 0; g < grid.size(); ++g) EXPECT_EQ(r.record.states[g].amplitudes(), rec.states[g].amplitudes());
  EXPECT_EQ(r.record.coeffs, rec.coeffs);
  EXPECT_EQ(r.frame, "co-rotating-exact");
}

TEST(RunCoupled, GroundStateDriveClosedForm) {
  const double omega0 = 5.0, gamma = 1.0, omega = 3.0, eps = 0.05, dt = 1e-3;
  const auto m = damped_oscillator(4, omega0, gamma);
  const auto grid = uniform_grid(1.0, 0.5);
  const auto r = run_coupled(m, {omega, eps, position(4)}, StateVector::basis(4, 0), grid, 4, {dt});
  for (const auto& s : r.record.states) EXPECT_EQ(s.amplitudes(), StateVector::basis(4, 0).amplitudes());
  // <1|phi1(t_N)> = -i eps dt sum_{j=1}^{N} z^j, z = e^{(-i omega - i omega0 - gamma/2) dt}
  const std::size_t n = 1000;
  const Complex z = std::exp(Complex(-gamma / 2.0, -(omega + omega0)) * dt);
  const Complex expect = -kI * eps * dt * z * (1.0 - std::pow(z, static_cast<double>(n))) / (1.0 - z);
  EXPECT_LT(std::abs(r.phi1[0].back()(1) - expect), 1e-14);
  EXPECT_NEAR(std::abs(r.phi1[0].back()(2)), 0.0, 1e-16);
}

TEST(RunCoupled, LinearInEpsilon) {
  const auto m = damped_oscillator(4, 5.0, 1.0);
  const auto psi0 = test::random_state(4, 2);
  const auto grid = uniform_grid(1.0, 0.5);
  const auto a = run_coupled(m, {5.0, 0.05, position(4)}, psi0, grid, 9, {1e-3});
  const auto b = run_coupled(m, {5.0, 0.10, position(4)}, psi0, grid, 9, {1e-3});
  for (std::size_t g = 0; g < grid.size(); ++g)
    EXPECT_LE(max_abs(Vector(b.phi1[0][g] - 2.0 * a.phi1[0][g])), 1e-10 * b.phi1[0][g].norm() + 1e-300);
}

TEST(RunCoupled, SweepMatchesSingleFrequency) {
  const auto m = damped_oscillator(4, 5.0, 1.0);
  const auto psi0 = test::random_state(4, 3);
  const auto grid = uniform_grid(1.0, 0.5);
  auto st = std::make_shared<const QsdStepper>(m, 1e-3);
  const auto sweep = run_coupled_sweep(st, position(4), 0.05, {-5.0, 0.0, 5.0}, psi0, grid, 9, {1e-3});
  const auto one = run_coupled(m, {0.0, 0.05, position(4)}, psi0, grid, 9, {1e-3});
  EXPECT_LT(max_abs(Vector(sweep.phi1[1].back() - one.phi1[0].back())), 1e-15);
}

TEST(OutputIntensity, RankOneTrace) {
  const StateVector phi1(test::random_vector(4, 4));
  const CoupledState s{test::random_state(4, 5), phi1};
  EXPECT_NEAR(output_intensity(s), trace(rank_one(phi1, phi1)).real(), 1e-12);
  EXPECT_EQ(output_intensity({test::random_state(4, 5), StateVector(Vector::Zero(4))}), 0.0);
}

TEST(OutputIntensity, ReplaySumMatchesLockStep) {
  const auto m = damped_oscillator(4, 5.0, 1.0);
  const OutputModeSpec spec{3.0, 0.05, position(4)};
  const auto r = run_coupled(m, spec, test::random_state(4, 6), uniform_grid(0.3, 0.1), 21, {1e-3});
  const double direct = r.intensity(r.record.t_grid.size() - 1);
  EXPECT_NEAR(intensity_by_replay(r.record, spec), direct, 1e-8 * direct);
}

TEST(FullSpace, ZeroCouplingKeepsModeEmpty) {
  const auto m = damped_oscillator(3, 5.0, 1.0);
  const auto r = run_full_space(m, {5.0, 0.0, position(3)}, StateVector::basis(3, 1), 2, uniform_grid(1.0, 0.5), 1, {1e-3});
  for (double n : r.occupation) EXPECT_EQ(n, 0.0);
  EXPECT_THROW(run_full_space(m, {5.0, 0.0, position(3)}, StateVector::basis(3, 1), 4, {0.0, 1.0}, 1, {1e-3}), InvalidArgument);
}

TEST(FullSpace, CompositeModelLayout) {
  const auto m = damped_oscillator(3, 2.0, 1.0);
  const auto full = output_mode_model(m, {1.5, 0.1, position(3)}, 2);
  EXPECT_EQ(full.dim(), 6);
  const Matrix expect = kron(m.hamiltonian().matrix(), Matrix::Identity(2, 2)) +
                        1.5 * kron(Matrix::Identity(3, 3), number_operator(2).matrix()) +
                        0.1 * kron(position(3).matrix(), position(2).matrix());
  EXPECT_LT(max_abs(Matrix(full.hamiltonian().matrix() - expect)), 1e-15);
}

// Small-N statistical versions of the route agreements; the acceptance
// binary runs the full-size checks.
TEST(Ensemble, CoupledMatchesComponentEquations) {
  const double omega0 = 5.0, eps = 0.05;
  const auto m = damped_oscillator(5, omega0, 1.0);
  const OutputModeSpec spec{omega0, eps, position(5)};
  const auto grid = uniform_grid(2.0, 0.5);
  const auto ens = coupled_intensity_ensemble(m, spec, StateVector::basis(5, 1), grid, 5, 300, {1e-3});
  const auto comp = component_evolution(m, omega0, eps, position(5), DensityOperator::pure(StateVector::basis(5, 1)), grid, {1e-3});
  for (std::size_t g = 1; g < grid.size(); ++g)
    EXPECT_LT(std::abs(ens.mean[g] - comp.intensity[g]), 3.0 * ens.std_error[g] + 1e-12) << grid[g];
  EXPECT_GT(ens.max_phi1_ratio, 0.0);  // reported, not bounded a priori
}

TEST(Ensemble, FullSpaceMatchesCoupledAndTruncation) {
  const auto m = damped_oscillator(4, 5.0, 1.0);
  const OutputModeSpec spec{5.0, 0.05, position(4)};
  const auto grid = uniform_grid(2.0, 1.0);
  const auto coupled = coupled_intensity_ensemble(m, spec, StateVector::basis(4, 1), grid, 8, 200, {1e-3});
  const auto f2 = full_space_intensity_ensemble(m, spec, StateVector::basis(4, 1), 2, grid, 8, 200, {1e-3});
  const auto f3 = full_space_intensity_ensemble(m, spec, StateVector::basis(4, 1), 3, grid, 8, 200, {1e-3});
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const double se = std::hypot(coupled.std_error[g], f2.std_error[g]);
    EXPECT_LT(std::abs(coupled.mean[g] - f2.mean[g]), 3.0 * se);
    EXPECT_LT(std::abs(f3.mean[g] - f2.mean[g]), 10.0 * spec.epsilon * spec.epsilon * f2.mean[g]);
  }
}

TEST(Ensemble, CentralInequalityIsSignificant) {
  const auto m = damped_oscillator(4, 5.0, 1.0);
  const auto ci = central_inequality(m, {5.0, 0.05, position(4)}, StateVector::basis(4, 1), 2.0, 3, 400, {1e-3});
  EXPECT_GT(ci.difference, 0.0);
  EXPECT_GT(ci.z(), 4.0);
}
