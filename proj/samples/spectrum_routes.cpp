// Output spectrum of a damped oscillator by four routes, printed side by side:
// regression-theorem quadrature, coupled phi0/phi1 trajectories, full
// system+mode QSD, and diad correlations.
//
//   spectrum_routes [n_traj] [threads]

#include <cstdio>
#include <cstdlib>
#include <vector>

#include "qsdc/spectra.hpp"

using namespace qsdc;

int main(int argc, char** argv) {
  const std::size_t n_traj = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 200;
  const unsigned threads = argc > 2 ? static_cast<unsigned>(std::strtoul(argv[2], nullptr, 10)) : 0;

  const Index dim = 5;
  const double omega0 = 5.0, gamma = 1.0, eps = 0.05, t = 3.0, dt = 2e-3;
  const LindbladModel model(omega0 * number_operator(dim), {std::sqrt(gamma) * annihilation(dim)});
  const Operator q = annihilation(dim) + creation(dim);
  const StateVector psi0 = StateVector::basis(dim, 1);
  const std::vector<double> omegas = linspace(-10.0, 10.0, 11);

  DiadOptions diad;
  diad.qsd.dt = dt;
  const RouteReport rep = compare_routes({
      spectrum_qrt(model, q, omegas, eps, DensityOperator::pure(psi0), t, 0.02, {dt}),
      spectrum_direct(model, q, eps, omegas, psi0, t, n_traj, 1, {dt}, threads),
      spectrum_full_space(model, q, eps, omegas, psi0, t, n_traj, 2, {dt}, threads),
      spectrum_diad(model, q, eps, omegas, psi0, t, 0.02, n_traj, 3, diad, threads),
  });

  std::printf("%8s", "omega");
  for (const auto& r : rep.routes) std::printf(" %24s", r.method.c_str());
  std::printf("\n");
  for (std::size_t w = 0; w < omegas.size(); ++w) {
    std::printf("%8.2f", omegas[w]);
    for (const auto& r : rep.routes) std::printf("   %10.3e +- %9.2e", r.intensity[w], r.std_error[w]);
    std::printf("\n");
  }
  std::printf("\n%s%s", to_text(rep).c_str(), runtime_text(rep).c_str());
  return 0;
}
