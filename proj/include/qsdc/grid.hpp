#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "qsdc/errors.hpp"

namespace qsdc {

inline constexpr double kGridTolerance = 1e-9;

inline bool same_time(double a, double b) { return std::abs(a - b) <= kGridTolerance * (1.0 + std::abs(a) + std::abs(b)); }

// Number of micro-steps of length dt that make up t; t must be a multiple of dt.
inline std::size_t steps_for(double t, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be > 0");
  if (t < 0.0 && !same_time(t, 0.0)) throw OffGrid("negative time " + std::to_string(t));
  const double r = t / dt;
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-6) throw OffGrid("time " + std::to_string(t) + " is not a multiple of dt = " + std::to_string(dt));
  return static_cast<std::size_t>(k);
}

// 0, h, 2h, ..., n h with n h = t_max (t_max must be a multiple of h).
inline std::vector<double> uniform_grid(double t_max, double spacing) {
  const std::size_t n = steps_for(t_max, spacing);
  std::vector<double> g(n + 1);
  for (std::size_t i = 0; i <= n; ++i) g[i] = static_cast<double>(i) * spacing;
  return g;
}

inline std::size_t find_grid_index(const std::vector<double>& grid, double t) {
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (same_time(grid[i], t)) return i;
  throw OffGrid("time " + std::to_string(t) + " is not on the grid");
}

inline void validate_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw InvalidArgument("time grid is empty");
  if (!same_time(grid.front(), 0.0)) throw InvalidArgument("time grid must start at 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw InvalidArgument("time grid must be strictly increasing");
}

inline bool is_uniform(const std::vector<double>& grid, double rel_tol = 1e-9) {
  if (grid.size() < 2) return true;
  const double h = grid[1] - grid[0];
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (std::abs((grid[i] - grid[i - 1]) - h) > rel_tol * (1.0 + h) * static_cast<double>(grid.size())) return false;
  return true;
}

// Two-time series G(t_i, t_j) on the lower triangle t_j <= t_i of a uniform grid
// starting at 0 (t_i plays t', the later time).
struct CorrelationSeries {
  std::vector<double> t_grid;
  std::vector<std::complex<double>> values;
  std::vector<double> se_re;  // empty for deterministic series
  std::vector<double> se_im;
  std::size_t n_traj = 0;
  std::size_t n_dropped = 0;
  std::string method;

  static std::size_t tri(std::size_t i, std::size_t j) { return i * (i + 1) / 2 + j; }
  static std::size_t tri_size(std::size_t n) { return n * (n + 1) / 2; }

  std::complex<double> at(std::size_t i, std::size_t j) const {
    if (j > i) throw InvalidArgument("correlation series stores t'' <= t' only");
    return values.at(tri(i, j));
  }

  void resize(std::vector<double> grid) {
    t_grid = std::move(grid);
    values.assign(tri_size(t_grid.size()), {});
  }
};

}  // namespace qsdc
