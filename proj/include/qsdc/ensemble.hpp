#pragma once

// Trajectory-parallel dispatch and order-independent ensemble statistics.
// Samples are stored by trajectory index and reduced in index order with
// pairwise summation, so results do not depend on the worker count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "qsdc/errors.hpp"

namespace qsdc {

inline unsigned resolve_threads(unsigned threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  return threads;
}

// Calls fn(i) for every i in [0, n) on up to `threads` workers. The first
// exception thrown by any call is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  workers.clear();
  if (error) std::rethrow_exception(error);
}

inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 8) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t h = x.size() / 2;
  return pairwise_sum(x.first(h)) + pairwise_sum(x.subspan(h));
}

struct RealEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

struct ComplexEstimate {
  std::complex<double> mean{};
  double se_re = 0.0;
  double se_im = 0.0;

  // |mean - ref| in units of the combined standard error, with an additive
  // floor for deterministic (zero-variance) estimators.
  bool within(std::complex<double> ref, double n_sigma, double floor = 0.0) const {
    return std::abs(mean.real() - ref.real()) <= n_sigma * se_re + floor &&
           std::abs(mean.imag() - ref.imag()) <= n_sigma * se_im + floor;
  }
};

// Per-component mean and standard error of fixed-length real samples.
struct EnsembleStats {
  std::vector<double> mean;
  std::vector<double> std_error;
  std::size_t n_traj = 0;
  std::size_t n_dropped = 0;

  RealEstimate real(std::size_t k) const { return {mean.at(k), std_error.at(k)}; }
  ComplexEstimate complex(std::size_t k) const {
    return {{mean.at(2 * k), mean.at(2 * k + 1)}, std_error.at(2 * k), std_error.at(2 * k + 1)};
  }
};

// Per-component sample moments; merged pairwise (Chan et al.) so batches can
// be reduced in a fixed order.
struct Moments {
  std::size_t n = 0;
  std::size_t n_dropped = 0;
  std::vector<double> mean;
  std::vector<double> m2;  // sum of squared deviations

  void merge(const Moments& b) {
    n_dropped += b.n_dropped;
    if (b.n == 0) return;
    if (n == 0) {
      const std::size_t dropped = n_dropped;
      *this = b;
      n_dropped = dropped;
      return;
    }
    if (b.mean.size() != mean.size()) throw DimensionMismatch("ensemble samples have different lengths");
    const double na = static_cast<double>(n), nb = static_cast<double>(b.n), nt = na + nb;
    for (std::size_t k = 0; k < mean.size(); ++k) {
      const double delta = b.mean[k] - mean[k];
      mean[k] += delta * nb / nt;
      m2[k] += b.m2[k] + delta * delta * na * nb / nt;
    }
    n += b.n;
  }
};

// Moments of samples[i] (nullopt = dropped trajectory), pairwise sums in index order.
inline Moments sample_moments(const std::vector<std::optional<std::vector<double>>>& samples) {
  Moments mo;
  std::vector<const std::vector<double>*> ok;
  ok.reserve(samples.size());
  for (const auto& s : samples) {
    if (s) ok.push_back(&*s);
    else ++mo.n_dropped;
  }
  mo.n = ok.size();
  if (ok.empty()) return mo;
  const std::size_t len = ok.front()->size();
  for (const auto* s : ok)
    if (s->size() != len) throw DimensionMismatch("ensemble samples have different lengths");
  mo.mean.assign(len, 0.0);
  mo.m2.assign(len, 0.0);
  std::vector<double> col(ok.size());
  const double n = static_cast<double>(ok.size());
  for (std::size_t k = 0; k < len; ++k) {
    for (std::size_t i = 0; i < ok.size(); ++i) col[i] = (*ok[i])[k];
    const double m = pairwise_sum(col) / n;
    for (double& v : col) v = (v - m) * (v - m);
    mo.mean[k] = m;
    mo.m2[k] = pairwise_sum(col);
  }
  return mo;
}

inline EnsembleStats finalize(const Moments& mo) {
  if (mo.n == 0) throw InvalidArgument("empty ensemble (all trajectories dropped or none run)");
  EnsembleStats st;
  st.n_traj = mo.n;
  st.n_dropped = mo.n_dropped;
  st.mean = mo.mean;
  st.std_error.assign(mo.mean.size(), 0.0);
  const double n = static_cast<double>(mo.n);
  if (mo.n > 1)
    for (std::size_t k = 0; k < mo.m2.size(); ++k) st.std_error[k] = std::sqrt(mo.m2[k] / (n - 1.0) / n);
  return st;
}

inline EnsembleStats reduce_samples(const std::vector<std::optional<std::vector<double>>>& samples) {
  return finalize(sample_moments(samples));
}

// Trajectories are processed in fixed batches of this many indices; each batch
// is reduced pairwise and batches are merged in index order.
inline constexpr std::size_t kEnsembleBatch = 256;

// Runs fn(trajectory_index) -> std::vector<double> for n_traj trajectories.
// A trajectory that throws Divergence is counted as dropped, never silently
// removed; any other exception propagates. Memory is bounded by one batch.
template <class Fn>
EnsembleStats run_ensemble(std::size_t n_traj, unsigned threads, Fn&& fn) {
  if (n_traj == 0) throw InvalidArgument("empty ensemble: n_traj = 0");
  Moments total;
  std::vector<std::optional<std::vector<double>>> samples;
  for (std::size_t begin = 0; begin < n_traj; begin += kEnsembleBatch) {
    const std::size_t count = std::min(kEnsembleBatch, n_traj - begin);
    samples.assign(count, std::nullopt);
    parallel_for(count, threads, [&](std::size_t i) {
      try {
        samples[i] = fn(begin + i);
      } catch (const Divergence&) {
        samples[i].reset();
      }
    });
    total.merge(sample_moments(samples));
  }
  return finalize(total);
}

inline void push_complex(std::vector<double>& out, std::complex<double> z) {
  out.push_back(z.real());
  out.push_back(z.imag());
}

}  // namespace qsdc
