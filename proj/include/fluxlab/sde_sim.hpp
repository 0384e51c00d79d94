#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include "fluxlab/domain_fields.hpp"

namespace fluxlab {

struct SdeOptions {
  double eps = 0.1;
  double dt = 1e-3;
  double T = 1000;
  int batch = 100;
  std::uint64_t seed = 1;
  int jobs = 1;
  double burn_in_fraction = 0.1;
};

struct SdeEstimate {
  std::vector<double> mean;    // one per form
  std::vector<double> stderr_;  // standard error of the batch mean
  std::vector<std::vector<double>> samples;  // per form, per sample time averages
};

namespace detail {

inline void check_step(const TiltedDrift& d, const SdeOptions& o) {
  if (!(o.dt > 0) || !(o.T > 0) || !(o.eps > 0) || o.batch < 2)
    fail(ErrorCode::InvalidInput, "need dt, T, eps > 0 and batch >= 2");
  const Torus& T = d.torus();
  const int n = 64;
  double vmax = 0;
  for (int j = 0; j < (T.dim == 2 ? n : 1); ++j)
    for (int i = 0; i < n; ++i) vmax = std::max(vmax, d(Vec2(T.periods[0] * i / n, T.periods[1] * j / n)).norm());
  const double step = o.dt * vmax + 3 * std::sqrt(2 * o.eps * o.dt);
  if (!(step < 0.5 * T.min_period())) fail(ErrorCode::StepTooLarge, "dt*max|v| + 3*sqrt(2 eps dt) = " + std::to_string(step));
}

/// Lifted endpoint of one Euler-Maruyama sample after burn-in; returns (start, end).
inline std::pair<Vec2, Vec2> run_sample(const TiltedDrift& d, const SdeOptions& o, std::uint64_t sample) {
  std::seed_seq seq{static_cast<std::uint32_t>(o.seed), static_cast<std::uint32_t>(o.seed >> 32),
                    static_cast<std::uint32_t>(sample), static_cast<std::uint32_t>(sample >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Torus& T = d.torus();
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Vec2 x(uni(rng) * T.periods[0], T.dim == 2 ? uni(rng) * T.periods[1] : 0.0);
  const double sigma = std::sqrt(2 * o.eps * o.dt);
  const long burn = std::lround(o.burn_in_fraction * o.T / o.dt);
  const long steps = std::lround(o.T / o.dt);
  auto step = [&]() {
    Vec2 xi(normal(rng), T.dim == 2 ? normal(rng) : 0.0);
    x += d(x) * o.dt + sigma * xi;
  };
  for (long k = 0; k < burn; ++k) step();
  const Vec2 start = x;
  for (long k = 0; k < steps; ++k) step();
  return {start, x};
}

}  // namespace detail

/// Monte-Carlo flux: batch mean of (1/T) times the line integral along lifted sample paths.
inline SdeEstimate estimate_flux(const TiltedDrift& drift, const std::vector<ClosedOneForm>& forms, const SdeOptions& o) {
  detail::check_step(drift, o);
  for (const auto& f : forms)
    if ((f.torus().periods - drift.torus().periods).norm() > 1e-12 || f.torus().dim != drift.dim())
      fail(ErrorCode::GridMismatch, "form and drift live on different tori");
  std::vector<std::pair<Vec2, Vec2>> ends(o.batch);
  const int jobs = std::max(1, std::min(o.jobs, o.batch));
  std::vector<std::thread> pool;
  for (int w = 0; w < jobs; ++w)
    pool.emplace_back([&, w]() {
      for (int s = w; s < o.batch; s += jobs) ends[s] = detail::run_sample(drift, o, static_cast<std::uint64_t>(s));
    });
  for (auto& t : pool) t.join();

  SdeEstimate est;
  for (const auto& f : forms) {
    std::vector<double> v(o.batch);
    double m = 0;
    for (int s = 0; s < o.batch; ++s) {
      v[s] = f.integral(ends[s].first, ends[s].second) / o.T;
      m += v[s];
    }
    m /= o.batch;
    double var = 0;
    for (double x : v) var += (x - m) * (x - m);
    var /= (o.batch - 1);
    est.mean.push_back(m);
    est.stderr_.push_back(std::sqrt(var / o.batch));
    est.samples.push_back(std::move(v));
  }
  return est;
}

inline SdeEstimate estimate_flux(const TiltedDrift& drift, const ClosedOneForm& form, const SdeOptions& o) {
  return estimate_flux(drift, std::vector<ClosedOneForm>{form}, o);
}

}  // namespace fluxlab
