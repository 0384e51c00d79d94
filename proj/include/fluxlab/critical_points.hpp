#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fluxlab/domain_fields.hpp"

namespace fluxlab {

struct CriticalPoint {
  Vec2 position = Vec2::Zero();
  int index = 0;
  double tilted_value = 0;  // lifted value at the fundamental-domain representative
  Vec2 hessian_eigs = Vec2::Zero();
  Mat2 hessian = Mat2::Zero();
  double newton_residual = 0;
};

struct CriticalPointOptions {
  int grid_n = 64;
  double newton_tol = 1e-12;
  int newton_iters = 50;
  double hyperbolic_tol = 1e-6;
  double dedup_factor = 1e-6;
};

struct Classification {
  int index = 0;
  Vec2 eigs = Vec2::Zero();
  Mat2 hessian = Mat2::Zero();
};

inline Classification classify(const TiltedDrift& drift, const Vec2& x, double hyperbolic_tol = 1e-6) {
  const double r = drift(x).norm();
  if (r >= 1e-8) fail(ErrorCode::NotAZero, "drift norm " + std::to_string(r));
  Mat2 h = -drift.jacobian(x);
  if (std::abs(h(0, 1) - h(1, 0)) > 1e-6) fail(ErrorCode::NonSymmetricJacobian, "drift Jacobian asymmetric");
  Classification c;
  c.hessian = h;
  if (drift.dim() == 1) {
    c.eigs = Vec2(h(0, 0), 0);
    c.index = h(0, 0) < 0 ? 1 : 0;
    if (std::abs(h(0, 0)) < hyperbolic_tol) fail(ErrorCode::DegenerateZero, "near-zero second derivative");
    return c;
  }
  Eigen::SelfAdjointEigenSolver<Mat2> es(h);
  c.eigs = es.eigenvalues();
  for (int i = 0; i < 2; ++i) {
    if (std::abs(c.eigs[i]) < hyperbolic_tol) fail(ErrorCode::DegenerateZero, "near-zero Hessian eigenvalue");
    if (c.eigs[i] < 0) ++c.index;
  }
  return c;
}

namespace detail {

/// Damped Newton on the drift. Returns false when it fails to converge.
inline bool newton_zero(const TiltedDrift& drift, Vec2& x, double tol, int iters, double& residual) {
  const Torus& T = drift.torus();
  const double max_step = 0.1 * T.min_period();
  for (int it = 0; it < iters; ++it) {
    Vec2 f = drift(x);
    residual = f.norm();
    if (residual < tol) return true;
    Vec2 step;
    if (drift.dim() == 1) {
      const double j = drift.jacobian(x)(0, 0);
      if (j == 0) return false;
      step = Vec2(-f[0] / j, 0);
    } else {
      Mat2 J = drift.jacobian(x);
      if (std::abs(J.determinant()) < 1e-14) return false;
      step = -J.partialPivLu().solve(f);
    }
    if (step.norm() > max_step) step *= max_step / step.norm();
    double lam = 1.0;
    Vec2 trial = x + step;
    while (lam > 1e-4 && drift(trial).norm() > residual) {
      lam *= 0.5;
      trial = x + lam * step;
    }
    x = trial;
  }
  residual = drift(x).norm();
  return residual < tol;
}

}  // namespace detail

/// All hyperbolic zeros of the drift, sorted by position.
inline std::vector<CriticalPoint> find_critical_points(const TiltedDrift& drift, const CriticalPointOptions& opt = {}) {
  if (opt.grid_n < 32) fail(ErrorCode::InvalidInput, "grid_n must be at least 32");
  const Torus& T = drift.torus();
  const int n = opt.grid_n;
  const int ny = drift.dim() == 1 ? 1 : n;
  const double hx = T.periods[0] / n, hy = T.periods[1] / ny;

  std::vector<Vec2> field(static_cast<size_t>(n) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < n; ++i) field[j * n + i] = drift(Vec2(i * hx, drift.dim() == 1 ? 0 : j * hy));

  std::vector<Vec2> seeds;
  auto has_sign_change = [](std::initializer_list<double> vals) {
    bool pos = false, neg = false;
    for (double v : vals) {
      if (v >= 0) pos = true;
      if (v <= 0) neg = true;
    }
    return pos && neg;
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < n; ++i) {
      const int i1 = (i + 1) % n;
      if (drift.dim() == 1) {
        if (has_sign_change({field[i][0], field[i1][0]})) seeds.emplace_back((i + 0.5) * hx, 0);
        continue;
      }
      const int j1 = (j + 1) % ny;
      const Vec2 &a = field[j * n + i], &b = field[j * n + i1], &c = field[j1 * n + i], &d = field[j1 * n + i1];
      if (has_sign_change({a[0], b[0], c[0], d[0]}) && has_sign_change({a[1], b[1], c[1], d[1]}))
        seeds.emplace_back((i + 0.5) * hx, (j + 0.5) * hy);
    }
  }

  const double dedup = opt.dedup_factor * T.min_period();
  std::vector<CriticalPoint> out;
  for (Vec2 x : seeds) {
    double res = 0;
    if (!detail::newton_zero(drift, x, opt.newton_tol, opt.newton_iters, res)) continue;
    x = T.wrap(x);
    bool dup = false;
    for (const auto& cp : out)
      if (T.distance(cp.position, x) < dedup) dup = true;
    if (dup) continue;
    CriticalPoint cp;
    cp.position = x;
    const auto cls = classify(drift, x, opt.hyperbolic_tol);
    cp.index = cls.index;
    cp.hessian_eigs = cls.eigs;
    cp.hessian = cls.hessian;
    cp.newton_residual = res;
    cp.tilted_value = drift.lifted(x);
    out.push_back(cp);
  }
  std::sort(out.begin(), out.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
    return a.position[0] < b.position[0] || (a.position[0] == b.position[0] && a.position[1] < b.position[1]);
  });

  int euler = 0;
  for (const auto& cp : out) euler += (cp.index % 2 == 0) ? 1 : -1;
  if (out.empty() || euler != 0)
    fail(ErrorCode::IncompleteSweep, "index sum " + std::to_string(euler) + " over " + std::to_string(out.size()) +
                                         " zeros; expected 0");
  return out;
}

inline std::vector<CriticalPoint> of_index(const std::vector<CriticalPoint>& cps, int index) {
  std::vector<CriticalPoint> r;
  for (const auto& c : cps)
    if (c.index == index) r.push_back(c);
  return r;
}

}  // namespace fluxlab
