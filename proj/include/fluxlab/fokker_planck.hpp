#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fluxlab/domain_fields.hpp"

namespace fluxlab {

/// Bernoulli function z / (e^z - 1).
inline double bernoulli(double z) {
  if (std::abs(z) < 1e-8) return 1.0 - 0.5 * z;
  return z / std::expm1(z);
}

/// Neumaier compensated sum.
struct CompensatedSum {
  double sum = 0, comp = 0;
  void add(double x) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

/// Stationary density on a periodic cell grid with face currents.
/// Cell (i,j) is centred at (i*h1, j*h2). Face x(i,j) joins (i,j) to (i+1,j); face y(i,j) joins (i,j) to (i,j+1).
struct StationaryField {
  Torus torus;
  int n1 = 0, n2 = 1;
  double eps = 0;
  std::vector<double> rho;
  std::vector<double> jx, jy;  // face-normal currents
  std::vector<double> px, py;  // Peclet numbers: drift line integral over the face segment / eps
  double div_residual = 0;     // max |net outflow| per cell
  double max_current = 0;

  double h1() const { return torus.periods[0] / n1; }
  double h2() const { return torus.dim == 2 ? torus.periods[1] / n2 : 1.0; }
  double cell_volume() const { return h1() * h2(); }
  int dim() const { return torus.dim; }
  int idx(int i, int j) const { return ((j + n2) % n2) * n1 + ((i + n1) % n1); }
  Vec2 center(int i, int j) const { return Vec2(i * h1(), torus.dim == 2 ? j * h2() : 0.0); }
};

struct FpOptions {
  int refinement_steps = 3;
  double residual_tol = 1e-11;
  bool check_resolution = true;
};

namespace detail {

inline double max_drift_norm(const TiltedDrift& d, int n1, int n2) {
  const Torus& T = d.torus();
  double m = 0;
  for (int j = 0; j < n2; ++j)
    for (int i = 0; i < n1; ++i)
      m = std::max(m, d(Vec2(i * T.periods[0] / n1, T.dim == 2 ? j * T.periods[1] / n2 : 0.0)).norm());
  return m;
}

inline void compute_currents(StationaryField& f) {
  const double e = f.eps;
  const int N = f.n1 * f.n2;
  f.jx.assign(N, 0);
  f.jy.assign(f.dim() == 2 ? N : 0, 0);
  f.max_current = 0;
  for (int j = 0; j < f.n2; ++j)
    for (int i = 0; i < f.n1; ++i) {
      const int a = f.idx(i, j);
      const double P = f.px[a];
      f.jx[a] = e / f.h1() * (bernoulli(-P) * f.rho[a] - bernoulli(P) * f.rho[f.idx(i + 1, j)]);
      f.max_current = std::max(f.max_current, std::abs(f.jx[a]));
      if (f.dim() == 2) {
        const double Q = f.py[a];
        f.jy[a] = e / f.h2() * (bernoulli(-Q) * f.rho[a] - bernoulli(Q) * f.rho[f.idx(i, j + 1)]);
        f.max_current = std::max(f.max_current, std::abs(f.jy[a]));
      }
    }
  f.div_residual = 0;
  const double ax = f.dim() == 2 ? f.h2() : 1.0, ay = f.h1();
  for (int j = 0; j < f.n2; ++j)
    for (int i = 0; i < f.n1; ++i) {
      double out = (f.jx[f.idx(i, j)] - f.jx[f.idx(i - 1, j)]) * ax;
      if (f.dim() == 2) out += (f.jy[f.idx(i, j)] - f.jy[f.idx(i, j - 1)]) * ay;
      f.div_residual = std::max(f.div_residual, std::abs(out));
    }
}

/// Exact 1D ring solution of the discrete scheme (constant current).
inline void solve_ring_1d(StationaryField& f, const TiltedDrift& d) {
  const int n = f.n1;
  const double h = f.h1(), e = f.eps, L = f.torus.periods[0];
  const double drop = d.c() * d.direction()[0] * L;  // lifted value falls by this much per period
  std::vector<long double> R(n);
  if (drop == 0) {
    double umin = 1e300;
    for (int k = 0; k < n; ++k) umin = std::min(umin, d.lifted(f.center(k, 0)));
    for (int k = 0; k < n; ++k) R[k] = std::exp(-(static_cast<long double>(d.lifted(f.center(k, 0))) - umin) / e);
  } else {
    // S_k = sum_{i>=k} exp((U_{i+1}-U_k)/eps) / B(P_i) by backward recursion
    std::vector<long double> S(n + 1, 0.0L);
    for (int k = n - 1; k >= 0; --k)
      S[k] = std::exp(-static_cast<long double>(f.px[k])) * (1.0L / bernoulli(f.px[k]) + S[k + 1]);
    const long double u0 = d.lifted(f.center(0, 0));
    const long double em = std::expm1(static_cast<long double>(drop) / e);
    for (int k = 0; k < n; ++k) {
      const long double uk = d.lifted(f.center(k, 0));
      R[k] = S[k] + S[0] * std::exp((u0 - uk) / e) / em;
    }
  }
  long double z = 0;
  for (auto r : R) z += r;
  f.rho.resize(n);
  for (int k = 0; k < n; ++k) f.rho[k] = static_cast<double>(R[k] / (z * h));
  // rho_k = (J h / eps) R_k with sum rho_k h = 1
  const double J = drop == 0 ? 0.0 : static_cast<double>(e / (h * h * z));
  f.jx.assign(n, J);
  f.max_current = std::abs(J);
  f.div_residual = 0;
}

}  // namespace detail

/// Solves the stationary Fokker-Planck equation with Scharfetter-Gummel face fluxes.
inline StationaryField solve_stationary(const TiltedDrift& drift, double eps, int n1, int n2 = 0,
                                        const FpOptions& opt = {}) {
  const Torus& T = drift.torus();
  if (!(eps > 0)) fail(ErrorCode::InvalidInput, "eps must be positive");
  if (T.dim == 1) n2 = 1;
  if (T.dim == 2 && n2 == 0) n2 = n1;
  if (n1 < 32 || (T.dim == 2 && n2 < 32)) fail(ErrorCode::InvalidInput, "grid must have at least 32 cells per axis");
  StationaryField f;
  f.torus = T;
  f.n1 = n1;
  f.n2 = n2;
  f.eps = eps;
  const double h = std::max(f.h1(), T.dim == 2 ? f.h2() : 0.0);
  if (opt.check_resolution) {
    const double vmax = detail::max_drift_norm(drift, n1, n2);
    if (eps < vmax * h / 2)
      fail(ErrorCode::GridTooCoarse, "eps " + std::to_string(eps) + " below max|v|*h/2 = " + std::to_string(vmax * h / 2));
  }
  const int N = n1 * n2;
  f.px.resize(N);
  if (T.dim == 2) f.py.resize(N);
  std::vector<double> u(N);
  for (int j = 0; j < n2; ++j)
    for (int i = 0; i < n1; ++i) {
      const int a = f.idx(i, j);
      const Vec2 x = f.center(i, j);
      const double ux = drift.lifted(x);
      u[a] = drift.potential().value(x);
      f.px[a] = -(drift.lifted(x + Vec2(f.h1(), 0)) - ux) / eps;
      if (T.dim == 2) f.py[a] = -(drift.lifted(x + Vec2(0, f.h2())) - ux) / eps;
    }

  if (T.dim == 1) {
    detail::solve_ring_1d(f, drift);
    return f;
  }

  // Slotboom scaling rho = exp(-(U - Umin)/eps) w keeps the unknowns O(1).
  const double umin = *std::min_element(u.begin(), u.end());
  std::vector<double> g(N);
  for (int a = 0; a < N; ++a) g[a] = std::exp(-(u[a] - umin) / eps);
  const int anchor = static_cast<int>(std::min_element(u.begin(), u.end()) - u.begin());

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(5 * N);
  const double cx = eps / f.h1() * f.h2(), cy = eps / f.h2() * f.h1();
  auto add_face = [&](int a, int b, double P, double coef) {
    // outflow from a through the face a->b, row scaled by 1/g[a]
    if (a != anchor) {
      trip.emplace_back(a, a, coef * bernoulli(-P));
      trip.emplace_back(a, b, -coef * bernoulli(P) * g[b] / g[a]);
    }
    if (b != anchor) {
      trip.emplace_back(b, b, coef * bernoulli(P));
      trip.emplace_back(b, a, -coef * bernoulli(-P) * g[a] / g[b]);
    }
  };
  for (int j = 0; j < n2; ++j)
    for (int i = 0; i < n1; ++i) {
      const int a = f.idx(i, j);
      add_face(a, f.idx(i + 1, j), f.px[a], cx);
      add_face(a, f.idx(i, j + 1), f.py[a], cy);
    }
  trip.emplace_back(anchor, anchor, 1.0);
  Eigen::SparseMatrix<double> A(N, N);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
  rhs[anchor] = 1.0;

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) fail(ErrorCode::NotConverged, "sparse LU factorization failed");
  Eigen::VectorXd w = lu.solve(rhs);
  for (int it = 0; it < opt.refinement_steps; ++it) {
    Eigen::VectorXd r = rhs - A * w;
    if (r.cwiseAbs().maxCoeff() < 1e-16 * w.cwiseAbs().maxCoeff()) break;
    w += lu.solve(r);
  }
  const double wres = (rhs - A * w).cwiseAbs().maxCoeff() / w.cwiseAbs().maxCoeff();
  if (!(wres < opt.residual_tol)) fail(ErrorCode::NotConverged, "linear residual " + std::to_string(wres));

  f.rho.resize(N);
  CompensatedSum z;
  for (int a = 0; a < N; ++a) {
    if (!(w[a] > 0)) fail(ErrorCode::NegativeDensity, "nonpositive density at cell " + std::to_string(a));
    f.rho[a] = g[a] * w[a];
    z.add(f.rho[a]);
  }
  const double norm = z.value() * f.cell_volume();
  for (auto& r : f.rho) r /= norm;
  detail::compute_currents(f);
  return f;
}

enum class FluxMethod { FpVolume, FpHypersurface, Sde, ClosedForm1d };

inline const char* method_name(FluxMethod m) {
  switch (m) {
    case FluxMethod::FpVolume: return "fp-volume";
    case FluxMethod::FpHypersurface: return "fp-hypersurface";
    case FluxMethod::Sde: return "sde";
    case FluxMethod::ClosedForm1d: return "closed-form-1d";
  }
  return "";
}

struct FluxEstimate {
  double value = 0;
  double eps = 0;
  FluxMethod method = FluxMethod::FpVolume;
  double uncertainty = 0;
  double hypersurface = 0;  // companion value for FP estimates
};

inline FluxEstimate flux(const StationaryField& f, const ClosedOneForm& form) {
  if (form.torus().dim != f.torus.dim || (form.torus().periods - f.torus.periods).norm() > 1e-12)
    fail(ErrorCode::GridMismatch, "form and field live on different tori");
  CompensatedSum vol;
  const double ax = f.dim() == 2 ? f.h2() : 1.0;
  for (int j = 0; j < f.n2; ++j)
    for (int i = 0; i < f.n1; ++i) {
      const int a = f.idx(i, j);
      const Vec2 x = f.center(i, j);
      vol.add(f.jx[a] * form.integral(x, x + Vec2(f.h1(), 0)) * ax);
      if (f.dim() == 2) vol.add(f.jy[a] * form.integral(x, x + Vec2(0, f.h2())) * f.h1());
    }
  // hypersurface form: harmonic coefficients times period times mean crossing current
  CompensatedSum sx, sy;
  for (int j = 0; j < f.n2; ++j)
    for (int i = 0; i < f.n1; ++i) {
      sx.add(f.jx[f.idx(i, j)] * ax);
      if (f.dim() == 2) sy.add(f.jy[f.idx(i, j)] * f.h1());
    }
  const Vec2& hc = form.harmonic();
  const double crossing_x = sx.value() / f.n1, crossing_y = f.dim() == 2 ? sy.value() / f.n2 : 0.0;
  FluxEstimate est;
  est.value = vol.value();
  est.eps = f.eps;
  est.method = FluxMethod::FpVolume;
  est.hypersurface = hc[0] * f.torus.periods[0] * crossing_x + (f.dim() == 2 ? hc[1] * f.torus.periods[1] * crossing_y : 0.0);
  return est;
}

struct EntropyCheck {
  double lhs = 0, rhs = 0, residual = 0;
};

/// Compares the flux of the drift's own form with the integral of |J|^2 / rho.
inline EntropyCheck entropy_production_check(const StationaryField& f, const TiltedDrift& drift) {
  const ClosedOneForm form = drift.form();
  EntropyCheck r;
  r.lhs = flux(f, form).value;
  CompensatedSum s;
  auto face = [&](double J, double P, double ri, double rj, double area) {
    if (J == 0) return;
    // SG-consistent face density: P rho_j (e^u - 1) / ((e^P - 1) u), u = P + ln(rho_i / rho_j)
    const double uu = P + std::log(ri / rj);
    const double ratio = std::abs(uu) < 1e-12 ? 1.0 + 0.5 * uu : std::expm1(uu) / uu;
    const double rho_f = bernoulli(P) * rj * ratio;
    s.add(J * J / rho_f * area);
  };
  const double vol = f.cell_volume();
  for (int j = 0; j < f.n2; ++j)
    for (int i = 0; i < f.n1; ++i) {
      const int a = f.idx(i, j);
      face(f.jx[a], f.px[a], f.rho[a], f.rho[f.idx(i + 1, j)], vol);
      if (f.dim() == 2) face(f.jy[a], f.py[a], f.rho[a], f.rho[f.idx(i, j + 1)], vol);
    }
  r.rhs = s.value();
  const double scale = std::max(std::abs(r.lhs), std::abs(r.rhs));
  r.residual = scale > 0 ? std::abs(r.lhs - r.rhs) / scale : 0.0;
  return r;
}

struct ClosedFormFlux {
  double flux = 0;
  double log_flux = 0;  // ln F, finite even when F underflows
  double quad_error = 0;
};

/// Closed-form 1D flux tau*eps*(1 - e^{-c tau/eps}) / double integral of e^{(U(y)-U(x))/eps}.
inline ClosedFormFlux flux_1d_closed_form(const PeriodicPotential& U, double c, double eps, double rel_tol = 1e-9) {
  if (U.dim() != 1) fail(ErrorCode::InvalidInput, "closed form needs a 1D potential");
  if (!(c > 0) || !(eps > 0)) fail(ErrorCode::InvalidInput, "closed form needs c > 0 and eps > 0");
  const double tau = U.torus().periods[0];
  auto ut = [&](double x) { return U.value(Vec2(x, 0)) - c * x; };
  // shift by the largest climb so the integrand peaks at 1
  const int scan = 4096;
  std::vector<double> vals(2 * scan + 1);
  for (int k = 0; k <= 2 * scan; ++k) vals[k] = ut(tau * k / scan);
  double shift = -1e300;
  for (int i = 0; i < scan; ++i)
    for (int k = i; k <= i + scan; ++k) shift = std::max(shift, vals[k] - vals[i]);
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  double err_total = 0;
  bool failed = false;
  auto inner = [&](double x) {
    const double ux = ut(x);
    double err = 0;
    const double v = GK::integrate([&](double y) { return std::exp((ut(y) - ux - shift) / eps); }, x, x + tau, 25,
                                   rel_tol * 0.1, &err);
    if (err > rel_tol * std::max(v, 1e-300) * 10 && err > 1e-300) failed = true;
    return v;
  };
  double err = 0;
  const double outer = GK::integrate(inner, 0.0, tau, 25, rel_tol, &err);
  err_total = err / outer;
  if (failed || !(err_total < rel_tol * 10) || !(outer > 0))
    fail(ErrorCode::QuadratureFailure, "relative error estimate " + std::to_string(err_total));
  ClosedFormFlux r;
  r.log_flux = std::log(tau * eps) + std::log(-std::expm1(-c * tau / eps)) - std::log(outer) - shift / eps;
  r.flux = std::exp(r.log_flux);
  r.quad_error = err_total;
  return r;
}

/// Largest climb max_{x, y in [x, x + tau]} (U(y) - U(x)) of the lifted 1D potential.
inline double max_climb_1d(const PeriodicPotential& U, double c, int samples = 20000) {
  const double tau = U.torus().periods[0];
  std::vector<double> v(2 * samples + 1);
  for (int k = 0; k <= 2 * samples; ++k) v[k] = U.value(Vec2(tau * k / samples, 0)) - c * tau * k / samples;
  // sliding-window maximum over [i, i + samples] with a monotone queue
  double best = -1e300;
  std::vector<int> dq;
  size_t head = 0;
  for (int k = 0; k <= 2 * samples; ++k) {
    while (dq.size() > head && v[dq.back()] <= v[k]) dq.pop_back();
    dq.push_back(k);
    const int i = k - samples;
    if (i >= 0) {
      while (dq[head] < i) ++head;
      best = std::max(best, v[dq[head]] - v[i]);
    }
  }
  return best;
}

}  // namespace fluxlab
