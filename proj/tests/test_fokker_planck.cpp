#include <gtest/gtest.h>

#include <random>

#include "fluxlab/fokker_planck.hpp"

using namespace fluxlab;

namespace {

double fp_flux(const TiltedDrift& d, double eps, int n) {
  return flux(solve_stationary(d, eps, n), ClosedOneForm::dx(d.torus())).value;
}

}  // namespace

TEST(Bernoulli, SmallArgumentContinuity) {
  EXPECT_NEAR(bernoulli(1e-9), bernoulli(1.1e-8), 1e-8);
  EXPECT_NEAR(bernoulli(2.0), 2.0 / std::expm1(2.0), 1e-15);
  EXPECT_NEAR(bernoulli(-3.0) - bernoulli(3.0), 3.0, 1e-14);
}

TEST(Stationary, GradientDriftIsGibbs) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.0);
  auto f = solve_stationary(d, 0.3, 128);
  EXPECT_LT(f.max_current, 1e-8);
  EXPECT_LT(std::abs(flux(f, ClosedOneForm::dx(d.torus())).value), 1e-10);
  // rho ratios follow exp(-dU/eps) exactly
  double worst = 0;
  for (int j = 0; j < f.n2; j += 7)
    for (int i = 0; i < f.n1; i += 5) {
      const double lhs = std::log(f.rho[f.idx(i, j)] / f.rho[0]);
      const double rhs = -(d.potential().value(f.center(i, j)) - d.potential().value(f.center(0, 0))) / f.eps;
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  EXPECT_LT(worst, 1e-8);
}

TEST(Stationary, NormalizedAndPositive) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.2);
  auto f = solve_stationary(d, 0.25, 256);
  double s = 0;
  for (double r : f.rho) {
    EXPECT_GT(r, 0);
    s += r * f.cell_volume();
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Stationary, PropertySuite256) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.2);
  auto f = solve_stationary(d, 0.2, 256);
  EXPECT_LT(f.div_residual, 1e-10);
  auto dx = ClosedOneForm::dx(d.torus());
  auto F = flux(f, dx);
  EXPECT_GT(F.value, 0);
  EXPECT_NEAR(F.value, F.hypersurface, 1e-8 * std::abs(F.value));
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> A(-1, 1), P(0, kTwoPi);
  for (int t = 0; t < 3; ++t) {
    auto phi = PeriodicPotential::trig(d.torus(), {{1, 0, A(rng), P(rng)}, {1, 2, A(rng), P(rng)}, {3, -1, A(rng), P(rng)}});
    EXPECT_NEAR(flux(f, dx.plus_exact(phi)).value, F.value, 1e-8 * std::abs(F.value));
    ClosedOneForm exact(d.torus(), Vec2::Zero(), phi);
    EXPECT_LT(std::abs(flux(f, exact).value), 1e-10);
  }
  auto ep = entropy_production_check(f, d);
  EXPECT_LT(ep.residual, 1e-5);
  EXPECT_GT(ep.lhs, 0);
}

TEST(Stationary, GridMismatchRejected) {
  TiltedDrift d(PeriodicPotential::cos2d(), 0.2);
  auto f = solve_stationary(d, 0.5, 32);
  try {
    flux(f, ClosedOneForm::dx(Torus(2, Vec2(1, 1))));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
  }
}

TEST(Stationary, GridTooCoarseRejected) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.2);
  try {
    solve_stationary(d, 0.05, 64);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridTooCoarse);
  }
}

TEST(Stationary, GridConvergence2d) {
  TiltedDrift d(PeriodicPotential::cos2d(), 0.3, Vec2(1, 0.5));
  const double f1 = fp_flux(d, 0.5, 48), f2 = fp_flux(d, 0.5, 96), f3 = fp_flux(d, 0.5, 192);
  const double limit = (4 * f3 - f2) / 3;
  EXPECT_GE(std::abs(f1 - limit) / std::abs(f2 - limit), 3.0);
}

TEST(Stationary1d, MatchesClosedForm) {
  auto U = PeriodicPotential::cos1d();
  TiltedDrift d(U, 0.2);
  for (double eps : {0.05, 0.1, 0.2}) {
    const double cf = flux_1d_closed_form(U, 0.2, eps).flux;
    EXPECT_NEAR(fp_flux(d, eps, 1 << 16) / cf, 1.0, 1e-6) << eps;
  }
}

TEST(Stationary1d, DensityMatchesQuadratureOracle) {
  // rho(x) = J/eps * e^{-U(x)/eps} * int_x^{x+tau} e^{U(y)/eps} dy
  auto U = PeriodicPotential::cos1d();
  const double c = 0.2, eps = 0.1;
  TiltedDrift d(U, c);
  auto f = solve_stationary(d, eps, 1 << 16);
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  auto ut = [&](double x) { return d.lifted(Vec2(x, 0)); };
  auto shape = [&](double x) {
    return GK::integrate([&](double y) { return std::exp((ut(y) - ut(x)) / eps); }, x, x + kTwoPi, 20, 1e-12);
  };
  const double z = GK::integrate(shape, 0.0, kTwoPi, 20, 1e-12);
  for (int k : {0, 1000, 20000, 41000, 60000}) {
    const double x = f.center(k, 0)[0];
    EXPECT_NEAR(f.rho[k] / (shape(x) / z), 1.0, 1e-6);
  }
}

TEST(Stationary1d, EntropyIdentity) {
  TiltedDrift d(PeriodicPotential::cos1d(), 0.2);
  auto f = solve_stationary(d, 0.1, 1 << 14);
  EXPECT_LT(entropy_production_check(f, d).residual, 1e-6);
}

TEST(ClosedForm, VanishesWithTilt) {
  auto U = PeriodicPotential::cos1d();
  const double a = flux_1d_closed_form(U, 1e-3, 0.2).flux, b = flux_1d_closed_form(U, 1e-6, 0.2).flux;
  EXPECT_LT(b, a);
  EXPECT_LT(b, 1e-7);
}

TEST(ClosedForm, RequiresPositiveTilt) { EXPECT_THROW(flux_1d_closed_form(PeriodicPotential::cos1d(), 0.0, 0.1), Error); }

TEST(ClosedForm, LaplaceExponent) {
  auto U = PeriodicPotential::cos1d();
  const double psi = max_climb_1d(U, 0.2);
  EXPECT_NEAR(psi, 1.4118, 1e-3);
  const double e = 0.02;
  EXPECT_NEAR(-e * flux_1d_closed_form(U, 0.2, e).log_flux, psi, 0.1 * psi);
}
