#include <gtest/gtest.h>

#include <random>

#include "fluxlab/domain_fields.hpp"

using namespace fluxlab;

namespace {

Vec2 fd_gradient(const PeriodicPotential& u, const Vec2& x, double h) {
  return Vec2((u.value(x + Vec2(h, 0)) - u.value(x - Vec2(h, 0))) / (2 * h),
              (u.value(x + Vec2(0, h)) - u.value(x - Vec2(0, h))) / (2 * h));
}

}  // namespace

TEST(Torus, RejectsBadPeriods) {
  EXPECT_THROW(Torus(2, Vec2(1, -1)), Error);
  EXPECT_THROW(Torus(3, Vec2(1, 1)), Error);
}

TEST(Torus, WrapAndDisplacement) {
  Torus t = Torus::square(1.0);
  Vec2 w = t.wrap(Vec2(-0.25, 2.5));
  EXPECT_NEAR(w[0], 0.75, 1e-15);
  EXPECT_NEAR(w[1], 0.5, 1e-15);
  EXPECT_NEAR(t.distance(Vec2(0.05, 0), Vec2(0.95, 0)), 0.1, 1e-14);
}

TEST(Potential, Nr2006DriftVanishesAtMinimum) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.0);
  const double r = std::sqrt(15.0);
  Vec2 v(std::numbers::pi / 2 + r, std::numbers::pi / 2);
  EXPECT_LT(eval_drift(d, v).norm(), 1e-13);
}

TEST(Potential, ZeroPotentialDriftIsTilt) {
  TiltedDrift d(PeriodicPotential::zero(), 0.7);
  Vec2 v = eval_drift(d, Vec2(1.3, 4.0));
  EXPECT_DOUBLE_EQ(v[0], 0.7);
  EXPECT_DOUBLE_EQ(v[1], 0.0);
}

TEST(Potential, GradientMatchesFiniteDifferences) {
  std::vector<PeriodicPotential> ps = {PeriodicPotential::nr2006(), PeriodicPotential::cos2d(),
                                       PeriodicPotential::twowell(),
                                       PeriodicPotential::trig(Torus(2, Vec2(2.0, 3.0)),
                                                               {{1, 2, 0.3, 0.1}, {2, -1, 0.7, 1.2}})};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0, 6);
  for (const auto& p : ps) {
    for (int k = 0; k < 50; ++k) {
      Vec2 x(U(rng), U(rng));
      Vec2 g = p.gradient(x), f = fd_gradient(p, x, 1e-6);
      EXPECT_LT((g - f).norm(), 1e-6 * std::max(1.0, g.norm()));
      Mat2 h = p.hessian(x);
      const double e = 1e-5;
      Mat2 hf;
      hf.col(0) = (p.gradient(x + Vec2(e, 0)) - p.gradient(x - Vec2(e, 0))) / (2 * e);
      hf.col(1) = (p.gradient(x + Vec2(0, e)) - p.gradient(x - Vec2(0, e))) / (2 * e);
      EXPECT_LT((h - hf).norm(), 1e-6 * std::max(1.0, h.norm()));
    }
  }
}

TEST(Potential, Periodicity) {
  std::vector<PeriodicPotential> ps = {PeriodicPotential::nr2006(), PeriodicPotential::cos2d(),
                                       PeriodicPotential::twowell()};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-10, 10);
  for (const auto& p : ps) {
    const Vec2 L = p.torus().periods;
    for (int k = 0; k < 1000; ++k) {
      Vec2 x(U(rng), U(rng));
      EXPECT_LT(std::abs(p.value(x) - p.value(x + Vec2(L[0], 0))), 1e-12);
      EXPECT_LT(std::abs(p.value(x) - p.value(x + Vec2(0, L[1]))), 1e-12);
    }
  }
}

TEST(Potential, GridInterpolantReproducesSmoothField) {
  const int n = 128;
  Torus t = Torus::square();
  auto ref = PeriodicPotential::cos2d();
  std::vector<double> s(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) s[j * n + i] = ref.value(Vec2(i * kTwoPi / n, j * kTwoPi / n));
  auto g = PeriodicPotential::grid(t, n, n, s);
  for (double x : {0.1, 1.7, 4.4, 6.2}) {
    Vec2 p(x, 2.0 * x);
    EXPECT_NEAR(g.value(p), ref.value(p), 1e-4);
    EXPECT_LT((g.gradient(p) - ref.gradient(p)).norm(), 1e-3);
    EXPECT_NEAR(g.value(p + Vec2(kTwoPi, 0)), g.value(p), 1e-12);
  }
  // mixed partials agree
  for (double x : {0.3, 2.1}) {
    Mat2 h = g.hessian(Vec2(x, x + 1));
    EXPECT_NEAR(h(0, 1), h(1, 0), 1e-12);
  }
}

TEST(LiftPrimitive, DeckTranslationShiftsByTilt) {
  const double c = 0.13;
  TiltedDrift d(PeriodicPotential::nr2006(), c);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0, kTwoPi);
  for (int k = 0; k < 100; ++k) {
    Vec2 x(U(rng), U(rng));
    EXPECT_NEAR(d.lifted(x + Vec2(kTwoPi, 0)) - d.lifted(x), -kTwoPi * c, 1e-12);
    EXPECT_NEAR(d.lifted(x + Vec2(0, kTwoPi)) - d.lifted(x), 0.0, 1e-12);
    EXPECT_NEAR(d.lifted(x), d.potential().value(x) - c * x[0], 1e-12);
  }
  TiltedDrift d0(PeriodicPotential::nr2006(), 0.0);
  EXPECT_NEAR(d0.lifted(Vec2(1, 2) + Vec2(kTwoPi, 0)), d0.lifted(Vec2(1, 2)), 1e-12);
}

TEST(LiftPrimitive, MinusGradientOfLiftIsDrift) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.2, Vec2(1, 1));
  Vec2 x(1.0, 1.0);
  const double h = 1e-6;
  Vec2 fd(-(d.lifted(x + Vec2(h, 0)) - d.lifted(x - Vec2(h, 0))) / (2 * h),
          -(d.lifted(x + Vec2(0, h)) - d.lifted(x - Vec2(0, h))) / (2 * h));
  EXPECT_LT((fd - d(x)).norm(), 1e-8);
}

TEST(LineIntegral, FundamentalLoop) {
  Torus t = Torus::square();
  LiftedPath p;
  for (int i = 0; i <= 10; ++i) p.points.emplace_back(kTwoPi * i / 10, 0.5);
  EXPECT_NEAR(line_integral(ClosedOneForm::dx(t), p), kTwoPi, 1e-14);
  EXPECT_NEAR(line_integral(ClosedOneForm::dy(t), p), 0, 1e-14);
  ClosedOneForm exact(t, Vec2::Zero(), PeriodicPotential::nr2006());
  EXPECT_NEAR(line_integral(exact, p), 0, 1e-13);
}

TEST(LineIntegral, HarmonicLoopValues) {
  Torus t(2, Vec2(2.0, 5.0));
  ClosedOneForm a(t, Vec2(0.3, -1.1), PeriodicPotential::trig(t, {{1, 1, 0.5, 0.2}}));
  EXPECT_NEAR(a.integral(Vec2(0.1, 0.2), Vec2(2.1, 0.2)), 0.3 * 2.0, 1e-13);
  EXPECT_NEAR(a.integral(Vec2(0.1, 0.2), Vec2(0.1, 5.2)), -1.1 * 5.0, 1e-13);
  auto b = a.plus_exact(PeriodicPotential::trig(t, {{2, 1, 0.4, 0.0}}));
  EXPECT_NEAR(b.integral(Vec2(0.1, 0.2), Vec2(2.1, 0.2)), 0.3 * 2.0, 1e-13);
}

TEST(LineIntegral, AdditiveAndAntisymmetric) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.3);
  auto a = d.form();
  LiftedPath p{{Vec2(0, 0), Vec2(1, 2), Vec2(3, 1)}}, q{{Vec2(3, 1), Vec2(5, 0), Vec2(7, 3)}};
  LiftedPath pq{{Vec2(0, 0), Vec2(1, 2), Vec2(3, 1), Vec2(5, 0), Vec2(7, 3)}};
  EXPECT_NEAR(line_integral(a, pq), line_integral(a, p) + line_integral(a, q), 1e-12);
  LiftedPath r{{Vec2(7, 3), Vec2(5, 0), Vec2(3, 1), Vec2(1, 2), Vec2(0, 0)}};
  EXPECT_NEAR(line_integral(a, r), -line_integral(a, pq), 1e-12);
}

TEST(LineIntegral, DriftFormFromMinimumToLowSaddle) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.0);
  const double r = std::sqrt(15.0), pi = std::numbers::pi;
  Vec2 v(pi / 2 + r, pi / 2), s1(3 * pi / 2 - r, 3 * pi / 2);
  LiftedPath p{{v, s1}};
  EXPECT_NEAR(line_integral(d.form(), p), -2.0, 1e-12);
}

TEST(LineIntegral, AmbiguousWindingRejected) {
  Torus t = Torus::square();
  std::vector<Vec2> pts{Vec2(0.1, 0.1), Vec2(6.0, 0.1)};
  EXPECT_THROW(lift_path(t, pts), Error);
  std::vector<Vec2i> off{Vec2i(0, 0), Vec2i(-1, 0)};
  auto lp = lift_path(t, pts, &off);
  EXPECT_NEAR(line_integral(ClosedOneForm::dx(t), lp), 6.0 - kTwoPi - 0.1, 1e-12);
}
