#include <gtest/gtest.h>

#include <random>

#include "fluxlab/action.hpp"
#include "fluxlab/morse_graph.hpp"

using namespace fluxlab;

namespace {

const double kPi = std::numbers::pi;
const double kR15 = std::sqrt(15.0);

/// Forward RK4 trajectory sampled every `stride` steps of size h.
DiscretePath integral_curve(const TiltedDrift& d, Vec2 x, double h, int steps, int stride) {
  DiscretePath p;
  p.knots.push_back(x);
  p.times.push_back(0);
  for (int s = 1; s <= steps; ++s) {
    x = detail::rk4_step(d, x, h);
    if (s % stride == 0) {
      p.knots.push_back(x);
      p.times.push_back(s * h);
    }
  }
  return p;
}

DiscretePath reversed(const DiscretePath& p) {
  DiscretePath r;
  const double T = p.times.back();
  for (size_t k = p.knots.size(); k-- > 0;) {
    r.knots.push_back(p.knots[k]);
    r.times.push_back(T - p.times[k]);
  }
  return r;
}

const MorseEdge& low_edge(const MorseGraph& g) {
  for (const auto& e : g.edges)
    if (std::abs(e.gain - 2) < 1e-6) return e;
  throw std::runtime_error("no low edge");
}

}  // namespace

TEST(Action, ForwardIntegralCurveIsFree) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.1);
  auto p = integral_curve(d, Vec2(1.0, 2.0), 1e-3, 10000, 1);
  EXPECT_LT(action(d, p), 1e-6);
}

TEST(Action, ReversedCurveCostsPotentialClimb) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.0);
  Vec2 s1(3 * kPi / 2 - kR15, 3 * kPi / 2);
  Eigen::SelfAdjointEigenSolver<Mat2> es(d.potential().hessian(s1));
  const Vec2 u = es.eigenvectors().col(0);
  auto fwd = integral_curve(d, s1 + 1e-3 * u, 1e-3, 150000, 10);
  auto rev = reversed(fwd);
  const double climb = d.lifted(rev.knots.back()) - d.lifted(rev.knots.front());
  EXPECT_NEAR(action(d, rev), climb, 1e-4);
  EXPECT_NEAR(climb, 2.0, 1e-3);
}

TEST(Action, AltExpressionAndBounds) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.2);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> N(0, 0.05);
  std::uniform_real_distribution<double> U(0, kTwoPi);
  for (int t = 0; t < 1000; ++t) {
    std::vector<Vec2> k{Vec2(U(rng), U(rng))};
    for (int i = 0; i < 40; ++i) k.push_back(k.back() + Vec2(N(rng), N(rng)));
    auto p = DiscretePath::uniform(k, 0.5 + t % 7);
    const auto terms = action_terms(d, p);
    EXPECT_LT(std::abs(terms.action - (terms.plus_form - terms.cross)), 1e-10);
    EXPECT_GE(terms.action, action_l2_bound(d, p) - 1e-12);
    EXPECT_GE(terms.action, 0.0);
  }
}

TEST(Action, LowerBoundByClimbOnGradientDrift) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.0);
  std::mt19937_64 rng(37);
  std::normal_distribution<double> N(0, 0.02);
  for (int t = 0; t < 200; ++t) {
    std::vector<Vec2> k{Vec2(1, 1)};
    for (int i = 0; i < 400; ++i) k.push_back(k.back() + Vec2(N(rng), N(rng)));
    auto p = DiscretePath::uniform(k, 4.0);
    const double climb = d.lifted(k.back()) - d.lifted(k.front());
    EXPECT_GE(action(d, p), climb - 1e-3);
  }
}

TEST(ActionMin, IdentityIsZero) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.0);
  auto r = minimize_action(d, Vec2(1, 1), Vec2(1, 1));
  EXPECT_LT(r.value, 1e-12);
}

TEST(ActionMin, DownhillIsFree) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.0);
  auto g = build_morse_graph(d, find_critical_points(d));
  const auto& e = low_edge(g);
  auto r = minimize_action(d, e.saddle_lift, e.source_lift, {.horizons = {20, 40}, .knots_n = 200});
  EXPECT_LT(r.value, 1e-4);
}

TEST(ActionMin, LowEdgeApproachesGain) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.0);
  auto g = build_morse_graph(d, find_critical_points(d));
  const auto& e = low_edge(g);
  auto r = minimize_action(d, e.source_lift, e.saddle_lift, {.knots_n = 300});
  EXPECT_NEAR(r.value, 2.0, 0.04);
  EXPECT_GE(r.value, 2.0 - 1e-3);
}
