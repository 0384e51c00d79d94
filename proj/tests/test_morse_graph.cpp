#include <gtest/gtest.h>

#include <algorithm>

#include "fluxlab/morse_graph.hpp"

using namespace fluxlab;

namespace {
const double kPi = std::numbers::pi;
const double kR15 = std::sqrt(15.0);

MorseGraph graph_for(const TiltedDrift& d) { return build_morse_graph(d, find_critical_points(d)); }
}  // namespace

TEST(MorseGraph, Nr2006AtZeroTilt) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.0);
  auto g = graph_for(d);
  EXPECT_EQ(g.vertices.size(), 1u);
  EXPECT_EQ(g.undirected_count(), 2u);
  std::vector<double> gains;
  for (const auto& e : g.edges) gains.push_back(e.gain);
  std::sort(gains.begin(), gains.end());
  ASSERT_EQ(gains.size(), 4u);
  EXPECT_NEAR(gains[0], 2, 1e-6);
  EXPECT_NEAR(gains[1], 2, 1e-6);
  EXPECT_NEAR(gains[2], 4, 1e-6);
  EXPECT_NEAR(gains[3], 4, 1e-6);
  for (const auto& e : g.edges) {
    const auto& r = g.edges[e.reversal_id];
    EXPECT_EQ(r.reversal_id, e.id);
    EXPECT_EQ(g.undirected_of(e.id), g.undirected_of(r.id));
    EXPECT_EQ(e.winding, Vec2i(-r.winding));
    EXPECT_NEAR(e.gain + d.lifted(e.source_lift), r.gain + d.lifted(r.source_lift), 1e-10);
  }
  EXPECT_LT(gains_vs_values_check(g, d).max_residual, 1e-8);
}

TEST(MorseGraph, LowSaddleLoopWindsDiagonally) {
  TiltedDrift d(PeriodicPotential::nr2006(), 0.0);
  auto g = graph_for(d);
  for (const auto& e : g.edges) {
    if (std::abs(e.gain - 2) < 1e-6) {
      EXPECT_EQ(std::abs(e.winding[0]), 1);
      EXPECT_EQ(e.winding[0], e.winding[1]);
    }
  }
}

TEST(MorseGraph, CosineCircle) {
  TiltedDrift d(PeriodicPotential::cos1d(), 0.0);
  auto g = graph_for(d);
  EXPECT_EQ(g.vertices.size(), 1u);
  ASSERT_EQ(g.edges.size(), 2u);
  for (const auto& e : g.edges) EXPECT_NEAR(e.gain, 2.0, 1e-10);
  EXPECT_LT(gains_vs_values_check(g, d, 1e-10).max_residual, 1e-10);
  EXPECT_EQ(std::abs(g.edges[0].winding[0]), 1);
}

TEST(MorseGraph, TiltedGainsMatchResolvedValues) {
  const double c = 0.05;
  TiltedDrift d(PeriodicPotential::nr2006(), c);
  auto g = graph_for(d);
  EXPECT_LT(gains_vs_values_check(g, d).max_residual, 1e-8);
  // gains of the low pair relate to the zero-tilt value 2 through the lift displacements
  for (const auto& e : g.edges) {
    const double shift = e.saddle_lift[0] - e.source_lift[0];
    EXPECT_GT(e.gain, 0);
    if (std::abs(e.gain - 2) < 0.8) EXPECT_NEAR(e.gain, 2 - c * shift, 1e-2);
  }
}

TEST(MorseGraph, TiltedLowPairGains) {
  const double c = 0.02;
  TiltedDrift d(PeriodicPotential::nr2006(), c);
  auto g = graph_for(d);
  std::vector<double> low;
  for (const auto& e : g.edges)
    if (e.gain < 3) low.push_back(e.gain);
  std::sort(low.begin(), low.end());
  ASSERT_EQ(low.size(), 2u);
  EXPECT_NEAR((low[0] - 2) / c, 2 * kR15 - kPi, 0.05);
  EXPECT_NEAR((low[1] - 2) / c, 2 * kR15 - kPi + kTwoPi, 0.05);
}

TEST(MorseGraph, TwoWellHasTwoVertices) {
  TiltedDrift d(PeriodicPotential::twowell(), 0.05);
  auto g = graph_for(d);
  EXPECT_EQ(g.vertices.size(), 2u);
  EXPECT_LT(gains_vs_values_check(g, d).max_residual, 1e-8);
}
