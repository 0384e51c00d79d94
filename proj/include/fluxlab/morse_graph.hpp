#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fluxlab/critical_points.hpp"

namespace fluxlab {

struct MorseEdge {
  int id = 0;
  int src = 0;
  int tgt = 0;
  int saddle = 0;        // index into MorseGraph::saddles
  double gain = 0;       // lifted value at saddle minus lifted value at source, along this lift
  Vec2i winding{0, 0};   // deck offset of the target lift relative to the source representative
  int reversal_id = 0;
  double cocycle = 0;       // integral of alpha from source lift to target lift
  double tilt_cocycle = 0;  // integral of the unit tilt direction
  Vec2 source_lift = Vec2::Zero();
  Vec2 saddle_lift = Vec2::Zero();
  Vec2 target_lift = Vec2::Zero();
};

struct MorseGraph {
  Torus torus;
  std::vector<CriticalPoint> vertices;
  std::vector<CriticalPoint> saddles;
  std::vector<MorseEdge> edges;  // edges 2k and 2k+1 are a reversal pair
  int undirected_of(int edge_id) const { return edge_id / 2; }
  size_t undirected_count() const { return edges.size() / 2; }
};

struct MorseGraphOptions {
  double offset_factor = 1e-6;
  double step_factor = 1e-3;
  double trap_factor = 1e-3;
  double max_time = 2000.0;
};

namespace detail {

struct TraceEnd {
  int vertex;
  Vec2i deck;
};

inline Vec2 rk4_step(const TiltedDrift& d, const Vec2& x, double h) {
  const Vec2 k1 = d(x);
  const Vec2 k2 = d(x + 0.5 * h * k1);
  const Vec2 k3 = d(x + 0.5 * h * k2);
  const Vec2 k4 = d(x + h * k3);
  return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
}

inline TraceEnd trace_to_sink(const TiltedDrift& drift, const std::vector<CriticalPoint>& sinks, Vec2 x,
                              const MorseGraphOptions& opt) {
  const Torus& T = drift.torus();
  const double h = opt.step_factor * T.min_period();
  const double trap = opt.trap_factor * T.min_period();
  auto near = [&](const Vec2& p, std::vector<TraceEnd>& hits) {
    hits.clear();
    for (size_t v = 0; v < sinks.size(); ++v) {
      const Vec2 d = T.displacement(sinks[v].position, p);
      if (d.norm() < trap) {
        const Vec2 lift_of_sink = p - d;
        Vec2i k = T.cell(lift_of_sink + 0.5 * T.deck(Vec2i(1, 1)) - sinks[v].position);
        hits.push_back({static_cast<int>(v), k});
      }
    }
  };
  std::vector<TraceEnd> hits;
  double t = 0, limit = opt.max_time;
  bool extended = false;
  while (t < limit) {
    x = rk4_step(drift, x, h);
    t += h;
    near(x, hits);
    if (hits.size() == 1) return hits[0];
    if (hits.size() > 1 && !extended) {
      extended = true;
      limit = t + 10 * t;
    }
  }
  if (hits.size() > 1) fail(ErrorCode::AmbiguousTarget, "trajectory ends near several sinks");
  fail(ErrorCode::EscapeTimeout, "unstable manifold did not reach a sink by t=" + std::to_string(limit));
}

}  // namespace detail

inline MorseGraph build_morse_graph(const TiltedDrift& drift, const std::vector<CriticalPoint>& cps,
                                    const MorseGraphOptions& opt = {}) {
  const Torus& T = drift.torus();
  MorseGraph g;
  g.torus = T;
  g.vertices = of_index(cps, 0);
  g.saddles = of_index(cps, 1);
  if (g.vertices.empty()) fail(ErrorCode::InvalidInput, "no index-0 zeros");
  const Vec2 beta = drift.direction();

  for (size_t s = 0; s < g.saddles.size(); ++s) {
    const CriticalPoint& sp = g.saddles[s];
    Vec2 u;
    if (drift.dim() == 1) {
      u = Vec2(1, 0);
    } else {
      Eigen::SelfAdjointEigenSolver<Mat2> es(sp.hessian);
      u = es.eigenvectors().col(0);  // negative eigenvalue first
    }
    const double delta = opt.offset_factor * T.min_period();
    detail::TraceEnd ends[2];
    for (int b = 0; b < 2; ++b)
      ends[b] = detail::trace_to_sink(drift, g.vertices, sp.position + (b == 0 ? 1.0 : -1.0) * delta * u, opt);

    Vec2 lifts[2];
    for (int b = 0; b < 2; ++b) lifts[b] = g.vertices[ends[b].vertex].position + T.deck(ends[b].deck);
    const double us = drift.lifted(sp.position);
    for (int b = 0; b < 2; ++b) {
      const int o = 1 - b;
      MorseEdge e;
      e.id = static_cast<int>(g.edges.size());
      e.src = ends[b].vertex;
      e.tgt = ends[o].vertex;
      e.saddle = static_cast<int>(s);
      e.reversal_id = b == 0 ? e.id + 1 : e.id - 1;
      e.winding = ends[o].deck - ends[b].deck;
      e.gain = us - drift.lifted(lifts[b]);
      e.cocycle = drift.lifted(lifts[b]) - drift.lifted(lifts[o]);
      e.tilt_cocycle = beta.dot(lifts[o] - lifts[b]);
      // representative lift with the source in the fundamental domain
      const Vec2 shift = -T.deck(ends[b].deck);
      e.source_lift = lifts[b] + shift;
      e.saddle_lift = sp.position + shift;
      e.target_lift = lifts[o] + shift;
      g.edges.push_back(e);
    }
  }

  // undirected connectivity
  std::vector<int> parent(g.vertices.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const auto& e : g.edges) parent[find(e.src)] = find(e.tgt);
  for (size_t v = 0; v < g.vertices.size(); ++v)
    if (find(static_cast<int>(v)) != find(0)) fail(ErrorCode::GraphDisconnected, "undirected Morse graph is disconnected");
  return g;
}

struct GainReport {
  double max_residual = 0;
};

/// Re-solves the saddle and source zeros and compares gains with lifted-value differences.
inline GainReport gains_vs_values_check(const MorseGraph& g, const TiltedDrift& drift, double tol = 1e-8) {
  GainReport r;
  for (const auto& e : g.edges) {
    Vec2 s = e.saddle_lift, v = e.source_lift;
    double res = 0;
    detail::newton_zero(drift, s, 1e-13, 50, res);
    detail::newton_zero(drift, v, 1e-13, 50, res);
    const double expect = drift.lifted(s) - drift.lifted(v);
    r.max_residual = std::max(r.max_residual, std::abs(expect - e.gain));
    if (!(e.gain > 0)) fail(ErrorCode::GainMismatch, "nonpositive gain on edge " + std::to_string(e.id));
  }
  if (r.max_residual > tol) fail(ErrorCode::GainMismatch, "max residual " + std::to_string(r.max_residual));
  return r;
}

}  // namespace fluxlab
