#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fluxlab/critical_points.hpp"
#include "fluxlab/fokker_planck.hpp"
#include "fluxlab/merge_tree.hpp"
#include "fluxlab/morse_graph.hpp"
#include "fluxlab/tree_optimizer.hpp"

namespace fluxlab {

/// Worker count: FLUXLAB_JOBS if set and positive, else `requested` (at least 1).
inline int resolve_jobs(int requested) {
  if (const char* s = std::getenv("FLUXLAB_JOBS")) {
    char* end = nullptr;
    const long v = std::strtol(s, &end, 10);
    if (end != s && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1, requested);
}

/// Runs f(i) for i in [0, n) on a bounded pool; results must be written by index.
template <class F>
void parallel_for(int n, int jobs, F&& f) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < jobs; ++w)
    pool.emplace_back([&]() {
      for (int i = next++; i < n; i = next++) f(i);
    });
  for (auto& t : pool) t.join();
}

struct GraphHeights {
  MorseGraph graph;
  WeightedDigraph digraph;
  Heights heights;
};

inline GraphHeights graph_heights(const TiltedDrift& drift, const CriticalPointOptions& cpo = {},
                                  const MorseGraphOptions& mgo = {}) {
  GraphHeights r;
  r.graph = build_morse_graph(drift, find_critical_points(drift, cpo), mgo);
  r.digraph = to_digraph(r.graph);
  r.heights = heights_and_hstar(r.digraph);
  return r;
}

// ------------------------------------------------------------------ h*(c)

struct HstarPoint {
  double c = 0;
  double hstar = std::nan("");
  std::string flag;  // empty when ok, else the error text
};

struct HstarCurve {
  std::vector<HstarPoint> points;
  bool strictly_increasing = false;
};

inline HstarCurve hstar_curve(const PeriodicPotential& U, const std::vector<double>& c_list, Vec2 beta = Vec2(1, 0),
                              int jobs = 1) {
  HstarCurve out;
  out.points.resize(c_list.size());
  parallel_for(static_cast<int>(c_list.size()), jobs, [&](int i) {
    HstarPoint& p = out.points[i];
    p.c = c_list[i];
    try {
      p.hstar = graph_heights(TiltedDrift(U, p.c, beta)).heights.hstar;
    } catch (const Error& e) {
      p.flag = e.what();
    }
  });
  std::vector<HstarPoint> sorted = out.points;
  std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.c < b.c; });
  out.strictly_increasing = !sorted.empty();
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (!sorted[i].flag.empty()) out.strictly_increasing = false;
    if (i > 0 && !(sorted[i].hstar > sorted[i - 1].hstar)) out.strictly_increasing = false;
  }
  return out;
}

// --------------------------------------------------------------- FP flux

inline double fp_flux(const PeriodicPotential& U, double c, double eps, int grid, Vec2 beta = Vec2(1, 0)) {
  TiltedDrift d(U, c, beta);
  return flux(solve_stationary(d, eps, grid, U.dim() == 2 ? grid : 0), d.direction_form()).value;
}

struct NegativeResistance {
  double c1 = 0, c2 = 0, eps = 0;
  double flux1 = 0, flux2 = 0;
  bool verdict = false;  // flux2 < flux1
  std::optional<double> hstar1, hstar2;
  std::optional<bool> predicted;  // hstar1 < hstar2
};

inline NegativeResistance negative_resistance_demo(const PeriodicPotential& U, double c1, double c2, double eps,
                                                   int grid = 256, int jobs = 1) {
  if (!(c1 > 0) || c2 < c1) fail(ErrorCode::InvalidInput, "need 0 < c1 <= c2");
  NegativeResistance r{c1, c2, eps};
  double fl[2];
  const double cs[2] = {c1, c2};
  parallel_for(c1 == c2 ? 1 : 2, jobs, [&](int i) { fl[i] = fp_flux(U, cs[i], eps, grid); });
  if (c1 == c2) fl[1] = fl[0];
  r.flux1 = fl[0];
  r.flux2 = fl[1];
  r.verdict = r.flux2 < r.flux1;
  try {
    r.hstar1 = graph_heights(TiltedDrift(U, c1)).heights.hstar;
    r.hstar2 = graph_heights(TiltedDrift(U, c2)).heights.hstar;
    r.predicted = *r.hstar1 < *r.hstar2;
  } catch (const Error&) {
    r.hstar1.reset();
    r.hstar2.reset();
  }
  return r;
}

/// First (eps, c1 < c2) on the given lists with flux(c2) < flux(c1); eps scanned in order.
inline std::optional<NegativeResistance> find_negative_resistance(const PeriodicPotential& U,
                                                                  std::vector<double> c_list,
                                                                  const std::vector<double>& eps_list, int grid = 256,
                                                                  int jobs = 1) {
  std::sort(c_list.begin(), c_list.end());
  for (double eps : eps_list) {
    std::vector<double> fl(c_list.size(), std::nan(""));
    parallel_for(static_cast<int>(c_list.size()), jobs, [&](int i) {
      try {
        fl[i] = fp_flux(U, c_list[i], eps, grid);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::GridTooCoarse) throw;
      }
    });
    std::optional<NegativeResistance> best;
    for (size_t i = 0; i < c_list.size(); ++i)
      for (size_t j = i + 1; j < c_list.size(); ++j)
        if (fl[j] < fl[i] && (!best || fl[i] / fl[j] > best->flux1 / best->flux2))
          best = NegativeResistance{c_list[i], c_list[j], eps, fl[i], fl[j], true};
    if (best) {
      try {
        best->hstar1 = graph_heights(TiltedDrift(U, best->c1)).heights.hstar;
        best->hstar2 = graph_heights(TiltedDrift(U, best->c2)).heights.hstar;
        best->predicted = *best->hstar1 < *best->hstar2;
      } catch (const Error&) {
      }
      return best;
    }
  }
  return std::nullopt;
}

// ----------------------------------------------------------- exponent fit

struct ExponentFit {
  double psi = 0;       // intercept of -eps ln F at eps -> 0
  double slope = 0;     // coefficient of eps
  double residual = 0;  // rms misfit
};

/// Least-squares fit of -eps ln F = psi + a eps over (eps, F) rows.
inline ExponentFit exponent_fit(const std::vector<std::pair<double, double>>& rows) {
  if (rows.size() < 3) fail(ErrorCode::InsufficientData, "need at least 3 eps values");
  double lo = kInf, hi = 0;
  for (auto [e, f] : rows) {
    if (!(e > 0) || !(f > 0)) fail(ErrorCode::InvalidInput, "eps and flux must be positive");
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  if (hi < 3 * lo) fail(ErrorCode::InsufficientData, "eps values must span a factor of at least 3");
  Eigen::MatrixXd A(rows.size(), 2);
  Eigen::VectorXd b(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    A(i, 0) = 1;
    A(i, 1) = rows[i].first;
    b(i) = -rows[i].first * std::log(rows[i].second);
  }
  const Eigen::Vector2d x = A.colPivHouseholderQr().solve(b);
  ExponentFit r{x(0), x(1), std::sqrt((A * x - b).squaredNorm() / rows.size())};
  return r;
}

// ------------------------------------------------------------------ sweep

struct SweepRow {
  double c = 0, eps = 0;
  double flux = std::nan(""), minus_eps_log_flux = std::nan("");
  double hstar_graph = std::nan(""), hstar_merge_tree = std::nan("");
  std::string flag;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ordered by (c, eps) as given
  std::vector<std::pair<double, ExponentFit>> extrapolation;  // per c with enough accepted eps
};

inline SweepResult sweep(const PeriodicPotential& U, const std::vector<double>& c_list,
                         const std::vector<double>& eps_list, int grid, int jobs = 1, bool merge_tree = false,
                         int merge_grid = 256) {
  SweepResult out;
  const int nc = static_cast<int>(c_list.size()), ne = static_cast<int>(eps_list.size());
  out.rows.resize(static_cast<size_t>(nc) * ne);
  std::vector<double> hg(nc, std::nan("")), hm(nc, std::nan(""));
  parallel_for(nc, jobs, [&](int i) {
    TiltedDrift d(U, c_list[i]);
    try {
      auto gh = graph_heights(d);
      hg[i] = gh.heights.hstar;
      if (merge_tree && U.dim() == 2) {
        const Vec2 v = gh.graph.vertices[gh.digraph.edges[gh.heights.witness].src].position;
        hm[i] = hstar_via_merge_tree(d, v, {.grid_n = merge_grid}).hstar;
      }
    } catch (const Error&) {
    }
  });
  parallel_for(nc * ne, jobs, [&](int k) {
    SweepRow& r = out.rows[k];
    r.c = c_list[k / ne];
    r.eps = eps_list[k % ne];
    r.hstar_graph = hg[k / ne];
    r.hstar_merge_tree = hm[k / ne];
    try {
      r.flux = fp_flux(U, r.c, r.eps, grid);
      r.minus_eps_log_flux = -r.eps * std::log(r.flux);
    } catch (const Error& e) {
      r.flag = error_name(e.code());
    }
  });
  for (int i = 0; i < nc; ++i) {
    std::vector<std::pair<double, double>> pts;
    for (int j = 0; j < ne; ++j) {
      const auto& r = out.rows[static_cast<size_t>(i) * ne + j];
      if (r.flag.empty() && r.flux > 0) pts.emplace_back(r.eps, r.flux);
    }
    try {
      out.extrapolation.emplace_back(c_list[i], exponent_fit(pts));
    } catch (const Error&) {
    }
  }
  return out;
}

// --------------------------------------------------------------- ball mass

inline double ball_mass(const StationaryField& f, const Vec2& v, double r) {
  CompensatedSum s;
  for (int j = 0; j < f.n2; ++j)
    for (int i = 0; i < f.n1; ++i)
      if (f.torus.distance(f.center(i, j), v) < r) s.add(f.rho[f.idx(i, j)] * f.cell_volume());
  return s.value();
}

struct BallMassRow {
  Vec2 vertex;
  double height = 0;  // h(v) from the minimal rooted tree
  double mass = 0;
  double minus_eps_log_mass = 0;
};

inline std::vector<BallMassRow> ball_mass_check(const TiltedDrift& drift, double eps, double r, int grid = 256) {
  auto gh = graph_heights(drift);
  const auto field = solve_stationary(drift, eps, grid, drift.dim() == 2 ? grid : 0);
  std::vector<BallMassRow> rows;
  for (int v = 0; v < gh.digraph.n(); ++v) {
    BallMassRow row{gh.graph.vertices[v].position, gh.heights.vertex[v]};
    row.mass = ball_mass(field, row.vertex, r);
    row.minus_eps_log_mass = -eps * std::log(row.mass);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fluxlab
