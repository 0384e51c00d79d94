#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>
#include <vector>

#include "fluxlab/csv.hpp"
#include "fluxlab/domain_fields.hpp"

namespace fluxlab {

struct MergeEvent {
  double birth = 0;
  double death = 0;
  Vec2 birth_point = Vec2::Zero();
};

struct MergeTreeResult {
  double hstar = 0;
  int window = 0;          // periods per axis actually used
  double merge_value = 0;  // absolute value of the exceptional merge
  Vec2 tracked_lift = Vec2::Zero();
  Vec2i ocean_shift{0, 0};  // deck translate reached at the exceptional merge
  std::vector<MergeEvent> barcode;
};

struct MergeTreeOptions {
  int grid_n = 512;       // nodes per period and axis
  int window = 3;         // initial periods per axis
  int max_window = 7;
  double stable_tol = 1e-6;
  bool barcode = false;
};

namespace detail {

struct UnionFind {
  std::vector<int> parent, birth;  // birth: node index of the component minimum
  explicit UnionFind(size_t n) : parent(n, -1), birth(n, -1) {}
  bool active(int a) const { return parent[a] >= 0; }
  void add(int a) {
    parent[a] = a;
    birth[a] = a;
  }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
};

/// Sublevel sweep of the lifted potential on a w-period window. Returns the relative height
/// at which the tracked minimum joins a downhill deck translate, if any inside the window.
inline std::optional<MergeTreeResult> sweep_window(const TiltedDrift& drift, const Vec2& vstar, int w,
                                                   const MergeTreeOptions& opt) {
  const Torus& T = drift.torus();
  const bool two_d = drift.dim() == 2;
  const int n = opt.grid_n;
  const int NX = w * n, NY = two_d ? w * n : 1;
  const double hx = T.periods[0] / n, hy = two_d ? T.periods[1] / n : 0.0;
  const int center = (w - 1) / 2;
  const Vec2 p = T.wrap(vstar) + T.deck(Vec2i(center, center));

  const size_t N = static_cast<size_t>(NX) * NY;
  std::vector<double> val(N);
  for (int j = 0; j < NY; ++j)
    for (int i = 0; i < NX; ++i) val[static_cast<size_t>(j) * NX + i] = drift.lifted(Vec2(i * hx, j * hy));
  auto node = [&](int i, int j) { return j * NX + i; };

  // descend from the nearest node to a discrete local minimum
  int ci = static_cast<int>(std::lround(p[0] / hx)), cj = two_d ? static_cast<int>(std::lround(p[1] / hy)) : 0;
  for (;;) {
    int bi = ci, bj = cj;
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        if (std::abs(di) + std::abs(dj) != 1 || (!two_d && dj)) continue;
        const int ni = ci + di, nj = cj + dj;
        if (ni < 0 || nj < 0 || ni >= NX || nj >= NY) continue;
        if (val[node(ni, nj)] < val[node(bi, bj)]) bi = ni, bj = nj;
      }
    if (bi == ci && bj == cj) break;
    ci = bi, cj = bj;
  }
  const int m0 = node(ci, cj);

  // downhill deck translates of m0 inside the window
  std::vector<std::pair<int, Vec2i>> targets;
  const Vec2 beta = drift.direction();
  for (int ky = two_d ? -w : 0; ky <= (two_d ? w : 0); ++ky)
    for (int kx = -w; kx <= w; ++kx) {
      if (beta.dot(T.deck(Vec2i(kx, ky))) <= 1e-12) continue;
      const int ti = ci + kx * n, tj = cj + ky * n;
      if (ti < 0 || tj < 0 || ti >= NX || tj >= NY) continue;
      targets.emplace_back(node(ti, tj), Vec2i(kx, ky));
    }
  if (targets.empty()) return std::nullopt;

  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return val[a] < val[b] || (val[a] == val[b] && a < b); });

  UnionFind uf(N);
  MergeTreeResult res;
  res.window = w;
  res.tracked_lift = p;
  bool found = false;
  for (int a : order) {
    uf.add(a);
    const int ai = a % NX, aj = a / NX;
    const int nb[4][2] = {{ai - 1, aj}, {ai + 1, aj}, {ai, aj - 1}, {ai, aj + 1}};
    for (const auto& q : nb) {
      if (q[0] < 0 || q[1] < 0 || q[0] >= NX || q[1] >= NY) continue;
      const int b = node(q[0], q[1]);
      if (!uf.active(b)) continue;
      int ra = uf.find(a), rb = uf.find(b);
      if (ra == rb) continue;
      if (val[uf.birth[ra]] > val[uf.birth[rb]]) std::swap(ra, rb);
      if (opt.barcode && uf.birth[rb] != a) {
        const int bn = uf.birth[rb];
        res.barcode.push_back({val[bn], val[a], Vec2((bn % NX) * hx, (bn / NX) * hy)});
      }
      uf.parent[rb] = ra;
    }
    if (!found && uf.active(m0)) {
      const int r0 = uf.find(m0);
      for (const auto& [t, k] : targets) {
        if (uf.active(t) && uf.find(t) == r0) {
          found = true;
          res.merge_value = val[a];
          res.ocean_shift = k;
          break;
        }
      }
      if (found && !opt.barcode) break;
    }
  }
  if (!found) return std::nullopt;
  res.hstar = res.merge_value - drift.lifted(p);
  return res;
}

}  // namespace detail

/// h* from the exceptional merge of the sublevel filtration of the lifted potential.
inline MergeTreeResult hstar_via_merge_tree(const TiltedDrift& drift, const Vec2& vstar, const MergeTreeOptions& opt = {}) {
  if (drift.c() == 0) fail(ErrorCode::ExactFormNoFlux, "zero tilt has no exceptional component");
  if (opt.grid_n < 8 || opt.window < 2) fail(ErrorCode::InvalidInput, "merge tree needs grid_n >= 8 and window >= 2");
  std::optional<MergeTreeResult> prev;
  for (int w = opt.window; w <= opt.max_window; ++w) {
    auto cur = detail::sweep_window(drift, vstar, w, opt);
    if (cur && prev && std::abs(cur->hstar - prev->hstar) < opt.stable_tol) return *prev;
    prev = cur;
  }
  fail(ErrorCode::WindowTooSmall, "exceptional merge not stable up to window " + std::to_string(opt.max_window));
}

inline void write_barcode_csv(std::ostream& os, const MergeTreeResult& r) {
  csv::Writer w(os);
  w.row({"birth", "death", "birth_x", "birth_y"});
  for (const auto& e : r.barcode)
    w.row({csv::num(e.birth), csv::num(e.death), csv::num(e.birth_point[0]), csv::num(e.birth_point[1])});
}

}  // namespace fluxlab
