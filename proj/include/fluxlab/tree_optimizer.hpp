#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fluxlab/csv.hpp"
#include "fluxlab/error.hpp"
#include "fluxlab/morse_graph.hpp"

namespace fluxlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kTieTol = 1e-9;

struct DiEdge {
  std::string id;
  int src = 0;
  int tgt = 0;
  double weight = 0;
  double cocycle = 0;
  double tilt_cocycle = 0;  // optional tie-break cocycle for graphs at zero tilt
  int reversal = -1;        // index into edges, or -1
};

struct WeightedDigraph {
  std::vector<std::string> vertices;
  std::vector<DiEdge> edges;

  int n() const { return static_cast<int>(vertices.size()); }

  int vertex(const std::string& name) {
    for (int i = 0; i < n(); ++i)
      if (vertices[i] == name) return i;
    vertices.push_back(name);
    return n() - 1;
  }

  int find_vertex(const std::string& name) const {
    for (int i = 0; i < n(); ++i)
      if (vertices[i] == name) return i;
    return -1;
  }

  int find_edge(const std::string& id) const {
    for (size_t i = 0; i < edges.size(); ++i)
      if (edges[i].id == id) return static_cast<int>(i);
    return -1;
  }

  void validate() const {
    for (size_t i = 0; i < edges.size(); ++i) {
      const auto& e = edges[i];
      if (e.src < 0 || e.src >= n() || e.tgt < 0 || e.tgt >= n())
        fail(ErrorCode::InvalidInput, "edge " + e.id + " references unknown vertex");
      if (!(e.weight >= 0)) fail(ErrorCode::InvalidInput, "edge " + e.id + " has negative or NaN weight");
      if (e.reversal >= 0) {
        if (e.reversal >= static_cast<int>(edges.size())) fail(ErrorCode::InvalidInput, "bad reversal of " + e.id);
        const auto& r = edges[e.reversal];
        if (r.reversal != static_cast<int>(i) || r.src != e.tgt || r.tgt != e.src)
          fail(ErrorCode::InvalidInput, "reversal pairing of " + e.id + " is not an involution");
      }
    }
  }
};

inline WeightedDigraph to_digraph(const MorseGraph& g) {
  WeightedDigraph d;
  for (size_t v = 0; v < g.vertices.size(); ++v) d.vertices.push_back("v" + std::to_string(v));
  for (const auto& e : g.edges)
    d.edges.push_back({"e" + std::to_string(e.id), e.src, e.tgt, e.gain, e.cocycle, e.tilt_cocycle, e.reversal_id});
  return d;
}

// ------------------------------------------------------------------ CSV I/O

inline void write_morse_csv(std::ostream& os, const MorseGraph& g) {
  csv::Writer w(os);
  w.row({"edge_id", "src", "tgt", "saddle_x", "saddle_y", "gain", "wind_x", "wind_y", "reversal_id", "cocycle",
         "tilt_cocycle"});
  for (const auto& e : g.edges) {
    const Vec2& s = g.saddles[e.saddle].position;
    w.row({"e" + std::to_string(e.id), "v" + std::to_string(e.src), "v" + std::to_string(e.tgt), csv::num(s[0]),
           csv::num(s[1]), csv::num(e.gain), std::to_string(e.winding[0]), std::to_string(e.winding[1]),
           "e" + std::to_string(e.reversal_id), csv::num(e.cocycle), csv::num(e.tilt_cocycle)});
  }
}

/// Reads an edge list. Required columns: src, tgt and one of weight/gain.
inline WeightedDigraph read_digraph(const csv::Table& t) {
  WeightedDigraph g;
  if (t.header.empty() && t.rows.empty()) return g;
  const int c_src = t.column("src"), c_tgt = t.column("tgt"), c_id = t.column("edge_id"),
            c_w = t.column("weight"), c_g = t.column("gain"), c_coc = t.column("cocycle"),
            c_tilt = t.column("tilt_cocycle"), c_rev = t.column("reversal_id");
  if (c_src < 0 || c_tgt < 0) fail(ErrorCode::InvalidInput, "edge list needs src and tgt columns");
  if (c_w < 0 && c_g < 0) fail(ErrorCode::InvalidInput, "edge list needs a weight or gain column");
  std::vector<std::string> rev_names;
  std::vector<bool> has_coc;
  for (size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    DiEdge e;
    e.id = c_id >= 0 ? row[c_id] : "e" + std::to_string(r);
    e.src = g.vertex(row[c_src]);
    e.tgt = g.vertex(row[c_tgt]);
    const int cw = (c_w >= 0 && !row[c_w].empty()) ? c_w : c_g;
    e.weight = csv::to_double(row[cw], "weight");
    bool coc = c_coc >= 0 && !row[c_coc].empty();
    if (coc) e.cocycle = csv::to_double(row[c_coc], "cocycle");
    if (c_tilt >= 0 && !row[c_tilt].empty()) e.tilt_cocycle = csv::to_double(row[c_tilt], "tilt_cocycle");
    rev_names.push_back(c_rev >= 0 ? row[c_rev] : "");
    has_coc.push_back(coc);
    g.edges.push_back(e);
  }
  for (size_t i = 0; i < g.edges.size(); ++i) {
    if (!rev_names[i].empty()) {
      g.edges[i].reversal = g.find_edge(rev_names[i]);
      if (g.edges[i].reversal < 0) fail(ErrorCode::InvalidInput, "unknown reversal_id " + rev_names[i]);
    }
  }
  for (size_t i = 0; i < g.edges.size(); ++i) {
    auto& e = g.edges[i];
    if (!has_coc[i] && e.reversal >= 0) e.cocycle = g.edges[e.reversal].weight - e.weight;
  }
  g.validate();
  return g;
}

inline WeightedDigraph read_digraph_file(const std::string& path) { return read_digraph(csv::read_table_file(path)); }

// ------------------------------------------------------- rooted spanning trees

struct TreeResult {
  std::vector<int> tree;  // edge indices
  int root = -1;
  double total_weight = kInf;
  bool unique = true;
  double runner_up_gap = kInf;
};

namespace detail {

struct REdge {
  int u, v;
  double w;
  int orig;
};

/// Chu-Liu/Edmonds for in-arborescences: every non-root vertex gets one out-edge.
/// Returns indices into `edges`, or nullopt if none exists.
inline std::optional<std::vector<int>> edmonds_in(int n, int root, const std::vector<REdge>& edges) {
  std::vector<int> best(n, -1);
  for (size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (e.u == e.v || e.u == root || !std::isfinite(e.w)) continue;
    if (best[e.u] < 0 || e.w < edges[best[e.u]].w) best[e.u] = static_cast<int>(i);
  }
  for (int v = 0; v < n; ++v)
    if (v != root && best[v] < 0) return std::nullopt;

  std::vector<int> color(n, 0), cyc_id(n, -1);
  std::vector<int> cycle;
  for (int s = 0; s < n && cycle.empty(); ++s) {
    if (color[s]) continue;
    std::vector<int> stack;
    int x = s;
    while (x != root && color[x] == 0) {
      color[x] = 1;
      stack.push_back(x);
      x = edges[best[x]].v;
    }
    if (x != root && color[x] == 1) {
      for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
        cycle.push_back(*it);
        if (*it == x) break;
      }
    }
    for (int y : stack) color[y] = 2;
  }
  if (cycle.empty()) {
    std::vector<int> out;
    for (int v = 0; v < n; ++v)
      if (v != root) out.push_back(best[v]);
    return out;
  }

  std::vector<int> map(n, -1);
  for (int c : cycle) cyc_id[c] = 1;
  int m = 0;
  for (int v = 0; v < n; ++v)
    if (cyc_id[v] < 0) map[v] = m++;
  const int cnode = m++;
  for (int c : cycle) map[c] = cnode;

  std::vector<REdge> ne;
  std::vector<int> back;
  for (size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    const bool iu = cyc_id[e.u] > 0, iv = cyc_id[e.v] > 0;
    if (iu && iv) continue;
    if (!std::isfinite(e.w)) continue;
    double w = e.w;
    if (iu) w -= edges[best[e.u]].w;
    ne.push_back({map[e.u], map[e.v], w, static_cast<int>(i)});
    back.push_back(static_cast<int>(i));
  }
  auto sub = edmonds_in(m, map[root], ne);
  if (!sub) return std::nullopt;
  std::vector<int> out;
  int exit_from = -1;
  for (int k : *sub) {
    const int oi = back[k];
    out.push_back(oi);
    if (cyc_id[edges[oi].u] > 0) exit_from = edges[oi].u;
  }
  for (int c : cycle)
    if (c != exit_from) out.push_back(best[c]);
  return out;
}

inline std::vector<REdge> redges(const WeightedDigraph& g, const std::vector<bool>* banned = nullptr) {
  std::vector<REdge> r;
  for (size_t i = 0; i < g.edges.size(); ++i) {
    if (banned && (*banned)[i]) continue;
    const auto& e = g.edges[i];
    r.push_back({e.src, e.tgt, e.weight, static_cast<int>(i)});
  }
  return r;
}

inline double tree_weight(const WeightedDigraph& g, const std::vector<int>& t) {
  double s = 0;
  for (int i : t) s += g.edges[i].weight;
  return s;
}

/// Best arborescence into root with edges mapped back to graph indices.
inline std::optional<std::vector<int>> best_into(const WeightedDigraph& g, int root, const std::vector<bool>* banned) {
  auto re = redges(g, banned);
  auto r = edmonds_in(g.n(), root, re);
  if (!r) return std::nullopt;
  std::vector<int> out;
  for (int k : *r) out.push_back(re[k].orig);
  std::sort(out.begin(), out.end());
  return out;
}

/// Exhaustive branch-and-bound: the two lightest arborescences into root.
inline void enumerate_into(const WeightedDigraph& g, int root, std::vector<std::pair<double, std::vector<int>>>& top2) {
  const int n = g.n();
  std::vector<std::vector<int>> outs(n);
  for (size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    if (e.src != e.tgt && e.src != root && std::isfinite(e.weight)) outs[e.src].push_back(static_cast<int>(i));
  }
  std::vector<double> minout(n, 0);
  for (int v = 0; v < n; ++v) {
    if (v == root) continue;
    if (outs[v].empty()) return;
    double m = kInf;
    for (int i : outs[v]) m = std::min(m, g.edges[i].weight);
    minout[v] = m;
  }
  std::vector<double> suffix(n + 1, 0);
  for (int v = n - 1; v >= 0; --v) suffix[v] = suffix[v + 1] + minout[v];
  std::vector<int> choice(n, -1);
  auto bound = [&]() { return top2.size() < 2 ? kInf : top2[1].first; };
  auto acyclic = [&]() {
    std::vector<int> state(n, 0);
    state[root] = 2;
    for (int s = 0; s < n; ++s) {
      std::vector<int> path;
      int x = s;
      while (state[x] == 0) {
        state[x] = 1;
        path.push_back(x);
        x = g.edges[choice[x]].tgt;
      }
      if (state[x] == 1) return false;
      for (int y : path) state[y] = 2;
    }
    return true;
  };
  std::function<void(int, double)> rec = [&](int v, double cost) {
    if (cost + suffix[v] > bound() + kTieTol) return;
    if (v == n) {
      if (!acyclic()) return;
      std::vector<int> t;
      for (int u = 0; u < n; ++u)
        if (u != root) t.push_back(choice[u]);
      std::sort(t.begin(), t.end());
      top2.emplace_back(cost, t);
      std::sort(top2.begin(), top2.end(), [](auto& a, auto& b) { return a.first < b.first; });
      if (top2.size() > 2) top2.pop_back();
      return;
    }
    if (v == root) {
      rec(v + 1, cost);
      return;
    }
    for (int i : outs[v]) {
      choice[v] = i;
      rec(v + 1, cost + g.edges[i].weight);
    }
  };
  rec(0, 0.0);
}

}  // namespace detail

inline constexpr int kExhaustiveLimit = 12;

/// Minimum-weight arborescence directed toward `root`, or over all roots when root < 0.
inline TreeResult min_rooted_spanning_tree(const WeightedDigraph& g, int root = -1, bool force_exhaustive = false,
                                           bool force_edmonds = false) {
  g.validate();
  if (g.n() == 0) fail(ErrorCode::NoArborescence, "graph has no vertices");
  std::vector<int> roots;
  if (root >= 0) {
    if (root >= g.n()) fail(ErrorCode::InvalidInput, "root out of range");
    roots.push_back(root);
  } else {
    for (int r = 0; r < g.n(); ++r) roots.push_back(r);
  }
  const bool exhaustive = force_exhaustive || (!force_edmonds && g.n() <= kExhaustiveLimit);

  // candidates: (weight, root, tree)
  std::vector<std::tuple<double, int, std::vector<int>>> cands;
  for (int r : roots) {
    if (exhaustive) {
      std::vector<std::pair<double, std::vector<int>>> top2;
      detail::enumerate_into(g, r, top2);
      for (auto& [w, t] : top2) cands.emplace_back(w, r, t);
    } else {
      auto best = detail::best_into(g, r, nullptr);
      if (!best) continue;
      const double bw = detail::tree_weight(g, *best);
      cands.emplace_back(bw, r, *best);
      double second = kInf;
      std::vector<int> second_tree;
      std::vector<bool> banned(g.edges.size(), false);
      for (int e : *best) {
        banned[e] = true;
        auto alt = detail::best_into(g, r, &banned);
        banned[e] = false;
        if (alt) {
          const double aw = detail::tree_weight(g, *alt);
          if (aw < second) {
            second = aw;
            second_tree = *alt;
          }
        }
      }
      if (std::isfinite(second)) cands.emplace_back(second, r, second_tree);
    }
  }
  if (cands.empty()) fail(ErrorCode::NoArborescence, "no finite-weight spanning arborescence");
  std::sort(cands.begin(), cands.end(), [](auto& a, auto& b) { return std::get<0>(a) < std::get<0>(b); });
  TreeResult res;
  res.total_weight = std::get<0>(cands[0]);
  res.root = std::get<1>(cands[0]);
  res.tree = std::get<2>(cands[0]);
  res.runner_up_gap = cands.size() > 1 ? std::get<0>(cands[1]) - res.total_weight : kInf;
  res.unique = res.runner_up_gap >= kTieTol;
  return res;
}

// ------------------------------------------------- cycle-rooted spanning trees

struct CycleTreeResult {
  std::vector<int> edges;  // all edges, cycle included
  std::vector<int> cycle;
  double total_weight = kInf;
  double cycle_cocycle = 0;
  bool unique = true;
  double runner_up_gap = kInf;
};

namespace detail {

/// Simple directed cycles as edge-index lists; each cycle reported once.
inline void for_each_cycle(const WeightedDigraph& g, const std::function<void(const std::vector<int>&)>& f) {
  const int n = g.n();
  std::vector<std::vector<int>> outs(n);
  for (size_t i = 0; i < g.edges.size(); ++i)
    if (std::isfinite(g.edges[i].weight)) outs[g.edges[i].src].push_back(static_cast<int>(i));
  std::vector<bool> onpath(n, false);
  std::vector<int> path;
  for (int s = 0; s < n; ++s) {
    std::function<void(int)> dfs = [&](int x) {
      for (int ei : outs[x]) {
        const int y = g.edges[ei].tgt;
        if (y == s) {
          path.push_back(ei);
          f(path);
          path.pop_back();
        } else if (y > s && !onpath[y]) {
          onpath[y] = true;
          path.push_back(ei);
          dfs(y);
          path.pop_back();
          onpath[y] = false;
        }
      }
    };
    onpath[s] = true;
    dfs(s);
    onpath[s] = false;
  }
}

/// Lightest forest sending every vertex outside `in_cycle` into the cycle.
inline std::optional<std::pair<double, std::vector<int>>> attach_to_cycle(const WeightedDigraph& g,
                                                                          const std::vector<bool>& in_cycle) {
  const int n = g.n();
  std::vector<int> map(n);
  int m = 0;
  for (int v = 0; v < n; ++v)
    if (!in_cycle[v]) map[v] = m++;
  const int root = m++;
  for (int v = 0; v < n; ++v)
    if (in_cycle[v]) map[v] = root;
  if (m == 1) return std::make_pair(0.0, std::vector<int>{});
  std::vector<REdge> re;
  for (size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    if (in_cycle[e.src] || !std::isfinite(e.weight)) continue;
    re.push_back({map[e.src], map[e.tgt], e.weight, static_cast<int>(i)});
  }
  auto r = edmonds_in(m, root, re);
  if (!r) return std::nullopt;
  std::vector<int> out;
  double w = 0;
  for (int k : *r) {
    out.push_back(re[k].orig);
    w += re[k].w;
  }
  return std::make_pair(w, out);
}

}  // namespace detail

inline double cocycle_sum(const WeightedDigraph& g, const std::vector<int>& es) {
  double s = 0;
  for (int i : es) s += g.edges[i].cocycle;
  return s;
}

/// Lightest cycle-rooted spanning tree whose cycle has cocycle of the given sign (+1 or -1).
inline CycleTreeResult min_cycle_rooted_spanning_tree(const WeightedDigraph& g, int sign) {
  g.validate();
  if (sign != 1 && sign != -1) fail(ErrorCode::InvalidInput, "sign must be +1 or -1");
  CycleTreeResult best;
  double second = kInf;
  detail::for_each_cycle(g, [&](const std::vector<int>& cyc) {
    const double a = cocycle_sum(g, cyc);
    if (!(sign * a > 0)) return;
    std::vector<bool> in(g.n(), false);
    for (int e : cyc) in[g.edges[e].src] = true;
    auto att = detail::attach_to_cycle(g, in);
    if (!att) return;
    const double w = detail::tree_weight(g, cyc) + att->first;
    if (w < best.total_weight) {
      second = best.total_weight;
      best.total_weight = w;
      best.cycle = cyc;
      best.edges = cyc;
      best.edges.insert(best.edges.end(), att->second.begin(), att->second.end());
      std::sort(best.edges.begin(), best.edges.end());
      best.cycle_cocycle = a;
    } else if (w < second) {
      second = w;
    }
  });
  if (!std::isfinite(best.total_weight))
    fail(ErrorCode::NoSignedCycle, std::string("no cycle-rooted spanning tree with ") +
                                       (sign > 0 ? "positive" : "negative") + " cycle");
  best.runner_up_gap = second - best.total_weight;
  best.unique = best.runner_up_gap >= kTieTol;
  return best;
}

/// Brute force over all functional graphs; test oracle for small graphs.
inline double brute_force_crst(const WeightedDigraph& g, int sign) {
  const int n = g.n();
  std::vector<std::vector<int>> outs(n);
  for (size_t i = 0; i < g.edges.size(); ++i)
    if (std::isfinite(g.edges[i].weight)) outs[g.edges[i].src].push_back(static_cast<int>(i));
  std::vector<int> choice(n);
  double best = kInf;
  std::function<void(int, double)> rec = [&](int v, double w) {
    if (v == n) {
      std::vector<int> state(n, 0);
      int cycles = 0;
      double a = 0;
      for (int s = 0; s < n; ++s) {
        std::vector<int> path;
        int x = s;
        while (state[x] == 0) {
          state[x] = 1;
          path.push_back(x);
          x = g.edges[choice[x]].tgt;
        }
        if (state[x] == 1) {
          ++cycles;
          int y = x;
          do {
            a += g.edges[choice[y]].cocycle;
            y = g.edges[choice[y]].tgt;
          } while (y != x);
        }
        for (int y : path) state[y] = 2;
      }
      if (cycles == 1 && sign * a > 0) best = std::min(best, w);
      return;
    }
    for (int i : outs[v]) {
      choice[v] = i;
      rec(v + 1, w + g.edges[i].weight);
    }
  };
  rec(0, 0);
  return best;
}

// ------------------------------------------------------------ heights and h*

struct Heights {
  TreeResult tree;
  std::vector<double> vertex;  // h(v)
  std::vector<double> edge;    // h(e)
  double hstar = kInf;
  int witness = -1;
  bool tie_broken = false;  // selected by the tilt-direction cocycle at zero tilt
};

namespace detail {
/// Sum of `field` along tree edges from v to the root.
inline double to_root(const WeightedDigraph& g, const TreeResult& t, int v, const std::function<double(const DiEdge&)>& field) {
  std::vector<int> out(g.n(), -1);
  for (int e : t.tree) out[g.edges[e].src] = e;
  double s = 0;
  int guard = 0;
  while (v != t.root) {
    const int e = out[v];
    s += field(g.edges[e]);
    v = g.edges[e].tgt;
    if (++guard > g.n()) fail(ErrorCode::InvalidInput, "tree has a cycle");
  }
  return s;
}
}  // namespace detail

inline Heights heights_and_hstar(const WeightedDigraph& g) {
  Heights h;
  h.tree = min_rooted_spanning_tree(g);
  if (!h.tree.unique)
    fail(ErrorCode::AmbiguousMinimum, "minimal rooted spanning tree not unique (gap " +
                                          std::to_string(h.tree.runner_up_gap) + ")");
  for (const auto& e : g.edges)
    if (e.reversal < 0) fail(ErrorCode::InvalidInput, "heights need reversal pairing on every edge");
  auto coc = [](const DiEdge& e) { return e.cocycle; };
  auto tilt = [](const DiEdge& e) { return e.tilt_cocycle; };
  h.vertex.resize(g.n());
  std::vector<double> tilt_to_root(g.n());
  for (int v = 0; v < g.n(); ++v) {
    h.vertex[v] = detail::to_root(g, h.tree, v, coc);
    tilt_to_root[v] = detail::to_root(g, h.tree, v, tilt);
  }
  h.edge.resize(g.edges.size());
  for (size_t i = 0; i < g.edges.size(); ++i) h.edge[i] = h.vertex[g.edges[i].src] + g.edges[i].weight;

  for (size_t i = 0; i < g.edges.size(); ++i) {
    const double he = h.edge[i], hr = h.edge[g.edges[i].reversal];
    if (he < hr - kTieTol && he < h.hstar) {
      h.hstar = he;
      h.witness = static_cast<int>(i);
    }
  }
  if (h.witness >= 0) return h;

  // exact at graph level: fall back to the loop integral of the tilt direction
  for (size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    const double loop = tilt_to_root[e.tgt] + e.tilt_cocycle - tilt_to_root[e.src];
    if (loop > kTieTol && h.edge[i] < h.hstar) {
      h.hstar = h.edge[i];
      h.witness = static_cast<int>(i);
    }
  }
  if (h.witness < 0) fail(ErrorCode::ExactFormNoFlux, "no edge with h(e) < h(reversal)");
  h.tie_broken = true;
  return h;
}

// ----------------------------------------------------------- tree exponent

struct Theorem5 {
  double rst_total = kInf;
  double plus_total = kInf;
  double minus_total = kInf;
  bool assumption_holds = false;
  double exponent = kInf;
  TreeResult rst;
  CycleTreeResult plus;
  std::optional<CycleTreeResult> minus;
};

inline Theorem5 theorem5_exponent(const WeightedDigraph& g, bool throw_on_violation = true) {
  Theorem5 r;
  r.rst = min_rooted_spanning_tree(g);
  r.rst_total = r.rst.total_weight;
  r.plus = min_cycle_rooted_spanning_tree(g, +1);
  r.plus_total = r.plus.total_weight;
  try {
    r.minus = min_cycle_rooted_spanning_tree(g, -1);
    r.minus_total = r.minus->total_weight;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoSignedCycle) throw;
  }
  r.assumption_holds = r.plus_total < r.minus_total - kTieTol;
  if (r.assumption_holds) {
    r.exponent = r.plus_total - r.rst_total;
  } else if (throw_on_violation) {
    fail(ErrorCode::AssumptionViolated, "positive total " + csv::num(r.plus_total) + " not below negative total " +
                                            csv::num(r.minus_total));
  }
  return r;
}

// ------------------------------------------------------- Markov chain tree

inline std::vector<double> markov_tree_stationary(const WeightedDigraph& g) {
  const int n = g.n();
  if (n == 0) fail(ErrorCode::InvalidInput, "empty chain");
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : g.edges) {
    if (e.weight < 0 || e.weight > 1 + 1e-12) fail(ErrorCode::InvalidInput, "edge " + e.id + " is not a probability");
    P(e.src, e.tgt) += e.weight;
  }
  for (int v = 0; v < n; ++v)
    if (std::abs(P.row(v).sum() - 1.0) > 1e-12)
      fail(ErrorCode::InvalidInput, "row " + g.vertices[v] + " does not sum to 1");
  // strong connectivity
  auto reach = [&](bool fwd) {
    std::vector<bool> seen(n, false);
    std::vector<int> st{0};
    seen[0] = true;
    while (!st.empty()) {
      int x = st.back();
      st.pop_back();
      for (int y = 0; y < n; ++y) {
        const double p = fwd ? P(x, y) : P(y, x);
        if (p > 0 && !seen[y]) {
          seen[y] = true;
          st.push_back(y);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  };
  if (!reach(true) || !reach(false)) fail(ErrorCode::ReducibleChain, "transition graph not strongly connected");

  // Laplacian L = D - A; the in-tree weight at v is the minor with row/column v removed.
  Eigen::MatrixXd L = -P;
  for (int v = 0; v < n; ++v) {
    L(v, v) = 0;
    L(v, v) = -L.row(v).sum();
  }
  std::vector<double> pi(n);
  double z = 0;
  for (int v = 0; v < n; ++v) {
    if (n == 1) {
      pi[v] = 1;
    } else {
      Eigen::MatrixXd M(n - 1, n - 1);
      for (int i = 0, a = 0; i < n; ++i) {
        if (i == v) continue;
        for (int j = 0, b = 0; j < n; ++j) {
          if (j == v) continue;
          M(a, b++) = L(i, j);
        }
        ++a;
      }
      pi[v] = M.fullPivLu().determinant();
    }
    z += pi[v];
  }
  for (auto& p : pi) p /= z;
  return pi;
}

}  // namespace fluxlab
