#pragma once

#include <Eigen/Core>
#include <boost/version.hpp>
#include <ceres/version.h>
#include <fmt/format.h>

#include <bit>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fluxlab/action.hpp"
#include "fluxlab/asymptotics.hpp"
#include "fluxlab/csv.hpp"
#include "fluxlab/sde_sim.hpp"

namespace fluxlab::cli {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"critical-points", "morse-graph", "hstar",   "theorem5",
                                          "tree-stationary", "merge-tree",  "action-min", "fp-flux",
                                          "sde-flux",        "asymptotics", "nr-demo"};
  return s;
}

/// Fully resolved run configuration; serialises to and from the RunConfig JSON.
struct Config {
  int format_version = kFormatVersion;
  std::string subcommand;
  json potential = json{{"preset", "nr2006"}};
  std::vector<double> c;
  std::vector<double> direction;
  std::vector<double> eps;
  int grid = 0;
  int cp_grid = 64;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string output_dir;
  std::string edges;
  std::string form = "dx";
  json form_spec = nullptr;
  double dt = 1e-3;
  double T = 1000;
  int batch = 100;
  std::vector<double> from, to, vertex;
  int knots = 200;
  std::vector<double> horizons{5, 10, 20, 40};
  int window = 3;
  bool barcode = false;
  bool path = false;
  bool dump = false;
  bool merge_tree = false;
};

// ------------------------------------------------------------- validation

namespace detail {

[[noreturn]] inline void bad(const std::string& msg) { fail(ErrorCode::InvalidInput, msg); }

inline double get_num(const json& j, const std::string& key) {
  if (!j.is_number()) bad("'" + key + "' must be a number");
  return j.get<double>();
}
inline int get_int(const json& j, const std::string& key) {
  if (!j.is_number_integer()) bad("'" + key + "' must be an integer");
  return j.get<int>();
}
inline std::vector<double> get_nums(const json& j, const std::string& key) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) bad("'" + key + "' must be a number or an array of numbers");
  std::vector<double> v;
  for (const auto& x : j) v.push_back(get_num(x, key));
  return v;
}
inline std::string get_str(const json& j, const std::string& key) {
  if (!j.is_string()) bad("'" + key + "' must be a string");
  return j.get<std::string>();
}
inline bool get_bool(const json& j, const std::string& key) {
  if (!j.is_boolean()) bad("'" + key + "' must be a boolean");
  return j.get<bool>();
}

inline Vec2 vec2(const std::vector<double>& v, const std::string& what) {
  if (v.size() != 2) bad(what + " needs two components");
  return Vec2(v[0], v[1]);
}

}  // namespace detail

struct PotentialSpec {
  PeriodicPotential U = PeriodicPotential::nr2006();
  std::optional<Vec2> tilt;
};

inline PeriodicPotential preset(const std::string& name) {
  if (name == "nr2006") return PeriodicPotential::nr2006();
  if (name == "cos2d") return PeriodicPotential::cos2d();
  if (name == "cos1d") return PeriodicPotential::cos1d();
  if (name == "twowell") return PeriodicPotential::twowell();
  if (name == "zero") return PeriodicPotential::zero(2);
  if (name == "zero1d") return PeriodicPotential::zero(1);
  detail::bad("unknown preset '" + name + "'");
}

/// Reads little-endian float64 samples, x fastest.
inline std::vector<double> read_f64_file(const std::string& path, size_t count) {
  std::ifstream f(path, std::ios::binary);
  if (!f) detail::bad("cannot open " + path);
  std::vector<double> v(count);
  f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<size_t>(f.gcount()) != count * sizeof(double)) detail::bad(path + " holds fewer than nx*ny samples");
  if constexpr (std::endian::native == std::endian::big)
    for (auto& x : v) {
      auto u = std::bit_cast<std::uint64_t>(x);
      u = __builtin_bswap64(u);
      x = std::bit_cast<double>(u);
    }
  return v;
}

inline PotentialSpec parse_potential(const json& j) {
  using namespace detail;
  if (!j.is_object()) bad("potential must be an object");
  static const std::set<std::string> keys{"preset", "trig", "grid", "tilt", "periods"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!keys.count(it.key())) bad("unknown potential key '" + it.key() + "'");
  const int kinds = int(j.contains("preset")) + int(j.contains("trig")) + int(j.contains("grid"));
  if (kinds != 1) bad("potential needs exactly one of preset, trig, grid");
  PotentialSpec s;
  std::optional<Torus> torus;
  if (j.contains("periods")) {
    auto p = get_nums(j["periods"], "periods");
    if (p.empty() || p.size() > 2) bad("periods needs one or two entries");
    for (double L : p)
      if (!(L > 0)) bad("periods must be positive");
    torus = p.size() == 1 ? Torus::circle(p[0]) : Torus(2, Vec2(p[0], p[1]));
  }
  if (j.contains("preset")) {
    if (torus) bad("periods cannot be combined with a preset");
    s.U = preset(get_str(j["preset"], "preset"));
  } else if (j.contains("trig")) {
    if (!j["trig"].is_array()) bad("trig must be an array of [kx, ky, amp, phase]");
    std::vector<TrigTerm> terms;
    for (const auto& t : j["trig"]) {
      auto v = get_nums(t, "trig term");
      if (v.size() != 4) bad("trig term needs [kx, ky, amp, phase]");
      if (v[0] != std::round(v[0]) || v[1] != std::round(v[1])) bad("trig wave numbers must be integers");
      terms.push_back({v[0], v[1], v[2], v[3]});
    }
    s.U = PeriodicPotential::trig(torus.value_or(Torus::square()), std::move(terms));
  } else {
    const json& g = j["grid"];
    if (!g.is_object()) bad("grid must be an object with file, nx, ny");
    for (auto it = g.begin(); it != g.end(); ++it)
      if (it.key() != "file" && it.key() != "nx" && it.key() != "ny") bad("unknown grid key '" + it.key() + "'");
    if (!g.contains("file") || !g.contains("nx")) bad("grid needs file and nx");
    const Torus T = torus.value_or(Torus::square());
    const int nx = get_int(g["nx"], "nx");
    const int ny = T.dim == 1 ? 1 : (g.contains("ny") ? get_int(g["ny"], "ny") : nx);
    if (nx < 4 || ny < 1) bad("grid sizes too small");
    s.U = PeriodicPotential::grid(T, nx, ny, read_f64_file(get_str(g["file"], "file"), size_t(nx) * ny));
  }
  if (j.contains("tilt")) {
    auto t = get_nums(j["tilt"], "tilt");
    if (t.size() == 1 && s.U.dim() == 1) t.push_back(0);
    s.tilt = vec2(t, "tilt");
  }
  return s;
}

inline ClosedOneForm parse_form(const std::string& form, const json& spec, const Torus& T) {
  using namespace detail;
  if (form == "dx") return ClosedOneForm::dx(T);
  if (form == "dy") {
    if (T.dim == 1) bad("dy is not a form on a circle");
    return ClosedOneForm::dy(T);
  }
  if (form != "custom") bad("form must be dx, dy or custom");
  if (!spec.is_object()) bad("custom form needs form_spec {harmonic, exact}");
  for (auto it = spec.begin(); it != spec.end(); ++it)
    if (it.key() != "harmonic" && it.key() != "exact") bad("unknown form_spec key '" + it.key() + "'");
  auto h = spec.contains("harmonic") ? get_nums(spec["harmonic"], "harmonic") : std::vector<double>{0, 0};
  if (h.size() == 1) h.push_back(0);
  std::optional<PeriodicPotential> P;
  if (spec.contains("exact")) {
    json e = spec["exact"];
    if (e.is_object() && !e.contains("periods") && !e.contains("preset"))
      e["periods"] = T.dim == 1 ? json::array({T.periods[0]}) : json::array({T.periods[0], T.periods[1]});
    P = parse_potential(e).U;
  }
  return ClosedOneForm(T, vec2(h, "harmonic"), P);
}

inline json to_json(const Config& c) {
  return json{{"format_version", c.format_version},
              {"subcommand", c.subcommand},
              {"potential", c.potential},
              {"c", c.c},
              {"direction", c.direction},
              {"eps", c.eps},
              {"grid", c.grid},
              {"cp_grid", c.cp_grid},
              {"seed", c.seed},
              {"jobs", c.jobs},
              {"output_dir", c.output_dir},
              {"edges", c.edges},
              {"form", c.form},
              {"form_spec", c.form_spec},
              {"dt", c.dt},
              {"T", c.T},
              {"batch", c.batch},
              {"from", c.from},
              {"to", c.to},
              {"vertex", c.vertex},
              {"knots", c.knots},
              {"horizons", c.horizons},
              {"window", c.window},
              {"barcode", c.barcode},
              {"path", c.path},
              {"dump", c.dump},
              {"merge_tree", c.merge_tree}};
}

/// Schema check and conversion; unknown keys are rejected.
inline Config from_json(const json& j) {
  using namespace detail;
  if (!j.is_object()) bad("config must be a JSON object");
  Config c;
  const std::map<std::string, std::function<void(const json&)>> fields{
      {"format_version",
       [&](const json& v) {
         c.format_version = get_int(v, "format_version");
         if (c.format_version != kFormatVersion) bad("unsupported format_version");
       }},
      {"subcommand", [&](const json& v) { c.subcommand = get_str(v, "subcommand"); }},
      {"potential", [&](const json& v) { c.potential = v; }},
      {"c", [&](const json& v) { c.c = get_nums(v, "c"); }},
      {"direction", [&](const json& v) { c.direction = get_nums(v, "direction"); }},
      {"eps", [&](const json& v) { c.eps = get_nums(v, "eps"); }},
      {"grid", [&](const json& v) { c.grid = get_int(v, "grid"); }},
      {"cp_grid", [&](const json& v) { c.cp_grid = get_int(v, "cp_grid"); }},
      {"seed",
       [&](const json& v) {
         if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
           bad("'seed' must be a non-negative integer");
         c.seed = v.get<std::uint64_t>();
       }},
      {"jobs", [&](const json& v) { c.jobs = get_int(v, "jobs"); }},
      {"output_dir", [&](const json& v) { c.output_dir = get_str(v, "output_dir"); }},
      {"edges", [&](const json& v) { c.edges = get_str(v, "edges"); }},
      {"form", [&](const json& v) { c.form = get_str(v, "form"); }},
      {"form_spec", [&](const json& v) { c.form_spec = v; }},
      {"dt", [&](const json& v) { c.dt = get_num(v, "dt"); }},
      {"T", [&](const json& v) { c.T = get_num(v, "T"); }},
      {"batch", [&](const json& v) { c.batch = get_int(v, "batch"); }},
      {"from", [&](const json& v) { c.from = get_nums(v, "from"); }},
      {"to", [&](const json& v) { c.to = get_nums(v, "to"); }},
      {"vertex", [&](const json& v) { c.vertex = get_nums(v, "vertex"); }},
      {"knots", [&](const json& v) { c.knots = get_int(v, "knots"); }},
      {"horizons", [&](const json& v) { c.horizons = get_nums(v, "horizons"); }},
      {"window", [&](const json& v) { c.window = get_int(v, "window"); }},
      {"barcode", [&](const json& v) { c.barcode = get_bool(v, "barcode"); }},
      {"path", [&](const json& v) { c.path = get_bool(v, "path"); }},
      {"dump", [&](const json& v) { c.dump = get_bool(v, "dump"); }},
      {"merge_tree", [&](const json& v) { c.merge_tree = get_bool(v, "merge_tree"); }},
  };
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto f = fields.find(it.key());
    if (f == fields.end()) bad("unknown config key '" + it.key() + "'");
    f->second(it.value());
  }
  if (!j.contains("subcommand")) bad("config needs a subcommand");
  return c;
}

/// Fills subcommand defaults and checks ranges before any computation.
inline void resolve(Config& c) {
  using namespace detail;
  const auto& subs = subcommands();
  if (std::find(subs.begin(), subs.end(), c.subcommand) == subs.end()) bad("unknown subcommand '" + c.subcommand + "'");
  const bool graph_only = c.subcommand == "theorem5" || c.subcommand == "tree-stationary" ||
                          (c.subcommand == "hstar" && !c.edges.empty());
  if (graph_only) {
    if (c.edges.empty()) bad(c.subcommand + " needs an edge file");
    return;
  }
  const PotentialSpec ps = parse_potential(c.potential);
  const bool one_d = ps.U.dim() == 1;
  if (c.c.empty()) {
    if (ps.tilt) c.c = {ps.tilt->norm()};
    else if (c.subcommand == "asymptotics") c.c = {0.05, 0.1, 0.2};
    else if (c.subcommand == "nr-demo") c.c = {0.02, 0.05, 0.1, 0.15, 0.2};
    else if (c.subcommand == "fp-flux" || c.subcommand == "sde-flux" || c.subcommand == "merge-tree") c.c = {0.2};
    else c.c = {0.0};
  }
  if (c.direction.empty()) {
    if (ps.tilt && ps.tilt->norm() > 0) c.direction = {(*ps.tilt)[0], (*ps.tilt)[1]};
    else c.direction = {1.0, 0.0};
  }
  if (one_d && c.direction.size() == 1) c.direction.push_back(0);
  const Vec2 dir = vec2(c.direction, "direction");
  if (!(dir.norm() > 0)) bad("direction must be nonzero");
  for (double x : c.c)
    if (!(x >= 0)) bad("tilt magnitudes must be non-negative");
  if (c.eps.empty()) {
    if (c.subcommand == "sde-flux") c.eps = {0.3};
    else if (c.subcommand == "asymptotics") c.eps = {0.3, 0.2, 0.15, 0.1};
    else if (c.subcommand == "nr-demo") c.eps = {0.2, 0.15};
    else c.eps = {0.2};
  }
  for (double x : c.eps)
    if (!(x > 0)) bad("eps must be positive");
  if (c.grid == 0) {
    if (c.subcommand == "merge-tree") c.grid = 512;
    else c.grid = one_d ? 4096 : 256;
  }
  if (c.grid < 4) bad("grid must be at least 4");
  if (c.cp_grid < 4) bad("cp_grid must be at least 4");
  if (c.jobs < 1) bad("jobs must be positive");
  if (c.batch < 2) bad("batch must be at least 2");
  if (!(c.dt > 0) || !(c.T > 0)) bad("dt and T must be positive");
  if (c.knots < 3) bad("knots must be at least 3");
  if (c.window < 1 || c.window % 2 == 0) bad("window must be odd and positive");
  if (c.horizons.empty()) bad("horizons must not be empty");
  const std::set<std::string> single_c{"critical-points", "morse-graph", "merge-tree", "action-min", "sde-flux"};
  if (single_c.count(c.subcommand) && c.c.size() != 1) bad(c.subcommand + " takes a single tilt");
  if (c.subcommand == "sde-flux" && c.eps.size() != 1) bad("sde-flux takes a single eps");
  if ((c.dump || c.barcode || c.path) && c.output_dir.empty()) bad("file exports need an output directory");
  parse_form(c.form, c.form_spec, ps.U.torus());
}

// ---------------------------------------------------------------- outputs

struct Output {
  std::string summary;  // printed on stdout
  std::vector<std::pair<std::string, std::string>> text_files;  // name, contents
  std::vector<std::pair<std::string, std::vector<double>>> binary_files;
};

inline std::string decimal(double x) {
  std::string s = fmt::format("{:.10g}", x);
  if (s.find_first_of(".eni") == std::string::npos) s += ".0";
  return s;
}

inline std::string csv_text(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream os;
  csv::Writer w(os);
  w.row(header);
  for (const auto& r : rows) w.row(r);
  return os.str();
}

inline std::string num_or_empty(double x) { return std::isnan(x) ? "" : csv::num(x); }

namespace detail {

struct Context {
  const Config& cfg;
  PotentialSpec pot;
  int jobs;
  TiltedDrift drift(double c) const { return TiltedDrift(pot.U, c, vec2(cfg.direction, "direction")); }
  int n2() const { return pot.U.dim() == 2 ? cfg.grid : 0; }
};

inline Output critical_points_cmd(const Context& cx) {
  const auto cps = find_critical_points(cx.drift(cx.cfg.c[0]), {.grid_n = cx.cfg.cp_grid});
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : cps)
    rows.push_back({csv::num(p.position[0]), csv::num(p.position[1]), std::to_string(p.index),
                    csv::num(p.tilted_value), csv::num(p.hessian_eigs[0]), csv::num(p.hessian_eigs[1]),
                    csv::num(p.newton_residual)});
  return {"", {{"critical_points.csv", csv_text({"x", "y", "index", "tilted_value", "eig1", "eig2", "residual"}, rows)}}};
}

inline Output morse_graph_cmd(const Context& cx) {
  const auto d = cx.drift(cx.cfg.c[0]);
  const auto g = build_morse_graph(d, find_critical_points(d, {.grid_n = cx.cfg.cp_grid}));
  gains_vs_values_check(g, d);
  std::ostringstream os;
  write_morse_csv(os, g);
  return {"", {{"morse_graph.csv", os.str()}}};
}

inline Output hstar_cmd(const Context& cx) {
  std::vector<std::vector<std::string>> rows;
  std::string summary;
  if (!cx.cfg.edges.empty()) {
    const auto g = read_digraph_file(cx.cfg.edges);
    const auto h = heights_and_hstar(g);
    std::vector<std::vector<std::string>> vrows;
    for (int v = 0; v < g.n(); ++v) vrows.push_back({g.vertices[v], csv::num(h.vertex[v])});
    return {decimal(h.hstar),
            {{"hstar.csv", csv_text({"hstar", "witness", "tie_broken"},
                                    {{csv::num(h.hstar), g.edges[h.witness].id, h.tie_broken ? "true" : "false"}})},
             {"heights.csv", csv_text({"vertex", "height"}, vrows)}}};
  }
  const auto curve = hstar_curve(cx.pot.U, cx.cfg.c, vec2(cx.cfg.direction, "direction"), cx.jobs);
  for (const auto& p : curve.points) rows.push_back({csv::num(p.c), num_or_empty(p.hstar), p.flag});
  if (curve.points.size() == 1) {
    if (!curve.points[0].flag.empty()) throw std::runtime_error(curve.points[0].flag);
    summary = decimal(curve.points[0].hstar);
  } else {
    summary = fmt::format("strictly_increasing = {}", curve.strictly_increasing);
  }
  return {summary, {{"hstar.csv", csv_text({"c", "hstar", "flag"}, rows)}}};
}

inline Output theorem5_cmd(const Context& cx) {
  const auto g = read_digraph_file(cx.cfg.edges);
  const auto r = theorem5_exponent(g);
  return {csv::num(r.exponent),
          {{"theorem5.csv", csv_text({"rst_total", "plus_total", "minus_total", "assumption_holds", "exponent"},
                                     {{csv::num(r.rst_total), csv::num(r.plus_total), csv::num(r.minus_total),
                                       r.assumption_holds ? "true" : "false", csv::num(r.exponent)}})}}};
}

inline Output tree_stationary_cmd(const Context& cx) {
  const auto g = read_digraph_file(cx.cfg.edges);
  const auto pi = markov_tree_stationary(g);
  std::vector<std::vector<std::string>> rows;
  for (int v = 0; v < g.n(); ++v) rows.push_back({g.vertices[v], csv::num(pi[v])});
  return {"", {{"tree_stationary.csv", csv_text({"vertex", "probability"}, rows)}}};
}

inline Vec2 witness_vertex(const TiltedDrift& d, int cp_grid) {
  const auto gh = graph_heights(d, {.grid_n = cp_grid});
  return gh.graph.vertices[gh.digraph.edges[gh.heights.witness].src].position;
}

inline Output merge_tree_cmd(const Context& cx) {
  const auto d = cx.drift(cx.cfg.c[0]);
  const Vec2 v = cx.cfg.vertex.empty() ? witness_vertex(d, cx.cfg.cp_grid) : vec2(cx.cfg.vertex, "vertex");
  const auto r = hstar_via_merge_tree(d, v, {.grid_n = cx.cfg.grid, .window = cx.cfg.window, .barcode = cx.cfg.barcode});
  Output o{decimal(r.hstar),
           {{"merge_tree.csv", csv_text({"c", "hstar", "window", "merge_value", "vertex_x", "vertex_y"},
                                        {{csv::num(cx.cfg.c[0]), csv::num(r.hstar), std::to_string(r.window),
                                          csv::num(r.merge_value), csv::num(v[0]), csv::num(v[1])}})}}};
  if (cx.cfg.barcode) {
    std::ostringstream os;
    write_barcode_csv(os, r);
    o.text_files.emplace_back("barcode.csv", os.str());
  }
  return o;
}

inline Output action_min_cmd(const Context& cx) {
  const auto d = cx.drift(cx.cfg.c[0]);
  const auto cps = find_critical_points(d, {.grid_n = cx.cfg.cp_grid});
  Vec2 from, to;
  std::string gain = "";
  if (cx.cfg.from.empty() && cx.cfg.to.empty()) {
    const auto g = build_morse_graph(d, cps);
    const MorseEdge* best = nullptr;
    for (const auto& e : g.edges)
      if (!best || e.gain < best->gain) best = &e;
    from = best->source_lift;
    to = best->saddle_lift;
    gain = csv::num(best->gain);
  } else {
    from = vec2(cx.cfg.from, "from");
    to = vec2(cx.cfg.to, "to");
  }
  ActionMinOptions opt{.horizons = cx.cfg.horizons, .knots_n = cx.cfg.knots};
  for (const auto& p : cps)
    if (p.index == 0 && d.torus().distance(p.position, from) > 1e-6 && d.torus().distance(p.position, to) > 1e-6)
      opt.avoid.push_back(p.position);
  const auto r = minimize_action(d, from, to, opt);
  Output o{csv::num(r.value),
           {{"action_min.csv",
             csv_text({"from_x", "from_y", "to_x", "to_y", "value", "horizon", "converged", "edge_gain"},
                      {{csv::num(from[0]), csv::num(from[1]), csv::num(to[0]), csv::num(to[1]), csv::num(r.value),
                        csv::num(r.horizon), r.converged ? "true" : "false", gain}})}}};
  if (cx.cfg.path) {
    std::vector<std::vector<std::string>> rows;
    for (size_t k = 0; k < r.path.knots.size(); ++k)
      rows.push_back({csv::num(r.path.times[k]), csv::num(r.path.knots[k][0]), csv::num(r.path.knots[k][1])});
    o.text_files.emplace_back("path.csv", csv_text({"t", "x", "y"}, rows));
  }
  return o;
}

inline Output fp_flux_cmd(const Context& cx) {
  const auto& cfg = cx.cfg;
  const int nc = static_cast<int>(cfg.c.size()), ne = static_cast<int>(cfg.eps.size());
  const ClosedOneForm form = parse_form(cfg.form, cfg.form_spec, cx.pot.U.torus());
  std::vector<std::vector<std::string>> rows(static_cast<size_t>(nc) * ne);
  std::vector<StationaryField> fields(cfg.dump ? rows.size() : 0);
  parallel_for(nc * ne, cx.jobs, [&](int k) {
    const auto d = cx.drift(cfg.c[k / ne]);
    const double eps = cfg.eps[k % ne];
    auto f = solve_stationary(d, eps, cfg.grid, cx.n2());
    const double F = flux(f, form).value;
    const auto ent = entropy_production_check(f, d);
    rows[k] = {csv::num(cfg.c[k / ne]), csv::num(eps), csv::num(F), F > 0 ? csv::num(-eps * std::log(F)) : "",
               csv::num(ent.rhs), csv::num(f.div_residual)};
    if (cfg.dump) fields[k] = std::move(f);
  });
  Output o;
  o.text_files.emplace_back(
      "fp_flux.csv",
      csv_text({"c", "eps", "flux", "minus_eps_log_flux", "entropy_production", "div_residual"}, rows));
  for (size_t k = 0; k < fields.size(); ++k) {
    const auto& f = fields[k];
    const std::string tag = fmt::format("field_{}", k);
    json side{{"c", cfg.c[k / ne]},
              {"eps", cfg.eps[k % ne]},
              {"n1", f.n1},
              {"n2", f.n2},
              {"periods", {f.torus.periods[0], f.torus.periods[1]}},
              {"dim", f.torus.dim},
              {"dtype", "float64"},
              {"byte_order", "little"},
              {"layout", "index i + n1*j, cell (i,j) centred at (i*L1/n1, j*L2/n2)"},
              {"files",
               {{"rho", tag + ".rho.bin"}, {"jx", tag + ".jx.bin"}, {"jy", tag + ".jy.bin"}}},
              {"jx", "current through the face between cells (i,j) and (i+1,j), per unit face length"},
              {"jy", "current through the face between cells (i,j) and (i,j+1), per unit face length"}};
    o.text_files.emplace_back(tag + ".json", side.dump(2) + "\n");
    o.binary_files.emplace_back(tag + ".rho.bin", f.rho);
    o.binary_files.emplace_back(tag + ".jx.bin", f.jx);
    o.binary_files.emplace_back(tag + ".jy.bin", f.jy.empty() ? std::vector<double>(f.rho.size(), 0.0) : f.jy);
  }
  return o;
}

inline Output sde_flux_cmd(const Context& cx) {
  const auto& cfg = cx.cfg;
  const auto d = cx.drift(cfg.c[0]);
  const ClosedOneForm form = parse_form(cfg.form, cfg.form_spec, cx.pot.U.torus());
  const auto r = estimate_flux(d, form,
                               {.eps = cfg.eps[0], .dt = cfg.dt, .T = cfg.T, .batch = cfg.batch, .seed = cfg.seed,
                                .jobs = cx.jobs});
  return {fmt::format("{} +- {}", csv::num(r.mean[0]), csv::num(r.stderr_[0])),
          {{"sde_flux.csv",
            csv_text({"c", "eps", "dt", "T", "batch", "seed", "mean", "stderr"},
                     {{csv::num(cfg.c[0]), csv::num(cfg.eps[0]), csv::num(cfg.dt), csv::num(cfg.T),
                       std::to_string(cfg.batch), std::to_string(cfg.seed), csv::num(r.mean[0]),
                       csv::num(r.stderr_[0])}})}}};
}

inline Output asymptotics_cmd(const Context& cx) {
  const auto& cfg = cx.cfg;
  const auto s = sweep(cx.pot.U, cfg.c, cfg.eps, cfg.grid, cx.jobs, cfg.merge_tree);
  std::vector<std::vector<std::string>> rows, lrows, xrows;
  for (const auto& r : s.rows) {
    rows.push_back({csv::num(r.c), csv::num(r.eps), num_or_empty(r.flux), num_or_empty(r.minus_eps_log_flux),
                    num_or_empty(r.hstar_graph), num_or_empty(r.hstar_merge_tree), r.flag});
    if (r.flag.empty()) {
      lrows.push_back({fmt::format("flux c={}", csv::num(r.c)), csv::num(r.eps), csv::num(r.flux)});
      lrows.push_back(
          {fmt::format("minus_eps_log_flux c={}", csv::num(r.c)), csv::num(r.eps), csv::num(r.minus_eps_log_flux)});
    }
  }
  const size_t ne = cfg.eps.size();
  for (size_t i = 0; i < cfg.c.size(); ++i) {
    const auto& r = s.rows[i * ne];
    if (!std::isnan(r.hstar_graph)) lrows.push_back({"hstar_graph", csv::num(r.c), csv::num(r.hstar_graph)});
    if (!std::isnan(r.hstar_merge_tree))
      lrows.push_back({"hstar_merge_tree", csv::num(r.c), csv::num(r.hstar_merge_tree)});
  }
  for (const auto& [c, fit] : s.extrapolation) {
    lrows.push_back({"psi_fit", csv::num(c), csv::num(fit.psi)});
    xrows.push_back({csv::num(c), csv::num(fit.psi), csv::num(fit.slope), csv::num(fit.residual)});
  }
  return {"",
          {{"asymptotics.csv", csv_text({"c", "eps", "flux", "minus_eps_log_flux", "hstar_graph", "hstar_merge_tree",
                                         "flag"},
                                        rows)},
           {"asymptotics_long.csv", csv_text({"series", "x", "y"}, lrows)},
           {"extrapolation.csv", csv_text({"c", "psi", "slope", "residual"}, xrows)}}};
}

inline Output nr_demo_cmd(const Context& cx) {
  const auto& cfg = cx.cfg;
  const auto s = sweep(cx.pot.U, cfg.c, cfg.eps, cfg.grid, cx.jobs);
  const size_t ne = cfg.eps.size();
  std::vector<std::vector<std::string>> lrows;
  for (const auto& r : s.rows)
    if (r.flag.empty()) lrows.push_back({fmt::format("flux eps={}", csv::num(r.eps)), csv::num(r.c), csv::num(r.flux)});
  for (size_t i = 0; i < cfg.c.size(); ++i)
    if (!std::isnan(s.rows[i * ne].hstar_graph))
      lrows.push_back({"hstar_graph", csv::num(cfg.c[i]), csv::num(s.rows[i * ne].hstar_graph)});
  // best pair per eps: largest flux drop for increasing tilt
  std::vector<std::vector<std::string>> rows;
  std::string summary = "no negative-resistance pair found";
  bool found = false;
  for (size_t j = 0; j < ne; ++j) {
    const SweepRow* b1 = nullptr;
    const SweepRow* b2 = nullptr;
    for (size_t a = 0; a < cfg.c.size(); ++a)
      for (size_t b = 0; b < cfg.c.size(); ++b) {
        const auto& r1 = s.rows[a * ne + j];
        const auto& r2 = s.rows[b * ne + j];
        if (!(r1.c < r2.c) || !r1.flag.empty() || !r2.flag.empty() || !(r2.flux < r1.flux)) continue;
        if (!b1 || r1.flux / r2.flux > b1->flux / b2->flux) b1 = &r1, b2 = &r2;
      }
    if (!b1) continue;
    const bool pred = b1->hstar_graph < b2->hstar_graph;
    rows.push_back({csv::num(b1->c), csv::num(b2->c), csv::num(cfg.eps[j]), csv::num(b1->flux), csv::num(b2->flux),
                    "true", num_or_empty(b1->hstar_graph), num_or_empty(b2->hstar_graph), pred ? "true" : "false"});
    if (!found)
      summary = fmt::format("negative resistance: eps={} flux(c={})={} > flux(c={})={}", csv::num(cfg.eps[j]),
                            csv::num(b1->c), csv::num(b1->flux), csv::num(b2->c), csv::num(b2->flux));
    found = true;
  }
  return {summary,
          {{"nr_demo.csv",
            csv_text({"c1", "c2", "eps", "flux1", "flux2", "verdict", "hstar1", "hstar2", "predicted"}, rows)},
           {"nr_demo_long.csv", csv_text({"series", "x", "y"}, lrows)}}};
}

}  // namespace detail

inline Output execute(const Config& cfg, int jobs) {
  using namespace detail;
  const bool graph_only = cfg.subcommand == "theorem5" || cfg.subcommand == "tree-stationary" ||
                          (cfg.subcommand == "hstar" && !cfg.edges.empty());
  Context cx{cfg, graph_only ? PotentialSpec{} : parse_potential(cfg.potential), jobs};
  const std::string& s = cfg.subcommand;
  if (s == "critical-points") return critical_points_cmd(cx);
  if (s == "morse-graph") return morse_graph_cmd(cx);
  if (s == "hstar") return hstar_cmd(cx);
  if (s == "theorem5") return theorem5_cmd(cx);
  if (s == "tree-stationary") return tree_stationary_cmd(cx);
  if (s == "merge-tree") return merge_tree_cmd(cx);
  if (s == "action-min") return action_min_cmd(cx);
  if (s == "fp-flux") return fp_flux_cmd(cx);
  if (s == "sde-flux") return sde_flux_cmd(cx);
  if (s == "asymptotics") return asymptotics_cmd(cx);
  if (s == "nr-demo") return nr_demo_cmd(cx);
  bad("unknown subcommand '" + s + "'");
}

inline json versions() {
  return json{{"flux-lab", kToolVersion},
              {"compiler", __VERSION__},
              {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
              {"boost", BOOST_LIB_VERSION},
              {"fmt", FMT_VERSION},
              {"ceres", CERES_VERSION_STRING},
              {"cli11", CLI11_VERSION},
              {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                            NLOHMANN_JSON_VERSION_PATCH)}};
}

inline void write_file(const std::filesystem::path& p, const std::string& data) {
  std::ofstream f(p, std::ios::binary);
  if (!f) detail::bad("cannot write " + p.string());
  f << data;
}

inline void write_f64(const std::filesystem::path& p, const std::vector<double>& v) {
  std::ofstream f(p, std::ios::binary);
  if (!f) detail::bad("cannot write " + p.string());
  for (double x : v) {
    auto u = std::bit_cast<std::uint64_t>(x);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xff);
    f.write(b, 8);
  }
}

/// Runs a resolved config, writes outputs and manifest, returns the process exit code.
inline int run(Config cfg, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    resolve(cfg);
    const int jobs = resolve_jobs(cfg.jobs);
    Output o = execute(cfg, jobs);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cfg.output_dir.empty()) {
      if (!o.summary.empty()) out << o.summary << "\n";
      else if (!o.text_files.empty()) out << o.text_files.front().second;
      return 0;
    }
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    json outputs = json::array();
    for (const auto& [name, data] : o.text_files) {
      write_file(dir / name, data);
      outputs.push_back(name);
    }
    for (const auto& [name, data] : o.binary_files) {
      write_f64(dir / name, data);
      outputs.push_back(name);
    }
    json manifest{{"manifest_version", kFormatVersion},
                  {"config", to_json(cfg)},
                  {"versions", versions()},
                  {"seeds", {cfg.seed}},
                  {"jobs", jobs},
                  {"wall_time_s", wall},
                  {"outputs", outputs}};
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    if (!o.summary.empty()) out << o.summary << "\n";
    return 0;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return is_input_error(e.code()) ? 2 : 3;
  } catch (const json::exception& e) {
    err << "InvalidInput: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return 3;
  }
}

/// Accepts either a RunConfig object or a manifest written by a previous run.
inline Config config_from_document(const json& j) {
  if (j.is_object() && j.contains("manifest_version")) {
    static const std::set<std::string> keys{"manifest_version", "config", "versions", "seeds",
                                            "jobs",             "wall_time_s", "outputs"};
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!keys.count(it.key())) detail::bad("unknown manifest key '" + it.key() + "'");
    if (!j.contains("config")) detail::bad("manifest has no config");
    return from_json(j["config"]);
  }
  return from_json(j);
}

inline json read_json_arg(const std::string& s) {
  if (!s.empty() && (s.front() == '{' || s.front() == '[')) return json::parse(s);
  std::ifstream f(s);
  if (!f) detail::bad("cannot open " + s);
  return json::parse(f);
}

inline int main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"flux-lab: steady-state probability flux of small-noise diffusions on flat tori"};
  app.require_subcommand(1);
  Config cfg;
  std::string preset_name, potential_arg, form_spec_arg, config_path, out_override;

  auto add_potential = [&](CLI::App* s) {
    s->add_option("--preset", preset_name, "preset potential: nr2006, cos2d, cos1d, twowell, zero, zero1d");
    s->add_option("--potential", potential_arg, "potential JSON text or file");
    s->add_option("--c,--c-list", cfg.c, "tilt magnitude(s)")->delimiter(',');
    s->add_option("--direction", cfg.direction, "tilt direction b1,b2")->delimiter(',');
    s->add_option("--cp-grid", cfg.cp_grid, "seed grid for zero finding");
  };
  auto add_common = [&](CLI::App* s) {
    s->add_option("--out", cfg.output_dir, "output directory (CSV files and manifest.json)");
    s->add_option("--jobs", cfg.jobs, "worker threads (FLUXLAB_JOBS overrides)");
  };
  auto add_eps = [&](CLI::App* s) { s->add_option("--eps,--eps-list", cfg.eps, "noise level(s)")->delimiter(','); };
  auto add_form = [&](CLI::App* s) {
    s->add_option("--form", cfg.form, "dx, dy or custom")->check(CLI::IsMember({"dx", "dy", "custom"}));
    s->add_option("--form-spec", form_spec_arg, "custom form JSON {harmonic:[h1,h2], exact:{trig:[...]}}");
  };
  std::map<std::string, CLI::App*> subs;
  auto sub = [&](const std::string& name, const std::string& help) {
    auto* s = app.add_subcommand(name, help);
    subs[name] = s;
    add_common(s);
    return s;
  };

  add_potential(sub("critical-points", "zeros of the tilted drift"));
  add_potential(sub("morse-graph", "Morse graph edge list"));
  {
    auto* s = sub("hstar", "critical height h* from the Morse graph or an edge file");
    add_potential(s);
    s->add_option("--edges", cfg.edges, "edge-list CSV");
  }
  sub("theorem5", "tree exponent and assumption check")->add_option("--edges", cfg.edges, "edge-list CSV")->required();
  sub("tree-stationary", "stationary law via the Markov chain tree formula")
      ->add_option("--edges", cfg.edges, "edge-list CSV of transition probabilities")
      ->required();
  {
    auto* s = sub("merge-tree", "h* from the sublevel merge tree on the cover");
    add_potential(s);
    s->add_option("--grid", cfg.grid, "nodes per period and axis");
    s->add_option("--window", cfg.window, "initial periods per axis (odd)");
    s->add_option("--vertex", cfg.vertex, "starting minimum x,y")->delimiter(',');
    s->add_flag("--barcode", cfg.barcode, "write barcode.csv");
  }
  {
    auto* s = sub("action-min", "minimum Freidlin-Wentzell action between two points");
    add_potential(s);
    s->add_option("--from", cfg.from, "start x,y")->delimiter(',');
    s->add_option("--to", cfg.to, "end x,y")->delimiter(',');
    s->add_option("--knots", cfg.knots, "path knots");
    s->add_option("--horizons", cfg.horizons, "time horizons")->delimiter(',');
    s->add_flag("--path", cfg.path, "write path.csv");
  }
  {
    auto* s = sub("fp-flux", "flux from the stationary Fokker-Planck solve");
    add_potential(s);
    add_eps(s);
    add_form(s);
    s->add_option("--grid", cfg.grid, "cells per axis");
    s->add_flag("--dump", cfg.dump, "write density and currents as float64 with JSON sidecars");
  }
  {
    auto* s = sub("sde-flux", "Monte-Carlo flux estimate");
    add_potential(s);
    add_eps(s);
    add_form(s);
    s->add_option("--dt", cfg.dt, "time step");
    s->add_option("--T", cfg.T, "averaging time");
    s->add_option("--batch", cfg.batch, "independent samples");
    s->add_option("--seed", cfg.seed, "random seed");
  }
  {
    auto* s = sub("asymptotics", "eps and c sweep with exponent extrapolation");
    add_potential(s);
    add_eps(s);
    s->add_option("--grid", cfg.grid, "cells per axis");
    s->add_flag("--merge-tree", cfg.merge_tree, "also compute h* by merge tree");
  }
  {
    auto* s = sub("nr-demo", "negative-resistance search");
    add_potential(s);
    add_eps(s);
    s->add_option("--grid", cfg.grid, "cells per axis");
  }
  {
    auto* s = app.add_subcommand("run", "replay a RunConfig or manifest");
    subs["run"] = s;
    s->add_option("--config", config_path, "RunConfig or manifest JSON")->required();
    s->add_option("--out", out_override, "override the output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  try {
    std::string name;
    for (auto& [n, s] : subs)
      if (s->parsed()) name = n;
    if (name == "run") {
      Config c = config_from_document(read_json_arg(config_path));
      if (!out_override.empty()) c.output_dir = out_override;
      return run(c, out, err);
    }
    cfg.subcommand = name;
    if (!preset_name.empty() && !potential_arg.empty()) detail::bad("use either --preset or --potential");
    if (!preset_name.empty()) cfg.potential = json{{"preset", preset_name}};
    if (!potential_arg.empty()) cfg.potential = read_json_arg(potential_arg);
    if (!form_spec_arg.empty()) cfg.form_spec = read_json_arg(form_spec_arg);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return is_input_error(e.code()) ? 2 : 3;
  } catch (const json::exception& e) {
    err << "InvalidInput: " << e.what() << "\n";
    return 2;
  }
  return run(cfg, out, err);
}

}  // namespace fluxlab::cli
