#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fluxlab/cli.hpp"

namespace fs = std::filesystem;
using namespace fluxlab;
using nlohmann::json;

namespace {

struct Result {
  int rc;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("fluxlab_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Result run(const std::string& args, const std::string& env = "") {
  const fs::path dir = scratch("io");
  const std::string cmd = env + " " + std::string(FLUXLAB_CLI) + " " + args + " >" + (dir / "out").string() + " 2>" +
                          (dir / "err").string();
  const int status = std::system(cmd.c_str());
  return {WEXITSTATUS(status), slurp(dir / "out"), slurp(dir / "err")};
}

const std::string data = FLUXLAB_DATA_DIR;

}  // namespace

TEST(Cli, HstarAtZeroTilt) {
  auto r = run("hstar --preset nr2006 --c 0");
  EXPECT_EQ(r.rc, 0) << r.err;
  EXPECT_EQ(r.out, "2.0\n");
}

TEST(Cli, TreeExponentOnEx81) {
  auto r = run("theorem5 --edges " + data + "/ex81.csv");
  EXPECT_EQ(r.rc, 0) << r.err;
  EXPECT_EQ(r.out, "2\n");
}

TEST(Cli, EmptyEdgeFileIsValidationError) {
  const auto dir = scratch("empty");
  std::ofstream(dir / "edges.csv").close();
  auto r = run("theorem5 --edges " + (dir / "edges.csv").string());
  EXPECT_EQ(r.rc, 2);
  EXPECT_NE(r.err.find("NoArborescence"), std::string::npos) << r.err;
}

TEST(Cli, NumericalFailureExitsThree) {
  auto r = run("merge-tree --c 0 --grid 64");
  EXPECT_EQ(r.rc, 3);
  EXPECT_NE(r.err.find("ExactFormNoFlux"), std::string::npos) << r.err;
}

TEST(Cli, BadArgumentsExitTwo) {
  EXPECT_EQ(run("fp-flux --bogus").rc, 2);
  EXPECT_EQ(run("hstar --preset nosuch").rc, 2);
  auto r = run("fp-flux --eps 0.01 --grid 64");
  EXPECT_EQ(r.rc, 2);
  EXPECT_NE(r.err.find("GridTooCoarse"), std::string::npos);
}

TEST(Cli, CriticalPointsCsv) {
  auto r = run("critical-points --preset nr2006");
  ASSERT_EQ(r.rc, 0) << r.err;
  std::istringstream is(r.out);
  auto t = csv::read_table(is);
  EXPECT_EQ(t.header, (std::vector<std::string>{"x", "y", "index", "tilted_value", "eig1", "eig2", "residual"}));
  EXPECT_EQ(t.rows.size(), 4u);
  EXPECT_NE(r.out.find("\r\n"), std::string::npos);
}

TEST(Cli, MorseGraphFeedsHstar) {
  const auto dir = scratch("mg");
  ASSERT_EQ(run("morse-graph --c 0.05 --out " + dir.string()).rc, 0);
  auto a = run("hstar --edges " + (dir / "morse_graph.csv").string());
  auto b = run("hstar --c 0.05");
  ASSERT_EQ(a.rc, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, FpFluxDumpAndReplay) {
  const auto d1 = scratch("fp1"), d2 = scratch("fp2");
  auto r = run("fp-flux --c-list 0.1,0.2 --eps-list 0.4 --grid 96 --dump --out " + d1.string());
  ASSERT_EQ(r.rc, 0) << r.err;
  auto t = csv::read_table_file((d1 / "fp_flux.csv").string());
  EXPECT_EQ(t.header, (std::vector<std::string>{"c", "eps", "flux", "minus_eps_log_flux", "entropy_production",
                                                "div_residual"}));
  ASSERT_EQ(t.rows.size(), 2u);

  const json side = json::parse(slurp(d1 / "field_1.json"));
  EXPECT_EQ(side["byte_order"], "little");
  EXPECT_EQ(side["n1"], 96);
  const std::string rho = slurp(d1 / "field_1.rho.bin");
  ASSERT_EQ(rho.size(), 96u * 96u * 8u);
  double mass = 0;
  for (size_t k = 0; k < 96 * 96; ++k) {
    double x;
    std::memcpy(&x, rho.data() + 8 * k, 8);
    mass += x;
  }
  EXPECT_NEAR(mass * std::pow(2 * M_PI / 96, 2), 1.0, 1e-12);

  const json m = json::parse(slurp(d1 / "manifest.json"));
  EXPECT_TRUE(m.contains("versions"));
  EXPECT_TRUE(m.contains("wall_time_s"));
  EXPECT_EQ(m["config"]["grid"], 96);
  r = run("run --config " + (d1 / "manifest.json").string() + " --out " + d2.string());
  ASSERT_EQ(r.rc, 0) << r.err;
  for (const auto& f : m["outputs"]) EXPECT_EQ(slurp(d1 / f.get<std::string>()), slurp(d2 / f.get<std::string>())) << f;
}

TEST(Cli, ConfigRejectsUnknownKeys) {
  const auto dir = scratch("cfg");
  std::ofstream(dir / "c.json") << R"({"subcommand":"hstar","c":[0],"colour":"red"})";
  auto r = run("run --config " + (dir / "c.json").string());
  EXPECT_EQ(r.rc, 2);
  EXPECT_NE(r.err.find("colour"), std::string::npos);
  std::ofstream(dir / "d.json") << R"({"subcommand":"hstar","potential":{"preset":"nr2006","shape":1}})";
  EXPECT_EQ(run("run --config " + (dir / "d.json").string()).rc, 2);
  std::ofstream(dir / "e.json") << R"({"subcommand":"hstar","c":[0]})";
  r = run("run --config " + (dir / "e.json").string());
  EXPECT_EQ(r.rc, 0);
  EXPECT_EQ(r.out, "2.0\n");
}

TEST(Cli, ConfigRoundTrip) {
  cli::Config c;
  c.subcommand = "sde-flux";
  c.c = {0.2};
  c.eps = {0.3};
  c.seed = 12345678901234ull;
  c.form_spec = json{{"harmonic", {1, 0}}};
  const json j = cli::to_json(c);
  EXPECT_EQ(cli::to_json(cli::from_json(j)), j);
}

TEST(Cli, JobsEnvOverride) {
  const auto dir = scratch("jobs");
  auto r = run("sde-flux --c 0.2 --eps 0.4 --dt 5e-3 --T 5 --batch 4 --jobs 1 --out " + dir.string(),
               "FLUXLAB_JOBS=3");
  ASSERT_EQ(r.rc, 0) << r.err;
  const json m = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(m["jobs"], 3);
  auto t = csv::read_table_file((dir / "sde_flux.csv").string());
  EXPECT_EQ(t.header, (std::vector<std::string>{"c", "eps", "dt", "T", "batch", "seed", "mean", "stderr"}));
  auto again = run("sde-flux --c 0.2 --eps 0.4 --dt 5e-3 --T 5 --batch 4 --jobs 1");
  EXPECT_EQ(again.out, run("sde-flux --c 0.2 --eps 0.4 --dt 5e-3 --T 5 --batch 4 --jobs 2").out);
}

TEST(Cli, PotentialForms) {
  auto trig = run(R"(hstar --potential '{"trig":[[1,0,1,0],[0,1,1,0]]}' --c 0.2)");
  auto pre = run("hstar --preset cos2d --c 0.2");
  ASSERT_EQ(trig.rc, 0) << trig.err;
  EXPECT_EQ(trig.out, pre.out);

  auto tilt = run(R"(hstar --potential '{"preset":"cos2d","tilt":[0.2,0]}')");
  EXPECT_EQ(tilt.out, pre.out);

  const auto dir = scratch("grid");
  {
    std::ofstream f(dir / "u.bin", std::ios::binary);
    const int n = 64;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const double v = std::cos(2 * M_PI * i / n) + std::cos(2 * M_PI * j / n);
        f.write(reinterpret_cast<const char*>(&v), 8);
      }
  }
  auto grid = run("hstar --c 0.2 --potential '{\"grid\":{\"file\":\"" + (dir / "u.bin").string() +
                  "\",\"nx\":64,\"ny\":64}}'");
  ASSERT_EQ(grid.rc, 0) << grid.err;
  EXPECT_NEAR(std::stod(grid.out), std::stod(pre.out), 1e-3);

  auto one = run(R"(fp-flux --potential '{"trig":[[1,0,1,0]],"periods":[6.283185307179586]}' --c 0.2 --eps 0.2)");
  ASSERT_EQ(one.rc, 0) << one.err;
  std::istringstream is(one.out);
  auto t = csv::read_table(is);
  EXPECT_NEAR(csv::to_double(t.rows[0][2], "flux") / flux_1d_closed_form(PeriodicPotential::cos1d(), 0.2, 0.2).flux,
              1.0, 1e-5);
}

TEST(Cli, LongFormatOutputs) {
  const auto dir = scratch("asym");
  auto r = run("asymptotics --preset cos1d --c-list 0.1,0.2 --eps-list 0.3,0.2,0.1 --grid 1024 --out " + dir.string());
  ASSERT_EQ(r.rc, 0) << r.err;
  auto lt = csv::read_table_file((dir / "asymptotics_long.csv").string());
  EXPECT_EQ(lt.header, (std::vector<std::string>{"series", "x", "y"}));
  EXPECT_EQ(csv::read_table_file((dir / "asymptotics.csv").string()).rows.size(), 6u);

  const auto d2 = scratch("nr");
  r = run("nr-demo --c-list 0.05,0.15 --eps-list 0.3 --grid 96 --out " + d2.string());
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_EQ(csv::read_table_file((d2 / "nr_demo_long.csv").string()).header,
            (std::vector<std::string>{"series", "x", "y"}));
}

TEST(Cli, ActionAndMergeTreeExports) {
  const auto dir = scratch("am");
  auto r = run("action-min --c 0 --path --out " + dir.string());
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_NEAR(std::stod(r.out), 2.0, 0.04);
  EXPECT_EQ(csv::read_table_file((dir / "path.csv").string()).header, (std::vector<std::string>{"t", "x", "y"}));
  r = run("merge-tree --c 0.1 --grid 128 --barcode --out " + dir.string());
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_GT(csv::read_table_file((dir / "barcode.csv").string()).rows.size(), 0u);
}

TEST(Cli, TreeStationary) {
  const auto dir = scratch("ts");
  std::ofstream(dir / "p.csv") << "src,tgt,weight\na,b,0.5\na,a,0.5\nb,a,1\n";
  auto r = run("tree-stationary --edges " + (dir / "p.csv").string());
  ASSERT_EQ(r.rc, 0) << r.err;
  std::istringstream is(r.out);
  auto t = csv::read_table(is);
  EXPECT_NEAR(csv::to_double(t.rows[0][1], "p"), 2.0 / 3, 1e-12);
}
