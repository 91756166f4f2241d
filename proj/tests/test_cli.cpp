#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "tallmcmc/tallmcmc.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace tallmcmc;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tallmcmc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result cli(const std::string& args) const {
    const auto o = dir_ / "stdout.txt", e = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && '" + std::string(TALLMCMC_CLI_PATH) + "' " + args + " >'" +
                            o.string() + "' 2>'" + e.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
  }

  fs::path path(const std::string& f) const { return dir_ / f; }

  void write(const std::string& f, const std::string& s) const { std::ofstream(path(f)) << s; }

  void gaussian(const std::string& f, Index n, int seed = 1) const {
    ASSERT_EQ(cli("generate --kind gaussian_1d --n " + std::to_string(n) + " --seed " + std::to_string(seed) +
                  " --out " + f)
                  .code,
              0);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpAndMissingSubcommand) {
  EXPECT_EQ(cli("--help").code, 0);
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
}

TEST_F(Cli, GenerateWritesStoreAndMetadata) {
  gaussian("g.bin", 1000);
  ASSERT_TRUE(fs::exists(path("g.bin")));
  ASSERT_TRUE(fs::exists(path("g.bin.json")));
  const auto meta = json::parse(slurp(path("g.bin.json")));
  EXPECT_EQ(meta["n"], 1000);
  EXPECT_EQ(read_dataset(path("g.bin")).data.n(), 1000);
}

TEST_F(Cli, GenerateIsDeterministic) {
  gaussian("a.bin", 500, 7);
  gaussian("b.bin", 500, 7);
  EXPECT_EQ(slurp(path("a.bin")), slurp(path("b.bin")));
  gaussian("c.bin", 500, 8);
  EXPECT_NE(slurp(path("a.bin")), slurp(path("c.bin")));
}

TEST_F(Cli, GenerateInvalidKindIsUsageError) {
  const auto r = cli("generate --kind poisson --n 10 --out x.bin");
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(path("x.bin")));
  EXPECT_EQ(cli("generate --kind gaussian_1d --n 0 --out x.bin").code, 2);
}

TEST_F(Cli, IngestRemapsLabels) {
  write("in.csv", "a,b,y\n1,2,0\n3,5,1\n4,4,1\n");
  const auto r = cli("ingest --csv in.csv --header --out d.bin");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("remapped"), std::string::npos);
  const auto d = read_dataset(path("d.bin"));
  EXPECT_EQ(d.data.y(0), -1.0);
  EXPECT_TRUE(d.meta.standardized);
  EXPECT_EQ(d.meta.column_names, (std::vector<std::string>{"a", "b"}));
}

TEST_F(Cli, IngestParseErrorNamesLine) {
  write("bad.csv", "1,2,1\n1,x,1\n");
  const auto r = cli("ingest --csv bad.csv --out d.bin");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("bad.csv:2"), std::string::npos);
}

TEST_F(Cli, RunMHChargesNEveryIteration) {
  gaussian("g.bin", 300);
  const auto r = cli("run --data g.bin --sampler mh --n-iter 120 --seed 3 --out runs --name mh");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = read_trace_csv(path("runs/mh.csv"));
  EXPECT_EQ(t.size(), 120u);
  for (auto l : t.evals) EXPECT_EQ(l, 300u);
  const auto side = json::parse(slurp(path("runs/mh.json")));
  EXPECT_EQ(side["result"]["n_data"], 300);
  EXPECT_EQ(side["config"]["sampler"]["name"], "mh");
}

TEST_F(Cli, RunConfidenceWithProxyUsesLittleData) {
  gaussian("g.bin", 100000, 2);
  const auto r = cli("run --data g.bin --sampler confidence --proxy single --n-iter 500 --out runs --name cs");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto side = json::parse(slurp(path("runs/cs.json")));
  EXPECT_LT(side["result"]["median_fraction"].get<double>(), 0.1);
}

TEST_F(Cli, UnknownSamplerListsValidNames) {
  gaussian("g.bin", 100);
  const auto r = cli("run --data g.bin --sampler nuts");
  EXPECT_EQ(r.code, 2);
  for (const char* s : {"mh", "confidence", "austerity", "firefly", "sgld", "delayed_acceptance", "rhee_glynn"})
    EXPECT_NE(r.err.find(s), std::string::npos) << s;
  write("c.json", R"({"data": "g.bin", "sampler": {"name": "hmc"}})");
  const auto c = cli("run --config c.json");
  EXPECT_EQ(c.code, 2);
  EXPECT_NE(c.err.find("delayed_acceptance"), std::string::npos);
}

TEST_F(Cli, ConfigIsStrict) {
  gaussian("g.bin", 100);
  write("top.json", R"({"data": "g.bin", "n_iters": 10})");
  auto r = cli("run --config top.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("n_iters"), std::string::npos);
  write("nested.json", R"({"data": "g.bin", "sampler": {"name": "mh", "delta": 0.1}})");
  EXPECT_EQ(cli("run --config nested.json").code, 2);
  write("type.json", R"({"data": "g.bin", "n_iter": "many"})");
  EXPECT_EQ(cli("run --config type.json").code, 2);
  write("path.json", R"({"data": "missing.bin"})");
  r = cli("run --config path.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing.bin"), std::string::npos);
  write("range.json", R"({"data": "g.bin", "sampler": {"name": "confidence", "delta": 2}})");
  EXPECT_EQ(cli("run --config range.json").code, 2);
  write("syntax.json", "{\"data\": ");
  EXPECT_EQ(cli("run --config syntax.json").code, 2);
  EXPECT_EQ(cli("run --data g.bin --sampler mh --delta 0.1").code, 2);
}

TEST_F(Cli, FlagsOverrideConfig) {
  gaussian("g.bin", 200);
  write("c.json", R"({"data": "g.bin", "n_iter": 50, "seed": 4, "out": "a", "name": "t",
                      "sampler": {"name": "confidence", "delta": 0.2, "proxy": "none"}})");
  ASSERT_EQ(cli("run --config c.json --n-iter 30 --delta 0.05 --out b").code, 0);
  EXPECT_FALSE(fs::exists(path("a/t.csv")));
  EXPECT_EQ(read_trace_csv(path("b/t.csv")).size(), 30u);
  const auto side = json::parse(slurp(path("b/t.json")));
  EXPECT_EQ(side["config"]["sampler"]["delta"], 0.05);
  EXPECT_EQ(side["config"]["sampler"]["proxy"], "none");
  EXPECT_EQ(side["config"]["seed"], 4);
}

TEST_F(Cli, SidecarRerunsToIdenticalTrace) {
  gaussian("g.bin", 2000, 5);
  SyntheticSpec s;
  s.kind = SyntheticKind::gamma_from_covariates;
  s.n = 500;
  s.d = 2;
  write_dataset(path("gam.bin"), generate(s), DatasetMeta::plain(generate(s), "test"));
  const std::vector<std::string> runs{
      "--data g.bin --sampler mh",
      "--data g.bin --sampler confidence --proxy drop --alpha 5",
      "--data g.bin --sampler austerity",
      "--data g.bin --sampler firefly",
      "--data g.bin --sampler sgld",
      "--data g.bin --sampler delayed_acceptance",
      "--data g.bin --sampler rhee_glynn --scale 0.01",
      "--data gam.bin --model gamma --sampler confidence",
  };
  int k = 0;
  for (const auto& args : runs) {
    const std::string name = "t" + std::to_string(k++);
    const auto r = cli("run " + args + " --n-iter 60 --seed 11 --out first --name " + name);
    ASSERT_EQ(r.code, 0) << args << ": " << r.err;
    ASSERT_EQ(cli("run --config first/" + name + ".json --out second").code, 0) << args;
    EXPECT_EQ(slurp(path("first/" + name + ".csv")), slurp(path("second/" + name + ".csv"))) << args;
  }
}

TEST_F(Cli, DiagnoseSingleTraceSkipsGelmanRubin) {
  gaussian("g.bin", 500);
  ASSERT_EQ(cli("run --data g.bin --n-iter 200 --out runs --name one").code, 0);
  const auto r = cli("diagnose runs/one.csv --out rep");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Gelman-Rubin skipped"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("rep/gelman_rubin.csv")));
  const auto rep = json::parse(slurp(path("rep/report.json")));
  EXPECT_FALSE(rep.contains("gelman_rubin"));
  EXPECT_EQ(rep["notes"].size(), 1u);
  EXPECT_TRUE(fs::exists(path("rep/acf_one.csv")));
  EXPECT_TRUE(fs::exists(path("rep/eval_hist_one.csv")));
}

TEST_F(Cli, DiagnoseFiveChainsReportsRhat) {
  gaussian("g.bin", 1000);
  ASSERT_EQ(cli("run --data g.bin --sampler confidence --n-iter 400 --chains 5 --out runs --name c").code, 0);
  std::string traces;
  for (int k = 0; k < 5; ++k) traces += " runs/c_c" + std::to_string(k) + ".csv";
  ASSERT_EQ(cli("run --data g.bin --n-iter 400 --out runs --name ref").code, 0);
  const auto r = cli("diagnose" + traces + " --reference runs/ref.csv --burn-in 50 --out rep");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = json::parse(slurp(path("rep/report.json")));
  ASSERT_EQ(rep["gelman_rubin"].size(), 2u);
  for (const auto& v : rep["gelman_rubin"]) EXPECT_LT(v.get<double>(), 1.2);
  EXPECT_EQ(rep["traces"].size(), 5u);
  EXPECT_TRUE(fs::exists(path("rep/compare_c_c4.csv")));
  std::ifstream gr(path("rep/gelman_rubin.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(gr, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST_F(Cli, DiagnoseMissingFileNamesPath) {
  const auto r = cli("diagnose no_such_trace.csv");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("no_such_trace.csv"), std::string::npos);
}

TEST_F(Cli, SaturationTable) {
  auto r = cli("saturation --kind gaussian_1d --n-list 1000 --n-iter 100 --out one.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("one.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);

  r = cli("saturation --kind gaussian_1d --n-list 1000,10000,100000 --n-iter 300 --out sat.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream sat(path("sat.csv"));
  std::getline(sat, line);
  std::vector<double> med;
  while (std::getline(sat, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c < 3; ++c) std::getline(ss, cell, ',');
    med.push_back(std::stod(cell));
  }
  ASSERT_EQ(med.size(), 3u);
  EXPECT_GT(med[0], med[1]);
  EXPECT_GT(med[1], med[2]);
}

TEST_F(Cli, SaturationRefusesTinyN) {
  const auto r = cli("saturation --n-list 1000,5");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("below 10"), std::string::npos);
}

TEST_F(Cli, CompareWritesTable) {
  gaussian("g.bin", 400);
  ASSERT_EQ(cli("run --data g.bin --n-iter 100 --out runs --name a").code, 0);
  const auto r = cli("compare runs/a.csv runs/a.csv --out cmp.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("W1 0"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("cmp.csv")));
}
