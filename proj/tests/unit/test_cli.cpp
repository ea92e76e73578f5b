#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "cli.hpp"
#include "formation/presets.hpp"

using namespace formation;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("formation_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string out(const std::string& sub) const { return (dir_ / sub).string(); }

  static std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
  }

  static json manifest(const fs::path& d) { return json::parse(slurp(d / "manifest.json")); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, PresetListingAndDump) {
  const CliRun list = invoke({"preset"});
  EXPECT_EQ(list.code, cli::kOk);
  for (const std::string& n : preset_names()) EXPECT_NE(list.out.find(n), std::string::npos) << n;
  const CliRun dump = invoke({"preset", "pair2"});
  EXPECT_EQ(dump.code, cli::kOk);
  EXPECT_TRUE(parse_scenario(dump.out) == make_preset("pair2"));
  EXPECT_EQ(invoke({"preset", "nonesuch"}).code, cli::kValidation);
}

TEST_F(CliTest, EvaluateWritesRankAndCosts) {
  const CliRun r = invoke({"evaluate", "--scenario", "preset:pair2", "--out", out("eval")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const json doc = json::parse(slurp(dir_ / "eval" / "evaluation.json"));
  EXPECT_EQ(doc["fim_rank"], 3);
  EXPECT_EQ(doc["fim_dim"], 3);
  const json m = manifest(dir_ / "eval");
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["exit_code"], 0);
  EXPECT_EQ(m["command"], "evaluate");
}

TEST_F(CliTest, MissingScenarioIsValidationFailure) {
  EXPECT_EQ(invoke({"evaluate", "--scenario", out("nope.json"), "--out", out("x")}).code, cli::kValidation);
}

TEST_F(CliTest, InvalidScenarioNamesField) {
  std::string text = write_scenario(make_preset("pair2"));
  const auto pos = text.find("\"safety_radius\": 1.0");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 20, "\"safety_radius\": 3.0");
  const fs::path file = dir_ / "bad.json";
  std::ofstream(file) << text;
  const CliRun r = invoke({"evaluate", "--scenario", file.string(), "--out", out("bad")});
  EXPECT_EQ(r.code, cli::kValidation);
  EXPECT_NE(r.err.find("optimizer.safety_radius"), std::string::npos) << r.err;
  EXPECT_EQ(manifest(dir_ / "bad")["exit_code"], cli::kValidation);
}

TEST_F(CliTest, UnknownSubcommandFails) {
  EXPECT_NE(invoke({"frobnicate"}).code, cli::kOk);
  EXPECT_NE(invoke({"evaluate"}).code, cli::kOk);
}

TEST_F(CliTest, JacobianCheckAndNegativeControl) {
  const CliRun good = invoke({"check-jacobian", "--scenario", "preset:triangle3", "--trials", "20", "--out", out("j")});
  EXPECT_EQ(good.code, cli::kOk) << good.err;
  EXPECT_FALSE(fs::exists(dir_ / "j" / "worst_state.json"));
  const CliRun bad = invoke({"check-jacobian", "--scenario", "preset:triangle3", "--trials", "20", "--corrupt-sign",
                          "--out", out("jc")});
  EXPECT_EQ(bad.code, cli::kJacobian);
  EXPECT_TRUE(fs::exists(dir_ / "jc" / "worst_state.json"));
  EXPECT_NO_THROW(load_state(dir_ / "jc" / "worst_state.json"));
}

TEST_F(CliTest, CoincidentTagsAreUnobservable) {
  const CliRun r = invoke({"check-jacobian", "--scenario", "preset:coincident", "--trials", "1", "--out", out("c")});
  EXPECT_EQ(r.code, cli::kUnobservable);
  EXPECT_NE(r.err.find("edge"), std::string::npos);
}

TEST_F(CliTest, CollinearCrlbIsUnobservable) {
  const CliRun r = invoke({"crlb", "--scenario", "preset:collinear", "--out", out("c")});
  EXPECT_EQ(r.code, cli::kUnobservable);
  const json m = manifest(dir_ / "c");
  EXPECT_EQ(m["results"]["null_direction"].size(), 3u);
}

TEST_F(CliTest, CrlbEllipsesCsv) {
  ASSERT_EQ(invoke({"crlb", "--scenario", "preset:heading3d", "--out", out("e")}).code, cli::kOk);
  std::istringstream in(slurp(dir_ / "e" / "ellipses.csv"));
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "agent_id,point_x,point_y,point_z");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 3 * 64);
}

TEST_F(CliTest, OptimizeIsReproducibleAndManifestIsComplete) {
  for (const char* sub : {"a", "b"}) {
    const CliRun r = invoke({"optimize", "--scenario", "preset:pair2", "--checkpoints", "4", "--out", out(sub)});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
  }
  const json m = manifest(dir_ / "a");
  ASSERT_TRUE(m["outputs"].is_array());
  int csvs = 0;
  for (const auto& name : m["outputs"]) {
    const std::string n = name.get<std::string>();
    EXPECT_TRUE(fs::exists(dir_ / "a" / n)) << n;
    if (n.ends_with(".csv")) {
      ++csvs;
      EXPECT_EQ(slurp(dir_ / "a" / n), slurp(dir_ / "b" / n)) << n;
    }
  }
  EXPECT_GE(csvs, 2);
  EXPECT_NO_THROW(load_state(dir_ / "a" / "formation.json"));
}

TEST_F(CliTest, MonteCarloFromTraceIsReproducible) {
  ASSERT_EQ(invoke({"optimize", "--scenario", "preset:pair2", "--checkpoints", "3", "--out", out("opt")}).code,
            cli::kOk);
  const std::string trace = (dir_ / "opt" / "trajectory.json").string();
  for (const char* threads : {"1", "2"}) {
    const CliRun r = invoke({"montecarlo", "--scenario", "preset:pair2", "--trace", trace, "--trials", "40",
                          "--threads", threads, "--out", out(std::string("mc") + threads)});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
  }
  EXPECT_EQ(slurp(dir_ / "mc1" / "report.csv"), slurp(dir_ / "mc2" / "report.csv"));
  const json m = manifest(dir_ / "mc1");
  EXPECT_TRUE(m["results"].contains("spearman_J_total_MSE"));
}

TEST_F(CliTest, StalledDescentExitsWithStallCode) {
  Scenario s = make_preset("pair2");
  s.optimizer.gamma = 1e15;
  const fs::path file = dir_ / "stall.json";
  save_scenario(s, file);
  const CliRun r = invoke({"optimize", "--scenario", file.string(), "--out", out("s")});
  EXPECT_EQ(r.code, cli::kStall) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "s" / "trace.csv"));
}

TEST_F(CliTest, EstimateReportsTangentError) {
  const CliRun r = invoke({"estimate", "--scenario", "preset:triangle3", "--seed", "3", "--out", out("est")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const json doc = json::parse(slurp(dir_ / "est" / "estimate.json"));
  EXPECT_EQ(doc["tangent_error"].size(), 6u);
  EXPECT_EQ(manifest(dir_ / "est")["seed"], 3);
}

TEST(CliThreads, FlagThenEnvironmentThenHardware) {
  ::setenv("FORMATION_OPT_THREADS", "3", 1);
  EXPECT_EQ(cli::resolve_threads(5u), 5u);
  EXPECT_EQ(cli::resolve_threads(std::nullopt), 3u);
  ::unsetenv("FORMATION_OPT_THREADS");
  EXPECT_GE(cli::resolve_threads(std::nullopt), 1u);
}
