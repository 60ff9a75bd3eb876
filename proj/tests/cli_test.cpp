#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "gridloss_cli.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace gridloss {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliRun {
  int code = 0;
  std::string out;
  std::vector<json> lines;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("gridloss_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string grid(const std::string& name, const GridTensor& t) const {
    write_grd1(path(name), t);
    return path(name);
  }

  std::string text(const std::string& name, const std::string& body) const {
    std::ofstream(path(name)) << body;
    return path(name);
  }

  static CliRun run(const std::vector<std::string>& args,
                 const std::optional<std::string>& seed = std::string("5")) {
    std::ostringstream out, err;
    CliRun r;
    r.code = cli::run_cli(args, out, err, seed);
    r.out = out.str();
    std::istringstream lines(r.out);
    std::string line;
    while (std::getline(lines, line)) {
      // Every line must be valid JSON.
      r.lines.push_back(json::parse(line));
    }
    EXPECT_FALSE(r.lines.empty());
    return r;
  }

  fs::path dir_;
};

TEST_F(Cli, EvaluateIdenticalFiles) {
  std::mt19937_64 rng(81);
  const std::string f = grid("a.grd", testing::uniform(Shape{1, 12, 12, 1}, rng, 0, 1));
  const CliRun r = run({"evaluate", "--truth", f, "--pred", f, "--loss", "mse", "fss:mask_size=3", "ssim"});
  ASSERT_EQ(r.code, 0) << r.out;
  const json& j = r.lines.at(0);
  EXPECT_EQ(j["mse"].get<double>(), 0.0);
  EXPECT_EQ(j["fss"].get<double>(), 1.0);
  EXPECT_NEAR(j["ssim"].get<double>(), 1.0, 1e-12);
  EXPECT_EQ(j.size(), 3u);
}

TEST_F(Cli, EvaluateIsByteIdenticalAcrossRuns) {
  std::mt19937_64 rng(82);
  const std::string t = grid("t.grd", testing::uniform(Shape{2, 6, 6, 1}, rng, 0, 1));
  const std::string p = grid("p.grd", testing::uniform(Shape{2, 6, 6, 1}, rng, 0, 1));
  const std::vector<std::string> args{"evaluate", "--truth", t, "--pred", p, "--loss",
                                      "mse", "dual_weighted_mse", "fss:mode=hard", "mse_per_pixel"};
  const CliRun a = run(args, std::nullopt), b = run(args, std::nullopt);
  EXPECT_EQ(a.out, b.out);
  // Floats carry 17 significant digits.
  EXPECT_NE(a.out.find("0."), std::string::npos);
  const double mse = a.lines[0]["mse"].get<double>();
  EXPECT_EQ(mse, a.lines[0]["mse_per_pixel"].get<double>());
}

TEST_F(Cli, EvaluateParameterFlagsMirrorSpecNames) {
  std::mt19937_64 rng(83);
  const std::string t = grid("t.grd", testing::uniform(Shape{1, 4, 4, 1}, rng, 0, 1));
  const std::string p = grid("p.grd", testing::uniform(Shape{1, 4, 4, 1}, rng, 0, 1));
  const CliRun flag = run({"evaluate", "--truth", t, "--pred", p, "--loss", "dual_weighted_mse", "--gamma-weight", "0"});
  const CliRun inline_spec = run({"evaluate", "--truth", t, "--pred", p, "--loss", "dual_weighted_mse:gamma_weight=0"});
  const CliRun mse = run({"evaluate", "--truth", t, "--pred", p, "--loss", "mse"});
  EXPECT_EQ(flag.out, inline_spec.out);
  EXPECT_EQ(flag.lines[0]["dual_weighted_mse"], mse.lines[0]["mse"]);
  const CliRun unused = run({"evaluate", "--truth", t, "--pred", p, "--loss", "mse", "--gamma-weight", "2"});
  EXPECT_EQ(unused.code, 2);
  EXPECT_EQ(unused.lines[0]["error"]["code"], "INVALID_CONFIG");
}

TEST_F(Cli, EvaluateErrors) {
  const std::string a = grid("a.grd", GridTensor::zeros(Shape{1, 4, 4, 1}));
  const std::string b = grid("b.grd", GridTensor::zeros(Shape{1, 4, 5, 1}));
  CliRun r = run({"evaluate", "--truth", a, "--pred", b, "--loss", "mse"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.lines[0]["error"]["code"], "SHAPE_MISMATCH");
  r = run({"evaluate", "--truth", a, "--pred", path("missing"), "--loss", "mse"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.lines[0]["error"]["code"], "IO_ERROR");
  r = run({"evaluate", "--truth", a, "--pred", text("bad.csv", "1,x\n"), "--loss", "mse"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.lines[0]["error"]["code"], "PARSE_ERROR");
  r = run({"evaluate", "--truth", a, "--pred", a, "--loss", "nope"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.lines[0]["error"]["code"], "UNKNOWN_LOSS");
  r = run({"evaluate", "--truth", a});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.lines[0]["error"]["code"], "USAGE_ERROR");
  r = run({});
  EXPECT_EQ(r.code, 2);
  r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(r.lines[0].contains("usage"));
}

TEST_F(Cli, CsvInputs) {
  const std::string t = text("t.csv", "0,1\n1,0\n");
  const std::string p = text("p.csv", "0,1\n0,0\n");
  const CliRun r = run({"evaluate", "--truth", t, "--pred", p, "--loss", "mse", "count_miss"});
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.lines[0]["mse"].get<double>(), 0.25);
  EXPECT_EQ(r.lines[0]["count_miss"].get<double>(), 1.0);
}

TEST_F(Cli, FssSweepOnShiftedBand) {
  const auto [obs, fc] = testing::shifted_band_pair();
  const std::string t = grid("t.grd", obs), p = grid("p.grd", fc);
  const CliRun r = run({"fss-sweep", "--truth", t, "--pred", p, "--masks", "1,3,5"});
  ASSERT_EQ(r.code, 0) << r.out;
  const auto scores = r.lines[0]["fss"].get<std::vector<double>>();
  ASSERT_EQ(scores.size(), 3u);
  const std::size_t masks[] = {1, 3, 5};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(scores[i], oracle::fss_hard(obs, fc, masks[i], 0.5), 1e-12);
    if (i) {
      EXPECT_GE(scores[i], scores[i - 1]);
    }
  }
  const CliRun big = run({"fss-sweep", "--truth", t, "--pred", p, "--masks", "10"});
  EXPECT_EQ(big.code, 2);
  EXPECT_EQ(big.lines[0]["error"]["code"], "MASK_TOO_LARGE");
}

TEST_F(Cli, GradcheckPassesAndIsSeeded) {
  for (const char* loss : {"mse", "fss.loss:mode=soft,c=10", "flux_loss_constrained",
                           "tversky.loss:alpha=0.3,beta=0.7", "mse_supplementary_weighted:w0=1,w1=3"}) {
    const CliRun r = run({"gradcheck", "--loss", loss, "--trials", "3"});
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(r.lines[0]["pass"].get<bool>()) << loss;
    EXPECT_EQ(r.lines[0]["trials"].size(), 3u);
  }
  const CliRun mse = run({"gradcheck", "--loss", "mse", "--trials", "10", "--rel-tol", "1e-5"});
  EXPECT_EQ(mse.code, 0);
  EXPECT_EQ(mse.lines[0]["trials"].size(), 10u);
  EXPECT_EQ(mse.out, run({"gradcheck", "--loss", "mse", "--trials", "10", "--rel-tol", "1e-5"}).out);
  EXPECT_EQ(mse.lines[0]["seed"], 5);
}

TEST_F(Cli, GradcheckFailureAndBlockedExitCodes) {
  // An absurd tolerance cannot be met by any finite-difference comparison.
  const CliRun fail = run({"gradcheck", "--loss", "mse_weighted_exp", "--trials", "2", "--rel-tol", "1e-300"});
  EXPECT_EQ(fail.code, 1);
  EXPECT_FALSE(fail.lines[0]["pass"].get<bool>());
  const CliRun hard = run({"gradcheck", "--loss", "csi:mode=hard"});
  EXPECT_EQ(hard.code, 3);
  EXPECT_EQ(hard.lines[0]["error"]["blocking_op"], "hard_discretize");
  const CliRun hard_loss = run({"gradcheck", "--loss", "csi.loss:mode=hard"});
  EXPECT_EQ(hard_loss.code, 3);
  const CliRun bad_seed = run({"gradcheck", "--loss", "mse"}, std::string("abc"));
  EXPECT_EQ(bad_seed.code, 2);
}

TEST_F(Cli, TrainDemoOneParameter) {
  const std::string cfg = text("c.json", R"({"batch_size": 1, "learning_rate": 0.1, "loss": "mse",
    "epochs": 1, "data": {"shape": [1, 1, 1, 1], "x": [1], "y": [2]}})");
  const CliRun r = run({"train-demo", "--config", cfg});
  ASSERT_EQ(r.code, 0) << r.out;
  const json& summary = r.lines.back();
  EXPECT_EQ(summary["event"], "summary");
  EXPECT_NEAR(summary["parameters"]["w"]["values"][0].get<double>(), 0.4, 1e-12);
}

TEST_F(Cli, TrainDemoZeroLearningRateGivesConstantLoss) {
  const std::string cfg = text("c.json", R"({"batch_size": 2, "learning_rate": 0, "loss": "mse",
    "epochs": 4, "model": {"init_w": 0.5},
    "data": {"shape": [2, 1, 2, 1], "x": [1, 2, 3, 4], "y": [0, 1, 0, 1]}})");
  const CliRun r = run({"train-demo", "--config", cfg});
  ASSERT_EQ(r.code, 0) << r.out;
  ASSERT_EQ(r.lines.size(), 5u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(r.lines[i]["loss_reported"], r.lines[0]["loss_reported"]);
}

TEST_F(Cli, TrainDemoTwoPhaseHasMarker) {
  const std::string cfg = text("c.json", R"({"batch_size": 4, "learning_rate": 0.5,
    "metrics": ["mse", "count_miss"],
    "phases": [{"loss": "mse", "epochs": 2}, {"loss": "mse_fewer_misses", "epochs": 2}],
    "model": {"bias": true},
    "data": {"synthetic_convection": {"samples": 8, "rows": 8, "cols": 8}}})");
  const CliRun r = run({"train-demo", "--config", cfg});
  ASSERT_EQ(r.code, 0) << r.out;
  ASSERT_EQ(r.lines.size(), 6u);
  EXPECT_EQ(r.lines[2]["event"], "phase_boundary");
  EXPECT_GE(r.lines[2]["loss_next"].get<double>(), r.lines[2]["loss_previous"].get<double>());
  EXPECT_EQ(r.out, run({"train-demo", "--config", cfg}).out);
}

TEST_F(Cli, TrainDemoErrors) {
  const std::string diverge = text("d.json", R"({"batch_size": 1, "learning_rate": 10, "loss": "mse",
    "epochs": 200, "data": {"shape": [1, 1, 1, 1], "x": [1000], "y": [1]}})");
  CliRun r = run({"train-demo", "--config", diverge});
  EXPECT_EQ(r.code, 4);
  EXPECT_EQ(r.lines.back()["error"]["code"], "DIVERGENCE_DETECTED");
  const std::string blocked = text("b.json", R"({"loss": "csi:mode=hard",
    "data": {"shape": [1, 1, 1, 1], "x": [1], "y": [1]}})");
  r = run({"train-demo", "--config", blocked});
  EXPECT_EQ(r.code, 3);
  r = run({"train-demo", "--config", text("bad.json", "{")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.lines[0]["error"]["code"], "PARSE_ERROR");
  r = run({"train-demo", "--config", path("missing.json")});
  EXPECT_EQ(r.code, 2);
}

}  // namespace
}  // namespace gridloss
