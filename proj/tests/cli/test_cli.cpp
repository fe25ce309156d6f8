#include "ardo/neural.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class Cli : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("ardo_cli_" + std::to_string(::getpid()) + "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir / name, std::ios::binary) << text;
    return dir / name;
  }

  // Runs the tool with `args`; stdout and stderr land in out.txt and err.txt.
  int run(const std::string& args) {
    const std::string cmd = std::string("\"") + ARDO_CLI_PATH + "\" " + args + " > \"" + (dir / "out.txt").string() +
                            "\" 2> \"" + (dir / "err.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string out() const { return slurp(dir / "out.txt"); }
  std::string err() const { return slurp(dir / "err.txt"); }
};

constexpr const char* kTiny =
    "problem.name = ou_stationary\n"
    "problem.dim = 1\n"
    "train.epochs = 10\n"
    "train.m_interior = 512\n"
    "train.eval_every = 5\n"
    "net.hidden = 8, 8\n";

TEST_F(Cli, TrainWritesMetricsSummaryAndCheckpoints) {
  const fs::path cfg = write("tiny.conf", kTiny);
  ASSERT_EQ(run("train --config \"" + cfg.string() + "\" --out \"" + (dir / "run").string() + "\""), 0) << err();
  const std::string csv = slurp(dir / "run" / "metrics.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,loss,s_i,s_d,s_n,se_i,se_d,se_n,l2_rel,gnorm_f,gnorm_rho,ms");
  EXPECT_EQ(line_count(csv), 3u);
  EXPECT_TRUE(fs::exists(dir / "run" / "f_net.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "run" / "rho_net.ckpt"));
  const auto summary = nlohmann::json::parse(slurp(dir / "run" / "summary.json"));
  EXPECT_EQ(summary["status"], "completed");
  EXPECT_EQ(summary["records"], 2);
}

// M_I·τ = 1000 · 1e-4 = 0.1 is below the threshold of 10.
TEST_F(Cli, OverridesAreEchoedAndSamplingWarned) {
  const fs::path cfg = write("tiny.conf", kTiny);
  ASSERT_EQ(run("train --config \"" + cfg.string() + "\" --set train.tau=1e-4 --set train.m_interior=1000 --out \"" +
                (dir / "run").string() + "\""),
            0)
      << err();
  EXPECT_NE(err().find("warning"), std::string::npos);
  const auto summary = nlohmann::json::parse(slurp(dir / "run" / "summary.json"));
  EXPECT_NEAR(summary["sampling"]["ratio"].get<double>(), 0.1, 1e-12);
  EXPECT_FALSE(summary["sampling"]["ok"].get<bool>());
  EXPECT_TRUE(summary["sampling"]["warning"].is_string());
  EXPECT_DOUBLE_EQ(std::stod(summary["config"]["train.tau"].get<std::string>()), 1e-4);
  EXPECT_EQ(std::stoul(summary["config"]["train.m_interior"].get<std::string>()), 1000u);
}

TEST_F(Cli, BadConfigFailsWithoutOutput) {
  const fs::path cfg = write("bad.conf", "problem.nam = ou_stationary\n");
  EXPECT_EQ(run("train --config \"" + cfg.string() + "\" --out \"" + (dir / "run").string() + "\""), 1);
  EXPECT_NE(err().find("problem.nam"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "run"));

  const fs::path worse = write("worse.conf", "train.epochs = ten\n");
  EXPECT_EQ(run("train --config \"" + worse.string() + "\" --out \"" + (dir / "run").string() + "\""), 1);
  EXPECT_FALSE(fs::exists(dir / "run"));
}

TEST_F(Cli, EvalOfZeroNetworkHasUnitError) {
  const ardo::MlpNetwork<double> zero({1, 32, 32, 32, 1}, ardo::Activation::tanh);
  ardo::save_checkpoint(dir / "zero.ckpt", zero);
  ASSERT_EQ(run("eval --checkpoint \"" + (dir / "zero.ckpt").string() + "\" --out \"" + dir.string() + "\""), 0) << err();
  EXPECT_NE(out().find("l2_rel 1\n"), std::string::npos) << out();
  const std::string csv = slurp(dir / "eval.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x0,f,exact");
  EXPECT_EQ(line_count(csv), 257u);
}

TEST_F(Cli, EvalRejectsTruncatedCheckpoint) {
  ardo::save_checkpoint(dir / "net.ckpt", ardo::MlpNetwork<double>({1, 32, 32, 32, 1}, ardo::Activation::tanh));
  const std::string bytes = slurp(dir / "net.ckpt");
  write("cut.ckpt", bytes.substr(0, bytes.size() / 2));
  EXPECT_EQ(run("eval --checkpoint \"" + (dir / "cut.ckpt").string() + "\" --out \"" + dir.string() + "\""), 1);
  EXPECT_NE(err().find("corrupt checkpoint"), std::string::npos) << err();
  EXPECT_FALSE(fs::exists(dir / "eval.csv"));
}

TEST_F(Cli, EvalRejectsArchitectureMismatch) {
  ardo::save_checkpoint(dir / "small.ckpt", ardo::MlpNetwork<double>({1, 4, 1}, ardo::Activation::tanh));
  EXPECT_EQ(run("eval --checkpoint \"" + (dir / "small.ckpt").string() + "\" --out \"" + dir.string() + "\""), 1);
  EXPECT_NE(err().find("[1,32,32,32,1]"), std::string::npos) << err();
  EXPECT_NE(err().find("[1,4,1]"), std::string::npos) << err();
}

TEST_F(Cli, VerifyUnknownSuite) {
  EXPECT_EQ(run("verify everything"), 1);
  EXPECT_NE(err().find("identities"), std::string::npos) << err();
}

TEST_F(Cli, VerifyGradientsPasses) {
  EXPECT_EQ(run("verify gradients"), 0) << out();
  EXPECT_NE(out().find("suite gradients: PASS"), std::string::npos);
}

TEST_F(Cli, MissingSubcommandIsUsageError) { EXPECT_EQ(run(""), 1); }

}  // namespace
