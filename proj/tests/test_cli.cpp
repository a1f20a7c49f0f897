#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Runs the CLI with `args`, stdout/stderr captured to files in `dir`;
/// returns the exit status.
int run(const std::string& args, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string cmd = std::string(CBPSIM_CLI_PATH) + " " + args + " > " +
                          (dir / "stdout.txt").string() + " 2> " + (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("cbpsim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  fs::path root_;
};

TEST_F(Cli, SimulateWritesTrajectoriesAndManifestDeterministically) {
  const std::string args =
      "simulate --preset poisson-immigration --alpha 1 --generations 100 --paths 3 --seed 7 --out ";
  ASSERT_EQ(run(args + (root_ / "a").string(), root_ / "a"), 0) << slurp(root_ / "a" / "stderr.txt");
  ASSERT_EQ(run(args + (root_ / "b").string(), root_ / "b"), 0);
  for (const char* name : {"trajectory_000.csv", "trajectory_001.csv", "trajectory_002.csv"}) {
    const std::string a = slurp(root_ / "a" / name);
    ASSERT_FALSE(a.empty()) << name;
    EXPECT_EQ(a.rfind("generation,z\n", 0), 0u);
    EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 102);
    EXPECT_EQ(a, slurp(root_ / "b" / name));
  }
  EXPECT_NE(slurp(root_ / "a" / "trajectory_000.csv"), slurp(root_ / "a" / "trajectory_001.csv"));
  const auto manifest = nlohmann::json::parse(slurp(root_ / "a" / "manifest.json"));
  EXPECT_EQ(manifest.at("seed"), 7);
  EXPECT_EQ(manifest.at("preset"), "poisson-immigration");
  EXPECT_EQ(manifest.at("files").size(), 3u);
  EXPECT_TRUE(manifest.contains("version"));
  EXPECT_EQ(manifest.at("parameters").at("generations"), 100);
}

TEST_F(Cli, ValidationErrorsExitNonZero) {
  const std::string out = " --out " + root_.string();
  EXPECT_NE(run("simulate --preset poisson-immigration --generations 0" + out, root_), 0);
  EXPECT_EQ(run("converge --dry-run" + out, root_), 2);
  EXPECT_NE(slurp(root_ / "stderr.txt").find("preset"), std::string::npos);
  EXPECT_EQ(run("simulate --preset poisson-immigration --bogus 1" + out, root_), 2);
  EXPECT_EQ(run("diagnose --check nope" + out, root_), 2);
  EXPECT_EQ(run("converge --preset poisson-immigration --n 50,10 --dry-run" + out, root_), 2);
}

TEST_F(Cli, ConvergeDryRunPrintsPlanOnly) {
  ASSERT_EQ(run("converge --preset poisson-immigration --alpha 1 --dry-run --out " + root_.string(), root_), 0);
  const auto plan = nlohmann::json::parse(slurp(root_ / "stdout.txt"));
  EXPECT_EQ(plan.at("n_values"), (std::vector<int>{10, 50, 250, 1250}));
  EXPECT_EQ(plan.at("reference_size"), 100000);
  EXPECT_DOUBLE_EQ(plan.at("ks_threshold").get<double>(), 0.016945);
  EXPECT_FALSE(fs::exists(root_ / "report.json"));
}

TEST_F(Cli, ConvergeSmallStudyWritesReports) {
  const int code = run("converge --preset poisson-immigration --n 5,20,80 --replicates 2000 "
                       "--reference-factor 5 --seed 3 --out " + root_.string(), root_);
  EXPECT_TRUE(code == 0 || code == 1);
  for (const char* name : {"report.json", "report.txt", "convergence.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(root_ / name)) << name;
  }
  const auto report = nlohmann::json::parse(slurp(root_ / "report.json"));
  EXPECT_EQ(report.at("ks").size(), 3u);
  EXPECT_EQ(code, report.at("passed").get<bool>() ? 0 : 1);
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
  std::ofstream(root_ / "cfg.json") << R"({"preset": "poisson-immigration", "generations": 5, "paths": 2})";
  ASSERT_EQ(run("--config " + (root_ / "cfg.json").string() + " simulate --paths 1 --out " +
                    root_.string(), root_), 0);
  EXPECT_TRUE(fs::exists(root_ / "trajectory_000.csv"));
  EXPECT_FALSE(fs::exists(root_ / "trajectory_001.csv"));
  const std::string csv = slurp(root_ / "trajectory_000.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  std::ofstream(root_ / "bad.json") << R"({"presett": "x"})";
  EXPECT_EQ(run("--config " + (root_ / "bad.json").string() + " simulate --out " + root_.string(), root_), 2);
}

TEST_F(Cli, DiffusionOutputs) {
  ASSERT_EQ(run("diffusion --exact --t 1 --draws 1000 --out " + root_.string(), root_), 0);
  std::istringstream draws(slurp(root_ / "marginals.txt"));
  int lines = 0;
  for (std::string line; std::getline(draws, line); ++lines) EXPECT_GE(std::stod(line), 0.0);
  EXPECT_EQ(lines, 1000);
  EXPECT_FALSE(fs::exists(root_ / "em_path.csv"));

  ASSERT_EQ(run("diffusion --em --dt 0.001 --t 1 --out " + root_.string(), root_), 0);
  const std::string em = slurp(root_ / "em_path.csv");
  EXPECT_EQ(em.rfind("t,value\n", 0), 0u);
  EXPECT_EQ(std::count(em.begin(), em.end(), '\n'), 1002);

  ASSERT_EQ(run("diffusion --em --sigma2 0 --alpha 2 --x0 1 --dt 0.25 --t 1 --out " + root_.string(), root_), 0);
  EXPECT_EQ(slurp(root_ / "em_path.csv"), "t,value\n0,1\n0.25,1.5\n0.5,2\n0.75,2.5\n1,3\n");
  ASSERT_EQ(run("diffusion --exact --sigma2 0 --alpha 2 --x0 1 --draws 3 --out " + root_.string(), root_), 0);
  EXPECT_EQ(slurp(root_ / "marginals.txt"), "3\n3\n3\n");
}

TEST_F(Cli, DiagnoseLemma1) {
  ASSERT_EQ(run("diagnose --check lemma1 --l 2 --sigma2 1 --draws 200000 --out " + root_.string(), root_), 0)
      << slurp(root_ / "stderr.txt");
  const auto report = nlohmann::json::parse(slurp(root_ / "report.json"));
  bool found = false;
  for (const auto& row : report.at("checks")) {
    if (row.at("check") == "lemma1_identity") {
      found = true;
      EXPECT_EQ(row.at("expected"), 4.0);
      EXPECT_TRUE(row.at("pass").get<bool>());
      EXPECT_GT(row.at("se").get<double>(), 0.0);
    }
  }
  EXPECT_TRUE(found);
}

TEST_F(Cli, DiagnoseMoments) {
  EXPECT_EQ(run("diagnose --preset poisson-immigration --check moments --k 1,10,100 --replicates 5000 --out " +
                    root_.string(), root_), 0) << slurp(root_ / "stderr.txt");
  const auto report = nlohmann::json::parse(slurp(root_ / "report.json"));
  EXPECT_GE(report.at("checks").size(), 6u);
}

TEST_F(Cli, VersionAndHelp) {
  EXPECT_EQ(run("--version", root_), 0);
  EXPECT_NE(slurp(root_ / "stdout.txt").find("0.1.0"), std::string::npos);
  EXPECT_EQ(run("--help", root_), 0);
  EXPECT_EQ(run("", root_), 2);
}

}  // namespace
