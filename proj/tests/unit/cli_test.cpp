// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("transfr_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(TRANSFR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const char kSmall[] =
    "synthetic_users = 40\nsynthetic_items = 60\nsynthetic_cold_items = 12\n"
    "n_negatives = 2\nrounds = 4\ncandidate_size = 20\npap_epochs = 2\ntarget_epochs = 2\n"
    "theory_iters = 2000\n";

fs::path small_config(const fs::path& dir) {
  const fs::path p = dir / "small.conf";
  std::ofstream(p) << kSmall;
  return p;
}

TEST(CliTest, HelpExitsZero) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("train --help"), 0);
}

TEST(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("train --no-such-flag"), 2);
  EXPECT_EQ(run("report"), 2);
  EXPECT_EQ(run("report /nonexistent/records.txt"), 2);
}

TEST(CliTest, ConfigErrorsExitTwo) {
  const fs::path dir = scratch("config");
  EXPECT_EQ(run("--out " + dir.string() + " --rounds 0 train"), 2);
  std::ofstream(dir / "bad.conf") << "eta_s = -1\n";
  EXPECT_EQ(run("--config " + (dir / "bad.conf").string() + " --out " + dir.string() + " train"), 2);
  EXPECT_EQ(run("--config " + (dir / "missing.conf").string() + " train"), 2);
}

TEST(CliTest, RuntimeFailureExitsThree) {
  const fs::path dir = scratch("runtime");
  std::ofstream(dir / "bad.tsv") << "only-one-field\n";
  std::ofstream(dir / "data.conf") << "source = " << (dir / "bad.tsv").string() << "\n"
                                   << "target = " << (dir / "bad.tsv").string() << "\n";
  EXPECT_EQ(run("--config " + (dir / "data.conf").string() + " --out " + dir.string() + " train"), 3);
}

TEST(CliTest, TheoryWritesRecordsAndReportRendersThem) {
  const fs::path dir = scratch("theory");
  ASSERT_EQ(run("--config " + small_config(dir).string() + " --out " + (dir / "run").string() + " theory"), 0);
  const std::string records = slurp(dir / "run" / "records.txt");
  EXPECT_EQ(records.rfind("theory tau=0 ", 0), 0u);
  EXPECT_TRUE(fs::exists(dir / "run" / "config.txt"));
  EXPECT_EQ(run("report " + (dir / "run").string()), 0);
}

TEST(CliTest, AblateFullRowMatchesTransfer) {
  const fs::path dir = scratch("ablate");
  const std::string base = "--config " + small_config(dir).string() + " --out ";
  ASSERT_EQ(run(base + (dir / "a").string() + " ablate"), 0);
  ASSERT_EQ(run(base + (dir / "t").string() + " transfer"), 0);
  std::istringstream ablate(slurp(dir / "a" / "records.txt"));
  std::istringstream transfer(slurp(dir / "t" / "records.txt"));
  std::string line, full_target, transfr_target;
  int full = 0;
  while (std::getline(ablate, line)) {
    if (line.rfind("ablate variant=full ", 0) == 0 && ++full == 2) full_target = line.substr(line.find("domain="));
  }
  int seen = 0;
  while (std::getline(transfer, line)) {
    if (line.find("model=transfr") != std::string::npos && line.rfind("transfer", 0) == 0 && ++seen == 2)
      transfr_target = line.substr(line.find("domain="));
  }
  ASSERT_FALSE(full_target.empty());
  EXPECT_EQ(full_target, transfr_target);
}

}  // namespace
