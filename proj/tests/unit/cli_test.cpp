#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "bingan/io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(BINGAN_EXE) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  static fs::path dir() {
    static const fs::path d = [] {
      fs::path p = fs::temp_directory_path() / ("bingan_cli_" + std::to_string(::getpid()));
      fs::create_directories(p);
      return p;
    }();
    return d;
  }
  static std::string at(const std::string& name) { return (dir() / name).string(); }

  static void SetUpTestSuite() {
    ASSERT_EQ(run("synth --task retrieval --seed 1 --n-per-class 12 --classes 4 --hw 8 --channels 1 --out " +
                  at("train.bgds")),
              0);
    ASSERT_EQ(run("train --data " + at("train.bgds") +
                  " --task toy --bits 8 --set batch_size=8 --set z_dim=8 --set gen_base_channels=8"
                  " --set max_steps=4 --set checkpoint_every=2 --set epochs=5 --out " + at("run")),
              0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir()); }
};

}  // namespace

TEST_F(Cli, TrainWritesArtifacts) {
  EXPECT_TRUE(fs::exists(at("run/final.bgck")));
  EXPECT_TRUE(fs::exists(at("run/step_000002.bgck")));
  EXPECT_TRUE(fs::exists(at("run/step_000004.bgck")));
  std::ifstream csv(at("run/loss.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 5);
  std::ifstream mf(at("run/manifest.json"));
  const auto j = nlohmann::json::parse(mf);
  EXPECT_EQ(j.at("command"), "train");
  EXPECT_TRUE(j.contains("config"));
}

TEST_F(Cli, ExtractIsByteIdenticalAndEvaluates) {
  ASSERT_EQ(run("extract --ckpt " + at("run/final.bgck") + " --data " + at("train.bgds") + " --out " + at("a.bgbd")), 0);
  ASSERT_EQ(run("extract --ckpt " + at("run/final.bgck") + " --data " + at("train.bgds") + " --out " + at("b.bgbd")), 0);
  EXPECT_EQ(bingan::io::read_file(at("a.bgbd")), bingan::io::read_file(at("b.bgbd")));
  EXPECT_EQ(run("eval-retrieval --queries " + at("a.bgbd") + " --db " + at("a.bgbd") + " --k 10 --csv " + at("ap.csv")),
            0);
  EXPECT_TRUE(fs::exists(at("ap.csv")));
}

TEST_F(Cli, ResumeMatchesUninterruptedRun) {
  ASSERT_EQ(run("train --data " + at("train.bgds") +
                " --task toy --bits 8 --set batch_size=8 --set z_dim=8 --set gen_base_channels=8"
                " --set max_steps=4 --set checkpoint_every=2 --set epochs=5 --resume " + at("run/step_000002.bgck") +
                " --out " + at("resumed")),
            0);
  EXPECT_EQ(bingan::io::read_file(at("resumed/final.bgck")), bingan::io::read_file(at("run/final.bgck")));
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("train --data " + at("train.bgds") + " --set lamda_dmr=0.1 --out " + at("bad")), 2);
  EXPECT_EQ(run("train --data " + at("train.bgds") + " --set batch_size=1 --out " + at("bad")), 2);
  EXPECT_EQ(run("no-such-command"), 2);
}

TEST_F(Cli, DataErrorsExitThree) {
  auto bytes = bingan::io::read_file(at("train.bgds"));
  bytes[bytes.size() / 2] ^= 0x40;
  bingan::io::write_file(at("corrupt.bgds"), bytes);
  EXPECT_EQ(run("extract --ckpt " + at("run/final.bgck") + " --data " + at("corrupt.bgds") + " --out " + at("c.bgbd")),
            3);
  EXPECT_EQ(run("extract --ckpt " + at("run/final.bgck") + " --data " + at("missing.bgds") + " --out " + at("c.bgbd")),
            3);
}

TEST_F(Cli, PairsMatchingAndSample) {
  ASSERT_EQ(run("synth --task pairs --seed 3 --pairs 40 --hw 8 --out " + at("pairs.bgds")), 0);
  ASSERT_EQ(run("train --data " + at("pairs.bgds") +
                " --task toy --bits 8 --set batch_size=8 --set z_dim=8 --set gen_base_channels=8"
                " --set max_steps=2 --out " + at("prun")),
            0);
  EXPECT_EQ(run("eval-matching --ckpt " + at("prun/final.bgck") + " --pairs " + at("pairs.bgds") + " --csv " +
                at("roc.csv")),
            0);
  EXPECT_EQ(run("sample --ckpt " + at("prun/final.bgck") + " --n 4 --out " + at("grid.pgm")), 0);
  EXPECT_TRUE(fs::exists(at("grid.pgm")));
}

TEST_F(Cli, SelfcheckPasses) { EXPECT_EQ(run("selfcheck --seed 1"), 0); }
