// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "vtm/cli.hpp"
#include "vtm/config.hpp"

namespace {

using namespace vtm;
namespace fs = std::filesystem;

TEST(Config, DefaultsAreValid) { EXPECT_NO_THROW(validate(TrainConfig{})); }

TEST(Config, ParsesKeysCommentsAndQuotes) {
  TrainConfig c = parse_config_string(
      "# comment\n"
      "[train]\n"
      "mode = vtm-noraw\n"
      "lambda_mi = 0.25\n"
      "seed = 42\n"
      "paired = \"data/p.jsonl\"\n"
      "  hidden=17  \n");
  EXPECT_EQ(c.mode, Mode::vtm_noraw);
  EXPECT_EQ(c.lambda.mi, 0.25);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.paired_path, "data/p.jsonl");
  EXPECT_EQ(c.hidden, 17);
}

TEST(Config, PresetsCarryTheirWeightsAndSizes) {
  TrainConfig s = preset_config(Preset::spnlg);
  EXPECT_EQ(s.lambda.mi, 1.0);
  EXPECT_EQ(s.lambda.pt, 1.0);
  EXPECT_EQ(s.lambda.pc, 1.0);
  EXPECT_EQ(s.z_dim, 64);
  EXPECT_EQ(s.c_dim, 100);
  TrainConfig w = preset_config(Preset::wiki);
  EXPECT_EQ(w.lambda.mi, 0.5);
  EXPECT_EQ(w.lambda.pt, 1.0);
  EXPECT_EQ(w.lambda.pc, 0.5);
  EXPECT_EQ(w.z_dim, 100);
  EXPECT_EQ(w.c_dim, 200);
  EXPECT_EQ(w.hidden, 300);
}

TEST(Config, ExplicitKeysOverridePresetWhereverItAppears) {
  TrainConfig c = parse_config_string("lambda_mi = 0.1\npreset = wiki\n");
  EXPECT_EQ(c.lambda.mi, 0.1);
  EXPECT_EQ(c.lambda.pc, 0.5);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config_string("bogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_string("seed = abc\n"), ConfigError);
  EXPECT_THROW(parse_config_string("learning_rate = 1e-3x\n"), ConfigError);
  EXPECT_THROW(parse_config_string("no equals sign\n"), ConfigError);
  EXPECT_THROW(parse_config_string("learning_rate = 0\n"), ConfigError);
  EXPECT_THROW(parse_config_string("lambda_pt = -1\n"), ConfigError);
  EXPECT_THROW(parse_config_string("raw_fraction = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config_string("preset = other\n"), ConfigError);
  EXPECT_THROW(parse_config_string("mode = vae\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.toml"), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  TrainConfig c = preset_config(Preset::wiki);
  c.mode = Mode::vtm_nopc;
  c.seed = 99;
  c.raw_fraction = 0.25;
  c.paired_path = "x";
  EXPECT_EQ(config_from_json(to_json(c)), c);
}

class ConfigFileTest : public ::testing::Test {
 protected:
  fs::path dir = fs::temp_directory_path() / "vtm_config_test";
  fs::path file = dir / "c.toml";
  void SetUp() override {
    fs::create_directories(dir);
    std::ofstream(file) << "paired = p.jsonl\nseed = 5\nmode = vtm-noraw\nlambda_pc = 0.3\nmax_epochs = 4\n";
  }
  void TearDown() override { fs::remove_all(dir); }
};

TEST_F(ConfigFileTest, RelativePathsResolveAgainstFile) {
  TrainConfig c = load_config(file);
  EXPECT_EQ(fs::path(c.paired_path), (dir / "p.jsonl").lexically_normal());
}

TEST_F(ConfigFileTest, CommandLineOverFileOverDefault) {
  cli::TrainArgs a;
  a.config = file.string();
  TrainConfig from_file = cli::resolve_train_config(a);
  EXPECT_EQ(from_file.seed, 5u);
  EXPECT_EQ(from_file.mode, Mode::vtm_noraw);
  EXPECT_EQ(from_file.learning_rate, TrainConfig{}.learning_rate);

  a.seed = 11;
  a.mode = "table2seq";
  a.epochs = 2;
  a.preset = "wiki";
  TrainConfig over = cli::resolve_train_config(a);
  EXPECT_EQ(over.seed, 11u);
  EXPECT_EQ(over.mode, Mode::table2seq);
  EXPECT_EQ(over.max_epochs, 2);
  // File key beats the preset; untouched preset keys survive.
  EXPECT_EQ(over.lambda.pc, 0.3);
  EXPECT_EQ(over.lambda.mi, 0.5);
  EXPECT_EQ(over.z_dim, 100);
}

TEST_F(ConfigFileTest, WrittenConfigParsesBack) {
  TrainConfig c = cli::toy_train_config();
  c.paired_path = "p.jsonl";
  c.seed = 3;
  EXPECT_EQ(parse_config_string(cli::config_text(c)), c);
}

}  // namespace
