// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "vtm/checkpoint.hpp"
#include "vtm/trainer.hpp"

namespace {

using namespace vtm;
namespace fs = std::filesystem;

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

class CheckpointTest : public ::testing::Test {
 protected:
  fs::path path = fs::temp_directory_path() / "vtm_checkpoint_test.ckpt";
  Model model{vtm::testing::tiny_model_dims(), 5};
  Vocabulary words{Tokens{"w0", "w1", "w2", "w3", "w4", "w5"}};
  Vocabulary fields{Tokens{"name", "food", "area"}};
  TrainConfig config = cli_like_config();

  static TrainConfig cli_like_config() {
    TrainConfig c;
    c.seed = 5;
    c.mode = Mode::vtm_nopc;
    return c;
  }
  void TearDown() override { fs::remove(path); }

  double loss(const Model& m) {
    ad::Graph g(false);
    std::mt19937_64 rng(4);
    PairedBatch p = vtm::testing::tiny_paired_batch();
    RawBatch r = vtm::testing::tiny_raw_batch();
    return total_loss(g, m, p, &r, LossSpec{Mode::vtm, {}, 1.0}, rng).terms.total;
  }
};

TEST_F(CheckpointTest, RoundTripIsBitwise) {
  // A few optimiser steps so the Adam moments are populated.
  Trainer tr(model, TrainConfig{});
  tr.train_step_paired(vtm::testing::tiny_paired_batch());
  tr.train_step_raw(vtm::testing::tiny_raw_batch());
  TrainingState st{1.25, 3, 4, rng_to_string(tr.noise_rng())};
  save_checkpoint(path.string(), model, words, fields, config, st, &tr.optimizer());

  Checkpoint ck = load_checkpoint(path.string());
  ASSERT_EQ(ck.model->store.all().size(), model.store.all().size());
  for (std::size_t i = 0; i < model.store.all().size(); ++i) {
    EXPECT_TRUE(bitwise_equal(ck.model->store.all()[i]->value, model.store.all()[i]->value))
        << model.store.all()[i]->name;
  }
  const double a = loss(model), b = loss(*ck.model);
  EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
  EXPECT_EQ(ck.config, config);
  EXPECT_EQ(ck.words.entries(), words.entries());
  EXPECT_EQ(ck.fields.entries(), fields.entries());
  EXPECT_EQ(ck.state.best_score, 1.25);
  EXPECT_EQ(ck.state.best_epoch, 3);
  EXPECT_EQ(ck.state.epochs_run, 4);
  EXPECT_EQ(rng_from_string(ck.state.rng_state), tr.noise_rng());
  ASSERT_TRUE(ck.optimizer.has_value());
  for (const auto& [name, s] : tr.optimizer().state()) {
    const auto& o = ck.optimizer->state().at(name);
    EXPECT_EQ(o.step, s.step);
    EXPECT_TRUE(bitwise_equal(o.m, s.m));
    EXPECT_TRUE(bitwise_equal(o.v, s.v));
  }
}

TEST_F(CheckpointTest, SavingTwiceGivesIdenticalBytes) {
  TrainingState st{0.5, 1, 1, rng_to_string(std::mt19937_64(1))};
  save_checkpoint(path.string(), model, words, fields, config, st, nullptr);
  std::ifstream a(path, std::ios::binary);
  const std::string first((std::istreambuf_iterator<char>(a)), {});
  Checkpoint ck = load_checkpoint(path.string());
  EXPECT_FALSE(ck.optimizer.has_value());
  save_checkpoint(path.string(), *ck.model, ck.words, ck.fields, ck.config, ck.state, nullptr);
  std::ifstream b(path, std::ios::binary);
  const std::string second((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(first, second);
}

TEST_F(CheckpointTest, RejectsCorruptFiles) {
  EXPECT_THROW(load_checkpoint((fs::temp_directory_path() / "vtm_missing.ckpt").string()), Error);
  std::ofstream(path, std::ios::binary) << "not a checkpoint";
  EXPECT_THROW(load_checkpoint(path.string()), ParseError);

  save_checkpoint(path.string(), model, words, fields, config, TrainingState{}, nullptr);
  const auto full = fs::file_size(path);
  fs::resize_file(path, full - 8);
  EXPECT_THROW(load_checkpoint(path.string()), ParseError);
}

}  // namespace
