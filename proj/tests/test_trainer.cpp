// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "fixtures.hpp"
#include "vtm/toy_corpus.hpp"
#include "vtm/trainer.hpp"

namespace {

using namespace vtm;
using vtm::testing::tiny_model_dims;
using vtm::testing::tiny_paired_batch;
using vtm::testing::tiny_raw_batch;

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

// For each group, whether any of its parameters changed since `before`.
std::map<ParamGroup, bool> moved(Model& m, const std::vector<Matrix>& before) {
  std::map<ParamGroup, bool> out;
  for (ParamGroup g : kAllGroups) out[g] = false;
  const auto all = m.store.all();
  for (ParamGroup g : kAllGroups) {
    for (ad::Parameter* p : m.store.members(g)) {
      const auto i = static_cast<std::size_t>(std::find(all.begin(), all.end(), p) - all.begin());
      if (!bitwise_equal(p->value, before[i])) out[g] = true;
    }
  }
  return out;
}

TrainConfig small_config(Mode mode) {
  TrainConfig c;
  c.mode = mode;
  c.learning_rate = 1e-2;
  return c;
}

TEST(Phases, GroupFootprints) {
  EXPECT_EQ(phase_groups(Phase::raw, Mode::vtm),
            (std::vector<ParamGroup>{ParamGroup::inference, ParamGroup::generator}));
  EXPECT_EQ(phase_groups(Phase::paired, Mode::vtm).size(), kAllGroups.size());
  EXPECT_EQ(phase_groups(Phase::joint, Mode::table2seq),
            (std::vector<ParamGroup>{ParamGroup::table_encoder, ParamGroup::generator}));
}

TEST(TrainerStep, RawStepLeavesTableEncoderAndTemplatesBitwiseUnchanged) {
  Model m(tiny_model_dims(), 1);
  Trainer tr(m, small_config(Mode::vtm));
  const auto before = m.store.snapshot();
  tr.train_step_raw(tiny_raw_batch());
  auto mv = moved(m, before);
  EXPECT_FALSE(mv[ParamGroup::table_encoder]);
  EXPECT_FALSE(mv[ParamGroup::template_generator]);
  EXPECT_TRUE(mv[ParamGroup::inference]);
  EXPECT_TRUE(mv[ParamGroup::generator]);
}

TEST(TrainerStep, PairedStepMovesEveryGroup) {
  Model m(tiny_model_dims(), 1);
  Trainer tr(m, small_config(Mode::vtm));
  const auto before = m.store.snapshot();
  tr.train_step_paired(tiny_paired_batch());
  for (auto [g, changed] : moved(m, before)) EXPECT_TRUE(changed) << group_name(g);
}

TEST(TrainerStep, EveryGroupReceivesGradient) {
  Model m(tiny_model_dims(), 2);
  Trainer tr(m, small_config(Mode::vtm));
  ad::Graph g;
  PairedBatch p = tiny_paired_batch();
  RawBatch r = tiny_raw_batch();
  tr.evaluate_gradients(g, &p, &r);
  for (ParamGroup group : kAllGroups) {
    double norm = 0.0;
    for (ad::Parameter* q : m.store.members(group)) norm += q->grad.squaredNorm();
    EXPECT_GT(norm, 0.0) << group_name(group);
  }
}

// With all weights zero, table2seq is a plain maximum-likelihood Adam step.
TEST(TrainerStep, Table2SeqIsPlainMaximumLikelihood) {
  TrainConfig c = small_config(Mode::table2seq);
  c.lambda = {0, 0, 0};
  c.clip_norm = 0.0;
  Model m(tiny_model_dims(), 3), ref(tiny_model_dims(), 3);
  Trainer tr(m, c);
  const PairedBatch p = tiny_paired_batch();
  LossBreakdown b = tr.train_step_paired(p);
  EXPECT_EQ(b.total, b.rec_p);

  // Reference: gradient of the reconstruction NLL only, then Adam.
  ref.store.zero_grad();
  ad::Graph g;
  std::mt19937_64 rng(0);
  g.backward(total_loss(g, ref, p, nullptr, LossSpec{Mode::table2seq, {}, 1.0}, rng).total);
  Adam opt(c.learning_rate);
  std::vector<ParamGroup> groups = {ParamGroup::table_encoder, ParamGroup::generator};
  opt.step(ref.store.members(std::span<const ParamGroup>(groups)));
  for (std::size_t i = 0; i < m.store.all().size(); ++i) {
    EXPECT_TRUE(bitwise_equal(m.store.all()[i]->value, ref.store.all()[i]->value)) << m.store.all()[i]->name;
  }
}

TEST(TrainerStep, LossFallsOnAFrozenBatch) {
  Model m(tiny_model_dims(), 4);
  TrainConfig c = small_config(Mode::vtm);
  Trainer tr(m, c);
  const PairedBatch p = tiny_paired_batch({0, 1, 2});
  const RawBatch r = tiny_raw_batch({0, 1, 2});
  std::vector<double> losses;
  for (int i = 0; i < 50; ++i) losses.push_back(tr.train_step_joint(p, &r).total);
  const double first = std::accumulate(losses.begin(), losses.begin() + 5, 0.0) / 5.0;
  const double last = std::accumulate(losses.end() - 5, losses.end(), 0.0) / 5.0;
  EXPECT_LT(last, first);
}

TEST(TrainerStep, NonFiniteLossRaisesDivergence) {
  Model m(tiny_model_dims(), 5);
  m.store.members(ParamGroup::generator).front()->value.setConstant(std::numeric_limits<double>::quiet_NaN());
  Trainer tr(m, small_config(Mode::vtm));
  EXPECT_THROW(tr.train_step_paired(tiny_paired_batch()), DivergenceError);
}

TEST(TrainerStep, PairedOnlyModesRejectRawSteps) {
  Model m(tiny_model_dims(), 6);
  Trainer tr(m, small_config(Mode::vtm_noraw));
  EXPECT_THROW(tr.train_step_raw(tiny_raw_batch()), ConfigError);
  EXPECT_NO_THROW(tr.train_step_joint(tiny_paired_batch(), nullptr));
  Trainer full(m, small_config(Mode::vtm));
  EXPECT_THROW(full.train_step_joint(tiny_paired_batch(), nullptr), ConfigError);
}

class FitTest : public ::testing::Test {
 protected:
  static PreparedData data(Mode mode) {
    toy::Options o;
    o.n_paired = 60;
    o.n_raw = 120;
    o.n_heldout = 20;
    o.n_templates = 4;
    o.seed = 3;
    const toy::Corpus c = toy::generate(o);
    std::vector<PairedText> paired, valid;
    std::vector<Tokens> raw;
    for (const auto& e : c.paired) paired.push_back({e.table, e.sentence, {}});
    for (const auto& e : c.raw) raw.push_back(e.sentence);
    for (const auto& e : c.heldout) valid.push_back({e.table, e.sentence, {}});
    TrainConfig cfg = config(mode);
    return prepare_data(paired, raw, valid, cfg);
  }

  static TrainConfig config(Mode mode) {
    TrainConfig c;
    c.mode = mode;
    c.word_dim = 8;
    c.hidden = 12;
    c.table_hidden = 10;
    c.z_dim = 4;
    c.c_dim = 6;
    c.batch_paired = 16;
    c.batch_raw = 16;
    c.learning_rate = 5e-3;
    c.max_epochs = 3;
    c.patience = 2;
    c.seed = 8;
    return c;
  }

  static std::pair<FitResult, std::vector<Matrix>> run(Mode mode) {
    PreparedData d = data(mode);
    const TrainConfig c = config(mode);
    Model m(model_dims(c, d.words.size(), d.fields.size()), c.seed);
    FitResult r = fit(m, d.data, c);
    return {std::move(r), m.store.snapshot()};
  }
};

TEST_F(FitTest, SameSeedSameResult) {
  auto [a, pa] = run(Mode::vtm);
  auto [b, pb] = run(Mode::vtm);
  EXPECT_EQ(a.best_epoch, b.best_epoch);
  EXPECT_EQ(a.best_score, b.best_score);
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(bitwise_equal(pa[i], pb[i]));
}

TEST_F(FitTest, BestValidationNoWorseThanUntrained) {
  for (Mode mode : {Mode::vtm, Mode::table2seq}) {
    auto [r, params] = run(mode);
    ASSERT_FALSE(r.history.empty());
    EXPECT_EQ(r.history.front().epoch, 0);
    EXPECT_LE(r.best_score, r.history.front().valid.score);
    EXPECT_GT(r.best_epoch, 0) << mode_name(mode);
    EXPECT_EQ(r.state.epochs_run, static_cast<int>(r.history.size()) - 1);
  }
}

TEST_F(FitTest, LeavesModelAtBestEpoch) {
  PreparedData d = data(Mode::vtm_noraw);
  const TrainConfig c = config(Mode::vtm_noraw);
  Model m(model_dims(c, d.words.size(), d.fields.size()), c.seed);
  FitResult r = fit(m, d.data, c);
  const ValidationScore v = validation_score(m, d.data.valid, c.mode, c.batch_paired, c.seed);
  EXPECT_EQ(v.score, r.best_score);
}

TEST(Fit, RawModeNeedsRawData) {
  Dataset d;
  d.paired = vtm::testing::tiny_paired();
  Model m(tiny_model_dims(), 1);
  EXPECT_THROW(fit(m, d, small_config(Mode::vtm)), Error);
  TrainConfig c = small_config(Mode::vtm_noraw);
  c.max_epochs = 1;
  EXPECT_NO_THROW(fit(m, d, c));
}

}  // namespace
