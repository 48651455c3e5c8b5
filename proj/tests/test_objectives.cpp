// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "vtm/objectives.hpp"

namespace {

using namespace vtm;
using vtm::testing::tiny_model_dims;
using vtm::testing::tiny_paired_batch;
using vtm::testing::tiny_raw_batch;

TEST(PreservingContent, ClosedFormExamples) {
  DiagonalGaussian q{Vector(2), Vector(2)};
  q.mean << 1.0, 0.0;
  q.log_variance.setConstant(std::log(0.5));
  EXPECT_NEAR(expected_squared_distance(q, Vector::Zero(2)), 2.0, 1e-15);
  DiagonalGaussian tight{Vector::Constant(3, 0.4), Vector::Constant(3, -40.0)};
  EXPECT_LT(expected_squared_distance(tight, tight.mean), 1e-16);
}

TEST(PreservingContent, MonteCarloIdentity) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  DiagonalGaussian q{vtm::testing::random_matrix(6, 1, rng), vtm::testing::random_matrix(6, 1, rng, 0.5)};
  Vector h = vtm::testing::random_matrix(6, 1, rng);
  double acc = 0.0;
  const int N = 100000;
  for (int i = 0; i < N; ++i) {
    Vector eps(6);
    for (int k = 0; k < 6; ++k) eps(k) = n(rng);
    acc += (reparameterize(q, eps) - h).squaredNorm();
  }
  const double exact = expected_squared_distance(q, h);
  EXPECT_LT(std::abs(acc / N - exact) / exact, 1e-2);
}

TEST(MutualInformation, IdenticalPosteriorsGiveZero) {
  std::mt19937_64 rng(2);
  Matrix mean = Matrix::Constant(4, 3, 0.3), logvar = Matrix::Constant(4, 3, -0.2);
  Matrix samples = vtm::testing::random_matrix(4, 3, rng);
  EXPECT_NEAR(mutual_information_value(samples, mean, logvar), 0.0, 1e-12);
}

TEST(MutualInformation, BoundedByLogBatch) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int B = 2 + trial % 7;
    Matrix mean = vtm::testing::random_matrix(B, 2, rng, 5.0);
    Matrix logvar = vtm::testing::random_matrix(B, 2, rng, 0.5);
    Matrix samples = vtm::testing::random_matrix(B, 2, rng, 3.0);
    EXPECT_LE(mutual_information_value(samples, mean, logvar), std::log(static_cast<double>(B)) + 1e-12);
  }
}

TEST(MutualInformation, RejectsSingleExample) {
  Matrix one = Matrix::Zero(1, 2);
  EXPECT_THROW(mutual_information_value(one, one, one), std::invalid_argument);
}

// I(index; v) for index uniform on {0, 1} and v | i ~ N(mu_i, var_i),
// integrated on a fine grid.
double integrated_mi(double m0, double v0, double m1, double v1) {
  auto pdf = [](double x, double m, double v) { return std::exp(-0.5 * (x - m) * (x - m) / v) / std::sqrt(2 * M_PI * v); };
  double total = 0.0;
  const double lo = -20.0, hi = 20.0, dx = 1e-4;
  for (double x = lo; x < hi; x += dx) {
    const double a = pdf(x, m0, v0), b = pdf(x, m1, v1), mix = 0.5 * (a + b);
    if (a > 0) total += 0.5 * a * std::log(a / mix) * dx;
    if (b > 0) total += 0.5 * b * std::log(b / mix) * dx;
  }
  return total;
}

TEST(MutualInformation, MatchesNumericalIntegrationForTwoGaussians) {
  const double m0 = 0.0, v0 = 1.0, m1 = 1.5, v1 = 0.5;
  Matrix mean(2, 1), logvar(2, 1);
  mean << m0, m1;
  logvar << std::log(v0), std::log(v1);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  const int reps = 100000;
  double acc = 0.0;
  Matrix s(2, 1);
  for (int r = 0; r < reps; ++r) {
    s(0, 0) = m0 + std::sqrt(v0) * n(rng);
    s(1, 0) = m1 + std::sqrt(v1) * n(rng);
    acc += mutual_information_value(s, mean, logvar);
  }
  const double oracle = integrated_mi(m0, v0, m1, v1);
  EXPECT_LT(std::abs(acc / reps - oracle) / oracle, 0.05) << acc / reps << " vs " << oracle;
}

class LossTest : public ::testing::Test {
 protected:
  Model model{tiny_model_dims(), 3};
  PairedBatch paired = tiny_paired_batch();
  RawBatch raw = tiny_raw_batch();

  LossResult run(const LossSpec& spec, const RawBatch* r, unsigned seed = 9) {
    ad::Graph g;
    std::mt19937_64 rng(seed);
    return total_loss(g, model, paired, r, spec, rng);
  }
};

TEST_F(LossTest, BreakdownSumsToTotal) {
  for (Mode mode : {Mode::vtm, Mode::vtm_noraw, Mode::vtm_noraw_nomi, Mode::vtm_noraw_nomi_nopt, Mode::vtm_nopc,
                    Mode::table2seq}) {
    LossSpec spec{mode, Lambdas{0.5, 1.0, 0.25}, 1.0};
    LossResult r = run(spec, &raw);
    EXPECT_NEAR(r.terms.recomposed(), r.terms.total, 1e-6) << mode_name(mode);
    EXPECT_TRUE(r.terms.finite());
  }
}

TEST_F(LossTest, ZeroLambdasLeaveBothElbos) {
  LossResult r = run(LossSpec{Mode::vtm, Lambdas{0, 0, 0}, 1.0}, &raw);
  EXPECT_NEAR(r.terms.total, r.terms.elbo_p + r.terms.elbo_r, 1e-12);
}

TEST_F(LossTest, ModesZeroTheirTerms) {
  LossResult noraw = run(LossSpec{Mode::vtm_noraw, {}, 1.0}, &raw);
  EXPECT_EQ(noraw.terms.elbo_r, 0.0);
  EXPECT_NE(noraw.terms.l_mi_p, 0.0);
  LossResult nomi = run(LossSpec{Mode::vtm_noraw_nomi, {}, 1.0}, &raw);
  EXPECT_EQ(nomi.terms.l_mi_p, 0.0);
  EXPECT_NE(nomi.terms.l_pt, 0.0);
  LossResult nopt = run(LossSpec{Mode::vtm_noraw_nomi_nopt, {}, 1.0}, &raw);
  EXPECT_EQ(nopt.terms.l_pt, 0.0);
  EXPECT_NE(nopt.terms.l_pc, 0.0);
  LossResult nopc = run(LossSpec{Mode::vtm_nopc, {}, 1.0}, &raw);
  EXPECT_EQ(nopc.terms.l_pc, 0.0);
  EXPECT_NE(nopc.terms.elbo_r, 0.0);
  LossResult t2s = run(LossSpec{Mode::table2seq, {}, 1.0}, &raw);
  EXPECT_EQ(t2s.terms.kl_z_p, 0.0);
  EXPECT_EQ(t2s.terms.total, t2s.terms.rec_p);
}

TEST_F(LossTest, RawModeNeedsRawBatch) {
  EXPECT_THROW(run(LossSpec{Mode::vtm, {}, 1.0}, nullptr), ConfigError);
  EXPECT_NO_THROW(run(LossSpec{Mode::vtm_noraw, {}, 1.0}, nullptr));
}

TEST_F(LossTest, PriorHeadsGiveZeroKl) {
  for (ad::Parameter* p : model.inference.heads()) p->value.setZero();
  LossResult r = run(LossSpec{Mode::vtm, {}, 1.0}, &raw);
  EXPECT_EQ(r.terms.kl_z_p, 0.0);
  EXPECT_EQ(r.terms.kl_z_r, 0.0);
  EXPECT_EQ(r.terms.kl_c_r, 0.0);
}

TEST_F(LossTest, TemplateLossWithoutOverlapIsTemplateNllOfSentence) {
  for (ad::Parameter* p : model.inference.heads()) p->value.setZero();
  const std::vector<RawExample> raw_like = vtm::testing::tiny_raw();
  // Table values never occur in the sentence, so the template is the sentence.
  std::vector<PairedExample> ex = {
      {EncodedTable{{5}, {1}, {5}}, raw_like[1].sentence, raw_like[1].sentence}};
  ex[0].table.values[0] = 9;
  PairedBatch b = make_paired_batch(ex, {0});
  ad::Graph g;
  LossBreakdown out;
  LatentNoise zero{Matrix::Zero(1, 4), Matrix::Zero(1, 5)};
  paired_loss(g, model, b, zero, LossSpec{Mode::vtm, {}, 1.0}, out);
  EXPECT_NEAR(out.l_pt, -model.template_log_prob(raw_like[1].sentence, Vector::Zero(4)), 1e-12);
}

TEST_F(LossTest, SingleExampleBatchSkipsMutualInformation) {
  PairedBatch one = tiny_paired_batch({1});
  ad::Graph g;
  std::mt19937_64 rng(1);
  LossResult r = compute_loss(g, model, &one, nullptr, LossSpec{Mode::vtm_noraw, {}, 1.0}, rng);
  EXPECT_EQ(r.terms.l_mi_p, 0.0);
  EXPECT_EQ(r.terms.lambda.mi, 0.0);
  EXPECT_NEAR(r.terms.recomposed(), r.terms.total, 1e-9);
}

TEST_F(LossTest, TotalGradientMatchesFiniteDifferences) {
  LossSpec spec{Mode::vtm, Lambdas{0.7, 1.0, 0.5}, 1.0};
  for (ParamGroup group : kAllGroups) {
    auto params = model.store.members(group);
    auto report = vtm::testing::check_gradients(params, [&](ad::Graph& g) {
      std::mt19937_64 rng(21);
      return total_loss(g, model, paired, &raw, spec, rng).total;
    });
    EXPECT_LT(report.worst, 1e-5) << group_name(group) << " " << report.worst_name;
  }
}

// The gradient of the weighted total is the weighted sum of term gradients.
TEST_F(LossTest, GradientComposesLinearlyInLambdas) {
  auto grads = [&](Lambdas l) {
    model.store.zero_grad();
    ad::Graph g;
    std::mt19937_64 rng(5);
    g.backward(total_loss(g, model, paired, &raw, LossSpec{Mode::vtm, l, 1.0}, rng).total);
    std::vector<Matrix> out;
    for (ad::Parameter* p : model.store.all()) out.push_back(p->grad);
    return out;
  };
  auto base = grads({0, 0, 0});
  auto mi = grads({1, 0, 0}), pt = grads({0, 1, 0}), pc = grads({0, 0, 1});
  auto mixed = grads({0.3, 2.0, 0.6});
  for (std::size_t i = 0; i < base.size(); ++i) {
    Matrix expect = base[i] + 0.3 * (mi[i] - base[i]) + 2.0 * (pt[i] - base[i]) + 0.6 * (pc[i] - base[i]);
    EXPECT_LT((mixed[i] - expect).norm(), 1e-9 * std::max(1.0, expect.norm())) << i;
  }
}

TEST(Modes, NamesRoundTrip) {
  for (Mode m : {Mode::vtm, Mode::vtm_noraw, Mode::vtm_noraw_nomi, Mode::vtm_noraw_nomi_nopt, Mode::vtm_nopc,
                 Mode::table2seq}) {
    EXPECT_EQ(parse_mode(mode_name(m)), m);
  }
  EXPECT_EQ(parse_mode("vtm-noraw"), Mode::vtm_noraw);
  EXPECT_THROW(parse_mode("bogus"), ConfigError);
  EXPECT_FALSE(terms_of(Mode::table2seq).latent);
  EXPECT_FALSE(terms_of(Mode::vtm_noraw).raw);
}

}  // namespace
