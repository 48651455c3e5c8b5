// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vtm/evaluation.hpp"
#include "vtm/metrics.hpp"

namespace {

using namespace vtm;

Tokens t(const std::string& s) { return tokenize(s); }

TEST(Bleu, ShortCandidateWorkedExample) {
  const Tokens cand = t("the cat sat");
  const std::vector<Tokens> refs = {t("the cat sat down")};
  BleuStats s = bleu_stats(cand, refs);
  EXPECT_EQ(s.matches[0], 3);
  EXPECT_EQ(s.totals[0], 3);
  EXPECT_EQ(s.matches[1], 2);
  EXPECT_EQ(s.totals[1], 2);
  EXPECT_EQ(s.matches[2], 1);
  EXPECT_EQ(s.totals[2], 1);
  EXPECT_EQ(s.matches[3], 0);
  EXPECT_EQ(s.totals[3], 0);
  // No 4-grams: the smoothed precision is eps / 1.
  const double expected = 100.0 * std::exp(1.0 - 4.0 / 3.0) * std::pow(kBleuEpsilon, 0.25);
  EXPECT_NEAR(sentence_bleu(cand, refs), expected, 1e-12);
}

TEST(Bleu, IdenticalIsHundredDisjointIsNearZero) {
  const std::vector<Tokens> c = {t("a b c d e"), t("f g h i")};
  const std::vector<std::vector<Tokens>> same = {{c[0]}, {c[1]}};
  EXPECT_NEAR(bleu4(c, same), 100.0, 1e-12);
  const std::vector<std::vector<Tokens>> other = {{t("v w x y z")}, {t("p q r s")}};
  EXPECT_LT(bleu4(c, other), 0.1);
}

TEST(Bleu, ClipsRepeatedNgrams) {
  const std::vector<Tokens> refs = {t("the cat")};
  BleuStats s = bleu_stats(t("the the the"), refs);
  EXPECT_EQ(s.matches[0], 1);
  EXPECT_EQ(s.totals[0], 3);
}

TEST(Bleu, ClosestReferenceLengthPrefersShorterOnTie) {
  const std::vector<Tokens> refs = {t("a b c d e f"), t("a b")};
  EXPECT_EQ(bleu_stats(t("a b c d"), refs).reference_length, 2);
  const std::vector<Tokens> refs2 = {t("a b c d e"), t("a b c d e f g")};
  EXPECT_EQ(bleu_stats(t("a b c d e f"), refs2).reference_length, 5);
}

TEST(Bleu, CorpusStatsAggregateBeforeScoring) {
  const std::vector<Tokens> c = {t("a b c d"), t("x y z w q")};
  const std::vector<std::vector<Tokens>> r = {{t("a b c d")}, {t("x y z q w")}};
  BleuStats total = bleu_stats(c[0], r[0]);
  total += bleu_stats(c[1], r[1]);
  EXPECT_DOUBLE_EQ(bleu4(c, r), bleu_from_stats(total));
}

TEST(Bleu, Errors) {
  const std::vector<Tokens> none;
  const std::vector<std::vector<Tokens>> no_refs;
  EXPECT_THROW(bleu4(none, no_refs), std::invalid_argument);
  const std::vector<Tokens> one = {t("a")};
  EXPECT_THROW(bleu4(one, no_refs), std::invalid_argument);
  EXPECT_THROW(bleu_stats(one[0], std::vector<Tokens>{}), std::invalid_argument);
}

TEST(SelfBleu, NeedsTwoSentences) {
  EXPECT_THROW(self_bleu(std::vector<Tokens>{t("a b")}), std::invalid_argument);
  EXPECT_THROW(self_bleu(std::vector<Tokens>{}), std::invalid_argument);
}

TEST(SelfBleu, IdenticalSentencesGiveHundred) {
  const std::vector<Tokens> s(4, t("the quick brown fox jumps"));
  EXPECT_NEAR(self_bleu(s), 100.0, 1e-12);
}

TEST(SelfBleu, ComposesFromBleuCalls) {
  const std::vector<Tokens> s = {t("a b c d e"), t("a b c x y"), t("q b c d e f")};
  double sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<Tokens> others;
    for (std::size_t j = 0; j < 3; ++j) {
      if (j != i) others.push_back(s[j]);
    }
    const std::vector<Tokens> cand = {s[i]};
    const std::vector<std::vector<Tokens>> refs = {others};
    sum += bleu4(cand, refs);
  }
  EXPECT_NEAR(self_bleu(s), sum / 3.0, 1e-12);
}

TEST(SelfBleu, PermutationInvariant) {
  std::vector<Tokens> s = {t("a b c d e"), t("a b c x y"), t("q b c d e f"), t("a b q d")};
  const double base = self_bleu(s);
  std::sort(s.begin(), s.end());
  do {
    EXPECT_NEAR(self_bleu(s), base, 1e-12);
  } while (std::next_permutation(s.begin(), s.end()));
}

TEST(RougeL, WorkedExample) {
  const std::vector<Tokens> c = {t("a b c d")};
  const std::vector<std::vector<Tokens>> r = {{t("a c d")}};
  // LCS 3: P = 3/4, R = 1, F = 6/7.
  EXPECT_NEAR(rouge_l_f(c, r), 100.0 * 6.0 / 7.0, 1e-12);
  EXPECT_NEAR(rouge_l_f(c, r), 85.71, 5e-3);
}

TEST(RougeL, IdenticalAndDisjoint) {
  const std::vector<Tokens> c = {t("a b c")};
  EXPECT_NEAR(rouge_l_f(c, std::vector<std::vector<Tokens>>{{t("a b c")}}), 100.0, 1e-12);
  EXPECT_EQ(rouge_l_f(c, std::vector<std::vector<Tokens>>{{t("x y")}}), 0.0);
}

TEST(RougeL, TakesBestReference) {
  const std::vector<Tokens> c = {t("a b c")};
  EXPECT_NEAR(rouge_l_f(c, std::vector<std::vector<Tokens>>{{t("x y"), t("a b c")}}), 100.0, 1e-12);
}

TEST(RougeL, LcsMatchesBruteForce) {
  // Exhaustive subsequence check on short strings over a 3-letter alphabet.
  auto brute = [](const Tokens& a, const Tokens& b) {
    std::size_t best = 0;
    for (unsigned mask = 0; mask < (1u << a.size()); ++mask) {
      Tokens sub;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (mask & (1u << i)) sub.push_back(a[i]);
      }
      std::size_t j = 0;
      for (const auto& w : b) {
        if (j < sub.size() && sub[j] == w) ++j;
      }
      if (j == sub.size()) best = std::max(best, sub.size());
    }
    return best;
  };
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> len(0, 7), sym(0, 2);
  for (int trial = 0; trial < 300; ++trial) {
    Tokens a, b;
    for (int i = len(rng); i > 0; --i) a.push_back(std::string(1, static_cast<char>('a' + sym(rng))));
    for (int i = len(rng); i > 0; --i) b.push_back(std::string(1, static_cast<char>('a' + sym(rng))));
    EXPECT_EQ(lcs_length(a, b), brute(a, b));
  }
}

TEST(Scoring, SingleOutputLeavesSelfBleuAbsent) {
  const std::vector<std::vector<Tokens>> out = {{t("a b c d")}, {t("e f g h")}};
  const std::vector<std::vector<Tokens>> refs = {{t("a b c d")}, {t("e f g h")}};
  EvalRow row = score_outputs(out, refs);
  EXPECT_FALSE(row.self_bleu.has_value());
  EXPECT_NEAR(row.bleu4, 100.0, 1e-12);
  EXPECT_EQ(row.n_per_table, 1);
}

TEST(Scoring, QualityFromFirstOutputDiversityAveraged) {
  const std::vector<std::vector<Tokens>> out = {{t("a b c d"), t("a b c d")}, {t("e f g h"), t("w x y z")}};
  const std::vector<std::vector<Tokens>> refs = {{t("a b c d")}, {t("e f g h")}};
  EvalRow row = score_outputs(out, refs);
  ASSERT_TRUE(row.self_bleu.has_value());
  EXPECT_NEAR(*row.self_bleu, (100.0 + self_bleu(out[1])) / 2.0, 1e-12);
  EXPECT_NEAR(row.bleu4, 100.0, 1e-12);
  const std::vector<std::vector<Tokens>> ragged = {{t("a")}, {t("b"), t("c")}};
  EXPECT_THROW(score_outputs(ragged, refs), std::invalid_argument);
}

TEST(Report, FormatsRowsWithBlankOptionals) {
  std::vector<EvalRow> rows(2);
  rows[0].tau = 0.5;
  rows[0].bleu4 = 12.5;
  rows[0].self_bleu = 40.0;
  rows[0].rouge_l = 30.0;
  rows[0].n_tables = 3;
  rows[0].n_per_table = 5;
  rows[1].bleu4 = 1.0;
  rows[1].n_tables = 3;
  rows[1].n_per_table = 1;
  std::ostringstream out;
  write_report(out, rows);
  EXPECT_EQ(out.str(),
            "tau,bleu4,self_bleu,rouge_l,n_tables,n_per_table\n"
            "0.500000,12.500000,40.000000,30.000000,3,5\n"
            ",1.000000,,0.000000,3,1\n");
}

}  // namespace
