// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

// Corpus BLEU-4, self-BLEU and ROUGE-L F, all scaled to [0, 100].

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vtm/corpus.hpp"

namespace vtm {

inline constexpr int kBleuOrder = 4;
inline constexpr double kBleuEpsilon = 1e-9;

using NgramCounts = std::map<std::vector<std::string>, int>;

inline NgramCounts ngram_counts(std::span<const std::string> s, int n) {
  NgramCounts out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= s.size(); ++i) {
    ++out[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                   s.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  }
  return out;
}

// Sufficient statistics of corpus BLEU; they add across sentence pairs.
struct BleuStats {
  std::array<long, kBleuOrder> matches{};
  std::array<long, kBleuOrder> totals{};
  long candidate_length = 0;
  long reference_length = 0;

  BleuStats& operator+=(const BleuStats& o) {
    for (int n = 0; n < kBleuOrder; ++n) {
      matches[static_cast<std::size_t>(n)] += o.matches[static_cast<std::size_t>(n)];
      totals[static_cast<std::size_t>(n)] += o.totals[static_cast<std::size_t>(n)];
    }
    candidate_length += o.candidate_length;
    reference_length += o.reference_length;
    return *this;
  }
};

// Clipped n-gram matches against multiple references; the effective reference
// length is the closest one (shorter wins ties).
inline BleuStats bleu_stats(std::span<const std::string> candidate, std::span<const Tokens> references) {
  if (references.empty()) throw std::invalid_argument("bleu: candidate without references");
  BleuStats s;
  s.candidate_length = static_cast<long>(candidate.size());
  long best = -1;
  for (const Tokens& r : references) {
    const long len = static_cast<long>(r.size());
    const long d = std::labs(len - s.candidate_length), bd = std::labs(best - s.candidate_length);
    if (best < 0 || d < bd || (d == bd && len < best)) best = len;
  }
  s.reference_length = best;
  for (int n = 1; n <= kBleuOrder; ++n) {
    const NgramCounts cand = ngram_counts(candidate, n);
    NgramCounts max_ref;
    for (const Tokens& r : references) {
      for (const auto& [g, c] : ngram_counts(r, n)) max_ref[g] = std::max(max_ref[g], c);
    }
    long match = 0, total = 0;
    for (const auto& [g, c] : cand) {
      total += c;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) match += std::min(c, it->second);
    }
    s.matches[static_cast<std::size_t>(n - 1)] = match;
    s.totals[static_cast<std::size_t>(n - 1)] = total;
  }
  return s;
}

// Zero match counts are replaced by epsilon; denominators are at least 1.
inline double bleu_from_stats(const BleuStats& s) {
  if (s.candidate_length == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < kBleuOrder; ++n) {
    const auto i = static_cast<std::size_t>(n);
    const double num = s.matches[i] == 0 ? kBleuEpsilon : static_cast<double>(s.matches[i]);
    const double den = static_cast<double>(std::max(1L, s.totals[i]));
    log_sum += std::log(num / den);
  }
  const double c = static_cast<double>(s.candidate_length), r = static_cast<double>(s.reference_length);
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return 100.0 * bp * std::exp(log_sum / kBleuOrder);
}

inline double bleu4(std::span<const Tokens> candidates, std::span<const std::vector<Tokens>> references) {
  if (candidates.empty()) throw std::invalid_argument("bleu: no candidates");
  if (candidates.size() != references.size()) throw std::invalid_argument("bleu: candidate/reference count mismatch");
  BleuStats total;
  for (std::size_t i = 0; i < candidates.size(); ++i) total += bleu_stats(candidates[i], references[i]);
  return bleu_from_stats(total);
}

inline double sentence_bleu(std::span<const std::string> candidate, std::span<const Tokens> references) {
  return bleu_from_stats(bleu_stats(candidate, references));
}

// Mean BLEU of each sentence against all the others.
inline double self_bleu(std::span<const Tokens> sentences) {
  if (sentences.size() < 2) throw std::invalid_argument("self-BLEU needs at least 2 sentences");
  double sum = 0.0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    std::vector<Tokens> others;
    for (std::size_t j = 0; j < sentences.size(); ++j) {
      if (j != i) others.push_back(sentences[j]);
    }
    sum += sentence_bleu(sentences[i], others);
  }
  return sum / static_cast<double>(sentences.size());
}

inline std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline double rouge_l_pair(std::span<const std::string> candidate, std::span<const std::string> reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double l = static_cast<double>(lcs_length(candidate, reference));
  if (l == 0.0) return 0.0;
  const double p = l / static_cast<double>(candidate.size());
  const double r = l / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

// Best F over each candidate's references, averaged over the corpus.
inline double rouge_l_f(std::span<const Tokens> candidates, std::span<const std::vector<Tokens>> references) {
  if (candidates.empty()) throw std::invalid_argument("rouge-l: no candidates");
  if (candidates.size() != references.size()) throw std::invalid_argument("rouge-l: count mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (references[i].empty()) throw std::invalid_argument("rouge-l: candidate without references");
    double best = 0.0;
    for (const Tokens& r : references[i]) best = std::max(best, rouge_l_pair(candidates[i], r));
    sum += best;
  }
  return 100.0 * sum / static_cast<double>(candidates.size());
}

// One evaluation row; self-BLEU is absent when each table has one output.
struct EvalRow {
  std::optional<double> tau;
  double bleu4 = 0.0;
  std::optional<double> self_bleu;
  double rouge_l = 0.0;
  int n_tables = 0;
  int n_per_table = 0;
};

inline constexpr const char* kReportHeader = "tau,bleu4,self_bleu,rouge_l,n_tables,n_per_table";

inline std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline void write_report(std::ostream& out, std::span<const EvalRow> rows) {
  out << kReportHeader << '\n';
  for (const EvalRow& r : rows) {
    out << (r.tau ? format_metric(*r.tau) : std::string()) << ',' << format_metric(r.bleu4) << ','
        << (r.self_bleu ? format_metric(*r.self_bleu) : std::string()) << ',' << format_metric(r.rouge_l) << ','
        << r.n_tables << ',' << r.n_per_table << '\n';
  }
}

}  // namespace vtm
