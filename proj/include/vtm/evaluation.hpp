// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vtm/corpus.hpp"
#include "vtm/metrics.hpp"
#include "vtm/model.hpp"
#include "vtm/sampling.hpp"

namespace vtm {

inline const std::vector<double>& default_taus() {
  static const std::vector<double> kTaus = {0.1, 0.2, 0.3, 0.5, 0.6, 0.9, 1.0};
  return kTaus;
}

// Quality from each table's first output; diversity from the per-table
// self-BLEU averaged over tables.
inline EvalRow score_outputs(std::span<const std::vector<Tokens>> outputs,
                             std::span<const std::vector<Tokens>> references) {
  if (outputs.empty()) throw std::invalid_argument("no outputs to score");
  if (outputs.size() != references.size()) throw std::invalid_argument("outputs/references count mismatch");
  std::vector<Tokens> first;
  int per_table = -1;
  double self = 0.0;
  for (const auto& o : outputs) {
    if (o.empty()) throw std::invalid_argument("table without outputs");
    if (per_table < 0) per_table = static_cast<int>(o.size());
    if (static_cast<int>(o.size()) != per_table) throw std::invalid_argument("unequal outputs per table");
    first.push_back(o.front());
    if (o.size() >= 2) self += self_bleu(o);
  }
  EvalRow row;
  row.bleu4 = bleu4(first, references);
  row.rouge_l = rouge_l_f(first, references);
  if (per_table >= 2) row.self_bleu = self / static_cast<double>(outputs.size());
  row.n_tables = static_cast<int>(outputs.size());
  row.n_per_table = per_table;
  return row;
}

inline std::vector<std::vector<Tokens>> generate_all(const Model& m, const Vocabulary& words,
                                                     const Vocabulary& fields, std::span<const Table> tables,
                                                     const DecodeSpec& spec) {
  std::vector<std::vector<Tokens>> out;
  out.reserve(tables.size());
  for (std::size_t i = 0; i < tables.size(); ++i) out.push_back(generate(m, words, fields, tables[i], spec, i));
  return out;
}

// One row per temperature; every row uses the same seed.
inline std::vector<EvalRow> tradeoff_sweep(const Model& m, const Vocabulary& words, const Vocabulary& fields,
                                           std::span<const Table> tables,
                                           std::span<const std::vector<Tokens>> references,
                                           std::span<const double> taus, int n_per_table, DecodeSpec base) {
  std::vector<EvalRow> rows;
  base.strategy = Strategy::temperature;
  base.n = n_per_table;
  for (double tau : taus) {
    base.temperature = tau;
    EvalRow row = score_outputs(generate_all(m, words, fields, tables, base), references);
    row.tau = tau;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace vtm
