// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

// Decoding: greedy, temperature sampling, and length-normalised beam search.
// For latent models each output draws its own z ~ N(0, I); c is always the
// projected table encoding.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vtm/corpus.hpp"
#include "vtm/errors.hpp"
#include "vtm/generator.hpp"
#include "vtm/model.hpp"
#include "vtm/table_encoder.hpp"

namespace vtm {

// softmax(u / tau).
inline Vector temperature_distribution(const Vector& u, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (u.size() == 0) throw std::invalid_argument("empty logits");
  const double m = u.maxCoeff();
  Vector p = ((u.array() - m) / tau).exp().matrix();
  return p / p.sum();
}

inline Vector log_softmax(const Vector& u) {
  const double m = u.maxCoeff();
  const double lse = m + std::log((u.array() - m).exp().sum());
  return (u.array() - lse).matrix();
}

// First index of the maximum.
inline int argmax(const Vector& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = static_cast<int>(i);
  }
  return best;
}

// Inverse-CDF draw from a probability vector.
inline int sample_index(const Vector& p, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p(i);
    if (u < acc) return static_cast<int>(i);
  }
  for (Eigen::Index i = p.size() - 1; i >= 0; --i) {
    if (p(i) > 0.0) return static_cast<int>(i);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Generic beam search over an incremental scorer. `State` holds one row per
// live hypothesis.

template <class State>
struct StepScorer {
  // Next-token log-probabilities, one row per hypothesis.
  std::function<Matrix(const State&)> log_probs;
  // New state whose row i continues hypothesis parents[i] with tokens[i].
  std::function<State(const State&, const std::vector<int>& parents, const std::vector<int>& tokens)> advance;
};

struct Hypothesis {
  std::vector<int> tokens;  // includes the final EOS when finished
  double log_prob = 0.0;

  [[nodiscard]] double normalized() const {
    return tokens.empty() ? 0.0 : log_prob / static_cast<double>(tokens.size());
  }
};

// Each step keeps the `width` best expansions by summed log-probability
// (ties: earlier hypothesis, then lower token id). Expansions ending in `eos`
// retire; the answer is the retired or surviving hypothesis with the best
// length-normalised score. Width 1 is greedy decoding.
template <class State>
Hypothesis beam_search_core(const State& start, const StepScorer<State>& scorer, int width, int max_length, int eos) {
  if (width < 1) throw std::invalid_argument("beam width must be >= 1");
  if (max_length < 1) throw std::invalid_argument("max length must be >= 1");
  std::vector<Hypothesis> alive(1);
  std::vector<Hypothesis> finished;
  State state = start;
  for (int t = 0; t < max_length && !alive.empty(); ++t) {
    const Matrix lp = scorer.log_probs(state);
    struct Cand {
      double score;
      int parent;
      int token;
    };
    std::vector<Cand> cands;
    cands.reserve(static_cast<std::size_t>(lp.size()));
    for (int h = 0; h < static_cast<int>(alive.size()); ++h) {
      for (int v = 0; v < lp.cols(); ++v) cands.push_back({alive[static_cast<std::size_t>(h)].log_prob + lp(h, v), h, v});
    }
    const auto keep = std::min<std::size_t>(static_cast<std::size_t>(width), cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Cand& a, const Cand& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Hypothesis> next;
    std::vector<int> parents, tokens;
    for (std::size_t k = 0; k < keep; ++k) {
      const Cand& c = cands[k];
      Hypothesis h = alive[static_cast<std::size_t>(c.parent)];
      h.tokens.push_back(c.token);
      h.log_prob = c.score;
      if (c.token == eos) {
        finished.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
        parents.push_back(c.parent);
        tokens.push_back(c.token);
      }
    }
    alive = std::move(next);
    if (!alive.empty() && t + 1 < max_length) state = scorer.advance(state, parents, tokens);
  }
  for (auto& h : alive) finished.push_back(std::move(h));
  const Hypothesis* best = &finished.front();
  for (const Hypothesis& h : finished) {
    if (h.normalized() > best->normalized()) best = &h;
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Model decoding.

enum class Strategy { greedy, temperature, beam, beam_sweep };

inline std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::greedy: return "greedy";
    case Strategy::temperature: return "temperature";
    case Strategy::beam: return "beam";
    case Strategy::beam_sweep: return "beam-sweep";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view s) {
  for (Strategy v : {Strategy::greedy, Strategy::temperature, Strategy::beam, Strategy::beam_sweep}) {
    if (s == strategy_name(v)) return v;
  }
  throw ConfigError("unknown decoding strategy '" + std::string(s) + "'");
}

struct DecodeSpec {
  Strategy strategy = Strategy::greedy;
  double temperature = 1.0;
  int beam_width = 1;
  int max_length = kDefaultMaxLength;
  int n = 1;
  std::uint64_t seed = 1;
  bool sample_latent = true;  // false: z = 0 (table2seq)
};

inline void validate(const DecodeSpec& s) {
  if (!(s.temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (s.beam_width < 1) throw ConfigError("beam width must be >= 1");
  if (s.max_length < 1) throw ConfigError("max length must be >= 1");
  if (s.n < 1) throw ConfigError("number of samples must be >= 1");
}

// Record vectors and projected content of one table.
struct TableContext {
  Matrix records;  // K x d_t
  Vector content;  // d_c
};

inline TableContext table_context(const Model& m, const EncodedTable& table) {
  if (table.size() == 0) throw Error("cannot generate from an empty table");
  ad::Graph g(false);
  const EncodedTable* ptr = &table;
  EncodedTables enc = encode_tables(g, m.table, batch_tables(std::span<const EncodedTable* const>(&ptr, 1)));
  return {enc.records.value().topRows(table.size()), enc.content.value().row(0).transpose()};
}

// Scorer over the sentence generator for one table and latent.
inline StepScorer<DecoderValue> generator_scorer(const Model& m, const TableContext& ctx) {
  StepScorer<DecoderValue> s;
  s.log_probs = [&m, &ctx](const DecoderValue& st) {
    Matrix logits = generator_step_logits(m.generator, st, &ctx.records);
    for (Eigen::Index r = 0; r < logits.rows(); ++r) logits.row(r) = log_softmax(logits.row(r).transpose()).transpose();
    return logits;
  };
  s.advance = [&m](const DecoderValue& st, const std::vector<int>& parents, const std::vector<int>& tokens) {
    DecoderValue sel;
    const auto n = static_cast<Eigen::Index>(parents.size());
    sel.lstm.h.resize(n, st.lstm.h.cols());
    sel.lstm.c.resize(n, st.lstm.c.cols());
    sel.latent_gates.resize(n, st.latent_gates.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto p = parents[static_cast<std::size_t>(i)];
      sel.lstm.h.row(i) = st.lstm.h.row(p);
      sel.lstm.c.row(i) = st.lstm.c.row(p);
      sel.latent_gates.row(i) = st.latent_gates.row(p);
    }
    return advance_decoder(m.generator.decoder, sel, tokens);
  };
  return s;
}

inline DecoderValue initial_state(const Model& m, const Vector& z, const Vector& c) {
  Matrix latent(1, z.size() + c.size());
  latent << z.transpose(), c.transpose();
  return advance_decoder(m.generator.decoder, start_decoder(m.generator.decoder, latent), {Vocabulary::kBos});
}

// Token ids up to and excluding EOS.
inline std::vector<int> strip_eos(std::vector<int> ids) {
  auto it = std::find(ids.begin(), ids.end(), Vocabulary::kEos);
  ids.erase(it, ids.end());
  return ids;
}

inline std::vector<int> greedy_decode(const Model& m, const TableContext& ctx, const Vector& z, int max_length) {
  return strip_eos(beam_search_core(initial_state(m, z, ctx.content), generator_scorer(m, ctx), 1, max_length,
                                    Vocabulary::kEos)
                       .tokens);
}

inline std::vector<int> beam_decode(const Model& m, const TableContext& ctx, const Vector& z, int width,
                                    int max_length) {
  return strip_eos(beam_search_core(initial_state(m, z, ctx.content), generator_scorer(m, ctx), width, max_length,
                                    Vocabulary::kEos)
                       .tokens);
}

inline std::vector<int> temperature_decode(const Model& m, const TableContext& ctx, const Vector& z, double tau,
                                           int max_length, std::mt19937_64& rng) {
  DecoderValue st = initial_state(m, z, ctx.content);
  std::vector<int> out;
  for (int t = 0; t < max_length; ++t) {
    Matrix logits = generator_step_logits(m.generator, st, &ctx.records);
    const int tok = sample_index(temperature_distribution(logits.row(0).transpose(), tau), rng);
    if (tok == Vocabulary::kEos) break;
    out.push_back(tok);
    if (t + 1 < max_length) st = advance_decoder(m.generator.decoder, st, {tok});
  }
  return out;
}

// Summed log-probability of `ids` (an EOS is appended) under the decoder.
inline double decoder_log_prob(const Model& m, const TableContext& ctx, const Vector& z, std::vector<int> ids) {
  ids.push_back(Vocabulary::kEos);
  const StepScorer<DecoderValue> s = generator_scorer(m, ctx);
  DecoderValue st = initial_state(m, z, ctx.content);
  double lp = 0.0;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    lp += s.log_probs(st)(0, ids[t]);
    if (t + 1 < ids.size()) st = advance_decoder(m.generator.decoder, st, {ids[t]});
  }
  return lp;
}

// Latent for output `sample` of table `table_index`.
inline Vector draw_latent(const DecodeSpec& spec, int z_dim, std::uint64_t table_index, int sample) {
  if (!spec.sample_latent) return Vector::Zero(z_dim);
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(table_index), static_cast<std::uint32_t>(table_index >> 32),
                    static_cast<std::uint32_t>(sample), 0x7a11u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> n(0.0, 1.0);
  Vector z(z_dim);
  for (int i = 0; i < z_dim; ++i) z(i) = n(rng);
  return z;
}

inline std::mt19937_64 token_rng(const DecodeSpec& spec, std::uint64_t table_index, int sample) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(table_index), static_cast<std::uint32_t>(table_index >> 32),
                    static_cast<std::uint32_t>(sample), 0x70c3u};
  return std::mt19937_64(seq);
}

// n outputs (token ids, EOS stripped) for one table. Beam-sweep output i uses
// width i + 1.
inline std::vector<std::vector<int>> generate_ids(const Model& m, const EncodedTable& table, const DecodeSpec& spec,
                                                  std::uint64_t table_index = 0) {
  validate(spec);
  const TableContext ctx = table_context(m, table);
  std::vector<std::vector<int>> out;
  for (int i = 0; i < spec.n; ++i) {
    const Vector z = draw_latent(spec, m.dims().z_dim, table_index, i);
    switch (spec.strategy) {
      case Strategy::greedy: out.push_back(greedy_decode(m, ctx, z, spec.max_length)); break;
      case Strategy::beam: out.push_back(beam_decode(m, ctx, z, spec.beam_width, spec.max_length)); break;
      case Strategy::beam_sweep: out.push_back(beam_decode(m, ctx, z, i + 1, spec.max_length)); break;
      case Strategy::temperature: {
        std::mt19937_64 rng = token_rng(spec, table_index, i);
        out.push_back(temperature_decode(m, ctx, z, spec.temperature, spec.max_length, rng));
        break;
      }
    }
  }
  return out;
}

inline std::vector<Tokens> generate(const Model& m, const Vocabulary& words, const Vocabulary& fields,
                                    const Table& table, const DecodeSpec& spec, std::uint64_t table_index = 0) {
  if (table.records.empty()) throw Error("cannot generate from an empty table");
  const EncodedTable enc = encode_table(table, words, fields);
  std::vector<Tokens> out;
  for (const auto& ids : generate_ids(m, enc, spec, table_index)) out.push_back(words.decode(ids));
  return out;
}

}  // namespace vtm
