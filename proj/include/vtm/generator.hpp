// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

// Decoders. The sentence generator p(y | z, c, x) is an LSTM whose initial
// state is tanh(W [z; c] + b) and which also sees [z; c] at every step. In
// paired mode it attends bilinearly over the record vectors; in raw mode the
// attention context is zero. The template generator p(y~ | z) has the same
// recurrent shape, conditioned on z alone, and no attention.

#pragma once

#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "vtm/autodiff.hpp"
#include "vtm/corpus.hpp"
#include "vtm/inference.hpp"
#include "vtm/lstm.hpp"
#include "vtm/params.hpp"

namespace vtm {

// Recurrent core shared by both decoders.
struct ConditionedLstm {
  ad::Parameter* embedding = nullptr;  // vocab x e
  LstmParams lstm;
  ad::Parameter* latent_in = nullptr;  // k x 4h, latent added to every step's gates
  ad::Parameter* init = nullptr;       // k x 2h -> [h0, c0]
  ad::Parameter* init_bias = nullptr;  // 1 x 2h
  int latent_dim = 0;

  [[nodiscard]] int hidden() const { return lstm.hidden; }
};

inline ConditionedLstm make_conditioned_lstm(ParameterStore& store, ParamGroup group, const std::string& prefix,
                                             ad::Parameter* embedding, int latent_dim, int hidden,
                                             std::mt19937_64& rng) {
  ConditionedLstm d;
  d.embedding = embedding;
  d.latent_dim = latent_dim;
  d.lstm = make_lstm(store, group, prefix + ".lstm", static_cast<int>(embedding->value.cols()), hidden, rng);
  d.latent_in = &store.add(group, prefix + ".latent_in", latent_dim, 4 * hidden);
  d.init = &store.add(group, prefix + ".init", latent_dim, 2 * hidden);
  d.init_bias = &store.add(group, prefix + ".init_bias", 1, 2 * hidden);
  init_fan_in(*d.latent_in, rng);
  init_fan_in(*d.init, rng);
  return d;
}

// Teacher-forced hidden states, time-major: row t * B + b is the state that
// predicts token (b, t). Inputs are BOS followed by the shifted targets.
inline ad::Var teacher_forced_states(ad::Graph& g, const ConditionedLstm& d, ad::Var latent,
                                     const TokenMatrix& targets) {
  const int B = targets.batch;
  const int H = d.hidden();
  if (latent.rows() != B || latent.cols() != d.latent_dim) throw std::invalid_argument("decoder: latent shape");
  std::vector<int> inputs(static_cast<std::size_t>(B * targets.length));
  for (int t = 0; t < targets.length; ++t) {
    for (int b = 0; b < B; ++b) {
      inputs[static_cast<std::size_t>(t * B + b)] = t == 0 ? Vocabulary::kBos : targets.at(b, t - 1);
    }
  }
  ad::Var emb = ad::embedding(g.param(*d.embedding), std::move(inputs));
  ad::Var x = ad::add_bias(ad::matmul(emb, g.param(*d.lstm.wx)), g.param(*d.lstm.b));
  ad::Var latent_gates = ad::matmul(latent, g.param(*d.latent_in));
  ad::Var init = ad::tanh(ad::add_bias(ad::matmul(latent, g.param(*d.init)), g.param(*d.init_bias)));
  LstmState s{ad::slice_cols(init, 0, H), ad::slice_cols(init, H, H)};
  std::vector<ad::Var> hs;
  hs.reserve(static_cast<std::size_t>(targets.length));
  for (int t = 0; t < targets.length; ++t) {
    s = lstm_step(g, d.lstm, ad::add(ad::slice_rows(x, t * B, B), latent_gates), s);
    hs.push_back(s.h);
  }
  return ad::concat_rows(hs);
}

// Per-example summed NLL (B x 1) of time-major logits.
inline ad::Var sequence_nll(ad::Var logits, const TokenMatrix& targets) {
  const int B = targets.batch;
  std::vector<int> ids(static_cast<std::size_t>(B * targets.length));
  std::vector<double> w(ids.size());
  for (int t = 0; t < targets.length; ++t) {
    for (int b = 0; b < B; ++b) {
      const auto k = static_cast<std::size_t>(t * B + b);
      ids[k] = targets.at(b, t);
      w[k] = targets.valid(b, t) ? 1.0 : 0.0;
    }
  }
  return ad::fold_rows(ad::softmax_nll(logits, std::move(ids), std::move(w)), B);
}

// Value-level decoder state for step-by-step generation; rows are hypotheses.
struct DecoderValue {
  LstmValue lstm;
  Matrix latent_gates;  // rows x 4h
};

inline DecoderValue start_decoder(const ConditionedLstm& d, const Matrix& latent) {
  if (latent.cols() != d.latent_dim) throw std::invalid_argument("decoder: latent dimension mismatch");
  const Eigen::Index H = d.hidden();
  Matrix init = ((latent * d.init->value).rowwise() + d.init_bias->value.row(0)).array().tanh().matrix();
  return {LstmValue{init.leftCols(H), init.rightCols(H)}, latent * d.latent_in->value};
}

inline DecoderValue advance_decoder(const ConditionedLstm& d, const DecoderValue& s, const std::vector<int>& prev) {
  if (static_cast<Eigen::Index>(prev.size()) != s.lstm.h.rows()) throw std::invalid_argument("decoder: token count");
  Matrix x(static_cast<Eigen::Index>(prev.size()), d.lstm.wx->value.cols());
  for (std::size_t i = 0; i < prev.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = d.embedding->value.row(prev[i]) * d.lstm.wx->value + d.lstm.b->value;
  }
  return {lstm_step_value(d.lstm, x + s.latent_gates, s.lstm), s.latent_gates};
}

struct GeneratorParams {
  ConditionedLstm decoder;
  ad::Parameter* attention = nullptr;   // h x d_t, bilinear score h^T W r
  ad::Parameter* out_hidden = nullptr;  // h x vocab
  ad::Parameter* out_context = nullptr; // d_t x vocab
  ad::Parameter* out_bias = nullptr;    // 1 x vocab
};

inline GeneratorParams make_generator(ParameterStore& store, ad::Parameter* word_embedding, int z_dim, int c_dim,
                                      int hidden, int table_hidden, std::mt19937_64& rng) {
  constexpr auto grp = ParamGroup::generator;
  const auto vocab = word_embedding->value.rows();
  GeneratorParams p;
  p.decoder = make_conditioned_lstm(store, grp, "generator", word_embedding, z_dim + c_dim, hidden, rng);
  p.attention = &store.add(grp, "generator.attention", hidden, table_hidden);
  p.out_hidden = &store.add(grp, "generator.out_hidden", hidden, vocab);
  p.out_context = &store.add(grp, "generator.out_context", table_hidden, vocab);
  p.out_bias = &store.add(grp, "generator.out_bias", 1, vocab);
  init_fan_in(*p.attention, rng);
  init_fan_in(*p.out_hidden, rng);
  init_fan_in(*p.out_context, rng);
  return p;
}

// Bilinear scores are divided by sqrt(d_t) to keep early attention soft.
inline double attention_scale(const GeneratorParams& p) {
  return 1.0 / std::sqrt(static_cast<double>(p.attention->value.cols()));
}

// Attended record vectors for the paired mode.
struct RecordMemory {
  ad::Var records;
  ad::RecordLayout layout;
};

// Time-major logits ((T * B) x vocab) under teacher forcing.
inline ad::Var generator_logits(ad::Graph& g, const GeneratorParams& p, ad::Var z, ad::Var c,
                                const TokenMatrix& targets, const std::optional<RecordMemory>& memory) {
  ad::Var hs = teacher_forced_states(g, p.decoder, ad::concat_cols({z, c}), targets);
  ad::Var logits = ad::matmul(hs, g.param(*p.out_hidden));
  if (memory) {
    std::vector<int> row_table(static_cast<std::size_t>(hs.rows()));
    for (std::size_t r = 0; r < row_table.size(); ++r) row_table[r] = static_cast<int>(r) % targets.batch;
    ad::Var query = ad::scale(ad::matmul(hs, g.param(*p.attention)), attention_scale(p));
    ad::Var ctx = ad::attend(query, memory->records, memory->layout, std::move(row_table));
    logits = ad::add(logits, ad::matmul(ctx, g.param(*p.out_context)));
  }
  return ad::add_bias(logits, g.param(*p.out_bias));
}

// Per-example NLL = -log p(y | z, c, x) (B x 1).
inline ad::Var generator_nll(ad::Graph& g, const GeneratorParams& p, ad::Var z, ad::Var c, const TokenMatrix& targets,
                             const std::optional<RecordMemory>& memory) {
  return sequence_nll(generator_logits(g, p, z, c, targets, memory), targets);
}

// Attention weights of each hypothesis over one table's records (K x d_t).
inline Matrix attention_value(const GeneratorParams& p, const Matrix& hidden, const Matrix& records) {
  Matrix scores = ((hidden * p.attention->value) * attention_scale(p)) * records.transpose();
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const double m = scores.row(r).maxCoeff();
    scores.row(r) = (scores.row(r).array() - m).exp().matrix();
    scores.row(r) /= scores.row(r).sum();
  }
  return scores;
}

// Logits for the next token from each hypothesis' current state.
inline Matrix generator_step_logits(const GeneratorParams& p, const DecoderValue& s, const Matrix* records) {
  Matrix logits = s.lstm.h * p.out_hidden->value;
  if (records != nullptr) logits += attention_value(p, s.lstm.h, *records) * *records * p.out_context->value;
  logits.rowwise() += p.out_bias->value.row(0);
  return logits;
}

struct TemplateGeneratorParams {
  ConditionedLstm decoder;
  ad::Parameter* out = nullptr;       // h x vocab
  ad::Parameter* out_bias = nullptr;  // 1 x vocab
};

inline TemplateGeneratorParams make_template_generator(ParameterStore& store, int vocab, int word_dim, int z_dim,
                                                       int hidden, std::mt19937_64& rng) {
  constexpr auto grp = ParamGroup::template_generator;
  TemplateGeneratorParams p;
  ad::Parameter* emb = &store.add(grp, "template.embedding", vocab, word_dim);
  init_uniform(*emb, kEmbeddingInit, rng);
  p.decoder = make_conditioned_lstm(store, grp, "template", emb, z_dim, hidden, rng);
  p.out = &store.add(grp, "template.out", hidden, vocab);
  p.out_bias = &store.add(grp, "template.out_bias", 1, vocab);
  init_fan_in(*p.out, rng);
  return p;
}

// Per-example NLL = -log p(y~ | z) (B x 1).
inline ad::Var template_nll(ad::Graph& g, const TemplateGeneratorParams& p, ad::Var z, const TokenMatrix& templates) {
  ad::Var hs = teacher_forced_states(g, p.decoder, z, templates);
  ad::Var logits = ad::add_bias(ad::matmul(hs, g.param(*p.out)), g.param(*p.out_bias));
  return sequence_nll(logits, templates);
}

inline Matrix template_step_logits(const TemplateGeneratorParams& p, const DecoderValue& s) {
  Matrix logits = s.lstm.h * p.out->value;
  logits.rowwise() += p.out_bias->value.row(0);
  return logits;
}

}  // namespace vtm
