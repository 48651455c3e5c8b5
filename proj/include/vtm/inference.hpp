// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

// Variational posteriors q(z|y) and q(c|y). A shared bidirectional LSTM reads
// the sentence; four linear heads give the means and log-variances.

#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "vtm/autodiff.hpp"
#include "vtm/corpus.hpp"
#include "vtm/lstm.hpp"
#include "vtm/params.hpp"

namespace vtm {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

struct DiagonalGaussian {
  Vector mean;
  Vector log_variance;

  [[nodiscard]] Eigen::Index dim() const { return mean.size(); }
  [[nodiscard]] Vector variance() const { return log_variance.array().exp().matrix(); }

  static DiagonalGaussian standard(Eigen::Index dim) { return {Vector::Zero(dim), Vector::Zero(dim)}; }
};

inline void check_gaussian(const DiagonalGaussian& g) {
  if (g.mean.size() != g.log_variance.size()) throw std::invalid_argument("gaussian: mean/log-variance dims differ");
}

// mu + exp(logvar / 2) * eps.
inline Vector reparameterize(const DiagonalGaussian& g, const Vector& eps) {
  check_gaussian(g);
  if (eps.size() != g.dim()) throw std::invalid_argument("reparameterize: noise dimension mismatch");
  return g.mean + ((0.5 * g.log_variance.array()).exp() * eps.array()).matrix();
}

inline double kl_to_standard_normal(const DiagonalGaussian& g) {
  check_gaussian(g);
  return 0.5 * (g.log_variance.array().exp() + g.mean.array().square() - 1.0 - g.log_variance.array()).sum();
}

inline double log_density(const DiagonalGaussian& g, const Vector& x) {
  check_gaussian(g);
  const double quad = ((x - g.mean).array().square() * (-g.log_variance.array()).exp()).sum();
  return -0.5 * (quad + g.log_variance.sum() + static_cast<double>(g.dim()) * ad::detail::kLog2Pi);
}

inline Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  }
  return m;
}

// Graph form: rows are examples.
inline ad::Var reparameterize(ad::Var mean, ad::Var log_variance, const Matrix& eps) {
  ad::Graph& g = mean.graph();
  ad::Var sd = ad::exp(ad::scale(log_variance, 0.5));
  return ad::add(mean, ad::mul(sd, g.constant(eps)));
}

struct InferenceParams {
  LstmParams forward;
  LstmParams backward;
  ad::Parameter* mean_z = nullptr;  // 2h x d_z
  ad::Parameter* mean_z_bias = nullptr;
  ad::Parameter* logvar_z = nullptr;
  ad::Parameter* logvar_z_bias = nullptr;
  ad::Parameter* mean_c = nullptr;  // 2h x d_c
  ad::Parameter* mean_c_bias = nullptr;
  ad::Parameter* logvar_c = nullptr;
  ad::Parameter* logvar_c_bias = nullptr;

  [[nodiscard]] std::vector<ad::Parameter*> heads() const {
    return {mean_z, mean_z_bias, logvar_z, logvar_z_bias, mean_c, mean_c_bias, logvar_c, logvar_c_bias};
  }
};

inline InferenceParams make_inference(ParameterStore& store, int word_dim, int hidden, int z_dim, int c_dim,
                                      std::mt19937_64& rng) {
  constexpr auto grp = ParamGroup::inference;
  InferenceParams p;
  p.forward = make_lstm(store, grp, "inference.forward", word_dim, hidden, rng);
  p.backward = make_lstm(store, grp, "inference.backward", word_dim, hidden, rng);
  auto head = [&](const char* name, int out) {
    ad::Parameter& w = store.add(grp, std::string("inference.") + name, 2 * hidden, out);
    init_fan_in(w, rng);
    return &w;
  };
  auto bias = [&](const char* name, int out) { return &store.add(grp, std::string("inference.") + name, 1, out); };
  p.mean_z = head("mean_z", z_dim);
  p.mean_z_bias = bias("mean_z_bias", z_dim);
  p.logvar_z = head("logvar_z", z_dim);
  p.logvar_z_bias = bias("logvar_z_bias", z_dim);
  p.mean_c = head("mean_c", c_dim);
  p.mean_c_bias = bias("mean_c_bias", c_dim);
  p.logvar_c = head("logvar_c", c_dim);
  p.logvar_c_bias = bias("logvar_c_bias", c_dim);
  return p;
}

// Posterior parameters for a batch; every Var has one row per sentence.
struct Posterior {
  ad::Var mean_z, logvar_z, mean_c, logvar_c;
};

// Ids in time-major order: row t * B + b holds token (b, t).
inline std::vector<int> time_major(const TokenMatrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.batch * m.length));
  for (int t = 0; t < m.length; ++t) {
    for (int b = 0; b < m.batch; ++b) out[static_cast<std::size_t>(t * m.batch + b)] = m.at(b, t);
  }
  return out;
}

inline std::vector<std::uint8_t> step_mask(const TokenMatrix& m, int t) {
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(m.batch));
  for (int b = 0; b < m.batch; ++b) keep[static_cast<std::size_t>(b)] = m.valid(b, t) ? 1 : 0;
  return keep;
}

// Masked bidirectional encoding: padded steps leave the state untouched, so
// padding never reaches the final states.
inline ad::Var encode_sentences(ad::Graph& g, const InferenceParams& p, ad::Var word_embedding,
                                const TokenMatrix& sentences) {
  if (sentences.batch == 0 || sentences.length == 0) throw std::invalid_argument("encode_sentences: empty batch");
  const int B = sentences.batch;
  const int H = p.forward.hidden;
  ad::Var emb = ad::embedding(word_embedding, time_major(sentences));
  ad::Var xf = ad::add_bias(ad::matmul(emb, g.param(*p.forward.wx)), g.param(*p.forward.b));
  ad::Var xb = ad::add_bias(ad::matmul(emb, g.param(*p.backward.wx)), g.param(*p.backward.b));
  LstmState fwd{g.constant(Matrix::Zero(B, H)), g.constant(Matrix::Zero(B, H))};
  LstmState bwd = fwd;
  for (int t = 0; t < sentences.length; ++t) {
    const auto keep = step_mask(sentences, t);
    LstmState next = lstm_step(g, p.forward, ad::slice_rows(xf, t * B, B), fwd);
    fwd = {ad::select_rows(keep, next.h, fwd.h), ad::select_rows(keep, next.c, fwd.c)};
  }
  for (int t = sentences.length - 1; t >= 0; --t) {
    const auto keep = step_mask(sentences, t);
    LstmState next = lstm_step(g, p.backward, ad::slice_rows(xb, t * B, B), bwd);
    bwd = {ad::select_rows(keep, next.h, bwd.h), ad::select_rows(keep, next.c, bwd.c)};
  }
  return ad::concat_cols({fwd.h, bwd.h});
}

inline Posterior posterior_heads(ad::Graph& g, const InferenceParams& p, ad::Var features) {
  auto lin = [&](ad::Parameter* w, ad::Parameter* b) { return ad::add_bias(ad::matmul(features, g.param(*w)), g.param(*b)); };
  Posterior q;
  q.mean_z = lin(p.mean_z, p.mean_z_bias);
  q.logvar_z = ad::clamp(lin(p.logvar_z, p.logvar_z_bias), kLogVarMin, kLogVarMax);
  q.mean_c = lin(p.mean_c, p.mean_c_bias);
  q.logvar_c = ad::clamp(lin(p.logvar_c, p.logvar_c_bias), kLogVarMin, kLogVarMax);
  return q;
}

inline Posterior infer(ad::Graph& g, const InferenceParams& p, ad::Var word_embedding, const TokenMatrix& sentences) {
  return posterior_heads(g, p, encode_sentences(g, p, word_embedding, sentences));
}

inline DiagonalGaussian row_gaussian(const ad::Var& mean, const ad::Var& logvar, Eigen::Index row) {
  return {mean.value().row(row).transpose(), logvar.value().row(row).transpose()};
}

}  // namespace vtm
