// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

// Training losses. Reduction is the mean over the batch of per-example values
// that are summed over time steps.

#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vtm/autodiff.hpp"
#include "vtm/corpus.hpp"
#include "vtm/errors.hpp"
#include "vtm/inference.hpp"
#include "vtm/model.hpp"

namespace vtm {

enum class Mode { vtm, vtm_noraw, vtm_noraw_nomi, vtm_noraw_nomi_nopt, vtm_nopc, table2seq };

inline constexpr std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::vtm: return "vtm";
    case Mode::vtm_noraw: return "vtm-noraw";
    case Mode::vtm_noraw_nomi: return "vtm-noraw-noMI";
    case Mode::vtm_noraw_nomi_nopt: return "vtm-noraw-noMI-noPT";
    case Mode::vtm_nopc: return "vtm-noPC";
    case Mode::table2seq: return "table2seq";
  }
  return "?";
}

inline Mode parse_mode(std::string_view s) {
  for (Mode m : {Mode::vtm, Mode::vtm_noraw, Mode::vtm_noraw_nomi, Mode::vtm_noraw_nomi_nopt, Mode::vtm_nopc,
                 Mode::table2seq}) {
    if (s == mode_name(m)) return m;
  }
  throw ConfigError("unknown mode '" + std::string(s) + "'");
}

// Which loss terms a mode keeps.
struct ModeTerms {
  bool latent = true;
  bool raw = true;
  bool mi = true;
  bool pt = true;
  bool pc = true;
};

inline ModeTerms terms_of(Mode m) {
  switch (m) {
    case Mode::vtm: return {};
    case Mode::vtm_noraw: return {true, false, true, true, true};
    case Mode::vtm_noraw_nomi: return {true, false, false, true, true};
    case Mode::vtm_noraw_nomi_nopt: return {true, false, false, false, true};
    case Mode::vtm_nopc: return {true, true, true, true, false};
    case Mode::table2seq: return {false, false, false, false, false};
  }
  return {};
}

struct Lambdas {
  double mi = 1.0;
  double pt = 1.0;
  double pc = 1.0;

  friend bool operator==(const Lambdas&, const Lambdas&) = default;
};

// Per-batch scalars. Disabled terms are 0; lambda fields hold the weights
// actually applied, so total == elbo_p + elbo_r + mi*(l_mi_p + l_mi_r) +
// pt*l_pt + pc*l_pc. During KL warm-up the elbo fields carry the scaled KL.
struct LossBreakdown {
  double elbo_p = 0, elbo_r = 0;
  double rec_p = 0, rec_r = 0;
  double kl_z_p = 0, kl_z_r = 0, kl_c_r = 0;
  double l_pt = 0, l_pc = 0;
  double l_mi_p = 0, l_mi_r = 0;  // -I(z,y) - I(c,y) per data kind
  double l_mi_z = 0, l_mi_c = 0;  // the same split by latent
  double total = 0;
  Lambdas lambda{0, 0, 0};

  [[nodiscard]] double recomposed() const {
    return elbo_p + elbo_r + lambda.mi * (l_mi_p + l_mi_r) + lambda.pt * l_pt + lambda.pc * l_pc;
  }

  [[nodiscard]] bool finite() const {
    for (double v : {elbo_p, elbo_r, rec_p, rec_r, kl_z_p, kl_z_r, kl_c_r, l_pt, l_pc, l_mi_p, l_mi_r, total}) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  static constexpr std::string_view csv_header =
      "elbo_p,elbo_r,rec_p,rec_r,kl_z_p,kl_z_r,kl_c_r,l_pt,l_pc,l_mi_z,l_mi_c,total";

  [[nodiscard]] std::string csv_row() const;
  [[nodiscard]] std::string describe() const;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string LossBreakdown::csv_row() const {
  std::string out;
  for (double v : {elbo_p, elbo_r, rec_p, rec_r, kl_z_p, kl_z_r, kl_c_r, l_pt, l_pc, l_mi_z, l_mi_c, total}) {
    if (!out.empty()) out += ',';
    out += format_double(v);
  }
  return out;
}

inline std::string LossBreakdown::describe() const {
  std::string out;
  std::string_view names = csv_header;
  std::size_t i = 0;
  for (double v : {elbo_p, elbo_r, rec_p, rec_r, kl_z_p, kl_z_r, kl_c_r, l_pt, l_pc, l_mi_z, l_mi_c, total}) {
    const std::size_t j = names.find(',', i);
    out += std::string(names.substr(i, j == std::string_view::npos ? std::string_view::npos : j - i)) + "=" +
           format_double(v) + " ";
    i = j + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph-level building blocks.

// Minibatch mixture estimate of I(v, y):
// mean_i [log q(v_i|y_i) - log (1/B) sum_j q(v_i|y_j)].
inline ad::Var mutual_information(ad::Var samples, ad::Var mean, ad::Var logvar) {
  const Eigen::Index B = samples.rows();
  if (B < 2) throw std::invalid_argument("mutual information estimate needs a batch of at least 2");
  ad::Var L = ad::gaussian_log_density_matrix(samples, mean, logvar);
  ad::Var per = ad::sub(ad::diagonal(L), ad::logsumexp_rows(L));
  return ad::add(ad::mean(per), samples.graph().constant(Matrix::Constant(1, 1, std::log(static_cast<double>(B)))));
}

// Per-example ||mu - h||^2 + tr(Sigma) + KL(q || N(0, I)), all in closed form.
inline ad::Var preserving_content_rows(ad::Var mean, ad::Var logvar, ad::Var target) {
  ad::Var dist = ad::row_sum(ad::square(ad::sub(mean, target)));
  ad::Var trace = ad::row_sum(ad::exp(logvar));
  return ad::add(ad::add(dist, trace), ad::kl_standard_normal_rows(mean, logvar));
}

// Closed-form E_q ||c - h||^2.
inline double expected_squared_distance(const DiagonalGaussian& q, const Vector& h) {
  check_gaussian(q);
  return (q.mean - h).squaredNorm() + q.variance().sum();
}

inline double preserving_content_value(const DiagonalGaussian& q, const Vector& h) {
  return expected_squared_distance(q, h) + kl_to_standard_normal(q);
}

// Value-level mixture estimate with the same definition as the graph form.
inline double mutual_information_value(const Matrix& samples, const Matrix& mean, const Matrix& logvar) {
  ad::Graph g(false);
  return mutual_information(g.constant(samples), g.constant(mean), g.constant(logvar)).scalar();
}

// ---------------------------------------------------------------------------
// Noise.

struct LatentNoise {
  Matrix z;  // B x d_z
  Matrix c;  // B x d_c
};

inline LatentNoise draw_noise(int batch, const ModelDims& d, std::mt19937_64& rng) {
  LatentNoise n;
  n.z = standard_normal(batch, d.z_dim, rng);
  n.c = standard_normal(batch, d.c_dim, rng);
  return n;
}

// ---------------------------------------------------------------------------
// Composition.

struct LossSpec {
  Mode mode = Mode::vtm;
  Lambdas lambda;
  double kl_weight = 1.0;  // < 1 only during an optional KL warm-up
};

struct LossResult {
  ad::Var total;
  LossBreakdown terms;
};

namespace detail {

inline ad::Var batch_mean(ad::Var rows) { return ad::mean(rows); }

inline ad::Var zeros(ad::Graph& g, Eigen::Index r, Eigen::Index c) { return g.constant(Matrix::Zero(r, c)); }

}  // namespace detail

// Paired-data terms; returns the weighted sum and fills `out`.
inline ad::Var paired_loss(ad::Graph& g, const Model& m, const PairedBatch& batch, const LatentNoise& noise,
                           const LossSpec& spec, LossBreakdown& out) {
  const ModeTerms terms = terms_of(spec.mode);
  const int B = batch.size();
  EncodedTables enc = encode_tables(g, m.table, batch.tables);
  RecordMemory memory{enc.records, enc.layout};
  if (!terms.latent) {
    ad::Var z = detail::zeros(g, B, m.dims().z_dim);
    ad::Var rec = detail::batch_mean(generator_nll(g, m.generator, z, enc.content, batch.sentences, memory));
    out.rec_p = out.elbo_p = rec.scalar();
    return rec;
  }
  ad::Var word = g.param(*m.word_embedding);
  Posterior q = infer(g, m.inference, word, batch.sentences);
  ad::Var z = reparameterize(q.mean_z, q.logvar_z, noise.z);
  ad::Var rec = detail::batch_mean(generator_nll(g, m.generator, z, enc.content, batch.sentences, memory));
  ad::Var kl_z = detail::batch_mean(ad::kl_standard_normal_rows(q.mean_z, q.logvar_z));
  ad::Var loss = ad::add(rec, ad::scale(kl_z, spec.kl_weight));
  out.rec_p = rec.scalar();
  out.kl_z_p = kl_z.scalar();
  out.elbo_p = loss.scalar();
  if (terms.mi && B >= 2) {
    ad::Var c = reparameterize(q.mean_c, q.logvar_c, noise.c);
    ad::Var iz = mutual_information(z, q.mean_z, q.logvar_z);
    ad::Var ic = mutual_information(c, q.mean_c, q.logvar_c);
    ad::Var mi = ad::scale(ad::add(iz, ic), -1.0);
    out.l_mi_p = mi.scalar();
    out.l_mi_z -= iz.scalar();
    out.l_mi_c -= ic.scalar();
    out.lambda.mi = spec.lambda.mi;
    loss = ad::add(loss, ad::scale(mi, spec.lambda.mi));
  }
  if (terms.pt) {
    ad::Var pt = detail::batch_mean(template_nll(g, m.templates, z, batch.templates));
    out.l_pt = pt.scalar();
    out.lambda.pt = spec.lambda.pt;
    loss = ad::add(loss, ad::scale(pt, spec.lambda.pt));
  }
  if (terms.pc) {
    ad::Var pc = detail::batch_mean(preserving_content_rows(q.mean_c, q.logvar_c, enc.content));
    out.l_pc = pc.scalar();
    out.lambda.pc = spec.lambda.pc;
    loss = ad::add(loss, ad::scale(pc, spec.lambda.pc));
  }
  return loss;
}

// Raw-data terms: both latents inferred, decoding without attention.
inline ad::Var raw_loss(ad::Graph& g, const Model& m, const RawBatch& batch, const LatentNoise& noise,
                        const LossSpec& spec, LossBreakdown& out) {
  const ModeTerms terms = terms_of(spec.mode);
  if (!terms.raw) throw std::logic_error("raw loss requested in a paired-only mode");
  const int B = batch.size();
  Posterior q = infer(g, m.inference, g.param(*m.word_embedding), batch.sentences);
  ad::Var z = reparameterize(q.mean_z, q.logvar_z, noise.z);
  ad::Var c = reparameterize(q.mean_c, q.logvar_c, noise.c);
  ad::Var rec = detail::batch_mean(generator_nll(g, m.generator, z, c, batch.sentences, std::nullopt));
  ad::Var kl_z = detail::batch_mean(ad::kl_standard_normal_rows(q.mean_z, q.logvar_z));
  ad::Var kl_c = detail::batch_mean(ad::kl_standard_normal_rows(q.mean_c, q.logvar_c));
  ad::Var loss = ad::add(rec, ad::scale(ad::add(kl_z, kl_c), spec.kl_weight));
  out.rec_r = rec.scalar();
  out.kl_z_r = kl_z.scalar();
  out.kl_c_r = kl_c.scalar();
  out.elbo_r = loss.scalar();
  if (terms.mi && B >= 2) {
    ad::Var iz = mutual_information(z, q.mean_z, q.logvar_z);
    ad::Var ic = mutual_information(c, q.mean_c, q.logvar_c);
    ad::Var mi = ad::scale(ad::add(iz, ic), -1.0);
    out.l_mi_r = mi.scalar();
    out.l_mi_z -= iz.scalar();
    out.l_mi_c -= ic.scalar();
    out.lambda.mi = spec.lambda.mi;
    loss = ad::add(loss, ad::scale(mi, spec.lambda.mi));
  }
  return loss;
}

// Loss over whichever batches are given. Noise for each batch is drawn from
// `rng` in a fixed order: paired z, paired c, raw z, raw c.
inline LossResult compute_loss(ad::Graph& g, const Model& m, const PairedBatch* paired, const RawBatch* raw,
                               const LossSpec& spec, std::mt19937_64& rng) {
  if (paired == nullptr && raw == nullptr) throw std::invalid_argument("compute_loss: no batch");
  LossResult r;
  std::optional<ad::Var> total;
  if (paired != nullptr) {
    LatentNoise n = draw_noise(paired->size(), m.dims(), rng);
    total = paired_loss(g, m, *paired, n, spec, r.terms);
  }
  if (raw != nullptr) {
    LatentNoise n = draw_noise(raw->size(), m.dims(), rng);
    ad::Var l = raw_loss(g, m, *raw, n, spec, r.terms);
    total = total ? ad::add(*total, l) : l;
  }
  r.total = *total;
  r.terms.total = r.total.scalar();
  return r;
}

// L_tot. Raw modes require a raw batch; paired-only modes ignore it.
inline LossResult total_loss(ad::Graph& g, const Model& m, const PairedBatch& paired, const RawBatch* raw,
                             const LossSpec& spec, std::mt19937_64& rng) {
  const bool use_raw = terms_of(spec.mode).raw;
  if (use_raw && raw == nullptr) throw ConfigError(std::string("mode ") + std::string(mode_name(spec.mode)) +
                                                   " needs a raw batch");
  return compute_loss(g, m, &paired, use_raw ? raw : nullptr, spec, rng);
}

}  // namespace vtm
