// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

// Table encoder: each (field, position, value) record is embedded, projected
// through tanh(W [e_f; e_p; e_v] + b), and the table vector is the
// elementwise max over its records. A learned linear map takes the table
// vector to the content-latent width.

#pragma once

#include <algorithm>
#include <random>
#include <span>
#include <vector>

#include "vtm/autodiff.hpp"
#include "vtm/corpus.hpp"
#include "vtm/params.hpp"

namespace vtm {

inline constexpr int kDefaultMaxPosition = 30;

struct TableEncoderParams {
  ad::Parameter* field_embedding = nullptr;     // fields x d
  ad::Parameter* position_embedding = nullptr;  // max_position x d
  ad::Parameter* value_embedding = nullptr;     // words x d
  ad::Parameter* weight = nullptr;              // 3d x d_t
  ad::Parameter* bias = nullptr;                // 1 x d_t
  ad::Parameter* projection = nullptr;          // d_t x d_c
  ad::Parameter* projection_bias = nullptr;     // 1 x d_c
  int max_position = kDefaultMaxPosition;
};

inline TableEncoderParams make_table_encoder(ParameterStore& store, int field_vocab, int word_vocab, int dim,
                                             int hidden, int content_dim, int max_position, std::mt19937_64& rng) {
  constexpr auto g = ParamGroup::table_encoder;
  TableEncoderParams p;
  p.max_position = max_position;
  p.field_embedding = &store.add(g, "table.field_embedding", field_vocab, dim);
  p.position_embedding = &store.add(g, "table.position_embedding", max_position, dim);
  p.value_embedding = &store.add(g, "table.value_embedding", word_vocab, dim);
  p.weight = &store.add(g, "table.weight", 3 * dim, hidden);
  p.bias = &store.add(g, "table.bias", 1, hidden);
  p.projection = &store.add(g, "table.projection", hidden, content_dim);
  p.projection_bias = &store.add(g, "table.projection_bias", 1, content_dim);
  init_uniform(*p.field_embedding, kEmbeddingInit, rng);
  init_uniform(*p.position_embedding, kEmbeddingInit, rng);
  init_uniform(*p.value_embedding, kEmbeddingInit, rng);
  init_fan_in(*p.weight, rng);
  init_fan_in(*p.projection, rng);
  return p;
}

struct EncodedTables {
  ad::Var records;  // (tables * slots) x d_t
  ad::Var pooled;   // tables x d_t, the table vector h
  ad::Var content;  // tables x d_c, h mapped to the content-latent width
  ad::RecordLayout layout;
};

inline ad::RecordLayout record_layout(const TableBatch& tables) { return ad::RecordLayout{tables.slots, tables.counts}; }

// Record vectors for every slot (padding slots included; they are masked
// downstream by the layout).
inline ad::Var encode_records(ad::Graph& g, const TableEncoderParams& p, const TableBatch& tables) {
  std::vector<int> pos(tables.positions.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = std::clamp(tables.positions[i], 1, p.max_position) - 1;
  ad::Var e = ad::concat_cols({ad::embedding(g.param(*p.field_embedding), tables.fields),
                               ad::embedding(g.param(*p.position_embedding), std::move(pos)),
                               ad::embedding(g.param(*p.value_embedding), tables.values)});
  return ad::tanh(ad::add_bias(ad::matmul(e, g.param(*p.weight)), g.param(*p.bias)));
}

inline ad::Var project_content(ad::Graph& g, const TableEncoderParams& p, ad::Var pooled) {
  return ad::add_bias(ad::matmul(pooled, g.param(*p.projection)), g.param(*p.projection_bias));
}

inline EncodedTables encode_tables(ad::Graph& g, const TableEncoderParams& p, const TableBatch& tables) {
  EncodedTables out;
  out.layout = record_layout(tables);
  out.records = encode_records(g, p, tables);
  out.pooled = ad::max_pool_records(out.records, out.layout);
  out.content = project_content(g, p, out.pooled);
  return out;
}

// h_i for one record, accumulated in a fixed order so the value does not
// depend on which other records share a batch.
inline Vector encode_record(const TableEncoderParams& p, int field, int position, int value) {
  const Eigen::Index d = p.field_embedding->value.cols();
  Vector x(3 * d);
  x << p.field_embedding->value.row(field).transpose(),
      p.position_embedding->value.row(std::clamp(position, 1, p.max_position) - 1).transpose(),
      p.value_embedding->value.row(value).transpose();
  const Matrix& w = p.weight->value;
  Vector out(w.cols());
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    double s = p.bias->value(0, j);
    for (Eigen::Index i = 0; i < x.size(); ++i) s += x(i) * w(i, j);
    out(j) = std::tanh(s);
  }
  return out;
}

// h = elementwise max of the record vectors.
inline Vector encode_table(const TableEncoderParams& p, const EncodedTable& table) {
  if (table.size() == 0) throw Error("cannot encode an empty table");
  Vector h = encode_record(p, table.fields[0], table.positions[0], table.values[0]);
  for (int i = 1; i < table.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    h = h.cwiseMax(encode_record(p, table.fields[k], table.positions[k], table.values[k]));
  }
  return h;
}

// Projected table vector: the content latent pinned by a paired table.
inline Vector table_content(const TableEncoderParams& p, const EncodedTable& table) {
  const Vector h = encode_table(p, table);
  const Matrix& w = p.projection->value;
  Vector out(w.cols());
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    double s = p.projection_bias->value(0, j);
    for (Eigen::Index i = 0; i < h.size(); ++i) s += h(i) * w(i, j);
    out(j) = s;
  }
  return out;
}

}  // namespace vtm
