// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vtm/autodiff.hpp"
#include "vtm/corpus.hpp"
#include "vtm/generator.hpp"
#include "vtm/inference.hpp"
#include "vtm/params.hpp"
#include "vtm/table_encoder.hpp"

namespace vtm {

struct ModelDims {
  int word_vocab = 0;
  int field_vocab = 0;
  int word_dim = 300;      // word, field, position and value embeddings
  int hidden = 300;        // every recurrent hidden size
  int table_hidden = 300;  // d_t
  int z_dim = 64;
  int c_dim = 100;
  int max_position = kDefaultMaxPosition;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

inline void validate(const ModelDims& d) {
  if (d.word_vocab <= Vocabulary::kReserved - 1 || d.field_vocab < 1) throw ConfigError("vocabulary sizes unset");
  if (d.word_dim < 1 || d.hidden < 1 || d.table_hidden < 1 || d.z_dim < 1 || d.c_dim < 1 || d.max_position < 1) {
    throw ConfigError("model dimensions must be >= 1");
  }
}

// All trainable state. Parameters are created in a fixed order from one
// seeded stream, so the same dims and seed give the same initial model.
class Model {
 public:
  Model(const ModelDims& dims, std::uint64_t seed) : dims_(dims) {
    validate(dims);
    std::mt19937_64 rng(seed);
    table = make_table_encoder(store, dims.field_vocab, dims.word_vocab, dims.word_dim, dims.table_hidden, dims.c_dim,
                               dims.max_position, rng);
    word_embedding = &store.add(ParamGroup::generator, "generator.word_embedding", dims.word_vocab, dims.word_dim);
    init_uniform(*word_embedding, kEmbeddingInit, rng);
    inference = make_inference(store, dims.word_dim, dims.hidden, dims.z_dim, dims.c_dim, rng);
    generator = make_generator(store, word_embedding, dims.z_dim, dims.c_dim, dims.hidden, dims.table_hidden, rng);
    templates = make_template_generator(store, dims.word_vocab, dims.word_dim, dims.z_dim, dims.hidden, rng);
  }
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  [[nodiscard]] const ModelDims& dims() const { return dims_; }

  // Posterior q(z|y), q(c|y) of one encoded sentence.
  [[nodiscard]] std::pair<DiagonalGaussian, DiagonalGaussian> posterior(const std::vector<int>& sentence) const {
    if (sentence.empty()) throw std::invalid_argument("posterior: empty sentence");
    ad::Graph g(false);
    TokenMatrix m = pad_sequences(std::span<const std::vector<int>>(&sentence, 1));
    Posterior q = infer(g, inference, g.param(std::as_const(*word_embedding)), m);
    return {row_gaussian(q.mean_z, q.logvar_z, 0), row_gaussian(q.mean_c, q.logvar_c, 0)};
  }

  // Projected table encoding: the content latent of a paired example.
  [[nodiscard]] Vector content(const EncodedTable& t) const { return table_content(table, t); }

  // log p(y | z, c, x); pass no table for the raw (attention-free) mode.
  [[nodiscard]] double sequence_log_prob(const std::vector<int>& y, const Vector& z, const Vector& c,
                                         const EncodedTable* t) const {
    ad::Graph g(false);
    TokenMatrix m = pad_sequences(std::span<const std::vector<int>>(&y, 1));
    std::optional<RecordMemory> memory;
    if (t != nullptr) {
      const EncodedTable* ptr = t;
      EncodedTables enc = encode_tables(g, table, batch_tables(std::span<const EncodedTable* const>(&ptr, 1)));
      memory = RecordMemory{enc.records, enc.layout};
    }
    ad::Var nll = generator_nll(g, generator, g.constant(z.transpose()), g.constant(c.transpose()), m, memory);
    return -nll.scalar();
  }

  // log p(y~ | z) under the template generator.
  [[nodiscard]] double template_log_prob(const std::vector<int>& tmpl, const Vector& z) const {
    ad::Graph g(false);
    TokenMatrix m = pad_sequences(std::span<const std::vector<int>>(&tmpl, 1));
    return -template_nll(g, templates, g.constant(z.transpose()), m).scalar();
  }

  ParameterStore store;
  TableEncoderParams table;
  ad::Parameter* word_embedding = nullptr;
  InferenceParams inference;
  GeneratorParams generator;
  TemplateGeneratorParams templates;

 private:
  ModelDims dims_;
};

}  // namespace vtm
