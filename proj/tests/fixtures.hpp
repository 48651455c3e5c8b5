// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <vector>

#include "vtm/model.hpp"
#include "vtm/objectives.hpp"

namespace vtm::testing {

// Vocabulary of 11 word ids (5 reserved + 6 words) and 3 fields.
inline ModelDims tiny_model_dims() {
  ModelDims d;
  d.word_vocab = 11;
  d.field_vocab = Vocabulary::kReserved + 3;
  d.word_dim = 4;
  d.hidden = 5;
  d.table_hidden = 6;
  d.z_dim = 4;
  d.c_dim = 5;
  d.max_position = 3;
  return d;
}

inline std::vector<PairedExample> tiny_paired() {
  const int e = Vocabulary::kEos, t = Vocabulary::kEnt;
  std::vector<PairedExample> out;
  out.push_back({EncodedTable{{5, 6}, {1, 1}, {5, 6}}, {5, 7, 6, e}, {t, 7, t, e}});
  out.push_back({EncodedTable{{5, 7, 7}, {1, 1, 2}, {8, 9, 10}}, {9, 10, 7, 8, 7, e}, {t, t, 7, t, 7, e}});
  out.push_back({EncodedTable{{6}, {1}, {7}}, {7, 8, e}, {t, 8, e}});
  return out;
}

inline std::vector<RawExample> tiny_raw() {
  const int e = Vocabulary::kEos;
  return {{{8, 9, 5, e}}, {{10, 6, e}}, {{7, 7, 9, 9, e}}};
}

inline PairedBatch tiny_paired_batch(std::vector<std::size_t> idx = {0, 1}) {
  static const std::vector<PairedExample> ex = tiny_paired();
  return make_paired_batch(ex, std::move(idx));
}

inline RawBatch tiny_raw_batch(std::vector<std::size_t> idx = {0, 2}) {
  static const std::vector<RawExample> ex = tiny_raw();
  return make_raw_batch(ex, std::move(idx));
}

}  // namespace vtm::testing
