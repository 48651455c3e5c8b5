// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>

#include "vtm/autodiff.hpp"
#include "vtm/params.hpp"

namespace vtm {

// Gate layout is [input, forget, candidate, output]; weights are stored
// input x (4 * hidden).
struct LstmParams {
  ad::Parameter* wx = nullptr;
  ad::Parameter* wh = nullptr;
  ad::Parameter* b = nullptr;
  int hidden = 0;
};

inline LstmParams make_lstm(ParameterStore& store, ParamGroup group, const std::string& prefix, int input, int hidden,
                            std::mt19937_64& rng) {
  LstmParams p;
  p.hidden = hidden;
  p.wx = &store.add(group, prefix + ".wx", input, 4 * hidden);
  p.wh = &store.add(group, prefix + ".wh", hidden, 4 * hidden);
  p.b = &store.add(group, prefix + ".b", 1, 4 * hidden);
  init_fan_in(*p.wx, rng);
  init_fan_in(*p.wh, rng);
  p.b->value.middleCols(hidden, hidden).setOnes();  // forget-gate bias
  return p;
}

struct LstmState {
  ad::Var h;
  ad::Var c;
};

// One step given the precomputed input contribution x W_x (+ bias).
inline LstmState lstm_step(ad::Graph& g, const LstmParams& p, ad::Var input_gates, const LstmState& prev) {
  ad::Var gates = ad::add(input_gates, ad::matmul(prev.h, g.param(*p.wh)));
  ad::Var c = ad::lstm_cell(gates, prev.c);
  return {ad::lstm_hidden(gates, c), c};
}

struct LstmValue {
  Matrix h;
  Matrix c;
};

inline LstmValue lstm_step_value(const LstmParams& p, const Matrix& input_gates, const LstmValue& prev) {
  const Eigen::Index n = p.hidden;
  Matrix gates = input_gates + prev.h * p.wh->value;
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  Matrix i = gates.middleCols(0, n).unaryExpr(sig);
  Matrix f = gates.middleCols(n, n).unaryExpr(sig);
  Matrix cand = gates.middleCols(2 * n, n).array().tanh().matrix();
  Matrix o = gates.middleCols(3 * n, n).unaryExpr(sig);
  LstmValue next;
  next.c = f.cwiseProduct(prev.c) + i.cwiseProduct(cand);
  next.h = o.cwiseProduct(next.c.array().tanh().matrix());
  return next;
}

}  // namespace vtm
