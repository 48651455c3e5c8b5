// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vtm/autodiff.hpp"
#include "vtm/errors.hpp"

namespace vtm {

using ad::Matrix;
using ad::Vector;

// Parameter groups follow the update lists of the three training phases.
enum class ParamGroup { table_encoder, inference, generator, template_generator };

inline constexpr std::array kAllGroups = {ParamGroup::table_encoder, ParamGroup::inference, ParamGroup::generator,
                                          ParamGroup::template_generator};

inline std::string_view group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::table_encoder: return "table_encoder";
    case ParamGroup::inference: return "inference";
    case ParamGroup::generator: return "generator";
    case ParamGroup::template_generator: return "template_generator";
  }
  return "unknown";
}

// Owns every trainable matrix. Addresses are stable for the store's lifetime.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  ad::Parameter& add(ParamGroup group, std::string name, Eigen::Index rows, Eigen::Index cols) {
    for (const Entry& e : entries_) {
      if (e.param.name == name) throw std::logic_error("duplicate parameter name " + name);
    }
    entries_.push_back(Entry{group, ad::Parameter{std::move(name), Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)}});
    return entries_.back().param;
  }

  [[nodiscard]] std::vector<ad::Parameter*> members(ParamGroup group) {
    std::vector<ad::Parameter*> out;
    for (Entry& e : entries_) {
      if (e.group == group) out.push_back(&e.param);
    }
    return out;
  }

  [[nodiscard]] std::vector<ad::Parameter*> members(std::span<const ParamGroup> groups) {
    std::vector<ad::Parameter*> out;
    for (Entry& e : entries_) {
      if (std::find(groups.begin(), groups.end(), e.group) != groups.end()) out.push_back(&e.param);
    }
    return out;
  }

  [[nodiscard]] std::vector<ad::Parameter*> all() {
    std::vector<ad::Parameter*> out;
    for (Entry& e : entries_) out.push_back(&e.param);
    return out;
  }

  [[nodiscard]] std::vector<const ad::Parameter*> all() const {
    std::vector<const ad::Parameter*> out;
    for (const Entry& e : entries_) out.push_back(&e.param);
    return out;
  }

  [[nodiscard]] ad::Parameter* find(std::string_view name) {
    for (Entry& e : entries_) {
      if (e.param.name == name) return &e.param;
    }
    return nullptr;
  }

  [[nodiscard]] ParamGroup group_of(const ad::Parameter& p) const {
    for (const Entry& e : entries_) {
      if (&e.param == &p) return e.group;
    }
    throw std::logic_error("parameter not owned by this store");
  }

  [[nodiscard]] std::size_t size() const { return entries_.size(); }

  [[nodiscard]] long scalar_count() const {
    long n = 0;
    for (const Entry& e : entries_) n += static_cast<long>(e.param.value.size());
    return n;
  }

  void zero_grad() {
    for (Entry& e : entries_) e.param.zero_grad();
  }

  [[nodiscard]] std::vector<Matrix> snapshot() const {
    std::vector<Matrix> out;
    for (const Entry& e : entries_) out.push_back(e.param.value);
    return out;
  }

  void restore(const std::vector<Matrix>& values) {
    if (values.size() != entries_.size()) throw std::logic_error("snapshot size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) entries_[i].param.value = values[i];
  }

 private:
  struct Entry {
    ParamGroup group;
    ad::Parameter param;
  };
  std::deque<Entry> entries_;
};

// Half-width of the uniform init used for every embedding table.
inline constexpr double kEmbeddingInit = 0.1;

inline void init_uniform(ad::Parameter& p, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) p.value(i, j) = dist(rng);
  }
}

// Weights are stored input x output, so fan-in is the row count.
inline void init_fan_in(ad::Parameter& p, std::mt19937_64& rng) {
  init_uniform(p, 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(1, p.value.rows()))), rng);
}

inline double grad_norm(std::span<ad::Parameter* const> params) {
  double sq = 0.0;
  for (const ad::Parameter* p : params) {
    if (p->grad.size() != 0) sq += p->grad.squaredNorm();
  }
  return std::sqrt(sq);
}

// Rescales gradients so their joint L2 norm is at most max_norm; returns the
// norm before clipping.
inline double clip_grad_norm(std::span<ad::Parameter* const> params, double max_norm) {
  const double norm = grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (ad::Parameter* p : params) {
      if (p->grad.size() != 0) p->grad *= s;
    }
  }
  return norm;
}

class Adam {
 public:
  struct State {
    Matrix m;
    Matrix v;
    long step = 0;
  };

  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  }

  void step(std::span<ad::Parameter* const> params) {
    for (ad::Parameter* p : params) {
      State& s = state_[p->name];
      if (s.m.size() == 0) {
        s.m.setZero(p->value.rows(), p->value.cols());
        s.v.setZero(p->value.rows(), p->value.cols());
      }
      if (p->grad.size() == 0) p->zero_grad();
      ++s.step;
      s.m = beta1_ * s.m + (1.0 - beta1_) * p->grad;
      s.v = beta2_ * s.v + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
      const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(s.step));
      const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(s.step));
      p->value.array() -= lr_ * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps_);
    }
  }

  [[nodiscard]] double learning_rate() const { return lr_; }
  [[nodiscard]] const std::map<std::string, State>& state() const { return state_; }
  std::map<std::string, State>& state() { return state_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::map<std::string, State> state_;
};

}  // namespace vtm
