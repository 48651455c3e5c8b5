// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vtm/autodiff.hpp"

namespace vtm::testing {

using ad::Matrix;

// Worst per-parameter relative error between backprop and central differences:
// ||analytic - numeric|| / max(||analytic||, ||numeric||, floor).
struct GradReport {
  double worst = 0.0;
  std::string worst_name;
  double largest_norm = 0.0;
};

inline GradReport check_gradients(std::span<ad::Parameter* const> params,
                                  const std::function<ad::Var(ad::Graph&)>& loss, double step = 1e-5,
                                  double floor = 1e-7) {
  for (ad::Parameter* p : params) p->zero_grad();
  {
    ad::Graph g;
    g.backward(loss(g));
  }
  GradReport report;
  for (ad::Parameter* p : params) {
    Matrix numeric = Matrix::Zero(p->value.rows(), p->value.cols());
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double keep = p->value(i);
      p->value(i) = keep + step;
      ad::Graph gp(false);
      const double up = loss(gp).scalar();
      p->value(i) = keep - step;
      ad::Graph gm(false);
      const double down = loss(gm).scalar();
      p->value(i) = keep;
      numeric(i) = (up - down) / (2.0 * step);
    }
    const double scale = std::max({p->grad.norm(), numeric.norm(), floor});
    const double err = (p->grad - numeric).norm() / scale;
    report.largest_norm = std::max(report.largest_norm, p->grad.norm());
    if (err > report.worst) {
      report.worst = err;
      report.worst_name = p->name;
    }
  }
  return report;
}

inline ad::Parameter random_param(std::string name, Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                                  double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix v(rows, cols);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = n(rng);
  return ad::Parameter{std::move(name), v, Matrix::Zero(rows, cols)};
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix v(rows, cols);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = n(rng);
  return v;
}

}  // namespace vtm::testing
