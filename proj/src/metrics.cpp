// Copyright 2026 The RDAL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "rdal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>

#include <Eigen/Dense>

namespace rdal {

namespace {

void check_binary_input(const std::vector<double>& scores,
                        const std::vector<int>& labels, std::size_t* num_pos,
                        std::size_t* num_neg) {
  if (scores.size() != labels.size()) {
    throw ShapeError("scores and labels differ in length");
  }
  if (scores.empty()) throw DegenerateInputError("empty score list");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw DegenerateInputError("non-finite score");
    }
    if (labels[i] != 0) ++pos;
  }
  if (pos == 0 || pos == labels.size()) {
    throw DegenerateInputError("scores cover only one class");
  }
  *num_pos = pos;
  *num_neg = labels.size() - pos;
}

// Quantile with linear interpolation between order statistics.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = q * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::size_t num_pos = 0;
  std::size_t num_neg = 0;
  check_binary_input(scores, labels, &num_pos, &num_neg);

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Rank sum over positives with tied ranks averaged.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0) rank_sum += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(num_pos);
  const double nn = static_cast<double>(num_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
  std::size_t num_pos = 0;
  std::size_t num_neg = 0;
  check_binary_input(scores, labels, &num_pos, &num_neg);

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  std::vector<RocPoint> curve;
  curve.push_back({0.0, 0.0});
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0) {
        ++tp;
      } else {
        ++fp;
      }
    }
    curve.push_back({static_cast<double>(fp) / static_cast<double>(num_neg),
                     static_cast<double>(tp) / static_cast<double>(num_pos)});
    i = j;
  }
  return curve;
}

double roc_area(const std::vector<RocPoint>& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) *
            (curve[i].tpr + curve[i - 1].tpr) * 0.5;
  }
  return area;
}

DensityCurve kde_density(const std::vector<double>& values) {
  if (values.empty()) throw DegenerateInputError("empty sample for density");
  for (double v : values) {
    if (!std::isfinite(v)) throw DegenerateInputError("non-finite sample");
  }
  const std::size_t n = values.size();

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const double mean = mean_of(sorted);
  double ss = 0.0;
  for (double v : sorted) ss += (v - mean) * (v - mean);
  const double sd =
      n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  const double iqr =
      quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  const double spread = std::min(sd, iqr / 1.34);
  const double h = std::max(
      1e-3, 0.9 * spread * std::pow(static_cast<double>(n), -0.2));

  DensityCurve curve;
  curve.x.resize(kDensityGridSize);
  curve.f.resize(kDensityGridSize);
  const double inv_norm =
      1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * M_PI));
  for (int g = 0; g < kDensityGridSize; ++g) {
    const double x =
        static_cast<double>(g) / static_cast<double>(kDensityGridSize - 1);
    double acc = 0.0;
    for (double v : sorted) {
      // Reflection at both boundaries keeps the mass inside [0, 1].
      const double d0 = (x - v) / h;
      const double d1 = (x + v) / h;
      const double d2 = (x - (2.0 - v)) / h;
      acc += std::exp(-0.5 * d0 * d0) + std::exp(-0.5 * d1 * d1) +
             std::exp(-0.5 * d2 * d2);
    }
    curve.x[g] = x;
    curve.f[g] = acc * inv_norm;
  }
  return curve;
}

double density_overlap(const DensityCurve& a, const DensityCurve& b) {
  if (a.x.size() != b.x.size() || a.x.empty()) {
    throw ShapeError("density curves differ in grid size");
  }
  double area = 0.0;
  for (std::size_t i = 1; i < a.x.size(); ++i) {
    const double lo = std::min(a.f[i - 1], b.f[i - 1]);
    const double hi = std::min(a.f[i], b.f[i]);
    area += (a.x[i] - a.x[i - 1]) * (lo + hi) * 0.5;
  }
  return area;
}

std::pair<DensityCurve, DensityCurve> probability_density(
    const std::vector<double>& probs, const std::vector<int>& labels) {
  if (probs.size() != labels.size()) {
    throw ShapeError("probs and labels differ in length");
  }
  std::vector<double> pos;
  std::vector<double> neg;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    (labels[i] != 0 ? pos : neg).push_back(probs[i]);
  }
  if (pos.empty() || neg.empty()) {
    throw DegenerateInputError("probability density needs both classes");
  }
  return {kde_density(pos), kde_density(neg)};
}

std::vector<std::array<double, 2>> project_2d(
    const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw DegenerateInputError("no rows to project");
  const std::size_t dim = rows[0].size();
  if (dim < 2) throw ShapeError("projection needs at least 2 dimensions");
  for (const auto& r : rows) {
    if (r.size() != dim) throw ShapeError("ragged rows in projection input");
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(dim);

  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) mu += x.row(i);
  mu /= static_cast<double>(n);
  x.rowwise() -= mu;

  Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw Error("eigendecomposition failed");
  }
  // Eigenvalues come out ascending; the last two columns span the top plane.
  Eigen::VectorXd v1 = solver.eigenvectors().col(d - 1);
  Eigen::VectorXd v2 = solver.eigenvectors().col(d - 2);
  auto fix_sign = [](Eigen::VectorXd* v) {
    Eigen::Index arg = 0;
    v->cwiseAbs().maxCoeff(&arg);
    if ((*v)(arg) < 0.0) *v = -*v;
  };
  fix_sign(&v1);
  fix_sign(&v2);

  std::vector<std::array<double, 2>> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = {x.row(i).dot(v1), x.row(i).dot(v2)};
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw DegenerateInputError("mean of empty list");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stdev_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace rdal
