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

#ifndef RDAL_METRICS_HPP_
#define RDAL_METRICS_HPP_

#include <array>
#include <vector>

#include "rdal/common.hpp"

namespace rdal {

// Area under the ROC curve with half credit for ties; equals the pairwise
// probability P(score_pos > score_neg) + 0.5 P(tie). Throws unless both
// classes are present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Threshold sweep from +inf down over the distinct scores; starts at (0,0),
// ends at (1,1), non-decreasing in both coordinates. Trapezoidal area over
// the points equals auc().
std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<int>& labels);

double roc_area(const std::vector<RocPoint>& curve);

constexpr int kDensityGridSize = 512;

struct DensityCurve {
  std::vector<double> x;  // kDensityGridSize points spanning [0, 1]
  std::vector<double> f;
};

// Gaussian kernel density on [0, 1] with boundary reflection so the curve
// integrates to one on the interval. Bandwidth is Silverman's rule
// 0.9 min(sd, IQR/1.34) n^(-1/5), floored at 1e-3.
DensityCurve kde_density(const std::vector<double>& values);

// Integral of min(a, b) over the shared grid; 1 for identical curves, 0 for
// disjoint ones.
double density_overlap(const DensityCurve& a, const DensityCurve& b);

// Per-class densities of sigmoid outputs: first the positive class, then the
// negative. Throws when a class is empty.
std::pair<DensityCurve, DensityCurve> probability_density(
    const std::vector<double>& probs, const std::vector<int>& labels);

// Centered projection onto the top-2 principal components; eigenvector signs
// are fixed so the largest-magnitude entry is positive.
std::vector<std::array<double, 2>> project_2d(
    const std::vector<std::vector<double>>& rows);

double mean_of(const std::vector<double>& v);
double stdev_of(const std::vector<double>& v);  // population

}  // namespace rdal

#endif  // RDAL_METRICS_HPP_
