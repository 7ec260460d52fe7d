// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "neuromerge/svd_merge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "neuromerge/error.hpp"
#include "neuromerge/subspace.hpp"

namespace neuromerge {
namespace {

constexpr int kMaxSweeps = 100;

std::size_t argmax_abs(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::fabs(v[i]) > std::fabs(v[best])) best = i;
  }
  return best;
}

}  // namespace

NeuronStack::NeuronStack(std::size_t tasks, std::size_t dim)
    : tasks_(tasks), dim_(dim), data_(tasks * dim, 0.0) {
  if (tasks == 0 || dim == 0) throw ShapeError("neuron stack needs at least one task and one dimension");
}

NeuronStack::NeuronStack(std::span<const std::span<const double>> rows)
    : NeuronStack(rows.size(), rows.empty() ? 0 : rows[0].size()) {
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t].size() != dim_) throw ShapeError("neuron stack rows have different lengths");
    std::copy(rows[t].begin(), rows[t].end(), row(t).begin());
  }
}

SvdCoordinates svd_coordinates(const NeuronStack& stack, double drop) {
  const std::size_t T = stack.tasks();
  const std::size_t d = stack.dim();
  std::vector<std::vector<double>> w(T);
  for (std::size_t t = 0; t < T; ++t) w[t].assign(stack.row(t).begin(), stack.row(t).end());

  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < T; ++i) {
      for (std::size_t j = i + 1; j < T; ++j) {
        const double a = dot(w[i], w[i]);
        const double b = dot(w[j], w[j]);
        const double c = dot(w[i], w[j]);
        if (c == 0.0 || std::fabs(c) <= eps * std::sqrt(a) * std::sqrt(b)) continue;
        const double zeta = (b - a) / (2.0 * c);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (std::size_t k = 0; k < d; ++k) {
          const double wi = w[i][k];
          const double wj = w[j][k];
          w[i][k] = cs * wi - sn * wj;
          w[j][k] = sn * wi + cs * wj;
        }
        rotated = true;
      }
    }
    if (!rotated) break;
  }

  struct Direction {
    double sigma;
    std::size_t lead;
    std::vector<double> axis;
  };
  std::vector<Direction> dirs;
  double s_max = 0.0;
  for (std::size_t t = 0; t < T; ++t) s_max = std::max(s_max, norm2(w[t]));
  if (s_max == 0.0) return {};

  for (std::size_t t = 0; t < T; ++t) {
    const double s = norm2(w[t]);
    if (s <= drop * s_max) continue;
    std::vector<double> axis(d);
    for (std::size_t k = 0; k < d; ++k) axis[k] = w[t][k] / s;
    const std::size_t lead = argmax_abs(axis);
    if (axis[lead] < 0.0) {
      for (double& v : axis) v = -v;
    }
    dirs.push_back({s, lead, std::move(axis)});
  }
  std::stable_sort(dirs.begin(), dirs.end(), [](const Direction& x, const Direction& y) {
    if (x.sigma != y.sigma) return x.sigma > y.sigma;
    return x.lead < y.lead;
  });

  SvdCoordinates out;
  for (auto& dir : dirs) {
    out.singular_values.push_back(dir.sigma);
    out.axes.push_back(std::move(dir.axis));
  }
  return out;
}

std::vector<double> merge_in_coordinates(const NeuronStack& stack, const SvdCoordinates& coords,
                                         const MergeFn& fn) {
  std::vector<double> result(stack.dim(), 0.0);
  std::vector<double> column(stack.tasks());
  for (const auto& axis : coords.axes) {
    if (axis.size() != stack.dim()) throw ShapeError("SVD axis length does not match the stack");
    for (std::size_t t = 0; t < stack.tasks(); ++t) column[t] = dot(stack.row(t), axis);
    const double zeta = merge_values(fn, column);
    for (std::size_t k = 0; k < result.size(); ++k) result[k] += zeta * axis[k];
  }
  return result;
}

std::vector<double> merge_orthogonal(const NeuronStack& stack, const MergeFn& fn, double drop) {
  return merge_in_coordinates(stack, svd_coordinates(stack, drop), fn);
}

}  // namespace neuromerge
