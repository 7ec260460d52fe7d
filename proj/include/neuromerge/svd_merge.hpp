// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "neuromerge/merge_fn.hpp"

namespace neuromerge {

inline constexpr double kDefaultSvdDrop = 1e-12;

// T x d matrix whose rows are the per-task orthogonal components of one neuron.
class NeuronStack {
 public:
  NeuronStack(std::size_t tasks, std::size_t dim);
  NeuronStack(std::span<const std::span<const double>> rows);

  std::size_t tasks() const noexcept { return tasks_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> row(std::size_t t) const { return {data_.data() + t * dim_, dim_}; }
  std::span<double> row(std::size_t t) { return {data_.data() + t * dim_, dim_}; }

 private:
  std::size_t tasks_;
  std::size_t dim_;
  std::vector<double> data_;
};

// Right singular vectors of a stack, descending by singular value. Each axis
// is sign-normalized so its largest-magnitude coordinate (first on ties) is
// positive.
struct SvdCoordinates {
  std::vector<std::vector<double>> axes;
  std::vector<double> singular_values;

  std::size_t rank() const noexcept { return axes.size(); }
};

// Singular directions of the stack via cyclic Jacobi rotations that
// diagonalize the T x T Gram matrix D * D^T. The rotations are applied to the
// rows of D directly (one-sided form), so each Gram entry is recomputed from
// rotated rows instead of accumulated. Directions with singular value
// <= drop * s_max are discarded.
SvdCoordinates svd_coordinates(const NeuronStack& stack, double drop = kDefaultSvdDrop);

// Projects every row onto the axes, merges each coordinate column with `fn`
// and maps the merged coordinates back to R^d.
std::vector<double> merge_in_coordinates(const NeuronStack& stack, const SvdCoordinates& coords,
                                         const MergeFn& fn);

std::vector<double> merge_orthogonal(const NeuronStack& stack, const MergeFn& fn,
                                     double drop = kDefaultSvdDrop);

}  // namespace neuromerge
