// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string_view>
#include <optional>
#include <vector>

#include "neuromerge/checkpoint.hpp"
#include "neuromerge/classification.hpp"

namespace neuromerge {

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

// Split of a neuron's task vector relative to its pretrained row w0.
//   parallel   = parallel_coeff * w0
//   orthogonal = tau - parallel
//   sensitivity_gain = 1 + parallel_coeff   (w0 + parallel == gain * w0)
struct NeuronDecomposition {
  double parallel_coeff = 0.0;
  std::vector<double> parallel;
  std::vector<double> orthogonal;
  double sensitivity_gain = 1.0;
};

// Projects `v` off the line spanned by `w0`, writing the orthogonal remainder
// into `orthogonal` (same length as v) and returning the coefficient c with
// v = c * w0 + orthogonal. The projection is repeated (at most three extra
// passes) until |orthogonal . w0| <= 1e-12 |orthogonal| |w0|; a remainder that
// never gets there is rounding noise and is zeroed. A zero w0 spans nothing:
// c = 0 and the remainder is v.
double split_against(std::span<const double> w0, std::span<const double> v, std::span<double> orthogonal);

NeuronDecomposition decompose(std::span<const double> w0, std::span<const double> tau);

struct InputSplit {
  std::vector<double> parallel;
  std::vector<double> perpendicular;
};

// Same projection as decompose(), applied to an input vector.
InputSplit decompose_input(std::span<const double> w0, std::span<const double> x);

enum class KeepSubspace { Orthogonal, Parallel };

std::string_view keep_subspace_name(KeepSubspace keep) noexcept;
std::optional<KeepSubspace> parse_keep_subspace(std::string_view name) noexcept;

// Rebuilds `task` with each neuronal row's task vector replaced by one of its
// two components. Non-neuronal tensors keep their fine-tuned values, skip
// tensors come from `base`, and metadata is taken from `base`.
Checkpoint filter_task_vector(const Checkpoint& base, const Checkpoint& task, KeepSubspace keep,
                              const TensorClassification& classification, bool check_dtypes = true);

}  // namespace neuromerge
