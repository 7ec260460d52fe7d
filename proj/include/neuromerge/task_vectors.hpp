// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "neuromerge/checkpoint.hpp"

namespace neuromerge {

// Per-task deltas (fine-tuned minus base) over the base checkpoint's tensor
// namespace, in binary64, plus the bookkeeping produced by magnitude masking.
struct TaskVectorSet {
  std::vector<std::string> names;  // sorted, shared by every task
  std::vector<Shape> shapes;       // parallel to `names`
  // deltas[task][tensor] is the flat row-major delta of tensor `names[tensor]`.
  std::vector<std::vector<std::vector<double>>> deltas;

  double mask_ratio = 1.0;
  std::vector<std::uint64_t> maskable_counts;  // N_t: elements eligible for masking
  std::vector<std::uint64_t> kept_counts;      // entries selected by the mask
  std::vector<double> l1_before;               // L1 over maskable entries before masking
  std::vector<double> l1_after;
  std::vector<double> sigma;  // removed-L1 fraction per task

  std::size_t num_tasks() const noexcept { return deltas.size(); }
  std::size_t index_of(const std::string& name) const;
  const std::vector<double>& delta(std::size_t task, const std::string& name) const;
};

inline constexpr double kKeepCountSnap = 1e-12;

// ceil(ratio * n), except that a product within kKeepCountSnap (relative) of
// an integer counts as that integer: keep_count(0.2, 5) == 1 even though the
// binary64 value of 0.2 is slightly larger than 1/5.
std::uint64_t keep_count(double ratio, std::uint64_t n);

// Builds task vectors; throws AlignmentError when the checkpoints disagree.
TaskVectorSet build_task_vectors(const Checkpoint& base, std::span<const Checkpoint> tasks,
                                 bool check_dtypes = true);

using TensorFilter = std::function<bool(const std::string&)>;

// Keeps, per task, the ceil(ratio * N_t) largest-magnitude entries across all
// tensors accepted by `maskable` (all tensors when empty) and zeroes the rest.
// Ties at the threshold magnitude keep entries earlier in (name, flat index)
// order. Tensors rejected by `maskable` are left untouched and excluded from
// N_t and from the L1 statistics.
TaskVectorSet apply_mask(const TaskVectorSet& tv, double ratio, const TensorFilter& maskable = {});

// 1 / (1 - max_t sigma_t). Throws DegenerateMaskError when the mask removed
// (numerically) all mass of some task.
double auto_lambda2(const TaskVectorSet& tv);

}  // namespace neuromerge
