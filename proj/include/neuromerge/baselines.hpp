// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "neuromerge/checkpoint.hpp"
#include "neuromerge/task_vectors.hpp"

namespace neuromerge {

// Element-wise mean of the task checkpoints. Dtypes and metadata follow the
// first checkpoint.
Checkpoint merge_average(std::span<const Checkpoint> tasks);

// base + lambda * sum_t tau_t.
Checkpoint merge_task_arithmetic(const Checkpoint& base, const TaskVectorSet& tv, double lambda);

// Sign election and disjoint mean per coordinate over already-masked deltas:
// base + lambda * elect_mean(tau_1[i], ..., tau_T[i]).
Checkpoint disjoint_merge(const Checkpoint& base, const TaskVectorSet& masked, double lambda);

// TIES: trim each task vector to its global top-`ratio` entries, then
// disjoint_merge.
Checkpoint merge_ties(const Checkpoint& base, const TaskVectorSet& tv, double ratio, double lambda,
                      const TensorFilter& maskable = {});

}  // namespace neuromerge
