// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "neuromerge/baselines.hpp"

#include <vector>

#include "neuromerge/error.hpp"
#include "neuromerge/merge_fn.hpp"

namespace neuromerge {
namespace {

void require_tasks(const TaskVectorSet& tv) {
  if (tv.num_tasks() == 0) throw ArityError("merging needs at least one task");
}

void require_matches(const Checkpoint& base, const TaskVectorSet& tv) {
  if (base.tensors.size() != tv.names.size()) {
    throw AlignmentError("task vectors were not built from this base checkpoint");
  }
  for (std::size_t i = 0; i < tv.names.size(); ++i) {
    auto it = base.tensors.find(tv.names[i]);
    if (it == base.tensors.end() || it->second.shape != tv.shapes[i]) {
      throw AlignmentError("task vectors were not built from this base checkpoint ('" + tv.names[i] + "')");
    }
  }
}

}  // namespace

Checkpoint merge_average(std::span<const Checkpoint> tasks) {
  if (tasks.empty()) throw ArityError("averaging needs at least one checkpoint");
  require_aligned(tasks[0], tasks.subspan(1));
  Checkpoint out;
  out.metadata = tasks[0].metadata;
  const double inv = 1.0 / static_cast<double>(tasks.size());
  for (const auto& [name, first] : tasks[0].tensors) {
    Tensor t(first.dtype, first.shape);
    for (const auto& ckpt : tasks) {
      const auto& src = ckpt.at(name).data;
      for (std::size_t i = 0; i < src.size(); ++i) t.data[i] += src[i];
    }
    for (double& v : t.data) v *= inv;
    out.tensors.emplace(name, std::move(t));
  }
  return out;
}

Checkpoint merge_task_arithmetic(const Checkpoint& base, const TaskVectorSet& tv, double lambda) {
  require_tasks(tv);
  require_matches(base, tv);
  Checkpoint out;
  out.metadata = base.metadata;
  for (std::size_t n = 0; n < tv.names.size(); ++n) {
    const Tensor& b = base.at(tv.names[n]);
    Tensor t(b.dtype, b.shape);
    for (std::size_t i = 0; i < b.data.size(); ++i) {
      double sum = 0.0;
      for (std::size_t task = 0; task < tv.num_tasks(); ++task) sum += tv.deltas[task][n][i];
      t.data[i] = b.data[i] + lambda * sum;
    }
    out.tensors.emplace(tv.names[n], std::move(t));
  }
  return out;
}

Checkpoint disjoint_merge(const Checkpoint& base, const TaskVectorSet& masked, double lambda) {
  require_tasks(masked);
  require_matches(base, masked);
  const MergeFn elect{MergeKind::ElectMean, {}};
  Checkpoint out;
  out.metadata = base.metadata;
  std::vector<double> column(masked.num_tasks());
  for (std::size_t n = 0; n < masked.names.size(); ++n) {
    const Tensor& b = base.at(masked.names[n]);
    Tensor t(b.dtype, b.shape);
    for (std::size_t i = 0; i < b.data.size(); ++i) {
      for (std::size_t task = 0; task < masked.num_tasks(); ++task) column[task] = masked.deltas[task][n][i];
      t.data[i] = b.data[i] + lambda * merge_values(elect, column);
    }
    out.tensors.emplace(masked.names[n], std::move(t));
  }
  return out;
}

Checkpoint merge_ties(const Checkpoint& base, const TaskVectorSet& tv, double ratio, double lambda,
                      const TensorFilter& maskable) {
  return disjoint_merge(base, apply_mask(tv, ratio, maskable), lambda);
}

}  // namespace neuromerge
