// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "neuromerge/checkpoint.hpp"
#include "neuromerge/classification.hpp"
#include "neuromerge/merge_fn.hpp"
#include "neuromerge/svd_merge.hpp"

namespace neuromerge {

enum class Method { Neuro, Ties, TaskArithmetic, Average };

std::string_view method_name(Method m) noexcept;  // "neuro", "ties", "task-arithmetic", "average"
std::optional<Method> parse_method(std::string_view name) noexcept;

enum class CastPolicy { Strict, Widen };

std::string_view cast_policy_name(CastPolicy p) noexcept;
std::optional<CastPolicy> parse_cast_policy(std::string_view name) noexcept;

struct MergeConfig {
  Method method = Method::Neuro;
  MergeFn merge_fn;
  double ratio = 0.15;
  double lambda1 = 0.0;
  std::optional<double> lambda2;  // nullopt: 1 / (1 - max sigma_t)
  TensorClassification classification;
  // Merged orthogonal vectors with |o.w0| > tol |o| |w0| are re-projected.
  double orthogonality_tol = 1e-10;
  double svd_drop = kDefaultSvdDrop;
  CastPolicy cast_policy = CastPolicy::Strict;
  // When false, only neuronal tensors take part in masking.
  bool mask_non_neuronal = true;
  unsigned threads = 1;

  // neuro: r = 0.15, lambda1 = 0, lambda2 auto, elect-mean.
  // TIES: r = 0.2, lambda = 1. Task arithmetic: no masking, lambda = 1.
  static MergeConfig defaults_for(Method method);

  // Throws ConfigError on out-of-range values.
  void validate(std::size_t num_tasks) const;
};

inline constexpr int kReportVersion = 1;

struct TaskStats {
  double sigma = 0.0;
  double l1_before = 0.0;
  double l1_after = 0.0;
  std::uint64_t maskable = 0;
  std::uint64_t kept = 0;
};

struct TensorStats {
  std::string name;
  TensorClass cls = TensorClass::Neuronal;
  Shape shape;
  std::uint64_t neuron_rows = 0;
};

struct MergeReport {
  Method method = Method::Neuro;
  MergeKind merge_fn = MergeKind::ElectMean;
  double ratio = 1.0;
  double lambda1 = 0.0;
  double lambda2 = 1.0;
  bool lambda2_auto = false;
  std::vector<TaskStats> per_task;
  std::vector<TensorStats> per_tensor;
  std::uint64_t neuronal_tensors = 0;
  std::uint64_t non_neuronal_tensors = 0;
  std::uint64_t skipped_tensors = 0;
  std::uint64_t neurons = 0;
  // max |o . w0| / (|o| |w0|) over merged orthogonal vectors o.
  double max_orthogonality_residual = 0.0;
  double wall_time_seconds = 0.0;
  nlohmann::json effective_config;  // filled in by callers that have one

  nlohmann::json to_json() const;
};

struct MergeResult {
  Checkpoint merged;
  MergeReport report;
};

MergeResult run_merge(const Checkpoint& base, std::span<const Checkpoint> tasks, const MergeConfig& cfg);

}  // namespace neuromerge
