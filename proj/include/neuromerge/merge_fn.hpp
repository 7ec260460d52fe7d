// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace neuromerge {

enum class MergeKind { ElectMean, ElectSum, Mean, Sum };

// CLI spelling: "elect-mean", "elect-sum", "mean", "sum".
std::string_view merge_kind_name(MergeKind kind) noexcept;
std::optional<MergeKind> parse_merge_kind(std::string_view name) noexcept;

// A merge function reduces one value per task to a single value.
//
// The elect kinds follow the TIES disjoint merge: the elected sign is the sign
// of the plain sum; the result is the mean (or sum) of the nonzero values that
// share that sign. A zero sum elects nothing and yields 0.
//
// `task_weights` only affects Mean, which becomes a weighted average.
struct MergeFn {
  MergeKind kind = MergeKind::ElectMean;
  std::vector<double> task_weights;

  // Throws ConfigError unless weights are empty or all positive and finite.
  void validate(std::size_t num_tasks) const;
};

double merge_values(const MergeFn& fn, std::span<const double> values);

// Applies merge_values coordinate-wise across equally sized rows.
std::vector<double> merge_elementwise(const MergeFn& fn, std::span<const std::span<const double>> rows);

}  // namespace neuromerge
