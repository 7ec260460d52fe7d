// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "neuromerge/merge_fn.hpp"

#include <cmath>
#include <string>

#include "neuromerge/error.hpp"

namespace neuromerge {

std::string_view merge_kind_name(MergeKind kind) noexcept {
  switch (kind) {
    case MergeKind::ElectMean:
      return "elect-mean";
    case MergeKind::ElectSum:
      return "elect-sum";
    case MergeKind::Mean:
      return "mean";
    case MergeKind::Sum:
      return "sum";
  }
  return "?";
}

std::optional<MergeKind> parse_merge_kind(std::string_view name) noexcept {
  if (name == "elect-mean" || name == "elect_mean") return MergeKind::ElectMean;
  if (name == "elect-sum" || name == "elect_sum") return MergeKind::ElectSum;
  if (name == "mean") return MergeKind::Mean;
  if (name == "sum") return MergeKind::Sum;
  return std::nullopt;
}

void MergeFn::validate(std::size_t num_tasks) const {
  if (task_weights.empty()) return;
  if (task_weights.size() != num_tasks) {
    throw ConfigError("expected " + std::to_string(num_tasks) + " task weights, got " +
                      std::to_string(task_weights.size()));
  }
  for (double w : task_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("task weights must be positive and finite");
  }
}

double merge_values(const MergeFn& fn, std::span<const double> values) {
  if (values.empty()) throw ArityError("merge function needs at least one value");
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ValidationError("non-finite merge input at position " + std::to_string(i));
    }
    sum += values[i];
  }

  switch (fn.kind) {
    case MergeKind::Sum:
      return sum;
    case MergeKind::Mean: {
      if (fn.task_weights.empty()) return sum / static_cast<double>(values.size());
      if (fn.task_weights.size() != values.size()) {
        throw ArityError("got " + std::to_string(values.size()) + " values for " +
                         std::to_string(fn.task_weights.size()) + " task weights");
      }
      double weighted = 0.0;
      double total = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i) {
        weighted += fn.task_weights[i] * values[i];
        total += fn.task_weights[i];
      }
      return weighted / total;
    }
    case MergeKind::ElectMean:
    case MergeKind::ElectSum: {
      if (sum == 0.0) return 0.0;
      const bool positive = sum > 0.0;
      double agreeing = 0.0;
      std::size_t count = 0;
      for (double v : values) {
        if ((positive && v > 0.0) || (!positive && v < 0.0)) {
          agreeing += v;
          ++count;
        }
      }
      if (count == 0) return 0.0;
      return fn.kind == MergeKind::ElectSum ? agreeing : agreeing / static_cast<double>(count);
    }
  }
  return 0.0;
}

std::vector<double> merge_elementwise(const MergeFn& fn, std::span<const std::span<const double>> rows) {
  if (rows.empty()) throw ArityError("merge function needs at least one row");
  const std::size_t d = rows[0].size();
  for (const auto& r : rows) {
    if (r.size() != d) throw ShapeError("rows passed to merge_elementwise have different lengths");
  }
  std::vector<double> out(d);
  std::vector<double> column(rows.size());
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t t = 0; t < rows.size(); ++t) column[t] = rows[t][i];
    out[i] = merge_values(fn, column);
  }
  return out;
}

}  // namespace neuromerge
