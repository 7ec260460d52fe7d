// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "neuromerge/task_vectors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "neuromerge/error.hpp"

namespace neuromerge {
namespace {

// Neumaier-compensated sum; the L1 statistics feed sigma, which must agree
// with 1 - kept/total to ~1e-14 even for large tensors.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v)) {
      carry_ += (sum_ - t) + v;
    } else {
      carry_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace

std::size_t TaskVectorSet::index_of(const std::string& name) const {
  auto it = std::lower_bound(names.begin(), names.end(), name);
  if (it == names.end() || *it != name) throw NameError("task vectors have no tensor '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

const std::vector<double>& TaskVectorSet::delta(std::size_t task, const std::string& name) const {
  return deltas.at(task).at(index_of(name));
}

std::uint64_t keep_count(double ratio, std::uint64_t n) {
  const double product = ratio * static_cast<double>(n);
  // Ratios are decimal fractions (0.15, 0.2) that binary64 cannot hold
  // exactly, so a product within 1e-12 relative of an integer is that integer.
  const double nearest = std::round(product);
  const double k = std::fabs(product - nearest) <= kKeepCountSnap * std::max(1.0, nearest) ? nearest
                                                                                            : std::ceil(product);
  return std::min(static_cast<std::uint64_t>(std::max(k, 0.0)), n);
}

TaskVectorSet build_task_vectors(const Checkpoint& base, std::span<const Checkpoint> tasks,
                                 bool check_dtypes) {
  require_aligned(base, tasks, check_dtypes);
  TaskVectorSet tv;
  for (const auto& [name, t] : base.tensors) {
    tv.names.push_back(name);
    tv.shapes.push_back(t.shape);
  }
  tv.deltas.resize(tasks.size());
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    auto& per_task = tv.deltas[t];
    per_task.reserve(tv.names.size());
    for (const auto& name : tv.names) {
      const auto& b = base.at(name).data;
      const auto& f = tasks[t].at(name).data;
      std::vector<double> d(b.size());
      for (std::size_t i = 0; i < b.size(); ++i) d[i] = f[i] - b[i];
      per_task.push_back(std::move(d));
    }
  }
  const std::size_t T = tasks.size();
  tv.maskable_counts.assign(T, 0);
  tv.kept_counts.assign(T, 0);
  tv.l1_before.assign(T, 0.0);
  tv.l1_after.assign(T, 0.0);
  tv.sigma.assign(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    CompensatedSum l1;
    std::uint64_t n = 0;
    for (const auto& d : tv.deltas[t]) {
      for (double v : d) l1.add(std::fabs(v));
      n += d.size();
    }
    tv.maskable_counts[t] = tv.kept_counts[t] = n;
    tv.l1_before[t] = tv.l1_after[t] = l1.value();
  }
  return tv;
}

TaskVectorSet apply_mask(const TaskVectorSet& tv, double ratio, const TensorFilter& maskable) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    std::ostringstream msg;
    msg << "mask ratio must be in (0, 1], got " << ratio;
    throw ConfigError(msg.str());
  }
  TaskVectorSet out = tv;
  out.mask_ratio = ratio;
  std::vector<bool> eligible(tv.names.size(), true);
  if (maskable) {
    for (std::size_t i = 0; i < tv.names.size(); ++i) eligible[i] = maskable(tv.names[i]);
  }

  for (std::size_t t = 0; t < tv.num_tasks(); ++t) {
    auto& deltas = out.deltas[t];
    std::vector<double> magnitudes;
    CompensatedSum l1_before;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      if (!eligible[i]) continue;
      for (double v : deltas[i]) {
        magnitudes.push_back(std::fabs(v));
        l1_before.add(std::fabs(v));
      }
    }
    const std::uint64_t n = magnitudes.size();
    const std::uint64_t k = keep_count(ratio, n);

    // Threshold = k-th largest magnitude. Everything strictly above is kept;
    // entries equal to it are kept in (name, index) order until k is reached.
    double threshold = 0.0;
    std::uint64_t above = 0;
    if (k > 0) {
      auto kth = magnitudes.begin() + static_cast<std::ptrdiff_t>(k - 1);
      std::nth_element(magnitudes.begin(), kth, magnitudes.end(), std::greater<>());
      threshold = *kth;
      above = static_cast<std::uint64_t>(
          std::count_if(magnitudes.begin(), magnitudes.end(), [&](double m) { return m > threshold; }));
    }
    std::uint64_t ties_left = k - above;

    CompensatedSum removed;
    CompensatedSum kept_l1;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      if (!eligible[i]) continue;
      for (double& v : deltas[i]) {
        const double m = std::fabs(v);
        bool keep = false;
        if (k > 0) {
          if (m > threshold) {
            keep = true;
          } else if (m == threshold && ties_left > 0) {
            keep = true;
            --ties_left;
          }
        }
        if (keep) {
          kept_l1.add(m);
        } else {
          removed.add(m);
          v = 0.0;
        }
      }
    }
    out.maskable_counts[t] = n;
    out.kept_counts[t] = k;
    const double total = l1_before.value();
    out.l1_before[t] = total;
    out.l1_after[t] = kept_l1.value();
    out.sigma[t] = total > 0.0 ? removed.value() / total : 0.0;
  }
  return out;
}

double auto_lambda2(const TaskVectorSet& tv) {
  if (tv.sigma.empty()) throw ConfigError("auto lambda2 needs at least one task");
  const double sigma = *std::max_element(tv.sigma.begin(), tv.sigma.end());
  if (sigma >= 1.0 - 1e-12) {
    std::ostringstream msg;
    msg << "mask removed essentially all L1 mass (max sigma = " << sigma << "); lambda2 is undefined";
    throw DegenerateMaskError(msg.str());
  }
  return 1.0 / (1.0 - sigma);
}

}  // namespace neuromerge
