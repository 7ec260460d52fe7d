// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "neuromerge/subspace.hpp"

#include <algorithm>
#include <cmath>

#include "neuromerge/error.hpp"

namespace neuromerge {
namespace {

constexpr int kMaxReprojections = 3;
constexpr double kOrthogonalSlack = 1e-12;

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                     std::to_string(b) + ")");
  }
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double split_against(std::span<const double> w0, std::span<const double> v, std::span<double> orthogonal) {
  require_same_length(w0.size(), v.size(), "split_against");
  require_same_length(v.size(), orthogonal.size(), "split_against");
  const double ww = dot(w0, w0);
  if (ww == 0.0) {
    std::copy(v.begin(), v.end(), orthogonal.begin());
    return 0.0;
  }
  double c = dot(v, w0) / ww;
  for (std::size_t i = 0; i < v.size(); ++i) orthogonal[i] = v[i] - c * w0[i];
  for (int pass = 0; pass < kMaxReprojections; ++pass) {
    const double residual = dot(orthogonal, w0);
    if (std::fabs(residual) <= kOrthogonalSlack * norm2(orthogonal) * std::sqrt(ww) && pass > 0) return c;
    const double dc = residual / ww;
    for (std::size_t i = 0; i < v.size(); ++i) orthogonal[i] -= dc * w0[i];
    c += dc;
  }
  // Still not orthogonal: what is left is rounding noise of an (almost)
  // exactly parallel v, e.g. any v when d == 1.
  if (std::fabs(dot(orthogonal, w0)) > kOrthogonalSlack * norm2(orthogonal) * std::sqrt(ww)) {
    std::fill(orthogonal.begin(), orthogonal.end(), 0.0);
  }
  return c;
}

NeuronDecomposition decompose(std::span<const double> w0, std::span<const double> tau) {
  require_same_length(w0.size(), tau.size(), "decompose");
  NeuronDecomposition out;
  out.orthogonal.resize(tau.size());
  out.parallel_coeff = split_against(w0, tau, out.orthogonal);
  out.parallel.resize(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) out.parallel[i] = out.parallel_coeff * w0[i];
  out.sensitivity_gain = 1.0 + out.parallel_coeff;
  return out;
}

InputSplit decompose_input(std::span<const double> w0, std::span<const double> x) {
  require_same_length(w0.size(), x.size(), "decompose_input");
  InputSplit out;
  out.perpendicular.resize(x.size());
  const double c = split_against(w0, x, out.perpendicular);
  out.parallel.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out.parallel[i] = c * w0[i];
  return out;
}

std::string_view keep_subspace_name(KeepSubspace keep) noexcept {
  return keep == KeepSubspace::Orthogonal ? "orthogonal" : "parallel";
}

std::optional<KeepSubspace> parse_keep_subspace(std::string_view name) noexcept {
  if (name == "orthogonal") return KeepSubspace::Orthogonal;
  if (name == "parallel") return KeepSubspace::Parallel;
  return std::nullopt;
}

Checkpoint filter_task_vector(const Checkpoint& base, const Checkpoint& task, KeepSubspace keep,
                              const TensorClassification& classification, bool check_dtypes) {
  const Checkpoint tasks[] = {task};
  require_aligned(base, tasks, check_dtypes);

  Checkpoint out;
  out.metadata = base.metadata;
  std::vector<double> tau, orth;
  for (const auto& [name, b] : base.tensors) {
    const Tensor& f = task.at(name);
    switch (classification.classify(name, b.shape)) {
      case TensorClass::Skip:
        out.tensors.emplace(name, b);
        break;
      case TensorClass::NonNeuronal:
        out.tensors.emplace(name, Tensor(b.dtype, b.shape, f.data));
        break;
      case TensorClass::Neuronal: {
        Tensor result(b.dtype, b.shape);
        const auto cols = b.cols();
        tau.resize(cols);
        orth.resize(cols);
        for (std::uint64_t r = 0; r < b.rows(); ++r) {
          const auto w0 = b.row(r);
          const auto wt = f.row(r);
          for (std::uint64_t i = 0; i < cols; ++i) tau[i] = wt[i] - w0[i];
          const double c = split_against(w0, tau, orth);
          auto dst = result.row(r);
          // w0 + orthogonal == wt - c*w0 and w0 + parallel == w0 + c*w0; these
          // forms are exact when c == 0.
          for (std::uint64_t i = 0; i < cols; ++i) {
            dst[i] = keep == KeepSubspace::Orthogonal ? wt[i] - c * w0[i] : w0[i] + c * w0[i];
          }
        }
        out.tensors.emplace(name, std::move(result));
        break;
      }
    }
  }
  return out;
}

}  // namespace neuromerge
