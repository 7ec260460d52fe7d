// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "neuromerge/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "neuromerge/baselines.hpp"
#include "neuromerge/error.hpp"
#include "neuromerge/parallel.hpp"
#include "neuromerge/subspace.hpp"
#include "neuromerge/task_vectors.hpp"

namespace neuromerge {

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::Neuro:
      return "neuro";
    case Method::Ties:
      return "ties";
    case Method::TaskArithmetic:
      return "task-arithmetic";
    case Method::Average:
      return "average";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view name) noexcept {
  if (name == "neuro") return Method::Neuro;
  if (name == "ties") return Method::Ties;
  if (name == "task-arithmetic" || name == "task_arithmetic") return Method::TaskArithmetic;
  if (name == "average") return Method::Average;
  return std::nullopt;
}

std::string_view cast_policy_name(CastPolicy p) noexcept { return p == CastPolicy::Strict ? "strict" : "widen"; }

std::optional<CastPolicy> parse_cast_policy(std::string_view name) noexcept {
  if (name == "strict") return CastPolicy::Strict;
  if (name == "widen") return CastPolicy::Widen;
  return std::nullopt;
}

MergeConfig MergeConfig::defaults_for(Method method) {
  MergeConfig cfg;
  cfg.method = method;
  switch (method) {
    case Method::Neuro:
      break;
    case Method::Ties:
      cfg.ratio = 0.2;
      cfg.lambda2 = 1.0;
      break;
    case Method::TaskArithmetic:
    case Method::Average:
      cfg.ratio = 1.0;
      cfg.lambda2 = 1.0;
      break;
  }
  return cfg;
}

void MergeConfig::validate(std::size_t num_tasks) const {
  auto fail = [](const std::string& what, double v) {
    std::ostringstream msg;
    msg << what << ", got " << v;
    throw ConfigError(msg.str());
  };
  if (num_tasks == 0) throw ConfigError("at least one task checkpoint is required");
  if (!(ratio > 0.0 && ratio <= 1.0)) fail("ratio must be in (0, 1]", ratio);
  if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) fail("lambda1 must be a non-negative finite number", lambda1);
  if (lambda2 && (!(*lambda2 > 0.0) || !std::isfinite(*lambda2))) {
    fail("lambda2 must be a positive finite number or auto", *lambda2);
  }
  if (!(orthogonality_tol > 0.0)) fail("orthogonality tolerance must be positive", orthogonality_tol);
  if (!(svd_drop >= 0.0 && svd_drop < 1.0)) fail("svd drop threshold must be in [0, 1)", svd_drop);
  merge_fn.validate(num_tasks);
}

nlohmann::json MergeReport::to_json() const {
  using nlohmann::json;
  json j;
  j["report_version"] = kReportVersion;
  json g;
  g["method"] = std::string(method_name(method));
  g["merge_fn"] = std::string(merge_kind_name(merge_fn));
  g["ratio"] = ratio;
  g["lambda1"] = lambda1;
  g["lambda2"] = lambda2;
  g["lambda2_auto"] = lambda2_auto;
  g["tensor_counts"] = {{"neuronal", neuronal_tensors},
                        {"non_neuronal", non_neuronal_tensors},
                        {"skip", skipped_tensors}};
  g["neurons"] = neurons;
  g["max_orthogonality_residual"] = max_orthogonality_residual;
  g["wall_time_seconds"] = wall_time_seconds;
  j["global"] = g;
  json tasks = json::array();
  for (const auto& t : per_task) {
    tasks.push_back({{"sigma", t.sigma},
                     {"l1_before_mask", t.l1_before},
                     {"l1_after_mask", t.l1_after},
                     {"maskable_entries", t.maskable},
                     {"kept_entries", t.kept}});
  }
  j["per_task"] = tasks;
  json tensors = json::array();
  for (const auto& t : per_tensor) {
    tensors.push_back({{"name", t.name},
                       {"class", std::string(tensor_class_name(t.cls))},
                       {"shape", t.shape},
                       {"neuron_rows", t.neuron_rows}});
  }
  j["per_tensor"] = tensors;
  j["config"] = effective_config.is_null() ? json::object() : effective_config;
  return j;
}

namespace {

double orthogonality_residual(std::span<const double> o, std::span<const double> w0) {
  const double denom = norm2(o) * norm2(w0);
  return denom > 0.0 ? std::fabs(dot(o, w0)) / denom : 0.0;
}

// Merges one neuronal tensor row by row:
//   delta_k = lambda1 * psi(c_1..c_T) * w0_k + lambda2 * psi_svd(orth_1..orth_T).
Tensor merge_neuronal(const Tensor& base, const TaskVectorSet& tv, std::size_t index, const MergeConfig& cfg,
                      double lambda2, double& max_residual) {
  Tensor out(base.dtype, base.shape);
  const std::size_t T = tv.num_tasks();
  const std::uint64_t rows = base.rows();
  const std::uint64_t cols = base.cols();
  if (cols == 0) return out;
  std::vector<double> residuals(rows, 0.0);
  parallel_for(rows, cfg.threads, [&](std::size_t r) {
    const auto w0 = base.row(r);
    NeuronStack stack(T, cols);
    std::vector<double> coeffs(T);
    for (std::size_t t = 0; t < T; ++t) {
      const std::span<const double> tau(tv.deltas[t][index].data() + r * cols, cols);
      coeffs[t] = split_against(w0, tau, stack.row(t));
    }
    const double p = merge_values(cfg.merge_fn, coeffs);
    auto o = merge_orthogonal(stack, cfg.merge_fn, cfg.svd_drop);
    // Cancellation inside the merge can leave a small o with a visible w0
    // component; project it off again.
    if (orthogonality_residual(o, w0) > cfg.orthogonality_tol) split_against(w0, std::vector<double>(o), o);
    residuals[r] = orthogonality_residual(o, w0);
    auto dst = out.row(r);
    for (std::uint64_t i = 0; i < cols; ++i) {
      dst[i] = w0[i] + (cfg.lambda1 * p * w0[i] + lambda2 * o[i]);
    }
  });
  for (double v : residuals) max_residual = std::max(max_residual, v);
  return out;
}

Tensor merge_flat(const Tensor& base, const TaskVectorSet& tv, std::size_t index, const MergeFn& fn,
                  double lambda) {
  Tensor out(base.dtype, base.shape);
  std::vector<std::span<const double>> rows;
  for (std::size_t t = 0; t < tv.num_tasks(); ++t) rows.emplace_back(tv.deltas[t][index]);
  const auto merged = merge_elementwise(fn, rows);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = base.data[i] + lambda * merged[i];
  return out;
}

}  // namespace

MergeResult run_merge(const Checkpoint& base, std::span<const Checkpoint> tasks, const MergeConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  cfg.validate(tasks.size());
  const bool strict = cfg.cast_policy == CastPolicy::Strict;

  MergeResult result;
  MergeReport& report = result.report;
  report.method = cfg.method;
  report.merge_fn = cfg.merge_fn.kind;
  report.lambda1 = cfg.lambda1;

  std::vector<TensorClass> classes;
  for (const auto& [name, t] : base.tensors) {
    const TensorClass cls = cfg.classification.classify(name, t.shape);
    classes.push_back(cls);
    report.per_tensor.push_back({name, cls, t.shape, cls == TensorClass::Neuronal ? t.rows() : 0});
    switch (cls) {
      case TensorClass::Neuronal:
        ++report.neuronal_tensors;
        break;
      case TensorClass::NonNeuronal:
        ++report.non_neuronal_tensors;
        break;
      case TensorClass::Skip:
        ++report.skipped_tensors;
        break;
    }
  }

  Checkpoint& merged = result.merged;
  merged.metadata = base.metadata;

  if (cfg.method == Method::Average) {
    require_aligned(base, tasks, strict);
    const Checkpoint avg = merge_average(tasks);
    std::size_t i = 0;
    for (const auto& [name, b] : base.tensors) {
      if (classes[i++] == TensorClass::Skip) {
        merged.tensors.emplace(name, b);
      } else {
        merged.tensors.emplace(name, Tensor(b.dtype, b.shape, avg.at(name).data));
      }
    }
    report.ratio = 1.0;
    report.lambda2 = 1.0;
    report.per_task.assign(tasks.size(), TaskStats{});
    report.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
  }

  TaskVectorSet tv = build_task_vectors(base, tasks, strict);
  std::vector<bool> maskable(tv.names.size());
  for (std::size_t i = 0; i < tv.names.size(); ++i) {
    maskable[i] = classes[i] == TensorClass::Neuronal ||
                  (classes[i] == TensorClass::NonNeuronal && cfg.mask_non_neuronal);
  }
  const auto maskable_filter = [&](const std::string& name) { return bool(maskable[tv.index_of(name)]); };
  const bool apply = cfg.method != Method::TaskArithmetic || cfg.ratio < 1.0;
  if (apply) tv = apply_mask(tv, cfg.ratio, maskable_filter);
  report.ratio = apply ? cfg.ratio : 1.0;

  report.lambda2_auto = !cfg.lambda2.has_value();
  const double lambda2 = cfg.lambda2 ? *cfg.lambda2 : auto_lambda2(tv);
  report.lambda2 = lambda2;
  for (std::size_t t = 0; t < tv.num_tasks(); ++t) {
    report.per_task.push_back(
        {tv.sigma[t], tv.l1_before[t], tv.l1_after[t], tv.maskable_counts[t], tv.kept_counts[t]});
  }

  const MergeFn sum_fn{MergeKind::Sum, {}};
  for (std::size_t i = 0; i < tv.names.size(); ++i) {
    const std::string& name = tv.names[i];
    const Tensor& b = base.at(name);
    if (classes[i] == TensorClass::Skip) {
      merged.tensors.emplace(name, b);
      continue;
    }
    switch (cfg.method) {
      case Method::Neuro:
        if (classes[i] == TensorClass::Neuronal) {
          report.neurons += b.rows();
          merged.tensors.emplace(name, merge_neuronal(b, tv, i, cfg, lambda2, report.max_orthogonality_residual));
        } else {
          merged.tensors.emplace(name, merge_flat(b, tv, i, cfg.merge_fn, lambda2));
        }
        break;
      case Method::Ties:
        merged.tensors.emplace(name, merge_flat(b, tv, i, cfg.merge_fn, lambda2));
        break;
      case Method::TaskArithmetic:
        merged.tensors.emplace(name, merge_flat(b, tv, i, sum_fn, lambda2));
        break;
      case Method::Average:
        break;
    }
  }
  report.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace neuromerge
