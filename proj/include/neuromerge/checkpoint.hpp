// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "neuromerge/dtype.hpp"

namespace neuromerge {

using Shape = std::vector<std::uint64_t>;

std::uint64_t element_count(const Shape& shape) noexcept;
std::string shape_to_string(const Shape& shape);

// Dense row-major tensor. Values are held in binary64; `dtype` records the
// storage format used when the tensor is written back out.
struct Tensor {
  DType dtype = DType::F32;
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(DType dtype, Shape shape);
  Tensor(DType dtype, Shape shape, std::vector<double> data);

  std::uint64_t size() const noexcept { return data.size(); }

  // Neuron view: rows = shape[0], cols = product of the remaining extents.
  // 0-D and 1-D tensors are a single row.
  std::uint64_t rows() const noexcept;
  std::uint64_t cols() const noexcept;
  std::span<const double> row(std::uint64_t r) const;
  std::span<double> row(std::uint64_t r);

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// Name-ordered collection of tensors plus free-form string metadata.
struct Checkpoint {
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> metadata;

  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors.contains(name); }

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Safetensors (de)serialization. Parsing validates the header, offsets, dtype
// and that every element is finite.
Checkpoint parse_safetensors(std::span<const unsigned char> bytes);
std::vector<unsigned char> serialize_safetensors(const Checkpoint& ckpt);

Checkpoint load_checkpoint(const std::filesystem::path& path);

// Writes to a temporary sibling file, then renames over `path`.
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

enum class MismatchKind { MissingInBase, MissingInTask, Shape, Dtype };

std::string_view mismatch_kind_name(MismatchKind kind) noexcept;

struct AlignmentIssue {
  std::size_t task = 0;
  MismatchKind kind = MismatchKind::Shape;
  std::string tensor;
  std::string detail;

  friend bool operator==(const AlignmentIssue&, const AlignmentIssue&) = default;
};

struct AlignmentReport {
  std::vector<AlignmentIssue> issues;

  bool empty() const noexcept { return issues.empty(); }
  std::string to_string() const;
};

// Lists, per task, every namespace/shape/dtype disagreement with `base`.
// With `check_dtypes` false, dtype differences are tolerated.
AlignmentReport validate_aligned(const Checkpoint& base, std::span<const Checkpoint> tasks,
                                 bool check_dtypes = true);

// Throws AlignmentError carrying the report text when the report is not empty.
void require_aligned(const Checkpoint& base, std::span<const Checkpoint> tasks,
                     bool check_dtypes = true);

}  // namespace neuromerge
