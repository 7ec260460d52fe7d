// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "neuromerge/checkpoint.hpp"

namespace neuromerge {

enum class TensorClass { Neuronal, NonNeuronal, Skip };

std::string_view tensor_class_name(TensorClass c) noexcept;
std::optional<TensorClass> parse_tensor_class(std::string_view name) noexcept;

// Anchored glob match: '*' matches any run of characters, '?' exactly one.
bool glob_match(std::string_view pattern, std::string_view text) noexcept;

struct ClassRule {
  std::string pattern;
  TensorClass cls = TensorClass::Neuronal;

  friend bool operator==(const ClassRule&, const ClassRule&) = default;
};

// First matching rule wins; unmatched tensors fall back on their rank.
struct TensorClassification {
  std::vector<ClassRule> rules;
  TensorClass default_2d = TensorClass::Neuronal;     // tensors with >= 2 dims
  TensorClass default_1d = TensorClass::NonNeuronal;  // 0-D and 1-D tensors

  TensorClass classify(const std::string& name, const Shape& shape) const;

  friend bool operator==(const TensorClassification&, const TensorClassification&) = default;
};

}  // namespace neuromerge
