// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "neuromerge/classification.hpp"

namespace neuromerge {

std::string_view tensor_class_name(TensorClass c) noexcept {
  switch (c) {
    case TensorClass::Neuronal:
      return "neuronal";
    case TensorClass::NonNeuronal:
      return "non_neuronal";
    case TensorClass::Skip:
      return "skip";
  }
  return "?";
}

std::optional<TensorClass> parse_tensor_class(std::string_view name) noexcept {
  if (name == "neuronal") return TensorClass::Neuronal;
  if (name == "non_neuronal" || name == "non-neuronal") return TensorClass::NonNeuronal;
  if (name == "skip") return TensorClass::Skip;
  return std::nullopt;
}

bool glob_match(std::string_view pattern, std::string_view text) noexcept {
  // Iterative matcher with single-star backtracking.
  std::size_t p = 0, t = 0;
  std::size_t star = std::string_view::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

TensorClass TensorClassification::classify(const std::string& name, const Shape& shape) const {
  for (const auto& rule : rules) {
    if (glob_match(rule.pattern, name)) return rule.cls;
  }
  return shape.size() >= 2 ? default_2d : default_1d;
}

}  // namespace neuromerge
