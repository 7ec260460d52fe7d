// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace neuromerge {

// Storage dtypes understood by the safetensors reader/writer. All arithmetic
// happens in binary64; these only describe the on-disk representation.
enum class DType { F16, BF16, F32, F64 };

std::size_t element_size(DType dtype) noexcept;

// Safetensors spelling: "F16", "BF16", "F32", "F64".
std::string_view dtype_name(DType dtype) noexcept;
std::optional<DType> parse_dtype(std::string_view name) noexcept;

// Bit-level conversions for the 16-bit formats. The encoders round to
// nearest, ties to even, and return nullopt when the value overflows the
// target format (or is not finite).
double half_bits_to_double(std::uint16_t bits) noexcept;
double bfloat16_bits_to_double(std::uint16_t bits) noexcept;
std::optional<std::uint16_t> double_to_half_bits(double value) noexcept;
std::optional<std::uint16_t> double_to_bfloat16_bits(double value) noexcept;

// Decodes `count` little-endian elements of `dtype` from `src` into `dst`.
void decode_elements(DType dtype, const unsigned char* src, std::size_t count, double* dst) noexcept;

// Encodes into little-endian bytes. Returns the index of the first element
// that is not representable, or nullopt on success.
std::optional<std::size_t> encode_elements(DType dtype, const double* src, std::size_t count,
                                           unsigned char* dst) noexcept;

}  // namespace neuromerge
