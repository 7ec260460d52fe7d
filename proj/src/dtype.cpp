// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "neuromerge/dtype.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace neuromerge {
namespace {

static_assert(std::endian::native == std::endian::little,
              "safetensors payloads are little-endian; big-endian hosts need byte swapping");

// IEEE-style binary format with `kMant` explicit mantissa bits and an
// exponent field of `kExp` bits.
template <int kExp, int kMant>
struct SmallFloat {
  static constexpr int kBias = (1 << (kExp - 1)) - 1;
  static constexpr int kMaxExp = kBias;      // largest unbiased exponent of a finite value
  static constexpr int kMinExp = 1 - kBias;  // exponent of the smallest normal

  static double decode(std::uint16_t bits) noexcept {
    const bool negative = (bits >> (kExp + kMant)) & 1u;
    const unsigned exp_field = (bits >> kMant) & ((1u << kExp) - 1u);
    const unsigned mant = bits & ((1u << kMant) - 1u);
    double magnitude;
    if (exp_field == 0) {
      magnitude = std::ldexp(static_cast<double>(mant), kMinExp - kMant);
    } else if (exp_field == (1u << kExp) - 1u) {
      magnitude = mant == 0 ? std::numeric_limits<double>::infinity()
                            : std::numeric_limits<double>::quiet_NaN();
    } else {
      magnitude = std::ldexp(static_cast<double>(mant + (1u << kMant)),
                             static_cast<int>(exp_field) - kBias - kMant);
    }
    return negative ? -magnitude : magnitude;
  }

  static std::optional<std::uint16_t> encode(double value) noexcept {
    if (!std::isfinite(value)) return std::nullopt;
    const std::uint16_t sign = std::signbit(value) ? std::uint16_t(1u << (kExp + kMant)) : 0;
    const double a = std::fabs(value);
    if (a == 0.0) return sign;

    int frexp_exp = 0;
    std::frexp(a, &frexp_exp);
    int e = frexp_exp - 1;  // a = m * 2^e, m in [1, 2)
    if (e < kMinExp) {
      // Subnormal range: quantum is 2^(kMinExp - kMant). Scaling by a power of
      // two is exact, so nearbyint performs the only rounding (ties to even).
      const double q = std::nearbyint(std::ldexp(a, kMant - kMinExp));
      return static_cast<std::uint16_t>(sign | static_cast<unsigned>(q));
    }
    double q = std::nearbyint((std::ldexp(a, -e) - 1.0) * (1 << kMant));
    if (q == static_cast<double>(1 << kMant)) {
      q = 0.0;
      ++e;
    }
    if (e > kMaxExp) return std::nullopt;
    const unsigned exp_field = static_cast<unsigned>(e + kBias);
    return static_cast<std::uint16_t>(sign | (exp_field << kMant) | static_cast<unsigned>(q));
  }
};

using Half = SmallFloat<5, 10>;
using BFloat16 = SmallFloat<8, 7>;

}  // namespace

std::size_t element_size(DType dtype) noexcept {
  switch (dtype) {
    case DType::F16:
    case DType::BF16:
      return 2;
    case DType::F32:
      return 4;
    case DType::F64:
      return 8;
  }
  return 0;
}

std::string_view dtype_name(DType dtype) noexcept {
  switch (dtype) {
    case DType::F16:
      return "F16";
    case DType::BF16:
      return "BF16";
    case DType::F32:
      return "F32";
    case DType::F64:
      return "F64";
  }
  return "?";
}

std::optional<DType> parse_dtype(std::string_view name) noexcept {
  if (name == "F16") return DType::F16;
  if (name == "BF16") return DType::BF16;
  if (name == "F32") return DType::F32;
  if (name == "F64") return DType::F64;
  return std::nullopt;
}

double half_bits_to_double(std::uint16_t bits) noexcept { return Half::decode(bits); }
double bfloat16_bits_to_double(std::uint16_t bits) noexcept { return BFloat16::decode(bits); }
std::optional<std::uint16_t> double_to_half_bits(double value) noexcept { return Half::encode(value); }
std::optional<std::uint16_t> double_to_bfloat16_bits(double value) noexcept {
  return BFloat16::encode(value);
}

void decode_elements(DType dtype, const unsigned char* src, std::size_t count, double* dst) noexcept {
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* p = src + i * element_size(dtype);
    switch (dtype) {
      case DType::F16:
      case DType::BF16: {
        std::uint16_t bits;
        std::memcpy(&bits, p, sizeof bits);
        dst[i] = dtype == DType::F16 ? Half::decode(bits) : BFloat16::decode(bits);
        break;
      }
      case DType::F32: {
        float v;
        std::memcpy(&v, p, sizeof v);
        dst[i] = v;
        break;
      }
      case DType::F64:
        std::memcpy(&dst[i], p, sizeof(double));
        break;
    }
  }
}

std::optional<std::size_t> encode_elements(DType dtype, const double* src, std::size_t count,
                                           unsigned char* dst) noexcept {
  for (std::size_t i = 0; i < count; ++i) {
    unsigned char* p = dst + i * element_size(dtype);
    switch (dtype) {
      case DType::F16:
      case DType::BF16: {
        const auto bits = dtype == DType::F16 ? Half::encode(src[i]) : BFloat16::encode(src[i]);
        if (!bits) return i;
        std::memcpy(p, &*bits, sizeof(std::uint16_t));
        break;
      }
      case DType::F32: {
        const float v = static_cast<float>(src[i]);
        if (!std::isfinite(v)) return i;
        std::memcpy(p, &v, sizeof v);
        break;
      }
      case DType::F64:
        if (!std::isfinite(src[i])) return i;
        std::memcpy(p, &src[i], sizeof(double));
        break;
    }
  }
  return std::nullopt;
}

}  // namespace neuromerge
