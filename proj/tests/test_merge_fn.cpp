// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "neuromerge/error.hpp"
#include "neuromerge/merge_fn.hpp"
#include "neuromerge/probe.hpp"

using namespace neuromerge;

namespace {

using Vec = std::vector<double>;

constexpr MergeKind kAllKinds[] = {MergeKind::ElectMean, MergeKind::ElectSum, MergeKind::Mean, MergeKind::Sum};

double merge(MergeKind k, const Vec& v) { return merge_values(MergeFn{k, {}}, v); }

int sign(double x) { return (x > 0) - (x < 0); }

Vec random_values(SplitMix64& rng, std::size_t n) {
  Vec v(n);
  for (auto& x : v) {
    // Mix in exact zeros, as produced by masking.
    x = rng.uniform() < 0.2 ? 0.0 : rng.normal();
  }
  return v;
}

bool close(double a, double b, double rel = 1e-12) {
  return std::fabs(a - b) <= rel * std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace

TEST_CASE("merge_values examples") {
  CHECK(merge(MergeKind::ElectMean, {1, -2, 3}) == 2.0);
  CHECK(merge(MergeKind::ElectMean, {1, -1}) == 0.0);
  CHECK(merge(MergeKind::Mean, {1, -2, 3}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(merge(MergeKind::Sum, {1, -2, 3}) == 2.0);
  CHECK(merge(MergeKind::ElectSum, {-4, 1, -1}) == -5.0);
  // Zeros never join the agreeing subset.
  CHECK(merge(MergeKind::ElectMean, {0, 0, 4}) == 4.0);
  CHECK(merge(MergeKind::ElectSum, {0, 0, 0}) == 0.0);
}

TEST_CASE("merge_elementwise examples") {
  SUBCASE("single row is the identity for every kind") {
    const Vec row = {1.5, -2.0, 0.0, 7.25};
    const std::span<const double> rows[] = {row};
    for (MergeKind k : kAllKinds) CHECK(merge_elementwise(MergeFn{k, {}}, rows) == row);
  }
  SUBCASE("mean of unit rows") {
    const Vec a = {1, 0}, b = {0, 1};
    const std::span<const double> rows[] = {a, b};
    CHECK(merge_elementwise(MergeFn{MergeKind::Mean, {}}, rows) == Vec{0.5, 0.5});
  }
  SUBCASE("elect mean per coordinate") {
    const Vec a = {2, -1}, b = {-2, 3}, c = {2, 1};
    const std::span<const double> rows[] = {a, b, c};
    CHECK(merge_elementwise(MergeFn{MergeKind::ElectMean, {}}, rows) == Vec{2.0, 2.0});
  }
  SUBCASE("ragged rows") {
    const Vec a = {1, 2}, b = {1};
    const std::span<const double> rows[] = {a, b};
    CHECK_THROWS_AS(merge_elementwise(MergeFn{MergeKind::Sum, {}}, rows), ShapeError);
  }
  SUBCASE("no rows") {
    CHECK_THROWS_AS(merge_elementwise(MergeFn{MergeKind::Sum, {}}, {}), ArityError);
  }
}

TEST_CASE("merge_values errors") {
  for (MergeKind k : kAllKinds) {
    CHECK_THROWS_AS(merge(k, {}), ArityError);
    CHECK_THROWS_AS(merge(k, {1.0, std::numeric_limits<double>::quiet_NaN()}), ValidationError);
    CHECK_THROWS_AS(merge(k, {std::numeric_limits<double>::infinity()}), ValidationError);
  }
}

TEST_CASE("kind names") {
  for (MergeKind k : kAllKinds) CHECK(parse_merge_kind(merge_kind_name(k)) == k);
  CHECK(merge_kind_name(MergeKind::ElectMean) == "elect-mean");
  CHECK(parse_merge_kind("elect_sum") == MergeKind::ElectSum);
  CHECK_FALSE(parse_merge_kind("median").has_value());
}

TEST_CASE("task weights") {
  const MergeFn weighted{MergeKind::Mean, {1.0, 3.0}};
  CHECK(merge_values(weighted, Vec{4.0, 8.0}) == 7.0);
  // Elect kinds and sum ignore weights.
  CHECK(merge_values(MergeFn{MergeKind::ElectMean, {1.0, 3.0}}, Vec{4.0, 8.0}) == 6.0);
  CHECK(merge_values(MergeFn{MergeKind::Sum, {1.0, 3.0}}, Vec{4.0, 8.0}) == 12.0);
  CHECK_NOTHROW(weighted.validate(2));
  CHECK_THROWS_AS(weighted.validate(3), ConfigError);
  CHECK_THROWS_AS((MergeFn{MergeKind::Mean, {1.0, 0.0}}.validate(2)), ConfigError);
  CHECK_THROWS_AS((MergeFn{MergeKind::Mean, {1.0, -2.0}}.validate(2)), ConfigError);
  CHECK_NOTHROW(MergeFn{}.validate(5));
}

TEST_CASE("properties over random value lists") {
  SplitMix64 rng(123);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.next() % 9;
    Vec v = random_values(rng, n);
    for (MergeKind k : kAllKinds) {
      const double base = merge(k, v);

      // Permutation invariance.
      Vec p = v;
      std::reverse(p.begin(), p.end());
      if (n > 2) std::rotate(p.begin(), p.begin() + 1, p.end());
      CHECK(close(merge(k, p), base));

      // Scale equivariance for alpha > 0 (powers of two are exact).
      for (double alpha : {0.25, 8.0}) {
        Vec s = v;
        for (auto& x : s) x *= alpha;
        CHECK(merge(k, s) == alpha * base);
      }
      const double alpha = 0.1 + 10.0 * rng.uniform();
      Vec s = v;
      for (auto& x : s) x *= alpha;
      CHECK(close(merge(k, s), alpha * base, 1e-12));

      // Sign soundness.
      if (k == MergeKind::ElectMean || k == MergeKind::ElectSum) {
        double total = 0.0;
        for (double x : v) total += x;
        CHECK((sign(base) == 0 || sign(base) == sign(total)));
      }
    }
  }
}

TEST_CASE("single value is returned unchanged") {
  SplitMix64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform() < 0.1 ? 0.0 : rng.normal() * std::pow(10.0, 10.0 * rng.uniform() - 5.0);
    for (MergeKind k : kAllKinds) CHECK(merge(k, {x}) == x);
  }
}
