// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "neuromerge/error.hpp"
#include "neuromerge/probe.hpp"
#include "neuromerge/subspace.hpp"
#include "neuromerge/svd_merge.hpp"

using namespace neuromerge;

namespace {

using Vec = std::vector<double>;

constexpr MergeKind kAllKinds[] = {MergeKind::ElectMean, MergeKind::ElectSum, MergeKind::Mean, MergeKind::Sum};

NeuronStack stack_of(const std::vector<Vec>& rows) {
  std::vector<std::span<const double>> spans(rows.begin(), rows.end());
  return NeuronStack(spans);
}

NeuronStack random_stack(SplitMix64& rng, std::size_t t, std::size_t d) {
  NeuronStack s(t, d);
  for (std::size_t r = 0; r < t; ++r) {
    for (auto& x : s.row(r)) x = rng.normal();
  }
  return s;
}

// Orthogonal components of random task vectors against one random w0.
NeuronStack orthogonal_stack(SplitMix64& rng, std::size_t t, std::size_t d) {
  Vec w0(d);
  for (auto& x : w0) x = rng.normal();
  NeuronStack s(t, d);
  for (std::size_t r = 0; r < t; ++r) {
    Vec tau(d);
    for (auto& x : tau) x = rng.normal();
    split_against(w0, tau, s.row(r));
  }
  return s;
}

// || D P P^T - D ||_F / || D ||_F
double reconstruction_error(const NeuronStack& s, const SvdCoordinates& c) {
  double err = 0.0, total = 0.0;
  for (std::size_t r = 0; r < s.tasks(); ++r) {
    Vec rec(s.dim(), 0.0);
    for (const auto& axis : c.axes) {
      const double coord = dot(s.row(r), axis);
      for (std::size_t i = 0; i < rec.size(); ++i) rec[i] += coord * axis[i];
    }
    for (std::size_t i = 0; i < rec.size(); ++i) {
      err += (rec[i] - s.row(r)[i]) * (rec[i] - s.row(r)[i]);
      total += s.row(r)[i] * s.row(r)[i];
    }
  }
  return total == 0.0 ? std::sqrt(err) : std::sqrt(err / total);
}

Vec row_mean(const NeuronStack& s) {
  Vec m(s.dim(), 0.0);
  for (std::size_t r = 0; r < s.tasks(); ++r) {
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += s.row(r)[i];
  }
  for (auto& x : m) x /= static_cast<double>(s.tasks());
  return m;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

void check_axes(const SvdCoordinates& c) {
  for (std::size_t i = 0; i < c.rank(); ++i) {
    for (std::size_t j = 0; j < c.rank(); ++j) {
      CHECK(std::fabs(dot(c.axes[i], c.axes[j]) - (i == j ? 1.0 : 0.0)) <= 1e-10);
    }
    if (i > 0) CHECK(c.singular_values[i - 1] >= c.singular_values[i]);
    CHECK(c.singular_values[i] > 0.0);
    // Largest-magnitude coordinate is positive.
    const auto it = std::max_element(c.axes[i].begin(), c.axes[i].end(),
                                     [](double a, double b) { return std::fabs(a) < std::fabs(b); });
    CHECK(*it > 0.0);
  }
}

}  // namespace

TEST_CASE("svd_coordinates examples") {
  SUBCASE("identity rows") {
    const auto s = stack_of({{1, 0}, {0, 1}});
    const auto c = svd_coordinates(s);
    REQUIRE(c.rank() == 2);
    CHECK(c.singular_values[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c.singular_values[1] == doctest::Approx(1.0).epsilon(1e-15));
    check_axes(c);
    CHECK(reconstruction_error(s, c) <= 1e-12);
  }
  SUBCASE("single row") {
    const auto s = stack_of({{3, 4}});
    const auto c = svd_coordinates(s);
    REQUIRE(c.rank() == 1);
    CHECK(c.singular_values[0] == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(c.axes[0][0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(c.axes[0][1] == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("all zero rows") {
    NeuronStack s(3, 5);
    CHECK(svd_coordinates(s).rank() == 0);
    CHECK(merge_orthogonal(s, MergeFn{}) == Vec(5, 0.0));
  }
  SUBCASE("duplicate and zero rows are rank deficient") {
    const auto s = stack_of({{1, 2, 3}, {1, 2, 3}, {0, 0, 0}, {-2, -4, -6}});
    const auto c = svd_coordinates(s);
    CHECK(c.rank() == 1);
    check_axes(c);
    CHECK(reconstruction_error(s, c) <= 1e-12);
  }
  SUBCASE("empty dimensions are rejected") {
    CHECK_THROWS_AS(NeuronStack(0, 3), ShapeError);
    CHECK_THROWS_AS(NeuronStack(2, 0), ShapeError);
  }
}

TEST_CASE("merge_orthogonal examples") {
  SUBCASE("single row is reproduced") {
    SplitMix64 rng(1);
    for (std::size_t d : {1u, 2u, 7u, 64u}) {
      const auto s = random_stack(rng, 1, d);
      for (MergeKind k : kAllKinds) {
        const auto out = merge_orthogonal(s, MergeFn{k, {}});
        const double scale = max_abs(s.row(0));
        for (std::size_t i = 0; i < d; ++i) CHECK(std::fabs(out[i] - s.row(0)[i]) <= 1e-12 * scale);
      }
    }
  }
  SUBCASE("identity rows, mean") {
    const auto out = merge_orthogonal(stack_of({{1, 0}, {0, 1}}), MergeFn{MergeKind::Mean, {}});
    CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(out[1] == doctest::Approx(0.5).epsilon(1e-14));
  }
}

TEST_CASE("random stacks: fidelity, mean oracle, sign invariance, row space") {
  SplitMix64 rng(77);
  struct Size {
    std::size_t t, d;
  };
  const Size sizes[] = {{1, 1}, {2, 2}, {2, 3}, {3, 8}, {4, 16}, {8, 64}, {5, 5}, {3, 1024}, {8, 8}};
  for (const auto& [t, d] : sizes) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto s = trial % 2 == 0 || d < 2 ? random_stack(rng, t, d) : orthogonal_stack(rng, t, d);
      const auto c = svd_coordinates(s);
      check_axes(c);
      CHECK(c.rank() <= t);
      CHECK(reconstruction_error(s, c) <= 1e-9);

      // Mean oracle.
      const auto merged = merge_orthogonal(s, MergeFn{MergeKind::Mean, {}});
      const auto oracle = row_mean(s);
      const double scale = std::max(max_abs(oracle), max_abs(merged));
      for (std::size_t i = 0; i < d; ++i) CHECK(std::fabs(merged[i] - oracle[i]) <= 1e-10 * scale);

      for (MergeKind k : kAllKinds) {
        const MergeFn fn{k, {}};
        const auto out = merge_in_coordinates(s, c, fn);

        // Flipping any subset of axes leaves the result unchanged.
        SvdCoordinates flipped = c;
        for (std::size_t a = 0; a < flipped.rank(); ++a) {
          if ((a + trial) % 2 == 0) {
            for (auto& x : flipped.axes[a]) x = -x;
          }
        }
        const auto out_flipped = merge_in_coordinates(s, flipped, fn);
        const double so = std::max(1.0, max_abs(out));
        for (std::size_t i = 0; i < d; ++i) CHECK(std::fabs(out[i] - out_flipped[i]) <= 1e-12 * so);

        // The result lies in the span of the axes.
        Vec resid = out;
        for (const auto& axis : c.axes) {
          const double coord = dot(out, axis);
          for (std::size_t i = 0; i < d; ++i) resid[i] -= coord * axis[i];
        }
        CHECK(norm2(resid) <= 1e-10 * std::max(norm2(out), 1e-300));
      }
    }
  }
}

TEST_CASE("merged orthogonal components stay orthogonal to w0") {
  SplitMix64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + rng.next() % 40;
    const std::size_t t = 1 + rng.next() % 6;
    Vec w0(d);
    for (auto& x : w0) x = rng.normal();
    NeuronStack s(t, d);
    for (std::size_t r = 0; r < t; ++r) {
      Vec tau(d);
      for (auto& x : tau) x = rng.normal();
      split_against(w0, tau, s.row(r));
    }
    for (MergeKind k : kAllKinds) {
      const auto out = merge_orthogonal(s, MergeFn{k, {}});
      CHECK(std::fabs(dot(out, w0)) <= 1e-10 * std::max(norm2(out), 1e-300) * norm2(w0));
    }
  }
}

TEST_CASE("deterministic output") {
  SplitMix64 rng(3);
  const auto s = random_stack(rng, 5, 33);
  const auto a = svd_coordinates(s);
  const auto b = svd_coordinates(s);
  CHECK(a.axes == b.axes);
  CHECK(a.singular_values == b.singular_values);
}
