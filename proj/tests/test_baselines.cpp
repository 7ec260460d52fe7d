// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "neuromerge/baselines.hpp"
#include "neuromerge/error.hpp"
#include "neuromerge/merge_fn.hpp"
#include "neuromerge/probe.hpp"

using namespace neuromerge;

namespace {

using Vec = std::vector<double>;

Checkpoint single(const std::string& name, const Vec& v) {
  Checkpoint c;
  c.tensors.emplace(name, Tensor(DType::F64, {v.size()}, v));
  return c;
}

LoadedFixture toy() { return load_fixture(NEUROMERGE_FIXTURE_DIR "/toy"); }

}  // namespace

TEST_CASE("merge_average") {
  SUBCASE("two checkpoints") {
    const Checkpoint tasks[] = {single("w", {0, 2}), single("w", {2, 0})};
    CHECK(merge_average(tasks).tensors.at("w").data == Vec{1, 1});
  }
  SUBCASE("one checkpoint is returned as is") {
    const Checkpoint tasks[] = {single("w", {0.1, -7, 3e10})};
    CHECK(merge_average(tasks).tensors == tasks[0].tensors);
  }
  SUBCASE("fixture tasks match a two-pass mean") {
    const auto fx = toy();
    const auto merged = merge_average(fx.tasks);
    for (const auto& [name, t] : merged.tensors) {
      for (std::size_t i = 0; i < t.data.size(); ++i) {
        double m = 0.0;
        for (const auto& task : fx.tasks) m += task.tensors.at(name).data[i];
        m /= static_cast<double>(fx.tasks.size());
        double corr = 0.0;
        for (const auto& task : fx.tasks) corr += task.tensors.at(name).data[i] - m;
        m += corr / static_cast<double>(fx.tasks.size());
        CHECK(std::fabs(t.data[i] - m) <= 1e-15 * (1.0 + std::fabs(m)));
      }
    }
  }
  SUBCASE("misaligned tasks") {
    const Checkpoint tasks[] = {single("w", {0, 2}), single("v", {2, 0})};
    CHECK_THROWS_AS(merge_average(tasks), AlignmentError);
  }
}

TEST_CASE("merge_task_arithmetic") {
  const Checkpoint base = single("w", {1, 2, 3});
  SUBCASE("lambda zero gives the base") {
    const Checkpoint tasks[] = {single("w", {5, -2, 0.5})};
    CHECK(merge_task_arithmetic(base, build_task_vectors(base, tasks), 0.0).tensors == base.tensors);
  }
  SUBCASE("single task, lambda one gives the task") {
    const Checkpoint tasks[] = {single("w", {5, -2, 0.5})};
    CHECK(merge_task_arithmetic(base, build_task_vectors(base, tasks), 1.0).tensors == tasks[0].tensors);
  }
  SUBCASE("opposite deltas cancel") {
    const Checkpoint tasks[] = {single("w", {2, 4, 6}), single("w", {0, 0, 0})};
    CHECK(merge_task_arithmetic(base, build_task_vectors(base, tasks), 1.0).tensors == base.tensors);
  }
  SUBCASE("average equals task arithmetic with lambda 1/T") {
    const auto fx = toy();
    const auto avg = merge_average(fx.tasks);
    const auto ta = merge_task_arithmetic(fx.base, build_task_vectors(fx.base, fx.tasks), 1.0 / 3.0);
    for (const auto& [name, t] : avg.tensors) {
      const auto& u = ta.tensors.at(name).data;
      for (std::size_t i = 0; i < t.data.size(); ++i) {
        CHECK(std::fabs(t.data[i] - u[i]) <= 1e-12 * (1.0 + std::fabs(t.data[i])));
      }
    }
  }
}

// Hand trace, base = 1 everywhere, r = 0.5 so each task keeps 4 of 8 entries.
//
//   index          0     1     2     3     4     5     6     7
//   tau A          4    -3   0.5     2    -1  0.25     6 -0.75
//   tau B         -2    -5     1     3   0.5    -4  -0.1  0.25
//   A trimmed      4    -3     0     2     0     0     6     0   (keeps 6, 4, -3, 2)
//   B trimmed     -2    -5     0     3     0    -4     0     0   (keeps -5, -4, 3, -2)
//   sum            2    -8     0     5     0    -4     6     0
//   elected sign   +     -     0     +     0     -     +     0
//   agreeing      {4} {-3,-5}  {}  {2,3}   {}  {-4}   {6}   {}
//   merged         4    -4     0   2.5     0    -4     6     0
TEST_CASE("merge_ties hand trace") {
  const Checkpoint base = single("w", Vec(8, 1.0));
  const Vec tau_a = {4, -3, 0.5, 2, -1, 0.25, 6, -0.75};
  const Vec tau_b = {-2, -5, 1, 3, 0.5, -4, -0.1, 0.25};
  Vec a(8), b(8);
  for (int i = 0; i < 8; ++i) {
    a[i] = 1.0 + tau_a[i];
    b[i] = 1.0 + tau_b[i];
  }
  const Checkpoint tasks[] = {single("w", a), single("w", b)};
  const auto tv = build_task_vectors(base, tasks);
  const auto merged = merge_ties(base, tv, 0.5, 1.0);
  const Vec expected = {5, -3, 1, 3.5, 1, -3, 7, 1};
  CHECK(merged.tensors.at("w").data == expected);
  const auto halved = merge_ties(base, tv, 0.5, 0.5);
  CHECK(halved.tensors.at("w").data == Vec{3, -1, 1, 2.25, 1, -1, 4, 1});
}

TEST_CASE("merge_ties properties") {
  SUBCASE("one coordinate across three tasks") {
    const Checkpoint base = single("w", {0});
    const Checkpoint tasks[] = {single("w", {1}), single("w", {-2}), single("w", {3})};
    CHECK(merge_ties(base, build_task_vectors(base, tasks), 1.0, 1.0).tensors.at("w").data == Vec{2.0});
  }
  SUBCASE("r = 1, one task, lambda 1 gives the task") {
    const auto fx = toy();
    const Checkpoint tasks[] = {fx.tasks[1]};
    const auto merged = merge_ties(fx.base, build_task_vectors(fx.base, tasks), 1.0, 1.0);
    for (const auto& [name, t] : merged.tensors) {
      const auto& want = fx.tasks[1].tensors.at(name).data;
      for (std::size_t i = 0; i < want.size(); ++i) {
        CHECK(std::fabs(t.data[i] - want[i]) <= 1e-15 * (1.0 + std::fabs(want[i])));
      }
    }
  }
  SUBCASE("r = 1 is the full-space elect mean of raw deltas") {
    const auto fx = toy();
    const auto tv = build_task_vectors(fx.base, fx.tasks);
    const auto merged = merge_ties(fx.base, tv, 1.0, 1.0);
    const MergeFn elect{MergeKind::ElectMean, {}};
    for (std::size_t n = 0; n < tv.names.size(); ++n) {
      const auto& out = merged.tensors.at(tv.names[n]).data;
      const auto& b = fx.base.tensors.at(tv.names[n]).data;
      for (std::size_t i = 0; i < out.size(); ++i) {
        Vec column;
        for (std::size_t t = 0; t < tv.num_tasks(); ++t) column.push_back(tv.deltas[t][n][i]);
        CHECK(out[i] == b[i] + merge_values(elect, column));
      }
    }
  }
  SUBCASE("invalid ratio") {
    const Checkpoint base = single("w", {0});
    const Checkpoint tasks[] = {single("w", {1})};
    CHECK_THROWS_AS(merge_ties(base, build_task_vectors(base, tasks), 0.0, 1.0), ConfigError);
  }
}
