// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "neuromerge/checkpoint.hpp"
#include "neuromerge/classification.hpp"

namespace neuromerge {

// SplitMix64. Every fixture is a pure function of the seed and recipe.
class SplitMix64 {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kMix1 = 0xBF58476D1CE4E5B9ull;
  static constexpr std::uint64_t kMix2 = 0x94D049BB133111EBull;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() noexcept;
  double uniform() noexcept;  // [0, 1) with 53 random bits
  double normal() noexcept;   // Box-Muller, one draw per call
  SplitMix64 split() noexcept { return SplitMix64(next()); }

 private:
  std::uint64_t state_;
};

enum class Activation { Identity, Relu, Tanh };

std::string_view activation_name(Activation a) noexcept;
std::optional<Activation> parse_activation(std::string_view name) noexcept;
double activate(Activation a, double v) noexcept;

struct LayerSpec {
  std::string weight;
  std::optional<std::string> bias;
  Activation activation = Activation::Identity;
};

// A feed-forward stack of affine layers: x <- act(W x + b).
struct NetSpec {
  std::vector<LayerSpec> layers;

  // Throws NameError for missing tensors and ShapeError when layers do not compose.
  void validate(const Checkpoint& ckpt) const;

  nlohmann::json to_json() const;
  static NetSpec from_json(const nlohmann::json& j);
  static NetSpec load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

// Single-threaded binary64 evaluation in fixed coordinate order.
std::vector<double> forward(const NetSpec& spec, const Checkpoint& ckpt, std::span<const double> x);

// How each task's weight deltas are synthesized, per neuron row w0:
//   tau = delta_scale*|w0| * (parallel_fraction * (+-w0/|w0|) + orthogonal_fraction * u)
//         + noise_scale*|w0|/sqrt(d) * g
// with u a random unit vector orthogonal to w0 and g standard normal. Bias
// deltas are bias_scale * g.
struct FixtureRecipe {
  double parallel_fraction = 0.3;
  double orthogonal_fraction = 0.7;
  double noise_scale = 0.05;
  double delta_scale = 0.2;
  double bias_scale = 0.05;

  static FixtureRecipe mixed() { return {}; }
  static FixtureRecipe pure_orthogonal() { return {0.0, 1.0, 0.0, 0.2, 0.0}; }
  static FixtureRecipe pure_parallel() { return {1.0, 0.0, 0.0, 0.2, 0.0}; }
  static std::optional<FixtureRecipe> named(std::string_view name);

  nlohmann::json to_json() const;
};

struct Fixture {
  Checkpoint base;
  std::vector<Checkpoint> tasks;
  NetSpec spec;
  nlohmann::json manifest;
};

// Layer sizes `dims` = [input, hidden..., output]. Hidden layers use tanh,
// the last layer is linear. Values pass through `dtype` storage rounding so
// in-memory fixtures equal what gets written.
Fixture make_fixture(std::uint64_t seed, std::size_t num_tasks, std::span<const std::size_t> dims,
                     const FixtureRecipe& recipe = FixtureRecipe::mixed(), DType dtype = DType::F64);

// Writes base.safetensors, task_<t>.safetensors, netspec.json and
// manifest.json to `out_dir` and returns the manifest.
nlohmann::json gen_fixtures(std::uint64_t seed, std::size_t num_tasks, std::span<const std::size_t> dims,
                            const std::filesystem::path& out_dir,
                            const FixtureRecipe& recipe = FixtureRecipe::mixed(), DType dtype = DType::F64);

struct LoadedFixture {
  Checkpoint base;
  std::vector<Checkpoint> tasks;
  NetSpec spec;
  nlohmann::json manifest;
};

LoadedFixture load_fixture(const std::filesystem::path& dir);

// 64-bit FNV-1a, used for file checksums in the manifest.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes) noexcept;

// Per-tensor {"sum", "l1"} of task - base.
nlohmann::json delta_checksums(const Checkpoint& base, const Checkpoint& task);

enum class AblationMode { Finetuned, KeepOrthogonal, KeepParallel, Base };

std::string_view ablation_mode_name(AblationMode m) noexcept;

struct AblationRow {
  AblationMode mode;
  std::size_t task;
  double mean_l2_distance;
};

struct AblationTable {
  std::vector<AblationRow> rows;

  double distance(AblationMode mode, std::size_t task) const;
  std::string to_csv() const;  // header: mode,task,mean_l2_distance
  nlohmann::json to_json() const;
};

// For every task and mode, the mean L2 distance between the mode's outputs
// and the fine-tuned model's outputs over `inputs`.
AblationTable ablation_study(const Checkpoint& base, std::span<const Checkpoint> tasks, const NetSpec& spec,
                             std::span<const std::vector<double>> inputs,
                             const TensorClassification& classification = {});

// Comma-separated rows of numbers; blank lines and lines starting with '#'
// are ignored.
std::vector<std::vector<double>> read_csv_rows(const std::filesystem::path& path);
void write_csv_rows(const std::filesystem::path& path, std::span<const std::vector<double>> rows);

}  // namespace neuromerge
