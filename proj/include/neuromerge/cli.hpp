// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "neuromerge/pipeline.hpp"

namespace neuromerge::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAlignment = 3;
inline constexpr int kExitFormat = 4;

inline constexpr int kConfigVersion = 1;

// Reads a JSON or TOML (by extension) config file into a JSON object.
nlohmann::json read_config_file(const std::filesystem::path& path);

// Values for `merge` gathered from a config file or the command line. Unset
// fields fall through to the next layer: command line > file > defaults.
struct MergeSettings {
  std::optional<std::string> base;
  std::vector<std::string> tasks;
  std::optional<std::string> out;
  std::optional<std::string> report;
  std::optional<Method> method;
  std::optional<double> ratio;
  std::optional<double> lambda1;
  std::optional<std::optional<double>> lambda2;  // inner nullopt = auto
  std::optional<MergeKind> merge_fn;
  std::optional<std::vector<double>> task_weights;
  std::optional<std::vector<std::string>> non_neuronal;
  std::optional<std::vector<std::string>> skip;
  std::optional<std::vector<ClassRule>> rules;
  std::optional<TensorClass> default_2d;
  std::optional<TensorClass> default_1d;
  std::optional<CastPolicy> cast_policy;
  std::optional<bool> mask_non_neuronal;
  std::optional<double> orthogonality_tol;
  std::optional<double> svd_drop;

  // Parses a config object; unknown keys and ill-typed values raise ConfigError.
  static MergeSettings from_json(const nlohmann::json& j);
  // Fields set in `over` replace those in *this.
  void overlay(const MergeSettings& over);
};

struct ResolvedMerge {
  std::string base;
  std::vector<std::string> tasks;
  std::string out;
  std::optional<std::string> report;
  MergeConfig config;
};

ResolvedMerge resolve(const MergeSettings& settings);

// Effective config as recorded in the merge report.
nlohmann::json config_to_json(const ResolvedMerge& resolved);

// Entry point: argv[0] is the program name.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace neuromerge::cli
