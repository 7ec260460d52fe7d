// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "neuromerge/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <toml.hpp>

#include "neuromerge/error.hpp"
#include "neuromerge/parallel.hpp"
#include "neuromerge/probe.hpp"
#include "neuromerge/subspace.hpp"

namespace neuromerge::cli {

using nlohmann::json;

namespace {

json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json obj = json::object();
    for (auto&& [k, v] : *t) obj[std::string(k.str())] = toml_to_json(v);
    return obj;
  }
  if (const auto* a = node.as_array()) {
    json arr = json::array();
    for (const auto& v : *a) arr.push_back(toml_to_json(v));
    return arr;
  }
  if (const auto* s = node.as_string()) return s->get();
  if (const auto* i = node.as_integer()) return i->get();
  if (const auto* f = node.as_floating_point()) return f->get();
  if (const auto* b = node.as_boolean()) return b->get();
  throw ConfigError("unsupported TOML value type (dates and times are not valid config values)");
}

std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

double number_field(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("config key \"" + key + "\" must be a number");
  return j.get<double>();
}

std::string string_field(const json& j, const std::string& key) {
  if (!j.is_string()) throw ConfigError("config key \"" + key + "\" must be a string");
  return j.get<std::string>();
}

std::vector<std::string> string_list(const json& j, const std::string& key) {
  if (j.is_string()) return {j.get<std::string>()};
  if (!j.is_array()) throw ConfigError("config key \"" + key + "\" must be a list of strings");
  std::vector<std::string> out;
  for (const auto& v : j) out.push_back(string_field(v, key));
  return out;
}

template <typename T, typename Parse>
T parse_enum(const std::string& text, const std::string& what, Parse parse) {
  if (auto v = parse(text)) return *v;
  throw ConfigError("invalid " + what + " \"" + text + "\"");
}

std::optional<double> parse_lambda2(const std::string& text, const std::string& what) {
  if (text == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("invalid " + what + " \"" + text + "\": expected a number or auto");
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << text;
    if (!out.flush()) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "'");
  }
}

std::vector<Checkpoint> load_all(const std::vector<std::string>& paths) {
  std::vector<Checkpoint> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(load_checkpoint(p));
  return out;
}

TensorClassification classification_from(const std::vector<std::string>& skip,
                                         const std::vector<std::string>& non_neuronal) {
  TensorClassification c;
  for (const auto& p : skip) c.rules.push_back({p, TensorClass::Skip});
  for (const auto& p : non_neuronal) c.rules.push_back({p, TensorClass::NonNeuronal});
  return c;
}

}  // namespace

json read_config_file(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  if (ext == ".toml") {
    try {
      return toml_to_json(toml::parse(in, path.string()));
    } catch (const toml::parse_error& e) {
      std::ostringstream msg;
      msg << "invalid TOML in '" << path.string() << "' at line " << e.source().begin.line << ": "
          << e.description();
      throw ConfigError(msg.str());
    }
  }
  if (ext == ".json") {
    try {
      return json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("invalid JSON in '" + path.string() + "': " + e.what());
    }
  }
  throw ConfigError("config file '" + path.string() + "' must end in .json or .toml");
}

MergeSettings MergeSettings::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be an object/table");
  MergeSettings s;
  for (const auto& [key, v] : j.items()) {
    if (key == "config_version") {
      if (!v.is_number_integer() || v.get<int>() != kConfigVersion) {
        throw ConfigError("unsupported config_version (expected " + std::to_string(kConfigVersion) + ")");
      }
    } else if (key == "base") {
      s.base = string_field(v, key);
    } else if (key == "tasks") {
      s.tasks = string_list(v, key);
    } else if (key == "out") {
      s.out = string_field(v, key);
    } else if (key == "report") {
      s.report = string_field(v, key);
    } else if (key == "method") {
      s.method = parse_enum<Method>(string_field(v, key), "method", parse_method);
    } else if (key == "ratio") {
      s.ratio = number_field(v, key);
    } else if (key == "lambda1") {
      s.lambda1 = number_field(v, key);
    } else if (key == "lambda2") {
      s.lambda2 = v.is_string() ? parse_lambda2(v.get<std::string>(), "lambda2") : number_field(v, key);
    } else if (key == "merge_fn") {
      s.merge_fn = parse_enum<MergeKind>(string_field(v, key), "merge_fn", parse_merge_kind);
    } else if (key == "task_weights") {
      if (!v.is_array()) throw ConfigError("config key \"task_weights\" must be a list of numbers");
      std::vector<double> w;
      for (const auto& x : v) w.push_back(number_field(x, key));
      s.task_weights = w;
    } else if (key == "non_neuronal") {
      s.non_neuronal = string_list(v, key);
    } else if (key == "skip") {
      s.skip = string_list(v, key);
    } else if (key == "rules") {
      if (!v.is_array()) throw ConfigError("config key \"rules\" must be a list of {pattern, class}");
      std::vector<ClassRule> rules;
      for (const auto& r : v) {
        if (!r.is_object() || r.size() != 2 || !r.contains("pattern") || !r.contains("class")) {
          throw ConfigError("each rule must have exactly \"pattern\" and \"class\"");
        }
        rules.push_back({string_field(r["pattern"], "pattern"),
                         parse_enum<TensorClass>(string_field(r["class"], "class"), "tensor class",
                                                 parse_tensor_class)});
      }
      s.rules = rules;
    } else if (key == "default_2d") {
      s.default_2d = parse_enum<TensorClass>(string_field(v, key), "default_2d", parse_tensor_class);
    } else if (key == "default_1d") {
      s.default_1d = parse_enum<TensorClass>(string_field(v, key), "default_1d", parse_tensor_class);
    } else if (key == "cast_policy") {
      s.cast_policy = parse_enum<CastPolicy>(string_field(v, key), "cast_policy", parse_cast_policy);
    } else if (key == "mask_non_neuronal") {
      if (!v.is_boolean()) throw ConfigError("config key \"mask_non_neuronal\" must be a boolean");
      s.mask_non_neuronal = v.get<bool>();
    } else if (key == "orthogonality_tol") {
      s.orthogonality_tol = number_field(v, key);
    } else if (key == "svd_drop") {
      s.svd_drop = number_field(v, key);
    } else {
      throw ConfigError("unknown config key \"" + key + "\"");
    }
  }
  return s;
}

void MergeSettings::overlay(const MergeSettings& o) {
  auto take = [](auto& dst, const auto& src) {
    if (src) dst = src;
  };
  take(base, o.base);
  if (!o.tasks.empty()) tasks = o.tasks;
  take(out, o.out);
  take(report, o.report);
  take(method, o.method);
  take(ratio, o.ratio);
  take(lambda1, o.lambda1);
  take(lambda2, o.lambda2);
  take(merge_fn, o.merge_fn);
  take(task_weights, o.task_weights);
  take(non_neuronal, o.non_neuronal);
  take(skip, o.skip);
  take(rules, o.rules);
  take(default_2d, o.default_2d);
  take(default_1d, o.default_1d);
  take(cast_policy, o.cast_policy);
  take(mask_non_neuronal, o.mask_non_neuronal);
  take(orthogonality_tol, o.orthogonality_tol);
  take(svd_drop, o.svd_drop);
}

ResolvedMerge resolve(const MergeSettings& s) {
  if (!s.base) throw ConfigError("missing --base");
  if (s.tasks.empty()) throw ConfigError("at least one --task is required");
  if (!s.out) throw ConfigError("missing --out");
  ResolvedMerge r;
  r.base = *s.base;
  r.tasks = s.tasks;
  r.out = *s.out;
  r.report = s.report;
  MergeConfig& c = r.config;
  c = MergeConfig::defaults_for(s.method.value_or(Method::Neuro));
  if (s.ratio) c.ratio = *s.ratio;
  if (s.lambda1) c.lambda1 = *s.lambda1;
  if (s.lambda2) c.lambda2 = *s.lambda2;
  if (s.merge_fn) c.merge_fn.kind = *s.merge_fn;
  if (s.task_weights) c.merge_fn.task_weights = *s.task_weights;
  c.classification = classification_from(s.skip.value_or(std::vector<std::string>{}),
                                         s.non_neuronal.value_or(std::vector<std::string>{}));
  if (s.rules) c.classification.rules.insert(c.classification.rules.end(), s.rules->begin(), s.rules->end());
  if (s.default_2d) c.classification.default_2d = *s.default_2d;
  if (s.default_1d) c.classification.default_1d = *s.default_1d;
  if (s.cast_policy) c.cast_policy = *s.cast_policy;
  if (s.mask_non_neuronal) c.mask_non_neuronal = *s.mask_non_neuronal;
  if (s.orthogonality_tol) c.orthogonality_tol = *s.orthogonality_tol;
  if (s.svd_drop) c.svd_drop = *s.svd_drop;
  c.threads = default_thread_count();
  c.validate(r.tasks.size());
  return r;
}

json config_to_json(const ResolvedMerge& r) {
  const MergeConfig& c = r.config;
  json rules = json::array();
  for (const auto& rule : c.classification.rules) {
    rules.push_back({{"pattern", rule.pattern}, {"class", std::string(tensor_class_name(rule.cls))}});
  }
  json j;
  j["config_version"] = kConfigVersion;
  j["base"] = r.base;
  j["tasks"] = r.tasks;
  j["out"] = r.out;
  j["report"] = r.report ? json(*r.report) : json(nullptr);
  j["method"] = std::string(method_name(c.method));
  j["merge_fn"] = std::string(merge_kind_name(c.merge_fn.kind));
  j["task_weights"] = c.merge_fn.task_weights;
  j["ratio"] = c.ratio;
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2 ? json(*c.lambda2) : json("auto");
  j["rules"] = rules;
  j["default_2d"] = std::string(tensor_class_name(c.classification.default_2d));
  j["default_1d"] = std::string(tensor_class_name(c.classification.default_1d));
  j["cast_policy"] = std::string(cast_policy_name(c.cast_policy));
  j["mask_non_neuronal"] = c.mask_non_neuronal;
  j["orthogonality_tol"] = c.orthogonality_tol;
  j["svd_drop"] = c.svd_drop;
  j["threads"] = c.threads;
  return j;
}

namespace {

struct MergeFlags {
  std::string config, base, out, report, method, lambda2, merge_fn, cast_policy;
  std::vector<std::string> tasks, non_neuronal, skip;
  double ratio = 0.0, lambda1 = 0.0;
  std::vector<double> task_weights;
  CLI::Option *o_config{}, *o_base{}, *o_out{}, *o_report{}, *o_method{}, *o_ratio{}, *o_lambda1{},
      *o_lambda2{}, *o_merge_fn{}, *o_tasks{}, *o_non_neuronal{}, *o_skip{}, *o_weights{}, *o_cast{};
};

MergeSettings settings_from_flags(const MergeFlags& f) {
  MergeSettings s;
  if (f.o_base->count()) s.base = f.base;
  if (f.o_tasks->count()) s.tasks = f.tasks;
  if (f.o_out->count()) s.out = f.out;
  if (f.o_report->count()) s.report = f.report;
  if (f.o_method->count()) s.method = parse_enum<Method>(f.method, "--method", parse_method);
  if (f.o_ratio->count()) {
    if (!(f.ratio > 0.0 && f.ratio <= 1.0)) {
      std::ostringstream msg;
      msg << "--ratio must be in (0, 1], got " << f.ratio;
      throw ConfigError(msg.str());
    }
    s.ratio = f.ratio;
  }
  if (f.o_lambda1->count()) {
    if (!(f.lambda1 >= 0.0) || !std::isfinite(f.lambda1)) throw ConfigError("--lambda1 must be non-negative");
    s.lambda1 = f.lambda1;
  }
  if (f.o_lambda2->count()) {
    const auto l2 = parse_lambda2(f.lambda2, "--lambda2");
    if (l2 && !(*l2 > 0.0)) throw ConfigError("--lambda2 must be positive or auto");
    s.lambda2 = l2;
  }
  if (f.o_merge_fn->count()) s.merge_fn = parse_enum<MergeKind>(f.merge_fn, "--merge-fn", parse_merge_kind);
  if (f.o_weights->count()) s.task_weights = f.task_weights;
  if (f.o_non_neuronal->count()) s.non_neuronal = f.non_neuronal;
  if (f.o_skip->count()) s.skip = f.skip;
  if (f.o_cast->count()) s.cast_policy = parse_enum<CastPolicy>(f.cast_policy, "--cast-policy", parse_cast_policy);
  return s;
}

int cmd_merge(const MergeFlags& f) {
  MergeSettings settings;
  if (f.o_config->count()) settings = MergeSettings::from_json(read_config_file(f.config));
  settings.overlay(settings_from_flags(f));
  const ResolvedMerge r = resolve(settings);

  const Checkpoint base = load_checkpoint(r.base);
  const auto tasks = load_all(r.tasks);
  MergeResult result = run_merge(base, tasks, r.config);
  result.report.effective_config = config_to_json(r);
  write_checkpoint(result.merged, r.out);
  if (r.report) write_text_atomic(*r.report, result.report.to_json().dump(2) + "\n");
  std::cerr << "merged " << tasks.size() << " task(s) with " << method_name(r.config.method)
            << " (lambda2 = " << result.report.lambda2 << ") into " << r.out << "\n";
  return kExitOk;
}

struct PairFlags {
  std::string base, task, out, keep, cast_policy;
  std::vector<std::string> non_neuronal, skip;
  bool per_neuron = false;
};

int cmd_filter(const PairFlags& f) {
  const auto keep = parse_enum<KeepSubspace>(f.keep, "--keep", parse_keep_subspace);
  const bool strict = parse_enum<CastPolicy>(f.cast_policy, "--cast-policy", parse_cast_policy) == CastPolicy::Strict;
  const Checkpoint base = load_checkpoint(f.base);
  const Checkpoint task = load_checkpoint(f.task);
  const Checkpoint out = filter_task_vector(base, task, keep, classification_from(f.skip, f.non_neuronal), strict);
  write_checkpoint(out, f.out);
  return kExitOk;
}

struct NeuronRow {
  std::string tensor;
  std::uint64_t row;
  double coeff, gain, par, orth, total;
};

int cmd_decompose(const PairFlags& f) {
  const bool strict = parse_enum<CastPolicy>(f.cast_policy, "--cast-policy", parse_cast_policy) == CastPolicy::Strict;
  const Checkpoint base = load_checkpoint(f.base);
  const Checkpoint tasks[] = {load_checkpoint(f.task)};
  require_aligned(base, tasks, strict);
  const TensorClassification cls = classification_from(f.skip, f.non_neuronal);

  json tensors = json::array();
  std::vector<NeuronRow> neurons;
  std::vector<double> tau, orth;
  for (const auto& [name, b] : base.tensors) {
    const Tensor& t = tasks[0].at(name);
    const TensorClass c = cls.classify(name, b.shape);
    json entry = {{"name", name}, {"class", std::string(tensor_class_name(c))}, {"shape", b.shape}};
    if (c != TensorClass::Neuronal) {
      double sq = 0.0;
      for (std::size_t i = 0; i < b.data.size(); ++i) sq += (t.data[i] - b.data[i]) * (t.data[i] - b.data[i]);
      entry["total_norm"] = std::sqrt(sq);
      tensors.push_back(entry);
      continue;
    }
    const auto cols = b.cols();
    tau.resize(cols);
    orth.resize(cols);
    double par_sq = 0.0, orth_sq = 0.0, total_sq = 0.0;
    double gmin = 0.0, gmax = 0.0, gsum = 0.0;
    for (std::uint64_t r = 0; r < b.rows(); ++r) {
      const auto w0 = b.row(r);
      const auto wt = t.row(r);
      for (std::uint64_t i = 0; i < cols; ++i) tau[i] = wt[i] - w0[i];
      const double c_par = split_against(w0, tau, orth);
      const double p = std::fabs(c_par) * norm2(w0);
      const double o = norm2(orth);
      const double n = norm2(tau);
      const double gain = 1.0 + c_par;
      par_sq += p * p;
      orth_sq += o * o;
      total_sq += n * n;
      gmin = r == 0 ? gain : std::min(gmin, gain);
      gmax = r == 0 ? gain : std::max(gmax, gain);
      gsum += gain;
      if (f.per_neuron) neurons.push_back({name, r, c_par, gain, p, o, n});
    }
    entry["rows"] = b.rows();
    entry["cols"] = cols;
    entry["parallel_norm"] = std::sqrt(par_sq);
    entry["orthogonal_norm"] = std::sqrt(orth_sq);
    entry["total_norm"] = std::sqrt(total_sq);
    entry["sensitivity_gain"] = {{"min", gmin},
                                 {"max", gmax},
                                 {"mean", b.rows() ? gsum / static_cast<double>(b.rows()) : 1.0}};
    tensors.push_back(entry);
  }

  std::ostringstream text;
  text.precision(17);
  if (lower_extension(f.out) == ".csv") {
    if (f.per_neuron) {
      text << "tensor,row,parallel_coeff,sensitivity_gain,parallel_norm,orthogonal_norm,total_norm\n";
      for (const auto& n : neurons) {
        text << n.tensor << "," << n.row << "," << n.coeff << "," << n.gain << "," << n.par << "," << n.orth << ","
             << n.total << "\n";
      }
    } else {
      text << "tensor,class,parallel_norm,orthogonal_norm,total_norm,gain_min,gain_mean,gain_max\n";
      for (const auto& e : tensors) {
        text << e["name"].get<std::string>() << "," << e["class"].get<std::string>() << ",";
        if (e.contains("parallel_norm")) {
          text << e["parallel_norm"].get<double>() << "," << e["orthogonal_norm"].get<double>() << ","
               << e["total_norm"].get<double>() << "," << e["sensitivity_gain"]["min"].get<double>() << ","
               << e["sensitivity_gain"]["mean"].get<double>() << "," << e["sensitivity_gain"]["max"].get<double>();
        } else {
          text << ",," << e["total_norm"].get<double>() << ",,,";
        }
        text << "\n";
      }
    }
  } else {
    json j = {{"tensors", tensors}};
    if (f.per_neuron) {
      json arr = json::array();
      for (const auto& n : neurons) {
        arr.push_back({{"tensor", n.tensor},
                       {"row", n.row},
                       {"parallel_coeff", n.coeff},
                       {"sensitivity_gain", n.gain},
                       {"parallel_norm", n.par},
                       {"orthogonal_norm", n.orth},
                       {"total_norm", n.total}});
      }
      j["neurons"] = arr;
    }
    text << j.dump(2) << "\n";
  }
  write_text_atomic(f.out, text.str());
  return kExitOk;
}

struct FixtureFlags {
  std::uint64_t seed = 7;
  std::size_t tasks = 3;
  std::string dims = "8,16,4";
  std::string out, recipe = "mixed", dtype = "F64";
  double parallel_fraction = 0, orthogonal_fraction = 0, noise_scale = 0, delta_scale = 0, bias_scale = 0;
  CLI::Option *o_pf{}, *o_of{}, *o_noise{}, *o_delta{}, *o_bias{};
};

int cmd_gen_fixtures(const FixtureFlags& f) {
  auto recipe = FixtureRecipe::named(f.recipe);
  if (!recipe) throw ConfigError("unknown --recipe \"" + f.recipe + "\" (expected mixed, orthogonal or parallel)");
  if (f.o_pf->count()) recipe->parallel_fraction = f.parallel_fraction;
  if (f.o_of->count()) recipe->orthogonal_fraction = f.orthogonal_fraction;
  if (f.o_noise->count()) recipe->noise_scale = f.noise_scale;
  if (f.o_delta->count()) recipe->delta_scale = f.delta_scale;
  if (f.o_bias->count()) recipe->bias_scale = f.bias_scale;
  const auto dtype = parse_dtype(f.dtype);
  if (!dtype) throw ConfigError("unknown --dtype \"" + f.dtype + "\"");
  std::vector<std::size_t> dims;
  std::stringstream ss(f.dims);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      dims.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError("--dims must be a comma-separated list of positive integers");
    }
  }
  gen_fixtures(f.seed, f.tasks, dims, f.out, *recipe, *dtype);
  return kExitOk;
}

struct ProbeFlags {
  std::string spec, checkpoint, inputs, out, base;
  std::vector<std::string> tasks, non_neuronal, skip;
  bool ablation = false;
};

int cmd_probe(const ProbeFlags& f) {
  const NetSpec spec = NetSpec::load(f.spec);
  const auto inputs = read_csv_rows(f.inputs);
  if (f.ablation) {
    if (f.base.empty() || f.tasks.empty()) throw ConfigError("--ablation needs --base and at least one --task");
    const Checkpoint base = load_checkpoint(f.base);
    const auto tasks = load_all(f.tasks);
    const AblationTable table =
        ablation_study(base, tasks, spec, inputs, classification_from(f.skip, f.non_neuronal));
    write_text_atomic(f.out, lower_extension(f.out) == ".json" ? table.to_json().dump(2) + "\n" : table.to_csv());
    return kExitOk;
  }
  if (f.checkpoint.empty()) throw ConfigError("--checkpoint is required unless --ablation is given");
  const Checkpoint ckpt = load_checkpoint(f.checkpoint);
  std::vector<std::vector<double>> outputs;
  for (const auto& x : inputs) outputs.push_back(forward(spec, ckpt, x));
  write_csv_rows(f.out, outputs);
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"neuromerge: training-free merging of fine-tuned checkpoints"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  MergeFlags mf;
  auto* merge = app.add_subcommand("merge", "Merge task checkpoints into one");
  mf.o_config = merge->add_option("--config", mf.config, "JSON or TOML config file");
  mf.o_base = merge->add_option("--base", mf.base, "Pretrained checkpoint (.safetensors)");
  mf.o_tasks = merge->add_option("--task", mf.tasks, "Fine-tuned checkpoint (repeatable)");
  mf.o_out = merge->add_option("--out", mf.out, "Merged checkpoint path");
  mf.o_report = merge->add_option("--report", mf.report, "Write a JSON merge report here");
  mf.o_method = merge->add_option("--method", mf.method, "neuro | ties | task-arithmetic | average");
  mf.o_ratio = merge->add_option("--ratio", mf.ratio, "Fraction of task-vector entries kept by the mask");
  mf.o_lambda1 = merge->add_option("--lambda1", mf.lambda1, "Scale of the merged parallel component");
  mf.o_lambda2 = merge->add_option("--lambda2", mf.lambda2, "Scale of the merged orthogonal component, or auto");
  mf.o_merge_fn = merge->add_option("--merge-fn", mf.merge_fn, "elect-mean | elect-sum | mean | sum");
  mf.o_weights = merge->add_option("--task-weight", mf.task_weights, "Per-task weight for mean (repeatable)");
  mf.o_non_neuronal = merge->add_option("--non-neuronal", mf.non_neuronal, "Glob of tensors merged element-wise");
  mf.o_skip = merge->add_option("--skip", mf.skip, "Glob of tensors copied from the base");
  mf.o_cast = merge->add_option("--cast-policy", mf.cast_policy, "strict | widen");

  PairFlags ff;
  ff.cast_policy = "strict";
  auto* filter = app.add_subcommand("filter", "Keep only one subspace of a task vector");
  filter->add_option("--base", ff.base)->required();
  filter->add_option("--task", ff.task)->required();
  filter->add_option("--keep", ff.keep, "orthogonal | parallel")->required();
  filter->add_option("--out", ff.out)->required();
  filter->add_option("--non-neuronal", ff.non_neuronal);
  filter->add_option("--skip", ff.skip);
  filter->add_option("--cast-policy", ff.cast_policy);

  PairFlags df;
  df.cast_policy = "strict";
  auto* decompose_cmd = app.add_subcommand("decompose", "Report parallel/orthogonal norms of a task vector");
  decompose_cmd->add_option("--base", df.base)->required();
  decompose_cmd->add_option("--task", df.task)->required();
  decompose_cmd->add_option("--out", df.out, "Report path (.json or .csv)")->required();
  decompose_cmd->add_flag("--per-neuron", df.per_neuron, "Include one entry per neuron");
  decompose_cmd->add_option("--non-neuronal", df.non_neuronal);
  decompose_cmd->add_option("--skip", df.skip);
  decompose_cmd->add_option("--cast-policy", df.cast_policy);

  FixtureFlags gf;
  auto* gen = app.add_subcommand("gen-fixtures", "Write a synthetic base/task fixture set");
  gen->add_option("--seed", gf.seed);
  gen->add_option("--tasks", gf.tasks);
  gen->add_option("--dims", gf.dims, "Layer sizes, e.g. 8,16,4");
  gen->add_option("--out", gf.out, "Output directory")->required();
  gen->add_option("--recipe", gf.recipe, "mixed | orthogonal | parallel");
  gen->add_option("--dtype", gf.dtype, "F16 | BF16 | F32 | F64");
  gf.o_pf = gen->add_option("--parallel-fraction", gf.parallel_fraction);
  gf.o_of = gen->add_option("--orthogonal-fraction", gf.orthogonal_fraction);
  gf.o_noise = gen->add_option("--noise-scale", gf.noise_scale);
  gf.o_delta = gen->add_option("--delta-scale", gf.delta_scale);
  gf.o_bias = gen->add_option("--bias-scale", gf.bias_scale);

  ProbeFlags pf;
  auto* probe = app.add_subcommand("probe", "Evaluate a toy network or run the subspace ablation");
  probe->add_option("--spec", pf.spec, "netspec.json")->required();
  probe->add_option("--inputs", pf.inputs, "CSV of input rows")->required();
  probe->add_option("--out", pf.out, "Output CSV (or JSON for --ablation)")->required();
  probe->add_option("--checkpoint", pf.checkpoint);
  probe->add_flag("--ablation", pf.ablation, "Compare finetuned / keep-orthogonal / keep-parallel / base");
  probe->add_option("--base", pf.base);
  probe->add_option("--task", pf.tasks);
  probe->add_option("--non-neuronal", pf.non_neuronal);
  probe->add_option("--skip", pf.skip);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (merge->parsed()) return cmd_merge(mf);
    if (filter->parsed()) return cmd_filter(ff);
    if (decompose_cmd->parsed()) return cmd_decompose(df);
    if (gen->parsed()) return cmd_gen_fixtures(gf);
    if (probe->parsed()) return cmd_probe(pf);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const AlignmentError& e) {
    std::cerr << "alignment error: " << e.what() << "\n";
    return kExitAlignment;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const DtypeError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const ValidationError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace neuromerge::cli
