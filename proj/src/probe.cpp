// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "neuromerge/probe.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "neuromerge/error.hpp"
#include "neuromerge/subspace.hpp"

namespace neuromerge {

using nlohmann::json;

std::uint64_t SplitMix64::next() noexcept {
  std::uint64_t z = (state_ += kGamma);
  z = (z ^ (z >> 30)) * kMix1;
  z = (z ^ (z >> 27)) * kMix2;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SplitMix64::normal() noexcept {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string_view activation_name(Activation a) noexcept {
  switch (a) {
    case Activation::Identity:
      return "identity";
    case Activation::Relu:
      return "relu";
    case Activation::Tanh:
      return "tanh";
  }
  return "?";
}

std::optional<Activation> parse_activation(std::string_view name) noexcept {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  return std::nullopt;
}

double activate(Activation a, double v) noexcept {
  switch (a) {
    case Activation::Identity:
      return v;
    case Activation::Relu:
      return v > 0.0 ? v : 0.0;
    case Activation::Tanh:
      return std::tanh(v);
  }
  return v;
}

void NetSpec::validate(const Checkpoint& ckpt) const {
  if (layers.empty()) throw ShapeError("network spec has no layers");
  std::optional<std::uint64_t> width;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Tensor& w = ckpt.at(layers[l].weight);
    if (w.shape.size() != 2) {
      throw ShapeError("layer " + std::to_string(l) + " weight '" + layers[l].weight + "' is not 2-D");
    }
    if (width && *width != w.shape[1]) {
      throw ShapeError("layer " + std::to_string(l) + " expects " + std::to_string(w.shape[1]) +
                       " inputs but the previous layer produces " + std::to_string(*width));
    }
    if (layers[l].bias) {
      const Tensor& b = ckpt.at(*layers[l].bias);
      if (b.data.size() != w.shape[0]) {
        throw ShapeError("layer " + std::to_string(l) + " bias '" + *layers[l].bias + "' has " +
                         std::to_string(b.data.size()) + " elements, expected " + std::to_string(w.shape[0]));
      }
    }
    width = w.shape[0];
  }
}

json NetSpec::to_json() const {
  json arr = json::array();
  for (const auto& l : layers) {
    arr.push_back({{"weight", l.weight},
                   {"bias", l.bias ? json(*l.bias) : json(nullptr)},
                   {"activation", std::string(activation_name(l.activation))}});
  }
  return {{"layers", arr}};
}

NetSpec NetSpec::from_json(const json& j) {
  if (!j.is_object() || !j.contains("layers") || !j["layers"].is_array()) {
    throw ConfigError("netspec must be an object with a \"layers\" array");
  }
  NetSpec spec;
  for (const auto& l : j["layers"]) {
    if (!l.is_object() || !l.contains("weight") || !l["weight"].is_string()) {
      throw ConfigError("netspec layer needs a string \"weight\"");
    }
    LayerSpec layer;
    layer.weight = l["weight"].get<std::string>();
    if (l.contains("bias") && !l["bias"].is_null()) {
      if (!l["bias"].is_string()) throw ConfigError("netspec \"bias\" must be a string or null");
      layer.bias = l["bias"].get<std::string>();
    }
    const std::string act = l.value("activation", std::string("identity"));
    const auto parsed = parse_activation(act);
    if (!parsed) throw ConfigError("unknown activation \"" + act + "\"");
    layer.activation = *parsed;
    spec.layers.push_back(std::move(layer));
  }
  return spec;
}

NetSpec NetSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid netspec JSON in '" + path.string() + "': " + e.what());
  }
}

void NetSpec::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << to_json().dump(2) << "\n";
}

std::vector<double> forward(const NetSpec& spec, const Checkpoint& ckpt, std::span<const double> x) {
  spec.validate(ckpt);
  std::vector<double> act(x.begin(), x.end());
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& layer = spec.layers[l];
    const Tensor& w = ckpt.at(layer.weight);
    if (act.size() != w.shape[1]) {
      throw ShapeError("input has " + std::to_string(act.size()) + " entries but layer " + std::to_string(l) +
                       " expects " + std::to_string(w.shape[1]));
    }
    const Tensor* bias = layer.bias ? &ckpt.at(*layer.bias) : nullptr;
    std::vector<double> next(w.shape[0]);
    for (std::uint64_t r = 0; r < w.shape[0]; ++r) {
      double pre = dot(w.row(r), act);
      if (bias) pre += bias->data[r];
      next[r] = activate(layer.activation, pre);
    }
    act = std::move(next);
  }
  return act;
}

std::optional<FixtureRecipe> FixtureRecipe::named(std::string_view name) {
  if (name == "mixed") return mixed();
  if (name == "orthogonal") return pure_orthogonal();
  if (name == "parallel") return pure_parallel();
  return std::nullopt;
}

json FixtureRecipe::to_json() const {
  return {{"parallel_fraction", parallel_fraction},
          {"orthogonal_fraction", orthogonal_fraction},
          {"noise_scale", noise_scale},
          {"delta_scale", delta_scale},
          {"bias_scale", bias_scale}};
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016" PRIx64, v);
  return buf;
}

std::string layer_weight(std::size_t l) { return "layers." + std::to_string(l) + ".weight"; }
std::string layer_bias(std::size_t l) { return "layers." + std::to_string(l) + ".bias"; }

// Rounds every value through the storage dtype.
Checkpoint through_storage(const Checkpoint& c) { return parse_safetensors(serialize_safetensors(c)); }

Tensor task_weight(const Tensor& w0, const FixtureRecipe& recipe, SplitMix64& rng) {
  Tensor out = w0;
  const auto cols = w0.cols();
  std::vector<double> u(cols), orth(cols);
  for (std::uint64_t r = 0; r < w0.rows(); ++r) {
    const auto base_row = w0.row(r);
    const double wn = norm2(base_row);
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    for (auto& v : u) v = rng.normal();
    split_against(base_row, u, orth);
    const double on = norm2(orth);
    auto dst = out.row(r);
    const double scale = recipe.delta_scale * wn;
    const double noise = recipe.noise_scale * wn / std::sqrt(static_cast<double>(cols));
    for (std::uint64_t i = 0; i < cols; ++i) {
      double tau = 0.0;
      if (wn > 0.0) tau += scale * recipe.parallel_fraction * sign * base_row[i] / wn;
      if (on > 0.0) tau += scale * recipe.orthogonal_fraction * orth[i] / on;
      if (recipe.noise_scale != 0.0) tau += noise * rng.normal();
      dst[i] = base_row[i] + tau;
    }
  }
  return out;
}

}  // namespace

json delta_checksums(const Checkpoint& base, const Checkpoint& task) {
  json out = json::object();
  for (const auto& [name, b] : base.tensors) {
    const auto& f = task.at(name).data;
    double sum = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i < b.data.size(); ++i) {
      const double d = f[i] - b.data[i];
      sum += d;
      l1 += std::fabs(d);
    }
    out[name] = {{"sum", sum}, {"l1", l1}};
  }
  return out;
}

Fixture make_fixture(std::uint64_t seed, std::size_t num_tasks, std::span<const std::size_t> dims,
                     const FixtureRecipe& recipe, DType dtype) {
  if (num_tasks == 0) throw ConfigError("fixture needs at least one task");
  if (dims.size() < 2) throw ConfigError("fixture dims need an input and an output size");
  for (auto d : dims) {
    if (d == 0) throw ConfigError("fixture layer sizes must be positive");
  }

  SplitMix64 root(seed);
  SplitMix64 base_rng = root.split();
  Fixture fx;
  const std::size_t num_layers = dims.size() - 1;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::size_t in = dims[l], out = dims[l + 1];
    Tensor w(dtype, {out, in});
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : w.data) v = scale * base_rng.normal();
    Tensor b(dtype, {out});
    for (double& v : b.data) v = 0.1 * base_rng.normal();
    fx.base.tensors.emplace(layer_weight(l), std::move(w));
    fx.base.tensors.emplace(layer_bias(l), std::move(b));
    fx.spec.layers.push_back(
        {layer_weight(l), layer_bias(l), l + 1 == num_layers ? Activation::Identity : Activation::Tanh});
  }
  fx.base.metadata = {{"generator", "neuromerge gen-fixtures"}, {"seed", std::to_string(seed)}};
  fx.base = through_storage(fx.base);

  for (std::size_t t = 0; t < num_tasks; ++t) {
    SplitMix64 rng = root.split();
    Checkpoint task;
    task.metadata = {{"task", std::to_string(t)}};
    for (std::size_t l = 0; l < num_layers; ++l) {
      task.tensors.emplace(layer_weight(l), task_weight(fx.base.at(layer_weight(l)), recipe, rng));
      Tensor b = fx.base.at(layer_bias(l));
      if (recipe.bias_scale != 0.0) {
        for (double& v : b.data) v += recipe.bias_scale * rng.normal();
      }
      task.tensors.emplace(layer_bias(l), std::move(b));
    }
    fx.tasks.push_back(through_storage(task));
  }

  json m;
  m["manifest_version"] = 1;
  m["seed"] = seed;
  m["prng"] = {{"name", "splitmix64"},
               {"gamma", hex64(SplitMix64::kGamma)},
               {"mix1", hex64(SplitMix64::kMix1)},
               {"mix2", hex64(SplitMix64::kMix2)},
               {"normal", "box-muller"},
               {"streams", "root.split() -> base, then one split per task in order"}};
  m["num_tasks"] = num_tasks;
  m["dims"] = std::vector<std::size_t>(dims.begin(), dims.end());
  m["dtype"] = std::string(dtype_name(dtype));
  m["recipe"] = recipe.to_json();
  json tensors = json::array();
  for (const auto& [name, t] : fx.base.tensors) {
    tensors.push_back({{"name", name},
                       {"shape", t.shape},
                       {"dtype", std::string(dtype_name(t.dtype))},
                       {"elements", t.data.size()}});
  }
  m["tensors"] = tensors;
  json tasks = json::array();
  json files = json::object();
  files["base.safetensors"] = hex64(fnv1a64(serialize_safetensors(fx.base)));
  for (std::size_t t = 0; t < num_tasks; ++t) {
    const std::string file = "task_" + std::to_string(t) + ".safetensors";
    tasks.push_back({{"file", file}, {"delta_checksums", delta_checksums(fx.base, fx.tasks[t])}});
    files[file] = hex64(fnv1a64(serialize_safetensors(fx.tasks[t])));
  }
  m["tasks"] = tasks;
  m["files"] = files;
  fx.manifest = std::move(m);
  return fx;
}

json gen_fixtures(std::uint64_t seed, std::size_t num_tasks, std::span<const std::size_t> dims,
                  const std::filesystem::path& out_dir, const FixtureRecipe& recipe, DType dtype) {
  const Fixture fx = make_fixture(seed, num_tasks, dims, recipe, dtype);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
  write_checkpoint(fx.base, out_dir / "base.safetensors");
  for (std::size_t t = 0; t < fx.tasks.size(); ++t) {
    write_checkpoint(fx.tasks[t], out_dir / ("task_" + std::to_string(t) + ".safetensors"));
  }
  fx.spec.save(out_dir / "netspec.json");
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest in '" + out_dir.string() + "'");
  out << fx.manifest.dump(2) << "\n";
  return fx.manifest;
}

LoadedFixture load_fixture(const std::filesystem::path& dir) {
  LoadedFixture fx;
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot open manifest in '" + dir.string() + "'");
  fx.manifest = json::parse(in);
  fx.base = load_checkpoint(dir / "base.safetensors");
  for (const auto& task : fx.manifest.at("tasks")) {
    fx.tasks.push_back(load_checkpoint(dir / task.at("file").get<std::string>()));
  }
  fx.spec = NetSpec::load(dir / "netspec.json");
  return fx;
}

std::string_view ablation_mode_name(AblationMode m) noexcept {
  switch (m) {
    case AblationMode::Finetuned:
      return "finetuned";
    case AblationMode::KeepOrthogonal:
      return "keep_orthogonal";
    case AblationMode::KeepParallel:
      return "keep_parallel";
    case AblationMode::Base:
      return "base";
  }
  return "?";
}

double AblationTable::distance(AblationMode mode, std::size_t task) const {
  for (const auto& r : rows) {
    if (r.mode == mode && r.task == task) return r.mean_l2_distance;
  }
  throw NameError("ablation table has no row for mode " + std::string(ablation_mode_name(mode)) + ", task " +
                  std::to_string(task));
}

std::string AblationTable::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "mode,task,mean_l2_distance\n";
  for (const auto& r : rows) out << ablation_mode_name(r.mode) << "," << r.task << "," << r.mean_l2_distance << "\n";
  return out.str();
}

json AblationTable::to_json() const {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"mode", std::string(ablation_mode_name(r.mode))},
                   {"task", r.task},
                   {"mean_l2_distance", r.mean_l2_distance}});
  }
  return arr;
}

AblationTable ablation_study(const Checkpoint& base, std::span<const Checkpoint> tasks, const NetSpec& spec,
                             std::span<const std::vector<double>> inputs,
                             const TensorClassification& classification) {
  if (inputs.empty()) throw ArityError("ablation needs at least one input vector");
  require_aligned(base, tasks);
  AblationTable table;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const Checkpoint keep_orth = filter_task_vector(base, tasks[t], KeepSubspace::Orthogonal, classification);
    const Checkpoint keep_par = filter_task_vector(base, tasks[t], KeepSubspace::Parallel, classification);
    const std::pair<AblationMode, const Checkpoint*> modes[] = {{AblationMode::Finetuned, &tasks[t]},
                                                                {AblationMode::KeepOrthogonal, &keep_orth},
                                                                {AblationMode::KeepParallel, &keep_par},
                                                                {AblationMode::Base, &base}};
    std::vector<std::vector<double>> reference;
    for (const auto& x : inputs) reference.push_back(forward(spec, tasks[t], x));
    for (const auto& [mode, model] : modes) {
      double total = 0.0;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto y = forward(spec, *model, inputs[i]);
        double sq = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) sq += (y[k] - reference[i][k]) * (y[k] - reference[i][k]);
        total += std::sqrt(sq);
      }
      table.rows.push_back({mode, t, total / static_cast<double>(inputs.size())});
    }
  }
  return table;
}

std::vector<std::vector<double>> read_csv_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": '" + cell + "' is not a number");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_csv_rows(const std::filesystem::path& path, std::span<const std::vector<double>> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.precision(17);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

}  // namespace neuromerge
