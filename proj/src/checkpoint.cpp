// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "neuromerge/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "neuromerge/error.hpp"

namespace neuromerge {

using json = nlohmann::json;

namespace {

constexpr std::uint64_t kHeaderPrefix = 8;
constexpr const char* kMetadataKey = "__metadata__";

std::uint64_t read_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void write_u64_le(std::uint64_t v, unsigned char* p) {
  for (int i = 0; i < 8; ++i) {
    p[i] = static_cast<unsigned char>(v & 0xffu);
    v >>= 8;
  }
}

struct Entry {
  std::string name;
  DType dtype;
  Shape shape;
  std::uint64_t begin;
  std::uint64_t end;
};

Entry parse_entry(const std::string& name, const json& desc, std::uint64_t header_offset) {
  auto fail = [&](const std::string& why) -> FormatError {
    return FormatError("tensor '" + name + "': " + why, header_offset);
  };
  if (!desc.is_object()) throw fail("descriptor is not an object");
  for (const char* key : {"dtype", "shape", "data_offsets"}) {
    if (!desc.contains(key)) throw fail(std::string("missing \"") + key + "\"");
  }
  const json& dt = desc["dtype"];
  if (!dt.is_string()) throw fail("dtype is not a string");
  const auto dtype = parse_dtype(dt.get<std::string>());
  if (!dtype) {
    throw DtypeError("tensor '" + name + "' has unsupported dtype \"" + dt.get<std::string>() + "\"");
  }
  Entry e{name, *dtype, {}, 0, 0};
  const json& shape = desc["shape"];
  if (!shape.is_array()) throw fail("shape is not an array");
  for (const json& extent : shape) {
    if (!extent.is_number_unsigned()) throw fail("shape extent is not a non-negative integer");
    e.shape.push_back(extent.get<std::uint64_t>());
  }
  const json& offsets = desc["data_offsets"];
  if (!offsets.is_array() || offsets.size() != 2 || !offsets[0].is_number_unsigned() ||
      !offsets[1].is_number_unsigned()) {
    throw fail("data_offsets must be two non-negative integers");
  }
  e.begin = offsets[0].get<std::uint64_t>();
  e.end = offsets[1].get<std::uint64_t>();
  return e;
}

}  // namespace

std::uint64_t element_count(const Shape& shape) noexcept {
  std::uint64_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(DType dtype_, Shape shape_)
    : dtype(dtype_), shape(std::move(shape_)), data(element_count(shape), 0.0) {}

Tensor::Tensor(DType dtype_, Shape shape_, std::vector<double> data_)
    : dtype(dtype_), shape(std::move(shape_)), data(std::move(data_)) {
  if (data.size() != element_count(shape)) {
    throw ShapeError("tensor data has " + std::to_string(data.size()) + " elements but shape " +
                     shape_to_string(shape) + " needs " + std::to_string(element_count(shape)));
  }
}

std::uint64_t Tensor::rows() const noexcept { return shape.size() < 2 ? 1 : shape[0]; }

std::uint64_t Tensor::cols() const noexcept {
  if (shape.size() < 2) return data.size();
  return shape[0] == 0 ? 0 : data.size() / shape[0];
}

std::span<const double> Tensor::row(std::uint64_t r) const {
  const auto c = cols();
  return std::span<const double>(data).subspan(r * c, c);
}

std::span<double> Tensor::row(std::uint64_t r) {
  const auto c = cols();
  return std::span<double>(data).subspan(r * c, c);
}

const Tensor& Checkpoint::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw NameError("no tensor named '" + name + "'");
  return it->second;
}

Checkpoint parse_safetensors(std::span<const unsigned char> bytes) {
  if (bytes.size() < kHeaderPrefix) {
    throw FormatError("file is shorter than the 8-byte header length prefix", 0);
  }
  const std::uint64_t header_len = read_u64_le(bytes.data());
  if (header_len > bytes.size() - kHeaderPrefix) {
    throw FormatError("header length " + std::to_string(header_len) + " exceeds file size " +
                          std::to_string(bytes.size()),
                      0);
  }
  const auto* header_begin = bytes.data() + kHeaderPrefix;
  json header;
  try {
    header = json::parse(header_begin, header_begin + header_len);
  } catch (const json::parse_error& e) {
    const std::uint64_t at = e.byte > 0 ? e.byte - 1 : 0;
    throw FormatError(std::string("invalid JSON header: ") + e.what(), kHeaderPrefix + at);
  }
  if (!header.is_object()) throw FormatError("header is not a JSON object", kHeaderPrefix);

  Checkpoint ckpt;
  std::vector<Entry> entries;
  for (const auto& [key, value] : header.items()) {
    if (key == kMetadataKey) {
      if (!value.is_object()) throw FormatError("__metadata__ is not an object", kHeaderPrefix);
      for (const auto& [mk, mv] : value.items()) {
        if (!mv.is_string()) {
          throw FormatError("__metadata__ value for '" + mk + "' is not a string", kHeaderPrefix);
        }
        ckpt.metadata.emplace(mk, mv.get<std::string>());
      }
      continue;
    }
    entries.push_back(parse_entry(key, value, kHeaderPrefix));
  }

  const std::uint64_t data_start = kHeaderPrefix + header_len;
  const std::uint64_t data_len = bytes.size() - data_start;
  for (const Entry& e : entries) {
    if (e.begin > e.end || e.end > data_len) {
      throw FormatError("tensor '" + e.name + "' data range [" + std::to_string(e.begin) + ", " +
                            std::to_string(e.end) + ") is outside the " + std::to_string(data_len) +
                            "-byte data region",
                        data_start + std::min(e.begin, data_len));
    }
    const std::uint64_t expected = element_count(e.shape) * element_size(e.dtype);
    if (e.end - e.begin != expected) {
      throw FormatError("tensor '" + e.name + "' occupies " + std::to_string(e.end - e.begin) +
                            " bytes but shape " + shape_to_string(e.shape) + " needs " +
                            std::to_string(expected),
                        data_start + e.begin);
    }
  }
  std::vector<const Entry*> by_offset;
  for (const Entry& e : entries) {
    if (e.end > e.begin) by_offset.push_back(&e);
  }
  std::sort(by_offset.begin(), by_offset.end(),
            [](const Entry* a, const Entry* b) { return a->begin < b->begin; });
  for (std::size_t i = 1; i < by_offset.size(); ++i) {
    if (by_offset[i]->begin < by_offset[i - 1]->end) {
      throw FormatError("tensors '" + by_offset[i - 1]->name + "' and '" + by_offset[i]->name +
                            "' have overlapping data ranges",
                        data_start + by_offset[i]->begin);
    }
  }

  for (const Entry& e : entries) {
    Tensor t(e.dtype, e.shape);
    decode_elements(e.dtype, bytes.data() + data_start + e.begin, t.data.size(), t.data.data());
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      if (!std::isfinite(t.data[i])) {
        throw ValidationError("tensor '" + e.name + "' has a non-finite element at flat index " +
                              std::to_string(i));
      }
    }
    ckpt.tensors.emplace(e.name, std::move(t));
  }
  return ckpt;
}

std::vector<unsigned char> serialize_safetensors(const Checkpoint& ckpt) {
  json header = json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    if (t.data.size() != element_count(t.shape)) {
      throw ShapeError("tensor '" + name + "' has inconsistent shape and data size");
    }
    const std::uint64_t nbytes = t.data.size() * element_size(t.dtype);
    header[name] = {{"dtype", std::string(dtype_name(t.dtype))},
                    {"shape", t.shape},
                    {"data_offsets", {offset, offset + nbytes}}};
    offset += nbytes;
  }
  if (!ckpt.metadata.empty()) header[kMetadataKey] = ckpt.metadata;

  std::string text = header.dump();
  text.append((8 - text.size() % 8) % 8, ' ');

  std::vector<unsigned char> out(kHeaderPrefix + text.size() + offset);
  write_u64_le(text.size(), out.data());
  std::memcpy(out.data() + kHeaderPrefix, text.data(), text.size());
  unsigned char* cursor = out.data() + kHeaderPrefix + text.size();
  for (const auto& [name, t] : ckpt.tensors) {
    if (auto bad = encode_elements(t.dtype, t.data.data(), t.data.size(), cursor)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "tensor '" << name << "' element " << *bad << " (" << t.data[*bad]
          << ") is not representable as " << dtype_name(t.dtype);
      throw DtypeError(msg.str());
    }
    cursor += t.data.size() * element_size(t.dtype);
  }
  return out;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return parse_safetensors(bytes);
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_safetensors(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "'");
  }
}

std::string_view mismatch_kind_name(MismatchKind kind) noexcept {
  switch (kind) {
    case MismatchKind::MissingInBase:
      return "missing_in_base";
    case MismatchKind::MissingInTask:
      return "missing_in_task";
    case MismatchKind::Shape:
      return "shape_mismatch";
    case MismatchKind::Dtype:
      return "dtype_mismatch";
  }
  return "?";
}

std::string AlignmentReport::to_string() const {
  std::string s;
  for (const auto& issue : issues) {
    if (!s.empty()) s += "\n";
    s += "task " + std::to_string(issue.task) + ": " + std::string(mismatch_kind_name(issue.kind)) +
         " '" + issue.tensor + "'";
    if (!issue.detail.empty()) s += " (" + issue.detail + ")";
  }
  return s;
}

AlignmentReport validate_aligned(const Checkpoint& base, std::span<const Checkpoint> tasks,
                                 bool check_dtypes) {
  AlignmentReport report;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    for (const auto& [name, bt] : base.tensors) {
      auto it = task.tensors.find(name);
      if (it == task.tensors.end()) {
        report.issues.push_back({t, MismatchKind::MissingInTask, name, {}});
        continue;
      }
      const Tensor& tt = it->second;
      if (bt.shape != tt.shape) {
        report.issues.push_back({t, MismatchKind::Shape, name,
                                 "base " + shape_to_string(bt.shape) + " vs task " + shape_to_string(tt.shape)});
      }
      if (check_dtypes && bt.dtype != tt.dtype) {
        report.issues.push_back({t, MismatchKind::Dtype, name,
                                 "base " + std::string(dtype_name(bt.dtype)) + " vs task " +
                                     std::string(dtype_name(tt.dtype))});
      }
    }
    for (const auto& [name, tt] : task.tensors) {
      if (!base.tensors.contains(name)) report.issues.push_back({t, MismatchKind::MissingInBase, name, {}});
    }
  }
  return report;
}

void require_aligned(const Checkpoint& base, std::span<const Checkpoint> tasks, bool check_dtypes) {
  auto report = validate_aligned(base, tasks, check_dtypes);
  if (!report.empty()) throw AlignmentError("checkpoints are not aligned:\n" + report.to_string());
}

}  // namespace neuromerge
