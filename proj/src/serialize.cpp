// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "circat/serialize.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

namespace circat {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_le64(std::ostream& os, double x) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(bytes, 8);
}

double get_le64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, p.string() + ": " + e.what());
  }
}

template <template <class> class P>
MixerParams rebuild(const TensorContainer& c) {
  P<Tensor> out;
  out.for_each([&](const char* name, Tensor& t) { t = c.at(name); });
  return out;
}

}  // namespace

const Tensor& TensorContainer::at(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  fail(ErrorCode::kInvalidArgument, "container has no tensor named '" + name + "'");
}

fs::path container_stem(const fs::path& path) {
  const auto ext = path.extension();
  if (ext == ".bin" || ext == ".json") {
    fs::path stem = path;
    return stem.replace_extension();
  }
  return path;
}

void save_container(const fs::path& path, const TensorContainer& container) {
  const fs::path stem = container_stem(path);
  fs::path bin = stem, idx = stem;
  bin += ".bin";
  idx += ".json";
  std::ofstream out(bin, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + bin.string());
  json entries = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : container.tensors) {
    for (double x : t.data()) put_le64(out, x);
    const std::uint64_t nbytes = 8 * t.size();
    entries.push_back({{"name", name}, {"shape", t.shape().dims()}, {"offset", offset}, {"nbytes", nbytes}});
    offset += nbytes;
  }
  out.close();
  require(!out.fail(), ErrorCode::kIo, "write failed for " + bin.string());
  const json index = {{"format", "circat-tensors"},
                      {"version", 1},
                      {"dtype", "float64"},
                      {"endianness", "little"},
                      {"data_file", bin.filename().string()},
                      {"tensors", entries},
                      {"meta", container.meta}};
  std::ofstream js(idx);
  require(static_cast<bool>(js), ErrorCode::kIo, "cannot write " + idx.string());
  js << index.dump(2) << '\n';
  require(!js.fail(), ErrorCode::kIo, "write failed for " + idx.string());
}

TensorContainer load_container(const fs::path& path) {
  const fs::path stem = container_stem(path);
  fs::path idx = stem;
  idx += ".json";
  const json index = read_json(idx);
  require(index.value("format", "") == "circat-tensors", ErrorCode::kIo,
          idx.string() + ": not a circat tensor container");
  require(index.value("version", 0) == 1 && index.value("dtype", "") == "float64" &&
              index.value("endianness", "") == "little",
          ErrorCode::kIo, idx.string() + ": unsupported container version, dtype or endianness");
  const fs::path bin = stem.parent_path() / index.at("data_file").get<std::string>();
  std::ifstream in(bin, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + bin.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  TensorContainer c;
  c.meta = index.value("meta", json::object());
  for (const json& e : index.at("tensors")) {
    const auto dims = e.at("shape").get<std::vector<std::size_t>>();
    const std::uint64_t offset = e.at("offset").get<std::uint64_t>();
    const std::uint64_t nbytes = e.at("nbytes").get<std::uint64_t>();
    const Shape shape(dims);
    require(nbytes == 8 * shape.numel() && offset + nbytes <= bytes.size(), ErrorCode::kIo,
            bin.string() + ": tensor '" + e.at("name").get<std::string>() + "' out of range");
    Buffer data(shape.numel());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = get_le64(bytes.data() + offset + 8 * i);
    c.tensors.emplace_back(e.at("name").get<std::string>(), Tensor(shape, std::move(data)));
  }
  return c;
}

void save_mixer(const fs::path& path, const MixerParams& params, const MixerOptions& options) {
  TensorContainer c;
  c.tensors = named_tensors(params);
  c.meta = {{"mixer", std::string(to_string(kind_of(params)))},
            {"heads", options.heads},
            {"path", std::string(to_string(options.path))},
            {"orientation", std::string(to_string(options.orientation))},
            {"causal", options.causal},
            {"cat_logit_scale", options.cat_logit_scale}};
  save_container(path, c);
}

std::pair<MixerParams, MixerOptions> load_mixer(const fs::path& path) {
  const TensorContainer c = load_container(path);
  MixerOptions o;
  o.heads = c.meta.at("heads").get<std::size_t>();
  o.path = parse_cat_path(c.meta.at("path").get<std::string>());
  o.orientation = parse_orientation(c.meta.at("orientation").get<std::string>());
  o.causal = c.meta.value("causal", false);
  o.cat_logit_scale = c.meta.value("cat_logit_scale", 1.0);
  switch (parse_mixer_kind(c.meta.at("mixer").get<std::string>())) {
    case MixerKind::kAttention: return {rebuild<AttentionParamsT>(c), o};
    case MixerKind::kCat: return {rebuild<CatParamsT>(c), o};
    case MixerKind::kAvgKeyQkv: return {rebuild<AvgKeyParamsT>(c), o};
    case MixerKind::kQOnly: return {rebuild<QOnlyParamsT>(c), o};
    case MixerKind::kVOnly: return {rebuild<VOnlyParamsT>(c), o};
    case MixerKind::kGqa: return {rebuild<GqaParamsT>(c), o};
  }
  fail(ErrorCode::kIo, "unknown mixer kind");
}

}  // namespace circat
