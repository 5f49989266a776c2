// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "circat/tensor.hpp"
#include "circat/variants.hpp"
#include "json.hpp"

namespace circat {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Tensor container: `<stem>.bin` holds every tensor's entries back to back
// as little-endian IEEE-754 binary64, row-major; `<stem>.json` lists
// {name, shape, offset, nbytes} per tensor (offsets in bytes) plus a free
// "meta" object. See docs/formats.md.
struct TensorContainer {
  NamedTensors tensors;
  nlohmann::json meta = nlohmann::json::object();

  const Tensor& at(const std::string& name) const;
};

// Accepts a bare stem or a path ending in .bin / .json.
std::filesystem::path container_stem(const std::filesystem::path& path);

void save_container(const std::filesystem::path& path, const TensorContainer& container);
TensorContainer load_container(const std::filesystem::path& path);

// Mixer parameters with kind / heads / orientation / path echoed into meta.
void save_mixer(const std::filesystem::path& path, const MixerParams& params,
                const MixerOptions& options);
std::pair<MixerParams, MixerOptions> load_mixer(const std::filesystem::path& path);

}  // namespace circat
