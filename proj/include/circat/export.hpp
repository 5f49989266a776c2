// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "circat/model.hpp"

namespace circat {

// Min-max rescale to 0..255 (rounded). A constant map becomes all zeros.
std::vector<std::uint8_t> normalize_map(const Tensor& map);

// Binary P5 graymap, maxval 255.
void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& pixels);

struct PgmImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;
};
PgmImage read_pgm(const std::filesystem::path& path);

struct MapExport {
  std::size_t n = 0;
  std::size_t layers = 0;
  std::size_t tiles_per_row = 0;  // maps of the widest layer
  std::vector<std::vector<Tensor>> maps;  // [layer][head], before normalisation
  std::vector<std::filesystem::path> files;  // per-map images, then mosaic, then raw
  std::filesystem::path mosaic;
  std::filesystem::path raw;  // tensor container holding the raw maps
};

// Writes layer<L>_head<H>.pgm for every map, mosaic.pgm (layers stacked
// vertically, heads left to right, N x N tiles, unused tiles black) and the
// raw float64 maps as the container `maps`. Attention layers give the
// post-softmax map, circulant layers the materialised kernel. Throws
// kInvalidArgument when N exceeds `cap`.
MapExport export_maps(const ModelConfig& config, const ModelParams& params, const ModelInput& input,
                      const std::filesystem::path& out_dir, std::size_t cap = 512);

// Tokens uniform over the input vocabulary (or N(0,1) patches), length n_max.
ModelInput random_model_input(const ModelConfig& config, std::uint64_t seed);

}  // namespace circat
