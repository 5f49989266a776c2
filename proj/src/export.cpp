// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


#include "circat/export.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "circat/error.hpp"
#include "circat/rng.hpp"
#include "circat/serialize.hpp"

namespace circat {

std::vector<std::uint8_t> normalize_map(const Tensor& map) {
  const auto d = map.data();
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  std::vector<std::uint8_t> out(d.size(), 0);
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < d.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround((d[i] - *lo) / range * 255.0));
  return out;
}

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& pixels) {
  require(pixels.size() == width * height, ErrorCode::kShapeMismatch,
          "write_pgm: pixel count differs from width * height");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "write_pgm: cannot open " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  require(out.good(), ErrorCode::kIo, "write_pgm: write failed for " + path.string());
}

PgmImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "read_pgm: cannot open " + path.string());
  std::string magic;
  std::size_t maxval = 0;
  PgmImage img;
  in >> magic >> img.width >> img.height >> maxval;
  require(magic == "P5" && maxval == 255 && in.get() == '\n', ErrorCode::kInvalidArgument,
          "read_pgm: " + path.string() + " is not an 8-bit P5 graymap");
  img.pixels.resize(img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  require(static_cast<std::size_t>(in.gcount()) == img.pixels.size(), ErrorCode::kIo,
          "read_pgm: truncated pixel data in " + path.string());
  return img;
}

ModelInput random_model_input(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  ModelInput in;
  if (config.input_dim > 0) {
    in.patches = Tensor::normal(Shape{config.n_max, config.input_dim}, rng);
  } else {
    in.tokens.resize(config.n_max);
    for (auto& t : in.tokens) t = rng.below(config.input_vocab);
  }
  return in;
}

MapExport export_maps(const ModelConfig& config, const ModelParams& params, const ModelInput& input,
                      const std::filesystem::path& out_dir, std::size_t cap) {
  const std::size_t n = input.length();
  require(n <= cap, ErrorCode::kInvalidArgument,
          "export_maps: N = " + std::to_string(n) + " exceeds the mosaic cap of " +
              std::to_string(cap));
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  require(!ec && std::filesystem::is_directory(out_dir), ErrorCode::kIo,
          "export_maps: cannot create " + out_dir.string());

  MapExport ex;
  ex.n = n;
  std::vector<MapSink> sinks;
  (void)model_logits(input, config, params, &sinks);
  ex.layers = sinks.size();
  for (const MapSink& s : sinks) ex.tiles_per_row = std::max(ex.tiles_per_row, s.size());
  ex.maps.assign(sinks.begin(), sinks.end());

  TensorContainer raw;
  const std::size_t width = ex.tiles_per_row * n, height = ex.layers * n;
  std::vector<std::uint8_t> mosaic(width * height, 0);
  for (std::size_t l = 0; l < ex.layers; ++l)
    for (std::size_t h = 0; h < ex.maps[l].size(); ++h) {
      const Tensor& m = ex.maps[l][h];
      const auto px = normalize_map(m);
      const std::string name = "layer" + std::to_string(l) + "_head" + std::to_string(h);
      const auto file = out_dir / (name + ".pgm");
      write_pgm(file, n, n, px);
      ex.files.push_back(file);
      for (std::size_t i = 0; i < n; ++i)
        std::copy_n(px.data() + i * n, n, mosaic.data() + (l * n + i) * width + h * n);
      raw.tensors.emplace_back(name, m);
    }
  ex.mosaic = out_dir / "mosaic.pgm";
  write_pgm(ex.mosaic, width, height, mosaic);
  ex.files.push_back(ex.mosaic);
  nlohmann::json schedule = nlohmann::json::array();
  for (MixerKind k : config.schedule) schedule.push_back(std::string(to_string(k)));
  raw.meta = {{"kind", "circat-maps"}, {"n", n}, {"schedule", schedule}};
  ex.raw = out_dir / "maps";
  save_container(ex.raw, raw);
  ex.files.push_back(out_dir / "maps.bin");
  ex.files.push_back(out_dir / "maps.json");
  return ex;
}

}  // namespace circat
