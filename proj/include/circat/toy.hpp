// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "circat/model.hpp"
#include "json.hpp"

namespace circat {

// Everything a toy training run depends on. JSON keys match the field
// names; see docs/schemas/train_config.schema.json.
struct ToyRunConfig {
  std::string task = "masked_copy";
  std::string mixer = "cat";  // any mixer name or "cat-alter"
  std::size_t layers = 2;
  std::size_t d = 32;
  std::size_t heads = 4;
  std::size_t n = 32;
  std::size_t vocab = 16;
  std::size_t classes = 4;
  std::size_t steps = 2000;
  std::size_t batch = 8;
  double lr = 3e-3;
  double weight_decay = 0.01;
  double max_grad_norm = 0.0;
  std::uint64_t seed = 42;
  std::size_t log_every = 100;
  std::size_t train_examples = 4096;
  std::size_t eval_examples = 256;
  double mask_probability = 0.15;
  std::string path = "fft";
  std::string orientation = "col_shift";
  std::string pooling = "auto";  // token for classification, none otherwise
  bool positions = true;
  std::size_t mlp_multiplier = 4;
  double gqa_ratio = 0.5;
};

nlohmann::json to_json(const ToyRunConfig& c);
// Starts from `base` and overrides the keys present in `j`. Unknown keys and
// ill-typed values throw kInvalidArgument.
ToyRunConfig toy_config_from_json(const nlohmann::json& j, ToyRunConfig base = {});

struct ToyRun {
  ToyRunConfig config;
  Dataset train_data;
  Dataset eval_data;
  TrainState state;
};

// Builds the datasets (seed and seed + 1) and the initial state; validates
// everything up front.
ToyRun prepare_toy_run(const ToyRunConfig& config);
TrainResult run_toy(ToyRun& run, const std::function<void(const TrainPoint&)>& on_log = {});

}  // namespace circat
