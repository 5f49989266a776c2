// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "circat/autograd.hpp"
#include "circat/optim.hpp"
#include "circat/tasks.hpp"
#include "circat/variants.hpp"
#include "json.hpp"

namespace circat {

enum class Pooling { kToken, kAvg, kNone };

std::string_view to_string(Pooling pooling);
Pooling parse_pooling(std::string_view s);

// [attention, cat, attention, ...] of length n_layers.
std::vector<MixerKind> build_cat_alter_schedule(std::size_t n_layers);
std::vector<MixerKind> build_uniform_schedule(MixerKind kind, std::size_t n_layers);
// "cat-alter" or any mixer name (repeated for every layer).
std::vector<MixerKind> build_schedule(std::string_view mixer, std::size_t n_layers);

struct ModelConfig {
  std::size_t n_layers = 2;
  std::size_t d = 32;
  std::size_t heads = 4;
  std::size_t n_max = 32;
  std::vector<MixerKind> schedule = build_cat_alter_schedule(2);
  Pooling pooling = Pooling::kNone;
  Objective objective = Objective::kMaskedLm;
  // Token ids lie in [0, input_vocab). input_dim > 0 switches to real-valued
  // patch rows of that width and ignores input_vocab.
  std::size_t input_vocab = 17;
  std::size_t input_dim = 0;
  std::size_t outputs = 16;
  std::size_t mlp_multiplier = 4;
  double mask_probability = 0.15;
  bool positions = true;
  CatPath path = CatPath::kFft;
  Orientation orientation = Orientation::kColShift;
  double cat_logit_scale = 1.0;
  double gqa_ratio = 0.5;
  double init_scale = 1.0;

  bool causal() const { return objective == Objective::kCausalLm; }
  MixerOptions mixer_options() const;
  // Throws kInvalidArgument on any inconsistency.
  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

template <class H>
struct BlockParamsT {
  H ln1_g, ln1_b;
  MixerParamsT<H> mixer;
  H ln2_g, ln2_b;
  H w1, b1, w2, b2;

  template <class Self, class F>
  static void visit(Self& s, const std::string& prefix, F&& f) {
    f(prefix + "ln1_g", s.ln1_g);
    f(prefix + "ln1_b", s.ln1_b);
    std::visit([&](auto& m) { m.for_each([&](const char* n, auto& t) { f(prefix + "mixer." + n, t); }); },
               s.mixer);
    f(prefix + "ln2_g", s.ln2_g);
    f(prefix + "ln2_b", s.ln2_b);
    f(prefix + "w1", s.w1);
    f(prefix + "b1", s.b1);
    f(prefix + "w2", s.w2);
    f(prefix + "b2", s.b2);
  }
};

// Embedding (token table or bias-free patch projection), positions, blocks,
// final norm and a linear head.
template <class H>
struct ModelParamsT {
  H embed;      // input_vocab x D, or input_dim x D for patches
  H pos;        // n_max x D
  std::vector<BlockParamsT<H>> blocks;
  H lnf_g, lnf_b;
  H head_w, head_b;  // D x outputs, 1 x outputs

  template <class F> void for_each(F&& f) { visit(*this, f); }
  template <class F> void for_each(F&& f) const { visit(*this, f); }

 private:
  template <class Self, class F>
  static void visit(Self& s, F&& f) {
    f(std::string("embed"), s.embed);
    f(std::string("pos"), s.pos);
    for (std::size_t i = 0; i < s.blocks.size(); ++i)
      BlockParamsT<H>::visit(s.blocks[i], "blocks." + std::to_string(i) + ".", f);
    f(std::string("lnf_g"), s.lnf_g);
    f(std::string("lnf_b"), s.lnf_b);
    f(std::string("head_w"), s.head_w);
    f(std::string("head_b"), s.head_b);
  }
};

using ModelParams = ModelParamsT<Tensor>;
using ModelVars = ModelParamsT<Var>;

ModelParams init_model(const ModelConfig& config, std::uint64_t seed);
std::vector<Tensor> flatten(const ModelParams& p);
std::vector<std::string> parameter_names(const ModelParams& p);
// Inverse of flatten: replaces every tensor of `layout` in order.
ModelParams unflatten(const ModelParams& layout, std::span<const Tensor> values);
std::size_t scalar_count(const ModelParams& p);
ModelVars bind(Tape& tape, const ModelParams& p, bool requires_grad);
// Replaces every Var of `vars` in for_each order.
void rebind(ModelVars& vars, std::span<const Var> values);

// Either token ids or patch rows, per config.input_dim.
struct ModelInput {
  std::vector<std::size_t> tokens;
  Tensor patches;

  std::size_t length() const { return tokens.empty() ? patches.rows() : tokens.size(); }
};

// Block: x + mixer(ln1(x)), then + w2 gelu(w1 ln2(x) + b1) + b2.
Var block_forward(Var x, const BlockParamsT<Var>& block, const MixerOptions& options,
                  MapSink* maps = nullptr);

// Logits: N x outputs for pooling kNone, 1 x outputs otherwise. `maps`
// receives one sink per layer when given.
Var model_forward(Tape& tape, const ModelInput& input, const ModelConfig& config,
                  const ModelVars& params, std::vector<MapSink>* maps = nullptr);
Tensor model_logits(const ModelInput& input, const ModelConfig& config, const ModelParams& params,
                    std::vector<MapSink>* maps = nullptr);

// Summed cross-entropy of one example; divide by the target count for the
// mean. Throws kInvalidArgument when the example has no targets.
Var example_loss_sum(Var logits, const Example& example);
// Mean cross-entropy over every target of every example (plain forward).
double mean_loss(const ModelConfig& config, const ModelParams& params,
                 std::span<const Example> batch);

struct TrainState {
  ModelConfig config;
  ModelParams params;
  AdamState optim;
  std::uint64_t seed = 0;
};

TrainState init_train_state(const ModelConfig& config, std::uint64_t seed);

// One AdamW step on the batch mean loss. Returns the loss before the
// update. A non-finite loss or gradient throws kNonFinite and leaves the
// state unchanged.
double train_step(TrainState& state, std::span<const Example> batch, const AdamWConfig& hyper);

struct TrainOptions {
  std::size_t steps = 2000;
  std::size_t batch = 8;
  std::size_t log_every = 100;
  AdamWConfig adamw{};
};

struct TrainPoint {
  std::size_t step;
  double loss;
};

struct TrainResult {
  std::vector<TrainPoint> curve;  // batch loss of every step
  double final_loss = 0.0;
  std::size_t steps_done = 0;
  bool diverged = false;
  std::string error;
};

// Samples batches uniformly (with replacement) from `data` using the
// state's seed; final_loss is mean_loss over `eval` after the last step.
// `on_log` runs every log_every steps and after the last one.
TrainResult train(TrainState& state, const Dataset& data, const Dataset& eval,
                  const TrainOptions& options,
                  const std::function<void(const TrainPoint&)>& on_log = {});

// Checkpoint: parameter container `<stem>` (meta holds the config) and an
// optimizer container `<stem>.optim` with m./v. moments plus step and seed.
void save_checkpoint(const std::filesystem::path& stem, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& stem);

}  // namespace circat
