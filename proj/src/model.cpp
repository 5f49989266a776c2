// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


#include "circat/model.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "circat/error.hpp"
#include "circat/rng.hpp"
#include "circat/serialize.hpp"

namespace circat {

using nlohmann::json;

std::string_view to_string(Pooling pooling) {
  switch (pooling) {
    case Pooling::kToken: return "token";
    case Pooling::kAvg: return "avg";
    case Pooling::kNone: return "none";
  }
  return "?";
}

Pooling parse_pooling(std::string_view s) {
  for (Pooling p : {Pooling::kToken, Pooling::kAvg, Pooling::kNone})
    if (s == to_string(p)) return p;
  fail(ErrorCode::kInvalidArgument, "unknown pooling '" + std::string(s) + "'");
}

std::vector<MixerKind> build_cat_alter_schedule(std::size_t n_layers) {
  std::vector<MixerKind> out(n_layers);
  for (std::size_t i = 0; i < n_layers; ++i)
    out[i] = i % 2 == 0 ? MixerKind::kAttention : MixerKind::kCat;
  return out;
}

std::vector<MixerKind> build_uniform_schedule(MixerKind kind, std::size_t n_layers) {
  return std::vector<MixerKind>(n_layers, kind);
}

std::vector<MixerKind> build_schedule(std::string_view mixer, std::size_t n_layers) {
  if (mixer == "cat-alter") return build_cat_alter_schedule(n_layers);
  return build_uniform_schedule(parse_mixer_kind(mixer), n_layers);
}

MixerOptions ModelConfig::mixer_options() const {
  MixerOptions o;
  o.heads = heads;
  o.path = path;
  o.orientation = orientation;
  o.causal = causal();
  o.cat_logit_scale = cat_logit_scale;
  return o;
}

void ModelConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    require(ok, ErrorCode::kInvalidArgument, "model config: " + msg);
  };
  check(n_layers >= 1, "n_layers must be >= 1");
  check(schedule.size() == n_layers, "schedule length " + std::to_string(schedule.size()) +
                                         " differs from n_layers " + std::to_string(n_layers));
  check(d >= 1 && heads >= 1 && d % heads == 0, "D must be a positive multiple of H");
  check(n_max >= 1, "n_max must be >= 1");
  check(outputs >= 1, "outputs must be >= 1");
  check(input_dim > 0 || input_vocab >= 1, "input_vocab must be >= 1");
  check(mlp_multiplier >= 1, "mlp_multiplier must be >= 1");
  check(init_scale > 0.0, "init_scale must be positive");
  if (objective == Objective::kMaskedLm)
    check(mask_probability > 0.0 && mask_probability < 1.0, "mask_probability must lie in (0, 1)");
  if (objective != Objective::kClassification)
    check(pooling == Pooling::kNone, "language-model objectives need pooling 'none'");
  else
    check(pooling != Pooling::kNone, "classification needs pooling 'token' or 'avg'");
  for (MixerKind k : schedule)
    check(!(causal() && k == MixerKind::kAvgKeyQkv), "avgkey-qkv has no causal form");
}

void to_json(json& j, const ModelConfig& c) {
  json schedule = json::array();
  for (MixerKind k : c.schedule) schedule.push_back(std::string(to_string(k)));
  j = json{{"n_layers", c.n_layers},
           {"d", c.d},
           {"heads", c.heads},
           {"n_max", c.n_max},
           {"schedule", schedule},
           {"pooling", std::string(to_string(c.pooling))},
           {"objective", std::string(to_string(c.objective))},
           {"input_vocab", c.input_vocab},
           {"input_dim", c.input_dim},
           {"outputs", c.outputs},
           {"mlp_multiplier", c.mlp_multiplier},
           {"mask_probability", c.mask_probability},
           {"positions", c.positions},
           {"path", std::string(to_string(c.path))},
           {"orientation", std::string(to_string(c.orientation))},
           {"cat_logit_scale", c.cat_logit_scale},
           {"gqa_ratio", c.gqa_ratio},
           {"init_scale", c.init_scale}};
}

void from_json(const json& j, ModelConfig& c) {
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.d = j.at("d").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.n_max = j.at("n_max").get<std::size_t>();
  c.schedule.clear();
  for (const auto& s : j.at("schedule")) c.schedule.push_back(parse_mixer_kind(s.get<std::string>()));
  c.pooling = parse_pooling(j.at("pooling").get<std::string>());
  c.objective = parse_objective(j.at("objective").get<std::string>());
  c.input_vocab = j.at("input_vocab").get<std::size_t>();
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.outputs = j.at("outputs").get<std::size_t>();
  c.mlp_multiplier = j.at("mlp_multiplier").get<std::size_t>();
  c.mask_probability = j.at("mask_probability").get<double>();
  c.positions = j.at("positions").get<bool>();
  c.path = parse_cat_path(j.at("path").get<std::string>());
  c.orientation = parse_orientation(j.at("orientation").get<std::string>());
  c.cat_logit_scale = j.at("cat_logit_scale").get<double>();
  c.gqa_ratio = j.at("gqa_ratio").get<double>();
  c.init_scale = j.at("init_scale").get<double>();
}

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::size_t d = config.d, hidden = config.mlp_multiplier * d;
  const double s = config.init_scale;
  const double lin = s / std::sqrt(static_cast<double>(d));
  auto normal = [&](std::size_t r, std::size_t c, double sd) {
    return Tensor::normal(Shape{r, c}, rng, sd);
  };
  ModelParams p;
  p.embed = config.input_dim > 0
                ? normal(config.input_dim, d, s / std::sqrt(static_cast<double>(config.input_dim)))
                : normal(config.input_vocab, d, s);
  p.pos = normal(config.n_max, d, config.positions ? s : 0.0);
  for (MixerKind kind : config.schedule) {
    BlockParamsT<Tensor> b{Tensor::full(Shape{1, d}, 1.0),
                           Tensor::zeros(Shape{1, d}),
                           init_mixer(kind, d, config.heads, config.n_max, config.gqa_ratio, rng, lin),
                           Tensor::full(Shape{1, d}, 1.0),
                           Tensor::zeros(Shape{1, d}),
                           normal(d, hidden, lin),
                           Tensor::zeros(Shape{1, hidden}),
                           normal(hidden, d, s / std::sqrt(static_cast<double>(hidden))),
                           Tensor::zeros(Shape{1, d})};
    p.blocks.push_back(std::move(b));
  }
  p.lnf_g = Tensor::full(Shape{1, d}, 1.0);
  p.lnf_b = Tensor::zeros(Shape{1, d});
  p.head_w = normal(d, config.outputs, 0.1 * lin);
  p.head_b = Tensor::zeros(Shape{1, config.outputs});
  return p;
}

std::vector<Tensor> flatten(const ModelParams& p) {
  std::vector<Tensor> out;
  p.for_each([&](const std::string&, const Tensor& t) { out.push_back(t); });
  return out;
}

std::vector<std::string> parameter_names(const ModelParams& p) {
  std::vector<std::string> out;
  p.for_each([&](const std::string& n, const Tensor&) { out.push_back(n); });
  return out;
}

ModelParams unflatten(const ModelParams& layout, std::span<const Tensor> values) {
  ModelParams out = layout;
  std::size_t i = 0;
  out.for_each([&](const std::string& name, Tensor& t) {
    require(i < values.size(), ErrorCode::kShapeMismatch, "unflatten: too few tensors");
    require(values[i].shape() == t.shape(), ErrorCode::kShapeMismatch,
            "unflatten: shape mismatch for " + name);
    t = values[i++];
  });
  require(i == values.size(), ErrorCode::kShapeMismatch, "unflatten: too many tensors");
  return out;
}

std::size_t scalar_count(const ModelParams& p) {
  std::size_t n = 0;
  p.for_each([&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

ModelVars bind(Tape& tape, const ModelParams& p, bool requires_grad) {
  ModelVars v;
  v.embed = tape.leaf(p.embed, requires_grad);
  v.pos = tape.leaf(p.pos, requires_grad);
  for (const auto& b : p.blocks) {
    v.blocks.push_back({tape.leaf(b.ln1_g, requires_grad), tape.leaf(b.ln1_b, requires_grad),
                        bind(tape, b.mixer, requires_grad), tape.leaf(b.ln2_g, requires_grad),
                        tape.leaf(b.ln2_b, requires_grad), tape.leaf(b.w1, requires_grad),
                        tape.leaf(b.b1, requires_grad), tape.leaf(b.w2, requires_grad),
                        tape.leaf(b.b2, requires_grad)});
  }
  v.lnf_g = tape.leaf(p.lnf_g, requires_grad);
  v.lnf_b = tape.leaf(p.lnf_b, requires_grad);
  v.head_w = tape.leaf(p.head_w, requires_grad);
  v.head_b = tape.leaf(p.head_b, requires_grad);
  return v;
}

void rebind(ModelVars& vars, std::span<const Var> values) {
  std::size_t i = 0;
  vars.for_each([&](const std::string&, Var& v) {
    require(i < values.size(), ErrorCode::kShapeMismatch, "rebind: too few values");
    v = values[i++];
  });
  require(i == values.size(), ErrorCode::kShapeMismatch, "rebind: too many values");
}

Var block_forward(Var x, const BlockParamsT<Var>& block, const MixerOptions& options,
                  MapSink* maps) {
  Var h = add(x, mixer_forward(layer_norm(x, block.ln1_g, block.ln1_b), block.mixer, options, maps));
  Var u = gelu(add_row(matmul(layer_norm(h, block.ln2_g, block.ln2_b), block.w1), block.b1));
  return add(h, add_row(matmul(u, block.w2), block.b2));
}

Var model_forward(Tape& tape, const ModelInput& input, const ModelConfig& config,
                  const ModelVars& params, std::vector<MapSink>* maps) {
  const std::size_t n = input.length();
  require(n >= 1, ErrorCode::kInvalidArgument, "model_forward: empty input");
  require(n <= config.n_max, ErrorCode::kInvalidArgument,
          "model_forward: length " + std::to_string(n) + " exceeds n_max " +
              std::to_string(config.n_max));
  Var h;
  if (config.input_dim > 0) {
    require(input.tokens.empty() && input.patches.cols() == config.input_dim,
            ErrorCode::kShapeMismatch,
            "model_forward: expected patch rows of width " + std::to_string(config.input_dim));
    h = matmul(tape.constant(input.patches), params.embed);
  } else {
    for (std::size_t t : input.tokens)
      require(t < config.input_vocab, ErrorCode::kInvalidArgument,
              "model_forward: token id " + std::to_string(t) + " outside vocab of " +
                  std::to_string(config.input_vocab));
    h = gather_rows(params.embed, input.tokens);
  }
  if (config.positions) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    h = add(h, gather_rows(params.pos, rows));
  }
  const MixerOptions options = config.mixer_options();
  if (maps) maps->assign(params.blocks.size(), {});
  for (std::size_t l = 0; l < params.blocks.size(); ++l)
    h = block_forward(h, params.blocks[l], options, maps ? &(*maps)[l] : nullptr);
  h = layer_norm(h, params.lnf_g, params.lnf_b);
  switch (config.pooling) {
    case Pooling::kToken: {
      const std::size_t first = 0;
      h = gather_rows(h, std::span<const std::size_t>(&first, 1));
      break;
    }
    case Pooling::kAvg: h = mean_rows(h); break;
    case Pooling::kNone: break;
  }
  return add_row(matmul(h, params.head_w), params.head_b);
}

Tensor model_logits(const ModelInput& input, const ModelConfig& config, const ModelParams& params,
                    std::vector<MapSink>* maps) {
  Tape tape;
  const ModelVars v = bind(tape, params, false);
  return model_forward(tape, input, config, v, maps).value();
}

Var example_loss_sum(Var logits, const Example& example) {
  require(!example.targets.empty(), ErrorCode::kInvalidArgument, "loss: example has no targets");
  require(example.targets.size() == example.target_rows.size(), ErrorCode::kShapeMismatch,
          "loss: target rows and targets differ in length");
  return cross_entropy_sum(logits, example.target_rows, example.targets);
}

namespace {

ModelInput input_of(const Example& e) { return {e.tokens, {}}; }

std::size_t target_total(std::span<const Example> batch) {
  std::size_t n = 0;
  for (const Example& e : batch) n += e.targets.size();
  require(n > 0, ErrorCode::kInvalidArgument, "loss: batch has no targets");
  return n;
}

}  // namespace

double mean_loss(const ModelConfig& config, const ModelParams& params,
                 std::span<const Example> batch) {
  const std::size_t total = target_total(batch);
  double acc = 0.0;
  for (const Example& e : batch) {
    Tape tape;
    const ModelVars v = bind(tape, params, false);
    acc += example_loss_sum(model_forward(tape, input_of(e), config, v), e).value()[0];
  }
  return acc / static_cast<double>(total);
}

TrainState init_train_state(const ModelConfig& config, std::uint64_t seed) {
  TrainState s{config, init_model(config, seed), {}, seed};
  s.optim = AdamState::zeros_like(flatten(s.params));
  return s;
}

double train_step(TrainState& state, std::span<const Example> batch, const AdamWConfig& hyper) {
  const std::size_t total = target_total(batch);
  Tape tape;
  const ModelVars v = bind(tape, state.params, true);
  Var loss_sum;
  for (const Example& e : batch) {
    Var l = example_loss_sum(model_forward(tape, input_of(e), state.config, v), e);
    loss_sum = loss_sum.valid() ? add(loss_sum, l) : l;
  }
  Var loss = scale(loss_sum, 1.0 / static_cast<double>(total));
  const double value = loss.value()[0];
  require(std::isfinite(value), ErrorCode::kNonFinite,
          "train_step: non-finite loss at step " + std::to_string(state.optim.step + 1));
  tape.backward(loss);
  std::vector<Tensor> grads;
  v.for_each([&](const std::string&, const Var& var) { grads.push_back(tape.grad(var)); });
  std::vector<Tensor> params = flatten(state.params);
  AdamState next = state.optim;
  adamw_update(params, grads, next, hyper);
  state.params = unflatten(state.params, params);
  state.optim = std::move(next);
  return value;
}

TrainResult train(TrainState& state, const Dataset& data, const Dataset& eval,
                  const TrainOptions& options, const std::function<void(const TrainPoint&)>& on_log) {
  require(!data.examples.empty() && !eval.examples.empty(), ErrorCode::kInvalidArgument,
          "train: empty dataset");
  require(options.batch >= 1, ErrorCode::kInvalidArgument, "train: batch must be >= 1");
  TrainResult result;
  std::uint64_t mix = state.seed ^ 0x7261696e5f62617fULL;
  Rng rng(Rng::splitmix64(mix));
  std::vector<Example> batch(options.batch);
  for (std::size_t step = 1; step <= options.steps; ++step) {
    for (auto& e : batch) e = data.examples[rng.below(data.examples.size())];
    try {
      const double loss = train_step(state, batch, options.adamw);
      result.curve.push_back({step, loss});
      result.steps_done = step;
      if (on_log && (step % std::max<std::size_t>(options.log_every, 1) == 0 || step == options.steps))
        on_log(result.curve.back());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonFinite) throw;
      result.diverged = true;
      result.error = std::string(e.what()) + " (last good step " +
                     std::to_string(result.steps_done) + ")";
      result.final_loss = std::nan("");
      return result;
    }
  }
  result.final_loss = mean_loss(state.config, state.params, eval.examples);
  return result;
}

void save_checkpoint(const std::filesystem::path& stem, const TrainState& state) {
  const auto base = container_stem(stem);
  TensorContainer params;
  state.params.for_each(
      [&](const std::string& name, const Tensor& t) { params.tensors.emplace_back(name, t); });
  params.meta = json{{"kind", "circat-model"},
                     {"config", state.config},
                     {"seed", state.seed},
                     {"step", state.optim.step}};
  save_container(base, params);

  TensorContainer optim;
  const auto names = parameter_names(state.params);
  for (std::size_t i = 0; i < names.size(); ++i) {
    optim.tensors.emplace_back("m." + names[i], state.optim.m[i]);
    optim.tensors.emplace_back("v." + names[i], state.optim.v[i]);
  }
  optim.meta = json{{"kind", "circat-adamw"}, {"step", state.optim.step}, {"seed", state.seed}};
  save_container(base.string() + ".optim", optim);
}

TrainState load_checkpoint(const std::filesystem::path& stem) {
  const auto base = container_stem(stem);
  const TensorContainer params = load_container(base);
  require(params.meta.value("kind", "") == "circat-model", ErrorCode::kInvalidArgument,
          "load_checkpoint: " + base.string() + " is not a model checkpoint");
  TrainState state;
  try {
    state.config = params.meta.at("config").get<ModelConfig>();
    state.seed = params.meta.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, "load_checkpoint: bad config: " + std::string(e.what()));
  }
  state.config.validate();
  const ModelParams layout = init_model(state.config, 0);
  std::vector<Tensor> values;
  for (const std::string& name : parameter_names(layout)) values.push_back(params.at(name));
  state.params = unflatten(layout, values);

  const auto optim_path = std::filesystem::path(base.string() + ".optim.json");
  if (std::filesystem::exists(optim_path)) {
    const TensorContainer optim = load_container(optim_path);
    for (const std::string& name : parameter_names(layout)) {
      state.optim.m.push_back(optim.at("m." + name));
      state.optim.v.push_back(optim.at("v." + name));
    }
    state.optim.step = optim.meta.at("step").get<std::size_t>();
  } else {
    state.optim = AdamState::zeros_like(values);
    state.optim.step = params.meta.value("step", std::size_t{0});
  }
  return state;
}

}  // namespace circat
