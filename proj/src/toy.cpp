// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


#include "circat/toy.hpp"

#include "circat/error.hpp"

namespace circat {

using nlohmann::json;

#define CIRCAT_TOY_FIELDS(X)                                                                  \
  X(task) X(mixer) X(layers) X(d) X(heads) X(n) X(vocab) X(classes) X(steps) X(batch) X(lr)  \
  X(weight_decay) X(max_grad_norm) X(seed) X(log_every) X(train_examples) X(eval_examples)    \
  X(mask_probability) X(path) X(orientation) X(pooling) X(positions) X(mlp_multiplier)       \
  X(gqa_ratio)

json to_json(const ToyRunConfig& c) {
  json j = json::object();
#define CIRCAT_PUT(f) j[#f] = c.f;
  CIRCAT_TOY_FIELDS(CIRCAT_PUT)
#undef CIRCAT_PUT
  return j;
}

namespace {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  const json& v = j.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    require(v.is_boolean(), ErrorCode::kInvalidArgument, std::string("config: ") + key + " must be a boolean");
  } else if constexpr (std::is_same_v<T, std::string>) {
    require(v.is_string(), ErrorCode::kInvalidArgument, std::string("config: ") + key + " must be a string");
  } else if constexpr (std::is_floating_point_v<T>) {
    require(v.is_number(), ErrorCode::kInvalidArgument, std::string("config: ") + key + " must be a number");
  } else {
    require(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0),
            ErrorCode::kInvalidArgument,
            std::string("config: ") + key + " must be a non-negative integer");
  }
  out = v.get<T>();
}

}  // namespace

ToyRunConfig toy_config_from_json(const json& j, ToyRunConfig base) {
  require(j.is_object(), ErrorCode::kInvalidArgument, "config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
#define CIRCAT_KNOWN(f) known |= key == #f;
    CIRCAT_TOY_FIELDS(CIRCAT_KNOWN)
#undef CIRCAT_KNOWN
    require(known, ErrorCode::kInvalidArgument, "config: unknown key '" + key + "'");
  }
#define CIRCAT_GET(f) \
  if (j.contains(#f)) read_field(j, #f, base.f);
  CIRCAT_TOY_FIELDS(CIRCAT_GET)
#undef CIRCAT_GET
  return base;
}

ToyRun prepare_toy_run(const ToyRunConfig& c) {
  require(c.batch >= 1 && c.train_examples >= 1 && c.eval_examples >= 1 && c.layers >= 1,
          ErrorCode::kInvalidArgument, "config: batch, layers and example counts must be >= 1");
  require(c.lr > 0.0 && c.weight_decay >= 0.0, ErrorCode::kInvalidArgument,
          "config: lr must be positive and weight_decay non-negative");
  const TaskKind kind = parse_task_kind(c.task);
  TaskSizes sizes{c.train_examples, c.n, c.vocab, c.classes, c.mask_probability};
  ToyRun run;
  run.config = c;
  run.train_data = make_toy_task(kind, c.seed, sizes);
  sizes.count = c.eval_examples;
  run.eval_data = make_toy_task(kind, c.seed + 1, sizes);

  ModelConfig m;
  m.n_layers = c.layers;
  m.d = c.d;
  m.heads = c.heads;
  m.n_max = c.n;
  m.schedule = build_schedule(c.mixer, c.layers);
  m.objective = run.train_data.objective;
  m.pooling = c.pooling == "auto"
                  ? (m.objective == Objective::kClassification ? Pooling::kToken : Pooling::kNone)
                  : parse_pooling(c.pooling);
  m.input_vocab = run.train_data.input_vocab;
  m.outputs = run.train_data.outputs;
  m.mlp_multiplier = c.mlp_multiplier;
  m.mask_probability = c.mask_probability;
  m.positions = c.positions;
  m.path = parse_cat_path(c.path);
  m.orientation = parse_orientation(c.orientation);
  m.gqa_ratio = c.gqa_ratio;
  m.validate();
  run.state = init_train_state(m, c.seed);
  return run;
}

TrainResult run_toy(ToyRun& run, const std::function<void(const TrainPoint&)>& on_log) {
  TrainOptions o;
  o.steps = run.config.steps;
  o.batch = run.config.batch;
  o.log_every = run.config.log_every;
  o.adamw.lr = run.config.lr;
  o.adamw.weight_decay = run.config.weight_decay;
  o.adamw.max_grad_norm = run.config.max_grad_norm;
  return train(run.state, run.train_data, run.eval_data, o, on_log);
}

}  // namespace circat
