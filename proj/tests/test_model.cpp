// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "circat/model.hpp"
#include "circat/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace circat;

namespace {

ModelConfig small_config(const std::string& mixer, Objective objective, std::size_t layers = 2) {
  ModelConfig c;
  c.n_layers = layers;
  c.d = 8;
  c.heads = 2;
  c.n_max = 6;
  c.schedule = build_schedule(mixer, layers);
  c.objective = objective;
  c.pooling = objective == Objective::kClassification ? Pooling::kAvg : Pooling::kNone;
  c.input_vocab = 5;
  c.outputs = 3;
  return c;
}

ModelInput tokens(std::initializer_list<std::size_t> ids) { return {ids, {}}; }

}  // namespace

TEST_CASE("layer schedules") {
  using K = MixerKind;
  CHECK(build_cat_alter_schedule(4) == std::vector<K>{K::kAttention, K::kCat, K::kAttention, K::kCat});
  CHECK(build_cat_alter_schedule(1) == std::vector<K>{K::kAttention});
  CHECK(build_cat_alter_schedule(3) == std::vector<K>{K::kAttention, K::kCat, K::kAttention});
  CHECK(build_schedule("cat", 2) == std::vector<K>{K::kCat, K::kCat});
  CHECK(build_schedule("attention", 1) == std::vector<K>{K::kAttention});
  CHECK_THROWS_AS(build_schedule("linear", 2), Error);
}

TEST_CASE("config validation") {
  ModelConfig c = small_config("cat", Objective::kMaskedLm);
  CHECK_NOTHROW(c.validate());
  c.schedule.pop_back();
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config("cat", Objective::kMaskedLm);
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config("cat", Objective::kMaskedLm);
  c.mask_probability = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config("avgkey-qkv", Objective::kCausalLm);
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config("cat", Objective::kCausalLm);
  nlohmann::json j = c;
  const ModelConfig back = j.get<ModelConfig>();
  CHECK(nlohmann::json(back) == j);
}

TEST_CASE("block_forward") {
  Tape tape;
  const Tensor xt = oracle::random_matrix(5, 8, 1);
  const Var x = tape.constant(xt);
  for (const char* mixer : {"attention", "cat"}) {
    ModelParams p = init_model(small_config(mixer, Objective::kMaskedLm, 1), 3);
    auto& b = p.blocks[0];
    std::visit([](auto& m) { m.for_each([](const char*, Tensor& t) { t = Tensor::zeros(t.shape()); }); },
               b.mixer);
    b.w2 = Tensor::zeros(b.w2.shape());
    SUBCASE("zero mixer and MLP output weights leave the residual stream") {
      const ModelVars v = bind(tape, p, false);
      const Var y = block_forward(x, v.blocks[0], {2});
      CHECK(max_abs_diff(y.value(), xt) == 0.0);
    }
  }
  SUBCASE("single token") {
    const ModelParams p = init_model(small_config("cat", Objective::kMaskedLm, 1), 4);
    const ModelVars v = bind(tape, p, false);
    CHECK(block_forward(tape.constant(oracle::random_matrix(1, 8, 2)), v.blocks[0], {2})
              .value()
              .all_finite());
  }
}

TEST_CASE("model_forward shapes and errors") {
  ModelConfig c = small_config("cat-alter", Objective::kClassification);
  const ModelParams p = init_model(c, 1);
  const Tensor logits = model_logits(tokens({0, 1, 2, 3}), c, p);
  CHECK(logits.shape() == Shape{1, 3});
  CHECK(logits.all_finite());

  c = small_config("cat-alter", Objective::kMaskedLm);
  const ModelParams q = init_model(c, 1);
  CHECK(model_logits(tokens({0, 1, 2, 3, 4, 0}), c, q).shape() == Shape{6, 3});
  CHECK_THROWS_AS(model_logits(tokens({0, 1, 2, 3, 4, 0, 1}), c, q), Error);
  CHECK_THROWS_AS(model_logits(tokens({0, 5}), c, q), Error);

  SUBCASE("patch inputs") {
    c.input_dim = 3;
    const ModelParams r = init_model(c, 2);
    CHECK(r.embed.shape() == Shape{3, 8});
    const Tensor y = model_logits({{}, oracle::random_matrix(4, 3, 9)}, c, r);
    CHECK(y.shape() == Shape{4, 3});
  }
  SUBCASE("maps per layer") {
    std::vector<MapSink> maps;
    model_logits(tokens({0, 1, 2, 3}), c, q, &maps);
    REQUIRE(maps.size() == 2);
    CHECK(maps[0].size() == 2);
    CHECK(maps[1].size() == 2);
    CHECK(maps[1][0].shape() == Shape{4, 4});
  }
}

TEST_CASE("avg and token pooling agree on identical rows") {
  ModelConfig c = small_config("cat-alter", Objective::kClassification);
  c.positions = false;
  const ModelParams p = init_model(c, 5);
  const ModelInput same = tokens({2, 2, 2, 2, 2});
  c.pooling = Pooling::kAvg;
  const Tensor a = model_logits(same, c, p);
  c.pooling = Pooling::kToken;
  const Tensor t = model_logits(same, c, p);
  CHECK(max_rel_diff(a, t) <= 1e-12);
}

TEST_CASE("cross-entropy loss") {
  Tape tape;
  SUBCASE("uniform logits give ln V") {
    const Var logits = tape.constant(Tensor::zeros(Shape{3, 7}));
    const Example e{{}, {0, 1, 2}, {0, 3, 6}};
    CHECK(example_loss_sum(logits, e).value()[0] / 3.0 == doctest::Approx(std::log(7.0)).epsilon(1e-15));
  }
  SUBCASE("confident correct logits approach zero") {
    double prev = 1e9;
    for (double mag : {1.0, 5.0, 20.0, 40.0}) {
      const Var logits = tape.constant(Tensor::from_rows({{mag, 0.0, 0.0}}));
      const double loss = example_loss_sum(logits, {{}, {0}, {0}}).value()[0];
      CHECK(loss < prev);
      prev = loss;
    }
    CHECK(prev < 1e-16);
  }
  SUBCASE("matches the loop oracle") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Tensor l = oracle::random_matrix(6, 5, seed, 4.0);
      const Example e{{}, {0, 2, 3, 5}, {4, 0, 1, 1}};
      const double got = example_loss_sum(tape.constant(l), e).value()[0];
      const double want = oracle::cross_entropy(l, e.target_rows, e.targets);
      CHECK(std::abs(got - want) / std::abs(want) <= 1e-10);
    }
  }
  SUBCASE("empty target set") {
    CHECK_THROWS_AS(example_loss_sum(tape.constant(Tensor::zeros(Shape{2, 2})), Example{}), Error);
  }
}

TEST_CASE("full model gradients") {
  const std::vector<std::pair<std::string, Objective>> cases = {
      {"attention", Objective::kMaskedLm},   {"cat", Objective::kMaskedLm},
      {"cat-alter", Objective::kCausalLm},   {"cat-alter", Objective::kClassification},
      {"q-only", Objective::kMaskedLm},      {"v-only", Objective::kCausalLm},
      {"gqa", Objective::kClassification},   {"avgkey-qkv", Objective::kMaskedLm}};
  for (const auto& [mixer, objective] : cases)
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const ModelConfig c = small_config(mixer, objective);
      const ModelParams p = init_model(c, seed);
      const std::vector<Tensor> at = flatten(p);
      const ModelInput in = tokens({1, 4, 0, 2, 3, 1});
      const Example ex = objective == Objective::kClassification
                             ? Example{in.tokens, {0}, {2}}
                             : Example{in.tokens, {1, 3, 4}, {0, 2, 1}};
      const auto report = finite_diff_check(
          [&](Tape& tape, std::span<const Var> v) {
            ModelVars vars = bind(tape, p, false);
            rebind(vars, v);
            return example_loss_sum(model_forward(tape, in, c, vars), ex);
          },
          at, 1e-5, 1e-4);
      CHECK_MESSAGE(report.passed, mixer << " " << to_string(objective) << " seed " << seed
                                         << " err " << report.max_rel_error);
    }
}

TEST_CASE("causal objective never reads later positions") {
  for (const char* mixer : {"attention", "cat", "cat-alter", "q-only", "v-only", "gqa"})
    for (CatPath path : {CatPath::kExplicit, CatPath::kGather, CatPath::kFft}) {
      ModelConfig c = small_config(mixer, Objective::kCausalLm, 2);
      c.path = path;
      const ModelParams p = init_model(c, 11);
      const std::vector<std::size_t> base = {1, 4, 0, 2, 3, 1};
      const Tensor y = model_logits({base, {}}, c, p);
      Rng rng(3);
      for (std::size_t j = 1; j < base.size(); ++j) {
        std::vector<std::size_t> changed = base;
        for (std::size_t k = j; k < base.size(); ++k) changed[k] = (changed[k] + 1 + rng.below(4)) % 5;
        const Tensor z = model_logits({changed, {}}, c, p);
        for (std::size_t i = 0; i < j; ++i)
          for (std::size_t o = 0; o < c.outputs; ++o) CHECK(z(i, o) == y(i, o));
        bool moved = false;
        for (std::size_t o = 0; o < c.outputs; ++o) moved |= z(j, o) != y(j, o);
        CHECK(moved);
      }
    }
}

TEST_CASE("parameter count ordering") {
  ModelConfig c = small_config("cat", Objective::kMaskedLm, 4);
  c.d = 32;
  c.heads = 4;
  const std::size_t cat = scalar_count(init_model(c, 1));
  c.schedule = build_schedule("cat-alter", 4);
  const std::size_t alter = scalar_count(init_model(c, 1));
  c.schedule = build_schedule("attention", 4);
  const std::size_t attention = scalar_count(init_model(c, 1));
  CHECK(cat < alter);
  CHECK(alter < attention);
  CHECK(attention - alter == alter - cat);
  CHECK(attention - cat == 4 * (param_count(MixerKind::kAttention, 32, 4, 6) -
                                param_count(MixerKind::kCat, 32, 4, 6)));
}

TEST_CASE("adamw_update") {
  const std::vector<Tensor> start = {Tensor::from_rows({{1.0, -2.0}, {0.5, 3.0}}),
                                     Tensor::from_rows({{-4.0}})};
  std::vector<Tensor> zeros;
  for (const Tensor& t : start) zeros.push_back(Tensor::zeros(t.shape()));
  SUBCASE("zero gradient and no decay leaves parameters") {
    std::vector<Tensor> p = start;
    AdamState s = AdamState::zeros_like(p);
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    adamw_update(p, zeros, s, cfg);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(max_abs_diff(p[i], start[i]) == 0.0);
    CHECK(s.step == 1);
  }
  SUBCASE("zero gradient with decay scales by 1 - lr * wd") {
    std::vector<Tensor> p = start;
    AdamState s = AdamState::zeros_like(p);
    AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.3;
    adamw_update(p, zeros, s, cfg);
    for (std::size_t i = 0; i < p.size(); ++i)
      CHECK(max_rel_diff(p[i], scale(start[i], 1.0 - 0.1 * 0.3)) <= 1e-15);
  }
  SUBCASE("first step moves each entry by lr against the gradient sign") {
    std::vector<Tensor> p = {Tensor::from_rows({{1.0, 1.0}})};
    const std::vector<Tensor> g = {Tensor::from_rows({{0.5, -3.0}})};
    AdamState s = AdamState::zeros_like(p);
    AdamWConfig cfg;
    cfg.lr = 0.01;
    cfg.weight_decay = 0.0;
    adamw_update(p, g, s, cfg);
    CHECK(p[0][0] == doctest::Approx(0.99).epsilon(1e-7));
    CHECK(p[0][1] == doctest::Approx(1.01).epsilon(1e-7));
  }
  SUBCASE("clipping rescales to the maximum norm") {
    std::vector<Tensor> p = {Tensor::from_rows({{0.0, 0.0}})};
    const std::vector<Tensor> g = {Tensor::from_rows({{3.0, 4.0}})};
    AdamState s = AdamState::zeros_like(p);
    AdamWConfig cfg;
    cfg.max_grad_norm = 0.25;
    CHECK(adamw_update(p, g, s, cfg) == 5.0);
    CHECK(s.m[0][0] == doctest::Approx(0.1 * 3.0 * 0.05));
  }
  SUBCASE("quadratic bowl converges") {
    Rng rng(2);
    std::vector<Tensor> p = {Tensor::normal(Shape{10, 1}, rng)};
    AdamState s = AdamState::zeros_like(p);
    AdamWConfig cfg;
    cfg.lr = 0.05;
    cfg.weight_decay = 0.0;
    for (int step = 0; step < 500; ++step) {
      const std::vector<Tensor> g = {p[0]};
      adamw_update(p, g, s, cfg);
    }
    CHECK(global_norm(p) < 1e-3);
  }
  SUBCASE("non-finite gradient is rejected") {
    std::vector<Tensor> p = {Tensor::from_rows({{1.0}})};
    const std::vector<Tensor> g = {Tensor::from_rows({{std::nan("")}})};
    AdamState s = AdamState::zeros_like(p);
    CHECK_THROWS_AS(adamw_update(p, g, s, {}), Error);
    CHECK(s.step == 0);
    CHECK(p[0][0] == 1.0);
  }
}

TEST_CASE("toy tasks") {
  TaskSizes s;
  s.count = 50;
  for (TaskKind k : {TaskKind::kMaskedCopy, TaskKind::kCyclicShiftDetect, TaskKind::kCharLm,
                     TaskKind::kSyntheticClassify}) {
    const Dataset a = make_toy_task(k, 7, s), b = make_toy_task(k, 7, s);
    REQUIRE(a.examples.size() == 50);
    for (std::size_t i = 0; i < a.examples.size(); ++i) {
      CHECK(a.examples[i].tokens == b.examples[i].tokens);
      CHECK(a.examples[i].targets == b.examples[i].targets);
      CHECK(a.examples[i].tokens.size() == s.n);
      for (std::size_t t : a.examples[i].tokens) CHECK(t < a.input_vocab);
      for (std::size_t t : a.examples[i].targets) CHECK(t < a.outputs);
      CHECK(!a.examples[i].targets.empty());
    }
    CHECK(make_toy_task(k, 8, s).examples[0].tokens != a.examples[0].tokens);
  }

  SUBCASE("masked_copy mask count") {
    TaskSizes m;
    m.count = 1000;
    m.n = 64;
    const Dataset d = make_toy_task(TaskKind::kMaskedCopy, 1, m);
    double total = 0.0;
    for (const Example& e : d.examples) {
      total += static_cast<double>(e.targets.size());
      for (std::size_t i = 0; i < 32; ++i) {
        const bool a = e.tokens[i] == 16, b = e.tokens[i + 32] == 16;
        if (!a && !b) CHECK(e.tokens[i] == e.tokens[i + 32]);
      }
    }
    const double sigma = std::sqrt(64 * 0.15 * 0.85 / 1000.0);
    CHECK(std::abs(total / 1000.0 - 9.6) <= 3.0 * sigma);
  }
  SUBCASE("cyclic shift labels are uniform") {
    TaskSizes c;
    c.count = 3200;
    c.n = 16;
    const Dataset d = make_toy_task(TaskKind::kCyclicShiftDetect, 3, c);
    std::vector<double> counts(16);
    for (const Example& e : d.examples) counts[e.targets[0]] += 1.0;
    double chi2 = 0.0;
    for (double k : counts) chi2 += (k - 200.0) * (k - 200.0) / 200.0;
    CHECK(chi2 < 37.7);  // 99.9th percentile, 15 degrees of freedom
    const auto& e = d.examples[0];
    const auto& base = d.examples[1];
    const std::size_t shift = (e.targets[0] + 16 - base.targets[0]) % 16;
    for (std::size_t i = 0; i < 16; ++i) CHECK(e.tokens[(i + shift) % 16] == base.tokens[i]);
  }
}

TEST_CASE("training") {
  TaskSizes s;
  s.count = 512;
  const Dataset data = make_toy_task(TaskKind::kMaskedCopy, 42, s);
  s.count = 64;
  const Dataset eval = make_toy_task(TaskKind::kMaskedCopy, 43, s);
  ModelConfig c;
  c.schedule = build_schedule("cat", 2);
  c.input_vocab = data.input_vocab;
  c.outputs = data.outputs;
  TrainOptions o;
  o.steps = 20;
  o.adamw.lr = 3e-3;

  SUBCASE("untrained loss is near ln V") {
    const TrainState st = init_train_state(c, 42);
    CHECK(std::abs(mean_loss(c, st.params, eval.examples) / std::log(16.0) - 1.0) < 0.1);
  }
  SUBCASE("identical seeds give identical curves") {
    TrainState a = init_train_state(c, 42), b = init_train_state(c, 42);
    const TrainResult ra = train(a, data, eval, o), rb = train(b, data, eval, o);
    REQUIRE(ra.curve.size() == 20);
    for (std::size_t i = 0; i < 20; ++i) CHECK(ra.curve[i].loss == rb.curve[i].loss);
    CHECK(ra.final_loss == rb.final_loss);
    TrainState other = init_train_state(c, 7);
    CHECK(train(other, data, eval, o).final_loss != ra.final_loss);
  }
  SUBCASE("loss falls below half of ln V on masked copy") {
    TrainState st = init_train_state(c, 42);
    o.steps = 300;
    std::size_t logs = 0;
    o.log_every = 100;
    const TrainResult r = train(st, data, eval, o, [&](const TrainPoint&) { ++logs; });
    CHECK(logs == 3);
    CHECK(r.final_loss < 0.5 * std::log(16.0));
  }
  SUBCASE("non-finite loss leaves the state untouched") {
    TrainState st = init_train_state(c, 1);
    std::vector<Tensor> flat = flatten(st.params);
    std::vector<double> bad = flat.back().to_vector();
    bad[0] = std::numeric_limits<double>::infinity();
    flat.back() = Tensor(flat.back().shape(), bad);
    st.params = unflatten(st.params, flat);
    const TrainState before = st;
    CHECK_THROWS_AS(train_step(st, data.examples, o.adamw), Error);
    CHECK(st.optim.step == 0);
    const TrainResult r = train(st, data, eval, o);
    CHECK(r.diverged);
    CHECK(r.steps_done == 0);
  }
  SUBCASE("checkpoint round trip") {
    TrainState st = init_train_state(c, 42);
    train(st, data, eval, o);
    const auto dir = std::filesystem::temp_directory_path() / "circat_test_model";
    std::filesystem::create_directories(dir);
    save_checkpoint(dir / "ckpt", st);
    const TrainState back = load_checkpoint(dir / "ckpt.json");
    CHECK(nlohmann::json(back.config) == nlohmann::json(st.config));
    CHECK(back.optim.step == 20);
    CHECK(back.seed == 42);
    const auto a = flatten(st.params), b = flatten(back.params);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(max_abs_diff(a[i], b[i]) == 0.0);
      CHECK(max_abs_diff(st.optim.m[i], back.optim.m[i]) == 0.0);
      CHECK(max_abs_diff(st.optim.v[i], back.optim.v[i]) == 0.0);
    }
  }
}
