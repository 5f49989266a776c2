// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


// Command-line front end. Talks to the library only through circat.h.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "circat/circat.h"
#include "json.hpp"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Carries the exit code out of a subcommand.
struct Exit {
  int code;
  std::string message;
};

int exit_code_for(circat_status s) {
  switch (s) {
    case CIRCAT_OK: return kExitOk;
    case CIRCAT_ERR_SHAPE:
    case CIRCAT_ERR_INVALID_ARGUMENT:
    case CIRCAT_ERR_UNSUPPORTED: return kExitUsage;
    default: return kExitFailure;
  }
}

void check(circat_status s, const std::string& what) {
  if (s == CIRCAT_OK) return;
  std::string detail = circat_last_error();
  if (detail.rfind(what + ": ", 0) != 0) detail = what + ": " + detail;
  throw Exit{exit_code_for(s), detail + " (" + circat_status_name(s) + ")"};
}

std::string take(char* s) {
  std::string out(s ? s : "");
  circat_string_free(s);
  return out;
}

std::string fmt(double v, int digits = 10) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// Collects a subcommand's settings: built-in defaults, then the --config
// file, then flags given on the command line.
class Settings {
 public:
  Settings(CLI::App* app, json defaults) : app_(app), values_(std::move(defaults)) {
    app_->add_option("--config", config_path_, "JSON file of settings; flags override it");
    app_->add_flag("--json", json_, "Emit one machine-readable JSON document on stdout");
  }

  template <class T>
  CLI::Option* add(const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app_->add_option(flag, *value, help);
    if (values_.contains(key)) opt->default_str(values_[key].is_string() ? values_[key].get<std::string>()
                                                                         : values_[key].dump());
    overrides_.push_back([this, opt, value, key] {
      if (opt->count() > 0) values_[key] = *value;
    });
    return opt;
  }

  // Applies the config file and flags; unknown file keys are usage errors.
  json resolve() {
    if (!config_path_.empty()) {
      std::ifstream in(config_path_);
      if (!in) throw Exit{kExitUsage, "cannot read config file " + config_path_};
      json file;
      try {
        in >> file;
      } catch (const json::exception& e) {
        throw Exit{kExitUsage, "config file " + config_path_ + " is not valid JSON: " + e.what()};
      }
      if (!file.is_object()) throw Exit{kExitUsage, "config file must hold a JSON object"};
      for (const auto& [k, v] : file.items()) {
        if (!values_.contains(k)) throw Exit{kExitUsage, "unknown config key '" + k + "'"};
        const json& def = values_[k];
        const bool ok = def.is_number_integer() ? v.is_number_unsigned()
                        : def.is_number()       ? v.is_number()
                                                : v.type() == def.type();
        if (!ok) throw Exit{kExitUsage, "config key '" + k + "' has the wrong type"};
        values_[k] = def.is_number_float() ? json(v.get<double>()) : v;
      }
    }
    for (auto& apply : overrides_) apply();
    return values_;
  }

  bool json_output() const { return json_; }

 private:
  CLI::App* app_;
  json values_;
  std::string config_path_;
  bool json_ = false;
  std::vector<std::function<void()>> overrides_;
};

void echo_config(const std::string& command, const json& config) {
  std::cout << "# circat " << circat_version() << ' ' << command << " config: " << config.dump()
            << std::endl;
}

std::vector<std::size_t> parse_list(const std::string& s, const std::string& what) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (item.empty() || pos != item.size() || item[0] == '-')
      throw Exit{kExitUsage, "bad " + what + " entry '" + item + "'"};
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw Exit{kExitUsage, what + " is empty"};
  return out;
}

// ---- verify ---------------------------------------------------------------

struct VerifyCmd {
  Settings settings;
  explicit VerifyCmd(CLI::App* app) : settings(app, {{"suite", "all"}, {"seed", 0}}) {
    settings.add<std::string>("--suite", "suite",
                              "all | fft | circulant | variants | gradients | causal | symmetry");
    settings.add<std::uint64_t>("--seed", "seed", "Seed for randomised cases");
  }

  int run() {
    const json cfg = settings.resolve();
    const std::string suite = cfg.at("suite").get<std::string>();
    char* raw = nullptr;
    int passed = 0;
    check(circat_verify(suite.c_str(), cfg.at("seed").get<std::uint64_t>(), &raw, &passed),
          "verify");
    const json report = json::parse(take(raw));
    if (settings.json_output()) {
      std::cout << json{{"command", "verify"}, {"config", cfg}, {"report", report}}.dump(2) << '\n';
    } else {
      echo_config("verify", cfg);
      std::printf("%-10s %-50s %10s %12s %6s  %s\n", "suite", "property", "tolerance", "worst",
                  "cases", "result");
      std::size_t ok = 0;
      for (const json& p : report.at("properties")) {
        const bool pass = p.at("passed").get<bool>();
        ok += pass;
        const std::string worst =
            p.at("worst_error").is_null() ? "inf" : fmt(p.at("worst_error").get<double>(), 3);
        std::printf("%-10s %-50s %10s %12s %6zu  %s\n", p.at("suite").get<std::string>().c_str(),
                    p.at("name").get<std::string>().c_str(),
                    fmt(p.at("tolerance").get<double>(), 3).c_str(), worst.c_str(),
                    p.at("cases").get<std::size_t>(), pass ? "PASS" : "FAIL");
      }
      std::printf("%zu/%zu properties passed\n", ok, report.at("properties").size());
    }
    return passed ? kExitOk : kExitFailure;
  }
};

// ---- bench ----------------------------------------------------------------

struct BenchCmd {
  Settings settings;
  explicit BenchCmd(CLI::App* app)
      : settings(app, {{"mech", "cat"},
                       {"path", "fft"},
                       {"n_list", "256,512,1024"},
                       {"d", 64},
                       {"heads", 4},
                       {"reps", 10},
                       {"warmup", 1},
                       {"precision", "float64"},
                       {"measure", "forward"},
                       {"seed", 0},
                       {"out", "bench.csv"}}) {
    settings.add<std::string>("--mech", "mech", "attention | cat");
    settings.add<std::string>("--path", "path", "explicit | gather | fft");
    settings.add<std::string>("--n-list", "n_list", "Comma-separated ascending sequence lengths");
    settings.add<std::size_t>("--d", "d", "Model width D");
    settings.add<std::size_t>("--heads", "heads", "Number of heads H");
    settings.add<std::size_t>("--reps", "reps", "Timed repetitions (>= 3)");
    settings.add<std::size_t>("--warmup", "warmup", "Warm-up repetitions (>= 1)");
    settings.add<std::string>("--precision", "precision", "float64 | float32");
    settings.add<std::string>("--measure", "measure", "forward | forward_backward");
    settings.add<std::uint64_t>("--seed", "seed", "Seed for the random inputs");
    settings.add<std::string>("--out", "out", "CSV output path");
  }

  int run() {
    const json cfg = settings.resolve();
    const auto ns = parse_list(cfg.at("n_list").get<std::string>(), "--n-list");
    const std::string mech = cfg.at("mech"), path = cfg.at("path"), precision = cfg.at("precision"),
                      measure = cfg.at("measure"), out = cfg.at("out");
    const circat_bench_case base{mech.c_str(),
                                 path.c_str(),
                                 precision.c_str(),
                                 measure.c_str(),
                                 ns[0],
                                 cfg.at("d").get<std::size_t>(),
                                 cfg.at("heads").get<std::size_t>(),
                                 cfg.at("reps").get<std::size_t>(),
                                 cfg.at("warmup").get<std::size_t>(),
                                 cfg.at("seed").get<std::uint64_t>()};
    if (!settings.json_output()) {
      echo_config("bench", cfg);
      std::fflush(stdout);
    }
    circat_bench_results* results = nullptr;
    check(circat_bench_sweep(&base, ns.data(), ns.size(), &results), "bench");
    std::unique_ptr<circat_bench_results, void (*)(circat_bench_results*)> guard(results,
                                                                                  circat_bench_free);
    check(circat_bench_write_csv(results, out.c_str()), "bench");

    std::vector<circat_bench_row> rows(circat_bench_size(results));
    for (std::size_t i = 0; i < rows.size(); ++i) check(circat_bench_row_at(results, i, &rows[i]), "bench");
    json jrows = json::array(), jratios = json::array();
    for (const auto& r : rows)
      jrows.push_back({{"N", r.n},
                       {"time_mean_ns", r.time_mean_ns},
                       {"time_median_ns", r.time_median_ns},
                       {"time_min_ns", r.time_min_ns},
                       {"peak_scalars", r.peak_scalars},
                       {"attn_coeffs", r.attn_coeffs}});
    for (std::size_t i = 1; i < rows.size(); ++i)
      jratios.push_back({{"n_from", rows[i - 1].n},
                         {"n_to", rows[i].n},
                         {"ratio", rows[i].time_median_ns / rows[i - 1].time_median_ns}});
    if (settings.json_output()) {
      std::cout << json{{"command", "bench"}, {"config", cfg}, {"csv", out}, {"rows", jrows},
                        {"ratios", jratios}}
                       .dump(2)
                << '\n';
      return kExitOk;
    }
    std::printf("%8s %16s %16s %16s %14s %12s\n", "N", "median_ns", "mean_ns", "min_ns",
                "peak_scalars", "attn_coeffs");
    for (const auto& r : rows)
      std::printf("%8zu %16.1f %16.1f %16.1f %14lld %12zu\n", r.n, r.time_median_ns,
                  r.time_mean_ns, r.time_min_ns, static_cast<long long>(r.peak_scalars),
                  r.attn_coeffs);
    for (const json& r : jratios)
      std::printf("ratio T(%zu)/T(%zu) = %s\n", r.at("n_to").get<std::size_t>(),
                  r.at("n_from").get<std::size_t>(), fmt(r.at("ratio").get<double>(), 17).c_str());
    std::printf("wrote %zu rows to %s\n", rows.size(), out.c_str());
    return kExitOk;
  }
};

// ---- train-toy ------------------------------------------------------------

json trainer_defaults() {
  char* raw = nullptr;
  check(circat_trainer_defaults(&raw), "train-toy");
  json d = json::parse(take(raw));
  d["checkpoint_out"] = "toy_checkpoint";
  return d;
}

struct TrainCmd {
  Settings settings;
  explicit TrainCmd(CLI::App* app) : settings(app, trainer_defaults()) {
    settings.add<std::string>("--task", "task",
                              "masked_copy | cyclic_shift_detect | char_lm | synthetic_classify");
    settings.add<std::string>("--mixer", "mixer", "attention | cat | cat-alter (or any mixer name)");
    settings.add<std::size_t>("--layers", "layers", "Number of blocks");
    settings.add<std::size_t>("--d", "d", "Model width D");
    settings.add<std::size_t>("--heads", "heads", "Number of heads H");
    settings.add<std::size_t>("--n", "n", "Sequence length N");
    settings.add<std::size_t>("--vocab", "vocab", "Vocabulary size");
    settings.add<std::size_t>("--steps", "steps", "Optimizer steps");
    settings.add<std::size_t>("--batch", "batch", "Sequences per step");
    settings.add<double>("--lr", "lr", "AdamW learning rate");
    settings.add<double>("--weight-decay", "weight_decay", "AdamW decoupled weight decay");
    settings.add<double>("--max-grad-norm", "max_grad_norm", "Global gradient-norm clip (0 = off)");
    settings.add<std::uint64_t>("--seed", "seed", "Seed for data, init and batching");
    settings.add<std::size_t>("--log-every", "log_every", "Steps between loss reports");
    settings.add<std::string>("--path", "path", "CAT path: explicit | gather | fft");
    settings.add<std::string>("--checkpoint-out", "checkpoint_out", "Checkpoint stem to write");
  }

  int run() {
    json cfg = settings.resolve();
    const std::string ckpt = cfg.at("checkpoint_out");
    json run_cfg = cfg;
    run_cfg.erase("checkpoint_out");
    circat_trainer* trainer = nullptr;
    check(circat_trainer_create(run_cfg.dump().c_str(), &trainer), "train-toy");
    std::unique_ptr<circat_trainer, void (*)(circat_trainer*)> guard(trainer, circat_trainer_free);
    char* resolved_raw = nullptr;
    check(circat_trainer_config(trainer, &resolved_raw), "train-toy");
    json resolved = json::parse(take(resolved_raw));
    resolved["checkpoint_out"] = ckpt;

    const bool as_json = settings.json_output();
    if (!as_json) {
      echo_config("train-toy", resolved);
      std::fflush(stdout);
    }
    struct Log {
      bool print;
      json points = json::array();
    } log{!as_json};
    circat_train_summary s{};
    const circat_status st = circat_trainer_run(
        trainer,
        [](std::size_t step, double loss, void* user) {
          auto* l = static_cast<Log*>(user);
          l->points.push_back({{"step", step}, {"loss", loss}});
          if (l->print) {
            std::printf("step %6zu  loss %.10f\n", step, loss);
            std::fflush(stdout);
          }
          return 0;
        },
        &log, &s);
    if (st != CIRCAT_OK && st != CIRCAT_ERR_NON_FINITE) check(st, "train-toy");
    const bool diverged = st == CIRCAT_ERR_NON_FINITE || !std::isfinite(s.final_loss);
    if (!diverged) check(circat_trainer_save(trainer, ckpt.c_str()), "train-toy");

    if (as_json) {
      json out{{"command", "train-toy"},
               {"config", resolved},
               {"log", log.points},
               {"steps_done", s.steps_done},
               {"parameter_count", s.parameter_count},
               {"diverged", diverged},
               {"final_loss", diverged ? json(nullptr) : json(s.final_loss)},
               {"checkpoint", diverged ? json(nullptr) : json(ckpt)}};
      std::cout << out.dump(2) << '\n';
    } else if (diverged) {
      std::printf("diverged: %s\n", circat_last_error());
    } else {
      std::printf("parameters %zu\nfinal_loss %.10f\ncheckpoint %s\n", s.parameter_count,
                  s.final_loss, ckpt.c_str());
    }
    if (diverged) std::fprintf(stderr, "training diverged after step %zu\n", s.steps_done);
    return diverged ? kExitFailure : kExitOk;
  }
};

// ---- export-maps ----------------------------------------------------------

struct ExportCmd {
  Settings settings;
  explicit ExportCmd(CLI::App* app)
      : settings(app, {{"checkpoint", ""}, {"out_dir", "maps"}, {"tokens", ""}, {"seed", 0},
                       {"cap", 512}}) {
    settings.add<std::string>("--checkpoint", "checkpoint", "Checkpoint written by train-toy");
    settings.add<std::string>("--out-dir", "out_dir", "Directory for the images");
    settings.add<std::string>("--tokens", "tokens",
                              "Comma-separated input tokens (default: random from --seed)");
    settings.add<std::uint64_t>("--seed", "seed", "Seed for the random input");
    settings.add<std::size_t>("--cap", "cap", "Largest N accepted for the mosaic");
  }

  int run() {
    const json cfg = settings.resolve();
    const std::string ckpt = cfg.at("checkpoint"), out_dir = cfg.at("out_dir"),
                      tokens_arg = cfg.at("tokens");
    if (ckpt.empty()) throw Exit{kExitUsage, "--checkpoint is required"};
    std::vector<std::size_t> tokens;
    if (!tokens_arg.empty()) tokens = parse_list(tokens_arg, "--tokens");
    if (!settings.json_output()) echo_config("export-maps", cfg);
    circat_model* model = nullptr;
    check(circat_model_load(ckpt.c_str(), &model), "export-maps");
    std::unique_ptr<circat_model, void (*)(circat_model*)> guard(model, circat_model_free);
    char* raw = nullptr;
    check(circat_model_export_maps(model, tokens.data(), tokens.size(),
                                   cfg.at("seed").get<std::uint64_t>(), out_dir.c_str(),
                                   cfg.at("cap").get<std::size_t>(), &raw),
          "export-maps");
    const json summary = json::parse(take(raw));
    if (settings.json_output()) {
      std::cout << json{{"command", "export-maps"}, {"config", cfg}, {"export", summary}}.dump(2)
                << '\n';
      return kExitOk;
    }
    for (const json& l : summary.at("layers"))
      std::printf("layer %zu (%s): %zu maps\n", l.at("layer").get<std::size_t>(),
                  l.at("mixer").get<std::string>().c_str(), l.at("maps").get<std::size_t>());
    const json& m = summary.at("mosaic");
    std::printf("mosaic %s: %zu x %zu (%zu x %zu tiles of %zu x %zu)\n",
                m.at("path").get<std::string>().c_str(), m.at("width").get<std::size_t>(),
                m.at("height").get<std::size_t>(), m.at("tile_rows").get<std::size_t>(),
                m.at("tiles_per_row").get<std::size_t>(), summary.at("n").get<std::size_t>(),
                summary.at("n").get<std::size_t>());
    std::printf("wrote %zu files to %s\n", summary.at("files").size(), out_dir.c_str());
    return kExitOk;
  }
};

// ---- cost-model -----------------------------------------------------------

struct CostCmd {
  Settings settings;
  explicit CostCmd(CLI::App* app)
      : settings(app, {{"n", 256}, {"d", 1024}, {"heads", 16}, {"gqa_k", 0.25}, {"seed", 0}}) {
    settings.add<std::size_t>("--n", "n", "Sequence length N");
    settings.add<std::size_t>("--d", "d", "Model width D");
    settings.add<std::size_t>("--heads", "heads", "Number of heads H");
    settings.add<double>("--gqa-k", "gqa_k", "GQA key/value reduction ratio K in (0, 1]");
    settings.add<std::uint64_t>("--seed", "seed", "Accepted for uniformity; unused");
  }

  int run() {
    const json cfg = settings.resolve();
    const double n = cfg.at("n").get<double>(), d = cfg.at("d").get<double>(),
                 h = cfg.at("heads").get<double>(), k = cfg.at("gqa_k").get<double>();
    circat_projection_cost c{};
    check(circat_cost_model(n, d, h, k, &c), "cost-model");
    const double two_dk = 2.0 * d * k;
    const std::string regime = two_dk > h ? "2DK > H: CAT projections are cheaper"
                               : two_dk < h ? "2DK < H: GQA projections are cheaper"
                                            : "boundary: 2DK = H, equal cost";
    if (settings.json_output()) {
      std::cout << json{{"command", "cost-model"},
                        {"config", cfg},
                        {"gqa_flops", c.gqa_flops},
                        {"cat_flops", c.cat_flops},
                        {"gqa_inner", c.gqa_inner},
                        {"cat_inner", c.cat_inner},
                        {"ratio", c.ratio},
                        {"regime", two_dk > h ? "gqa_costlier" : two_dk < h ? "cat_costlier" : "boundary"},
                        {"note", regime}}
                       .dump(2)
                << '\n';
      return kExitOk;
    }
    echo_config("cost-model", cfg);
    std::printf("GQA  2ND(D + 2DK) = %s   inner D + 2DK = %s\n", fmt(c.gqa_flops, 17).c_str(),
                fmt(c.gqa_inner, 17).c_str());
    std::printf("CAT  2ND(D + H)   = %s   inner D + H   = %s\n", fmt(c.cat_flops, 17).c_str(),
                fmt(c.cat_inner, 17).c_str());
    std::printf("ratio GQA / CAT   = %s\n", fmt(c.ratio, 17).c_str());
    std::printf("regime: %s\n", regime.c_str());
    return kExitOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"circat: circular-convolutional attention toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(circat_version()));

  auto* verify_app = app.add_subcommand("verify", "Run property checks");
  auto* bench_app = app.add_subcommand("bench", "Time attention / CAT layers and write CSV");
  auto* train_app = app.add_subcommand("train-toy", "Train a toy model and write a checkpoint");
  auto* export_app = app.add_subcommand("export-maps", "Write attention maps as PGM images");
  auto* cost_app = app.add_subcommand("cost-model", "Projection FLOPs of GQA versus CAT");

  try {
    VerifyCmd verify(verify_app);
    BenchCmd bench(bench_app);
    TrainCmd train(train_app);
    ExportCmd exporter(export_app);
    CostCmd cost(cost_app);
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int rc = app.exit(e);
      return rc == 0 ? kExitOk : kExitUsage;
    }
    if (verify_app->parsed()) return verify.run();
    if (bench_app->parsed()) return bench.run();
    if (train_app->parsed()) return train.run();
    if (export_app->parsed()) return exporter.run();
    if (cost_app->parsed()) return cost.run();
    return kExitUsage;
  } catch (const Exit& e) {
    std::fprintf(stderr, "error: %s\n", e.message.c_str());
    if (e.code == kExitUsage) {
      const auto parsed = app.get_subcommands();
      std::cerr << (parsed.empty() ? app.help() : parsed.front()->help());
    }
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
}
