// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace circat {

enum class TaskKind { kMaskedCopy, kCyclicShiftDetect, kCharLm, kSyntheticClassify };
enum class Objective { kMaskedLm, kCausalLm, kClassification };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view s);
std::string_view to_string(Objective objective);
Objective parse_objective(std::string_view s);

// One training sequence. Loss terms are cross-entropies of the logits row
// `target_rows[i]` against `targets[i]`; classification uses row 0 of the
// pooled output.
struct Example {
  std::vector<std::size_t> tokens;
  std::vector<std::size_t> target_rows;
  std::vector<std::size_t> targets;
};

struct TaskSizes {
  std::size_t count = 256;
  std::size_t n = 32;
  std::size_t vocab = 16;
  std::size_t classes = 4;  // synthetic_classify only
  double mask_probability = 0.15;
};

struct Dataset {
  TaskKind kind = TaskKind::kMaskedCopy;
  Objective objective = Objective::kMaskedLm;
  std::size_t n = 0;
  // Token ids fall in [0, input_vocab); logits have `outputs` columns.
  std::size_t input_vocab = 0;
  std::size_t outputs = 0;
  std::vector<Example> examples;
};

// Generative rules:
//  masked_copy: n even; the first n/2 tokens are uniform over the vocab and
//    the second half repeats them. Each position is masked with probability
//    p (one forced mask when none is drawn); masked inputs become the token
//    `vocab` and the targets are the original tokens there.
//  cyclic_shift_detect: a fixed base string drawn once from the seed, rolled
//    by a uniform offset s in [0, n); the class is s (n classes).
//  char_lm: length-n windows of a built-in English passage at uniform
//    offsets; next-character prediction over positions 0..n-2.
//  synthetic_classify: noise tokens uniform over [classes, vocab); each
//    position independently carries the class token with probability 0.3
//    (one forced when none is drawn).
Dataset make_toy_task(TaskKind kind, std::uint64_t seed, const TaskSizes& sizes);

}  // namespace circat
