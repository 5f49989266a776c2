// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


#include "circat/tasks.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "circat/error.hpp"
#include "circat/rng.hpp"

namespace circat {
namespace {

constexpr std::string_view kPassage =
    "the river ran low that summer, and the old mill stood quiet at the bend. "
    "children came down in the mornings to throw stones at the water and count "
    "the rings as they spread. in the afternoons the heat settled over the fields "
    "and nothing moved but the swallows. the miller kept a ledger of every sack "
    "he ground, though there were few enough that year, and he read it over in "
    "the evenings by the lamp. when the rain finally came it came all at once, "
    "and the wheel turned again before anyone had thought to oil it. the sound "
    "carried up the valley, a long slow creak and then a steady knocking, and "
    "people stopped on the road to listen. by autumn the ledger was full again. "
    "the miller bought a new lamp and a second chair, and sometimes his sister "
    "came to sit with him while he wrote. she said the numbers looked like rows "
    "of fence posts. he said they were better than fence posts, because a fence "
    "only tells you where a field ends and a ledger tells you what it gave.";

std::vector<std::size_t> roll(const std::vector<std::size_t>& base, std::size_t shift) {
  const std::size_t n = base.size();
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[(i + shift) % n] = base[i];
  return out;
}

Dataset masked_copy(Rng& rng, const TaskSizes& s) {
  require(s.n >= 2 && s.n % 2 == 0, ErrorCode::kInvalidArgument,
          "masked_copy: sequence length must be even and >= 2");
  require(s.vocab >= 2, ErrorCode::kInvalidArgument, "masked_copy: vocab must be >= 2");
  require(s.mask_probability > 0.0 && s.mask_probability < 1.0, ErrorCode::kInvalidArgument,
          "masked_copy: mask probability must lie in (0, 1)");
  Dataset d{TaskKind::kMaskedCopy, Objective::kMaskedLm, s.n, s.vocab + 1, s.vocab, {}};
  const std::size_t half = s.n / 2;
  for (std::size_t e = 0; e < s.count; ++e) {
    std::vector<std::size_t> clean(s.n);
    for (std::size_t i = 0; i < half; ++i) clean[i] = clean[i + half] = rng.below(s.vocab);
    std::vector<bool> masked(s.n);
    bool any = false;
    for (std::size_t i = 0; i < s.n; ++i) any |= (masked[i] = rng.bernoulli(s.mask_probability));
    if (!any) masked[rng.below(s.n)] = true;
    Example ex;
    ex.tokens = clean;
    for (std::size_t i = 0; i < s.n; ++i) {
      if (!masked[i]) continue;
      ex.tokens[i] = s.vocab;
      ex.target_rows.push_back(i);
      ex.targets.push_back(clean[i]);
    }
    d.examples.push_back(std::move(ex));
  }
  return d;
}

Dataset cyclic_shift(Rng& rng, const TaskSizes& s) {
  require(s.n >= 1 && s.vocab >= 2, ErrorCode::kInvalidArgument,
          "cyclic_shift_detect: need n >= 1 and vocab >= 2");
  Dataset d{TaskKind::kCyclicShiftDetect, Objective::kClassification, s.n, s.vocab, s.n, {}};
  std::vector<std::size_t> base(s.n);
  for (auto& t : base) t = rng.below(s.vocab);
  for (std::size_t e = 0; e < s.count; ++e) {
    const std::size_t shift = rng.below(s.n);
    d.examples.push_back({roll(base, shift), {0}, {shift}});
  }
  return d;
}

Dataset char_lm(Rng& rng, const TaskSizes& s) {
  require(s.n >= 2 && s.n <= kPassage.size(), ErrorCode::kInvalidArgument,
          "char_lm: sequence length must lie in [2, " + std::to_string(kPassage.size()) + "]");
  std::array<std::size_t, 256> id{};
  std::array<bool, 256> seen{};
  for (unsigned char c : kPassage) seen[c] = true;
  std::size_t vocab = 0;
  for (std::size_t c = 0; c < 256; ++c)
    if (seen[c]) id[c] = vocab++;
  Dataset d{TaskKind::kCharLm, Objective::kCausalLm, s.n, vocab, vocab, {}};
  const std::size_t starts = kPassage.size() - s.n + 1;
  for (std::size_t e = 0; e < s.count; ++e) {
    const std::size_t at = rng.below(starts);
    Example ex;
    for (std::size_t i = 0; i < s.n; ++i)
      ex.tokens.push_back(id[static_cast<unsigned char>(kPassage[at + i])]);
    for (std::size_t i = 0; i + 1 < s.n; ++i) {
      ex.target_rows.push_back(i);
      ex.targets.push_back(ex.tokens[i + 1]);
    }
    d.examples.push_back(std::move(ex));
  }
  return d;
}

Dataset synthetic_classify(Rng& rng, const TaskSizes& s) {
  require(s.classes >= 2 && s.vocab > s.classes && s.n >= 1, ErrorCode::kInvalidArgument,
          "synthetic_classify: need classes >= 2, vocab > classes and n >= 1");
  Dataset d{TaskKind::kSyntheticClassify, Objective::kClassification, s.n, s.vocab, s.classes, {}};
  for (std::size_t e = 0; e < s.count; ++e) {
    const std::size_t label = rng.below(s.classes);
    Example ex{std::vector<std::size_t>(s.n), {0}, {label}};
    bool any = false;
    for (auto& t : ex.tokens) {
      const bool hit = rng.bernoulli(0.3);
      any |= hit;
      t = hit ? label : s.classes + rng.below(s.vocab - s.classes);
    }
    if (!any) ex.tokens[rng.below(s.n)] = label;
    d.examples.push_back(std::move(ex));
  }
  return d;
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kMaskedCopy: return "masked_copy";
    case TaskKind::kCyclicShiftDetect: return "cyclic_shift_detect";
    case TaskKind::kCharLm: return "char_lm";
    case TaskKind::kSyntheticClassify: return "synthetic_classify";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view s) {
  for (TaskKind k : {TaskKind::kMaskedCopy, TaskKind::kCyclicShiftDetect, TaskKind::kCharLm,
                     TaskKind::kSyntheticClassify})
    if (s == to_string(k)) return k;
  fail(ErrorCode::kInvalidArgument, "unknown task '" + std::string(s) + "'");
}

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::kMaskedLm: return "masked_lm";
    case Objective::kCausalLm: return "causal_lm";
    case Objective::kClassification: return "classification";
  }
  return "?";
}

Objective parse_objective(std::string_view s) {
  for (Objective o : {Objective::kMaskedLm, Objective::kCausalLm, Objective::kClassification})
    if (s == to_string(o)) return o;
  fail(ErrorCode::kInvalidArgument, "unknown objective '" + std::string(s) + "'");
}

Dataset make_toy_task(TaskKind kind, std::uint64_t seed, const TaskSizes& sizes) {
  require(sizes.count >= 1, ErrorCode::kInvalidArgument, "make_toy_task: count must be >= 1");
  Rng rng(seed);
  switch (kind) {
    case TaskKind::kMaskedCopy: return masked_copy(rng, sizes);
    case TaskKind::kCyclicShiftDetect: return cyclic_shift(rng, sizes);
    case TaskKind::kCharLm: return char_lm(rng, sizes);
    case TaskKind::kSyntheticClassify: return synthetic_classify(rng, sizes);
  }
  fail(ErrorCode::kInternal, "make_toy_task: unhandled kind");
}

}  // namespace circat
