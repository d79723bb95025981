#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "condseg/types.hpp"

namespace condseg {

// Monte-Carlo cross-validation splits: `repeats` independently shuffled
// 70/15/15 subject-level partitions, each disjoint and exhaustive.
// Deterministic given the seed; subject ids are canonicalized by sorting
// before the seeded shuffle.
std::vector<SplitPlan> make_splits(std::vector<std::string> subject_ids, int repeats, uint64_t seed,
                                   double train_ratio = 0.70, double val_ratio = 0.15);

// Restrict a plan to the first max(1, round(fraction * |train|)) subjects of
// a seeded shuffle of its training set. Subsets are nested across fractions
// for a fixed plan (the shuffle depends only on the plan's seed).
SplitPlan subsample_training(const SplitPlan& plan, double fraction);

}  // namespace condseg
