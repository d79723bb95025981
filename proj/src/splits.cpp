#include "condseg/splits.hpp"

#include <algorithm>
#include <cmath>

#include "condseg/error.hpp"
#include "condseg/rng.hpp"

namespace condseg {

std::vector<SplitPlan> make_splits(std::vector<std::string> subject_ids, int repeats, uint64_t seed,
                                   double train_ratio, double val_ratio) {
    std::sort(subject_ids.begin(), subject_ids.end());
    subject_ids.erase(std::unique(subject_ids.begin(), subject_ids.end()), subject_ids.end());
    const int n = static_cast<int>(subject_ids.size());
    if (n < 3) throw InputError("make_splits: need at least 3 subjects");
    if (repeats < 1) throw InputError("make_splits: repeats must be >= 1");

    int n_train = static_cast<int>(std::lround(train_ratio * n));
    int n_val = static_cast<int>(std::lround(val_ratio * n));
    n_train = std::max(1, n_train);
    n_val = std::max(1, n_val);
    while (n_train + n_val > n - 1) --n_train;  // keep at least one test subject
    const int n_test = n - n_train - n_val;

    std::vector<SplitPlan> plans;
    plans.reserve(static_cast<size_t>(repeats));
    for (int r = 0; r < repeats; ++r) {
        SplitPlan p;
        p.repeat_index = r;
        p.seed = hash_u64(hash_u64(seed, "split"), static_cast<uint64_t>(r));
        std::vector<std::string> ids = subject_ids;
        Rng rng(p.seed);
        rng.shuffle(ids);
        p.train_subjects.assign(ids.begin(), ids.begin() + n_train);
        p.val_subjects.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
        p.test_subjects.assign(ids.begin() + n_train + n_val, ids.end());
        p.fraction = 1.0;
        p.effective_train_subjects = p.train_subjects;
        (void)n_test;
        plans.push_back(std::move(p));
    }
    return plans;
}

SplitPlan subsample_training(const SplitPlan& plan, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw InputError("subsample_training: fraction must be in (0, 1]");
    SplitPlan out = plan;
    out.fraction = fraction;
    std::vector<std::string> ids = plan.train_subjects;
    Rng rng(hash_u64(plan.seed, "subsample"));
    rng.shuffle(ids);
    const long k = std::max<long>(
        1, std::lround(fraction * static_cast<double>(plan.train_subjects.size())));
    out.effective_train_subjects.assign(ids.begin(), ids.begin() + k);
    return out;
}

}  // namespace condseg
