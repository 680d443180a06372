#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "autopriv/learning.hpp"

namespace autopriv {

// Objective the search strategies optimize: (spec, training-data fraction,
// seed) -> cross-validated result. Injectable so the strategies can be
// exercised against synthetic, noise-free objectives.
using Evaluator = std::function<EvalResult(const LearnerSpec&, double, std::uint64_t)>;

// Production objective: repeated stratified CV on a dataset captured by
// value. The fraction argument subsamples each fold's training side.
Evaluator cv_evaluator(Dataset ds, int folds = 5, int repeats = 2);

// One fit recorded in the budget ledger.
struct LedgerEntry {
    int spec_id = -1;
    double resource_fraction = 1.0;
    double cv_auc = 0.0;
    int round = 0;     // halving round within a bracket; 0 for flat strategies
    int bracket = -1;  // hyperband bracket index, -1 elsewhere
};

struct SearchOutcome {
    LearnerSpec best_spec;
    EvalResult best_result;  // best spec's full-resource evaluation
    std::vector<LedgerEntry> evaluations;
    double total_resource_units = 0.0;  // sum of resource_fraction over fits
};

// Exhaustive search: every spec at full resource; best by cv_auc_mean, ties
// broken toward the lower spec_id.
SearchOutcome grid_search(const std::vector<LearnerSpec>& space, const Evaluator& evaluate,
                          std::uint64_t seed);
SearchOutcome grid_search(const std::vector<LearnerSpec>& space, const Dataset& ds,
                          std::uint64_t seed);

// n_iter specs sampled uniformly without replacement (everything when
// n_iter >= |space|), each at full resource.
SearchOutcome random_search(const std::vector<LearnerSpec>& space, const Evaluator& evaluate,
                            int n_iter, std::uint64_t seed);
SearchOutcome random_search(const std::vector<LearnerSpec>& space, const Dataset& ds, int n_iter,
                            std::uint64_t seed);

// Round 0 evaluates every candidate at min_resource; each round keeps the
// top ceil(count/factor) by cv_auc (ties toward lower spec_id) and grows the
// resource by `factor`, capped at 1.0. Stops once a single candidate has a
// full-resource evaluation or after two rounds at the cap.
SearchOutcome successive_halving(const std::vector<LearnerSpec>& space,
                                 const Evaluator& evaluate, std::uint64_t seed,
                                 double factor = 3.0, double min_resource = 1.0 / 9.0);
SearchOutcome successive_halving(const std::vector<LearnerSpec>& space, const Dataset& ds,
                                 std::uint64_t seed, double factor = 3.0,
                                 double min_resource = 1.0 / 9.0);

// Brackets s = s_max..0 (s_max = 2): bracket s samples
// min(|space|, max(2, factor^s)) specs without replacement and runs
// successive halving on them starting at max_resource/factor^s. Global best
// across brackets.
SearchOutcome hyperband(const std::vector<LearnerSpec>& space, const Evaluator& evaluate,
                        std::uint64_t seed, double max_resource = 1.0, double factor = 3.0);
SearchOutcome hyperband(const std::vector<LearnerSpec>& space, const Dataset& ds,
                        std::uint64_t seed, double max_resource = 1.0, double factor = 3.0);

// Hypothetical ideal baseline: evaluates every spec fully and picks by test
// AUC on the holdout (unattainable in practice; used as the reference point
// in win/draw/loss comparisons).
SearchOutcome oracle_best(const std::vector<LearnerSpec>& space, const Dataset& train,
                          const Dataset& holdout, std::uint64_t seed);

// Seed handed to the evaluator for a given spec; exposed so callers can
// reproduce an individual evaluation outside a search run.
std::uint64_t evaluation_seed(std::uint64_t seed, int spec_id);

}  // namespace autopriv
