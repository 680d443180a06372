#include "autopriv/cash.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "autopriv/rng.hpp"

namespace autopriv {
namespace {

void require_nonempty(const std::vector<LearnerSpec>& space) {
    if (space.empty()) throw Error("search space is empty");
}

// (cv desc, spec_id asc) comparator over indices into a result array.
struct Ranked {
    const LearnerSpec* spec;
    EvalResult result;
};

bool better(const Ranked& a, const Ranked& b) {
    if (a.result.cv_auc_mean != b.result.cv_auc_mean) {
        return a.result.cv_auc_mean > b.result.cv_auc_mean;
    }
    return a.spec->spec_id < b.spec->spec_id;
}

// Core halving loop shared by successive_halving and hyperband brackets.
// Evaluates candidates round by round, appending to the caller's ledger.
Ranked halving_rounds(std::vector<const LearnerSpec*> candidates, const Evaluator& evaluate,
                      std::uint64_t seed, double factor, double resource, double cap,
                      int bracket, std::vector<LedgerEntry>& ledger, double& units) {
    std::sort(candidates.begin(), candidates.end(),
              [](const LearnerSpec* a, const LearnerSpec* b) { return a->spec_id < b->spec_id; });
    int rounds_at_cap = 0;
    for (int round = 0;; ++round) {
        if (candidates.size() == 1) resource = cap;
        std::vector<Ranked> results;
        results.reserve(candidates.size());
        for (const LearnerSpec* s : candidates) {
            EvalResult r = evaluate(*s, resource, evaluation_seed(seed, s->spec_id));
            r.resource_fraction = resource;
            ledger.push_back({s->spec_id, resource, r.cv_auc_mean, round, bracket});
            units += resource;
            results.push_back({s, std::move(r)});
        }
        std::sort(results.begin(), results.end(), better);
        if (resource >= cap) ++rounds_at_cap;
        if (candidates.size() == 1 || rounds_at_cap >= 2) return std::move(results.front());
        const std::size_t keep = static_cast<std::size_t>(
            std::ceil(static_cast<double>(candidates.size()) / factor));
        candidates.clear();
        for (std::size_t i = 0; i < keep; ++i) candidates.push_back(results[i].spec);
        std::sort(candidates.begin(), candidates.end(),
                  [](const LearnerSpec* a, const LearnerSpec* b) {
                      return a->spec_id < b->spec_id;
                  });
        resource = std::min(cap, resource * factor);
    }
}

// Flat full-resource sweep over a candidate list; best by (cv desc, id asc).
SearchOutcome flat_sweep(const std::vector<const LearnerSpec*>& candidates,
                         const Evaluator& evaluate, std::uint64_t seed) {
    SearchOutcome out;
    bool have_best = false;
    Ranked best{nullptr, {}};
    for (const LearnerSpec* s : candidates) {
        EvalResult r = evaluate(*s, 1.0, evaluation_seed(seed, s->spec_id));
        r.resource_fraction = 1.0;
        out.evaluations.push_back({s->spec_id, 1.0, r.cv_auc_mean, 0, -1});
        out.total_resource_units += 1.0;
        Ranked cur{s, std::move(r)};
        if (!have_best || better(cur, best)) {
            best = std::move(cur);
            have_best = true;
        }
    }
    out.best_spec = *best.spec;
    out.best_result = std::move(best.result);
    return out;
}

std::vector<const LearnerSpec*> all_of(const std::vector<LearnerSpec>& space) {
    std::vector<const LearnerSpec*> ptrs;
    ptrs.reserve(space.size());
    for (const auto& s : space) ptrs.push_back(&s);
    return ptrs;
}

// k distinct picks from the space, sorted by spec_id.
std::vector<const LearnerSpec*> sample_specs(const std::vector<LearnerSpec>& space,
                                             std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(space.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates: the first k slots end up uniform without
    // replacement.
    for (std::size_t i = 0; i < k && i + 1 < idx.size(); ++i) {
        std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    }
    std::vector<const LearnerSpec*> picks;
    for (std::size_t i = 0; i < k; ++i) picks.push_back(&space[idx[i]]);
    std::sort(picks.begin(), picks.end(),
              [](const LearnerSpec* a, const LearnerSpec* b) { return a->spec_id < b->spec_id; });
    return picks;
}

}  // namespace

std::uint64_t evaluation_seed(std::uint64_t seed, int spec_id) {
    return derive_seed(seed, "eval", spec_id);
}

Evaluator cv_evaluator(Dataset ds, int folds, int repeats) {
    return [ds = std::move(ds), folds, repeats](const LearnerSpec& spec, double resource,
                                                std::uint64_t seed) {
        return cross_validate(ds, spec, folds, repeats, seed, resource);
    };
}

SearchOutcome grid_search(const std::vector<LearnerSpec>& space, const Evaluator& evaluate,
                          std::uint64_t seed) {
    require_nonempty(space);
    return flat_sweep(all_of(space), evaluate, seed);
}

SearchOutcome grid_search(const std::vector<LearnerSpec>& space, const Dataset& ds,
                          std::uint64_t seed) {
    return grid_search(space, cv_evaluator(ds), seed);
}

SearchOutcome random_search(const std::vector<LearnerSpec>& space, const Evaluator& evaluate,
                            int n_iter, std::uint64_t seed) {
    require_nonempty(space);
    if (n_iter < 1) throw Error("random search needs n_iter >= 1, got " + std::to_string(n_iter));
    Rng rng(derive_seed(seed, "random_search"));
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(n_iter), space.size());
    return flat_sweep(sample_specs(space, k, rng), evaluate, seed);
}

SearchOutcome random_search(const std::vector<LearnerSpec>& space, const Dataset& ds, int n_iter,
                            std::uint64_t seed) {
    return random_search(space, cv_evaluator(ds), n_iter, seed);
}

SearchOutcome successive_halving(const std::vector<LearnerSpec>& space,
                                 const Evaluator& evaluate, std::uint64_t seed, double factor,
                                 double min_resource) {
    require_nonempty(space);
    if (factor < 2.0) throw Error("halving factor must be >= 2");
    if (min_resource <= 0.0 || min_resource > 1.0) {
        throw Error("min_resource must be in (0,1]");
    }
    SearchOutcome out;
    Ranked best = halving_rounds(all_of(space), evaluate, seed, factor, min_resource, 1.0,
                                 /*bracket=*/-1, out.evaluations, out.total_resource_units);
    out.best_spec = *best.spec;
    out.best_result = std::move(best.result);
    return out;
}

SearchOutcome successive_halving(const std::vector<LearnerSpec>& space, const Dataset& ds,
                                 std::uint64_t seed, double factor, double min_resource) {
    return successive_halving(space, cv_evaluator(ds), seed, factor, min_resource);
}

SearchOutcome hyperband(const std::vector<LearnerSpec>& space, const Evaluator& evaluate,
                        std::uint64_t seed, double max_resource, double factor) {
    require_nonempty(space);
    if (factor < 2.0) throw Error("halving factor must be >= 2");
    if (max_resource <= 0.0 || max_resource > 1.0) {
        throw Error("max_resource must be in (0,1]");
    }
    constexpr int s_max = 2;  // resource ladder spans factor^-2 .. 1
    SearchOutcome out;
    bool have_best = false;
    Ranked best{nullptr, {}};
    for (int s = s_max; s >= 0; --s) {
        const std::size_t n_s = std::min(
            space.size(),
            static_cast<std::size_t>(std::max(2.0, std::pow(factor, s))));
        Rng rng(derive_seed(seed, "bracket", s));
        auto picks = sample_specs(space, n_s, rng);
        const double r0 = max_resource / std::pow(factor, s);
        Ranked bracket_best =
            halving_rounds(std::move(picks), evaluate, seed, factor, r0, max_resource, s,
                           out.evaluations, out.total_resource_units);
        if (!have_best || better(bracket_best, best)) {
            best = std::move(bracket_best);
            have_best = true;
        }
    }
    out.best_spec = *best.spec;
    out.best_result = std::move(best.result);
    return out;
}

SearchOutcome hyperband(const std::vector<LearnerSpec>& space, const Dataset& ds,
                        std::uint64_t seed, double max_resource, double factor) {
    return hyperband(space, cv_evaluator(ds), seed, max_resource, factor);
}

SearchOutcome oracle_best(const std::vector<LearnerSpec>& space, const Dataset& train,
                          const Dataset& holdout, std::uint64_t seed) {
    require_nonempty(space);
    SearchOutcome out;
    bool have_best = false;
    LearnerSpec best_spec;
    EvalResult best_result;
    for (const auto& spec : space) {
        const std::uint64_t s = evaluation_seed(seed, spec.spec_id);
        EvalResult r = cross_validate(train, spec, 5, 2, s);
        r.test_auc = holdout_test_auc(spec, train, holdout, s);
        out.evaluations.push_back({spec.spec_id, 1.0, r.cv_auc_mean, 0, -1});
        out.total_resource_units += 1.0;
        if (!have_best || r.test_auc > best_result.test_auc) {
            best_spec = spec;
            best_result = std::move(r);
            have_best = true;
        }
    }
    out.best_spec = best_spec;
    out.best_result = std::move(best_result);
    return out;
}

}  // namespace autopriv
