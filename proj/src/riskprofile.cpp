#include "autopriv/riskprofile.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "autopriv/csv.hpp"
#include "autopriv/rng.hpp"

namespace autopriv {
namespace {

std::vector<std::size_t> resolve_columns(const Dataset& ds, const QISet& qis) {
    if (qis.columns.empty()) throw Error(ds.name() + ": QI set is empty");
    std::vector<std::size_t> idx;
    std::set<std::string> seen;
    for (const auto& name : qis.columns) {
        int i = ds.column_index(name);
        if (i < 0) throw Error(ds.name() + ": QI column '" + name + "' not found");
        if (static_cast<std::size_t>(i) == ds.target_index()) {
            throw Error(ds.name() + ": QI set may not include the target '" + name + "'");
        }
        if (!seen.insert(name).second) throw Error(ds.name() + ": duplicate QI column '" + name + "'");
        idx.push_back(static_cast<std::size_t>(i));
    }
    return idx;
}

}  // namespace

RiskProfile equivalence_classes(const Dataset& ds, const QISet& qis) {
    const auto cols = resolve_columns(ds, qis);
    // Key rows by their QI tuple. Numeric cells are keyed via shortest
    // round-trip text (normalizing -0 so exact == semantics hold).
    std::map<std::vector<std::string>, std::vector<std::size_t>> classes;
    std::vector<std::string> key(cols.size());
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const Column& c = ds.column(cols[j]);
            if (c.kind == ColumnKind::Numeric) {
                double v = c.numeric[r];
                if (v == 0.0) v = 0.0;  // fold -0.0 into +0.0
                key[j] = csv::format_double(v);
            } else {
                key[j] = c.tokens[r];
            }
        }
        classes[key].push_back(r);
    }

    RiskProfile prof;
    prof.k.resize(ds.n_rows());
    for (const auto& [tuple, members] : classes) {
        for (std::size_t r : members) prof.k[r] = members.size();
        prof.k_histogram[members.size()] += members.size();
    }
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        if (prof.k[r] <= 2) prof.highest_risk.push_back(r);
    }
    return prof;
}

std::vector<std::size_t> select_highest_risk(const Dataset& ds, const QISet& qis) {
    return equivalence_classes(ds, qis).highest_risk;
}

std::vector<QISet> sample_qi_sets(const Dataset& ds, int count, double fraction,
                                  std::uint64_t seed) {
    if (count < 1) throw Error("QI set count must be >= 1");
    if (fraction <= 0.0 || fraction > 1.0) {
        throw Error("QI fraction must be in (0,1], got " + std::to_string(fraction));
    }
    const auto predictors = ds.predictor_indices();
    const std::size_t p = predictors.size();
    const std::size_t m = std::max<std::size_t>(1, round_half_up(fraction * static_cast<double>(p)));

    // How many distinct m-subsets exist (saturating well above any sane count).
    double n_subsets = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
        n_subsets *= static_cast<double>(p - i) / static_cast<double>(i + 1);
        if (n_subsets > 1e18) break;
    }
    if (static_cast<double>(count) > n_subsets) {
        throw Error(ds.name() + ": cannot draw " + std::to_string(count) + " distinct QI sets of size " +
                    std::to_string(m) + " from " + std::to_string(p) + " predictors");
    }

    Rng rng(derive_seed(seed, ds.name(), "qi_sets"));
    std::set<std::vector<std::size_t>> chosen;
    std::vector<QISet> out;
    std::vector<std::size_t> pool(predictors);
    while (out.size() < static_cast<std::size_t>(count)) {
        // Partial Fisher-Yates: the first m entries are the draw.
        for (std::size_t i = 0; i < m; ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        std::vector<std::size_t> pick(pool.begin(), pool.begin() + static_cast<long>(m));
        std::sort(pick.begin(), pick.end());  // canonical column order
        if (!chosen.insert(pick).second) continue;
        QISet q;
        q.id = static_cast<int>(out.size());
        for (std::size_t col : pick) q.columns.push_back(ds.column(col).name);
        out.push_back(std::move(q));
    }
    return out;
}

}  // namespace autopriv
