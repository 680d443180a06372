#include "autopriv/linkattack.hpp"

#include <algorithm>
#include <set>

#include "autopriv/gower.hpp"
#include "autopriv/rng.hpp"

namespace autopriv {

std::pair<std::vector<std::string>, std::vector<std::string>>
split_aux_columns(const QISet& qis) {
    if (qis.columns.size() < 2) {
        throw Error("auxiliary split needs at least 2 QI columns, got " +
                    std::to_string(qis.columns.size()));
    }
    std::vector<std::string> a, b;
    for (std::size_t i = 0; i < qis.columns.size(); ++i) {
        (i % 2 == 0 ? a : b).push_back(qis.columns[i]);
    }
    return {a, b};
}

namespace {

// Success rate of the two-subspace k-NN intersection attack for the given
// target rows of `targets` against the variant table.
double attack_rate(const Dataset& targets, const std::vector<std::size_t>& target_rows,
                   const Dataset& variant, const GowerMetric& ma, const GowerMetric& mb,
                   std::size_t k) {
    std::vector<std::size_t> all(variant.n_rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

    std::size_t successes = 0;
    for (std::size_t t : target_rows) {
        const auto ia = knn_indices(ma, targets, t, variant, all, k);
        const auto ib = knn_indices(mb, targets, t, variant, all, k);
        const std::set<std::size_t> sa(ia.begin(), ia.end());
        bool hit = false;
        for (std::size_t i : ib) {
            if (sa.count(i)) {
                hit = true;
                break;
            }
        }
        if (hit) ++successes;
    }
    return target_rows.empty() ? 0.0
                               : static_cast<double>(successes) /
                                     static_cast<double>(target_rows.size());
}

std::vector<std::size_t> column_indices(const Dataset& ds, const std::vector<std::string>& names) {
    std::vector<std::size_t> out;
    for (const auto& n : names) {
        int i = ds.column_index(n);
        if (i < 0) throw Error(ds.name() + ": QI column '" + n + "' not found");
        out.push_back(static_cast<std::size_t>(i));
    }
    return out;
}

}  // namespace

LinkabilityReport linkability(const Dataset& original, const ProtectedVariant& variant,
                              const QISet& qis, const Dataset& control,
                              std::size_t n_targets, std::size_t k, std::uint64_t seed) {
    if (variant.data.n_rows() == 0) throw Error("linkability: empty variant");
    if (k < 1) throw Error("linkability: k must be >= 1");
    if (n_targets > original.n_rows()) {
        throw Error("linkability: " + std::to_string(n_targets) + " targets from " +
                    std::to_string(original.n_rows()) + " rows");
    }

    auto [a_names, b_names] = split_aux_columns(qis);
    // Column positions agree across all three tables (schema-checked loads),
    // and numeric ranges come from the original per the metric definition.
    const GowerMetric ma(original, column_indices(original, a_names));
    const GowerMetric mb(original, column_indices(original, b_names));

    std::vector<std::size_t> targets(original.n_rows());
    for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = i;
    Rng rng(seed);
    rng.shuffle(targets);
    targets.resize(n_targets);
    std::sort(targets.begin(), targets.end());

    std::vector<std::size_t> control_rows(control.n_rows());
    for (std::size_t i = 0; i < control_rows.size(); ++i) control_rows[i] = i;

    LinkabilityReport rep;
    rep.n_targets = n_targets;
    rep.k = k;
    rep.aux_a = a_names;
    rep.aux_b = b_names;
    rep.naive_rate = attack_rate(original, targets, variant.data, ma, mb, k);
    rep.control_rate = attack_rate(control, control_rows, variant.data, ma, mb, k);
    rep.adjusted_risk = adjusted_linkability(rep.naive_rate, rep.control_rate);
    return rep;
}

}  // namespace autopriv
