#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "autopriv/riskprofile.hpp"
#include "autopriv/synth.hpp"
#include "autopriv/tabular.hpp"

namespace autopriv {

// Outcome of the record-linkage attack: an adversary holding two disjoint
// QI subspaces links a target when the k nearest variant rows in both
// subspaces share at least one index. The naive success rate is adjusted by
// the rate achieved against control rows that were never part of the
// protected data.
struct LinkabilityReport {
    std::size_t n_targets = 0;
    std::size_t k = 0;
    double naive_rate = 0.0;
    double control_rate = 0.0;
    double adjusted_risk = 0.0;
    std::vector<std::string> aux_a;
    std::vector<std::string> aux_b;
};

// Deterministic alternation of the QI columns: even positions feed subspace
// A, odd positions subspace B. Requires at least two columns.
std::pair<std::vector<std::string>, std::vector<std::string>>
split_aux_columns(const QISet& qis);

LinkabilityReport linkability(const Dataset& original, const ProtectedVariant& variant,
                              const QISet& qis, const Dataset& control,
                              std::size_t n_targets, std::size_t k, std::uint64_t seed);

inline double adjusted_linkability(double naive_rate, double control_rate) {
    if (control_rate >= 1.0) return 0.0;
    const double adj = (naive_rate - control_rate) / (1.0 - control_rate);
    return adj < 0.0 ? 0.0 : (adj > 1.0 ? 1.0 : adj);
}

}  // namespace autopriv
