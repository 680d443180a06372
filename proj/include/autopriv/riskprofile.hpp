#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "autopriv/tabular.hpp"

namespace autopriv {

// An ordered set of quasi-identifier columns, always a subset of the
// dataset's predictors.
struct QISet {
    int id = 0;
    std::vector<std::string> columns;
};

// Per-record k-anonymity profile: k(i) is the size of row i's equivalence
// class under exact QI-tuple matching; rows with k <= 2 are the
// highest-risk records that synthesis replaces (the protected output must
// end up at least 3-anonymous).
struct RiskProfile {
    std::vector<std::size_t> k;
    std::vector<std::size_t> highest_risk;
    std::map<std::size_t, std::size_t> k_histogram;
};

RiskProfile equivalence_classes(const Dataset& ds, const QISet& qis);
std::vector<std::size_t> select_highest_risk(const Dataset& ds, const QISet& qis);

// Draws `count` distinct QI sets of max(1, round(fraction*p)) predictor
// columns each. Errors when count exceeds the number of distinct subsets.
std::vector<QISet> sample_qi_sets(const Dataset& ds, int count, double fraction,
                                  std::uint64_t seed);

}  // namespace autopriv
