#pragma once

#include <cstdint>
#include <vector>

#include "autopriv/tabular.hpp"

namespace autopriv {

// Gower distance over a fixed column subset: numeric columns contribute
// |a-b|/range with the range taken from a designated source table,
// categorical columns contribute 0/1 mismatch, and the result is the mean
// over the subset. Zero-range numeric columns fall back to 0/1 equality.
class GowerMetric {
public:
    GowerMetric(const Dataset& range_source, std::vector<std::size_t> col_indices);

    double distance(const Dataset& a, std::size_t row_a,
                    const Dataset& b, std::size_t row_b) const;

    const std::vector<std::size_t>& columns() const { return cols_; }

private:
    std::vector<std::size_t> cols_;
    std::vector<ColumnKind> kinds_;
    std::vector<double> ranges_;
};

// Indices of the k nearest rows of `table` (restricted to `candidates`) to
// row `query_row` of `query`; distance ties break toward the lower row
// index. Returns fewer than k when candidates run out.
std::vector<std::size_t> knn_indices(const GowerMetric& metric,
                                     const Dataset& query, std::size_t query_row,
                                     const Dataset& table,
                                     const std::vector<std::size_t>& candidates,
                                     std::size_t k);

}  // namespace autopriv
