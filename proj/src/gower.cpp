#include "autopriv/gower.hpp"

#include <algorithm>
#include <cmath>

namespace autopriv {

GowerMetric::GowerMetric(const Dataset& range_source, std::vector<std::size_t> col_indices)
    : cols_(std::move(col_indices)) {
    kinds_.reserve(cols_.size());
    ranges_.reserve(cols_.size());
    for (std::size_t c : cols_) {
        const Column& col = range_source.column(c);
        kinds_.push_back(col.kind);
        if (col.kind == ColumnKind::Numeric) {
            auto [lo, hi] = std::minmax_element(col.numeric.begin(), col.numeric.end());
            ranges_.push_back(*hi - *lo);
        } else {
            ranges_.push_back(0.0);
        }
    }
}

double GowerMetric::distance(const Dataset& a, std::size_t row_a,
                             const Dataset& b, std::size_t row_b) const {
    if (cols_.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t j = 0; j < cols_.size(); ++j) {
        const Column& ca = a.column(cols_[j]);
        const Column& cb = b.column(cols_[j]);
        if (kinds_[j] == ColumnKind::Numeric) {
            const double va = ca.numeric[row_a];
            const double vb = cb.numeric[row_b];
            sum += ranges_[j] > 0.0 ? std::abs(va - vb) / ranges_[j] : (va == vb ? 0.0 : 1.0);
        } else {
            sum += ca.tokens[row_a] == cb.tokens[row_b] ? 0.0 : 1.0;
        }
    }
    return sum / static_cast<double>(cols_.size());
}

std::vector<std::size_t> knn_indices(const GowerMetric& metric,
                                     const Dataset& query, std::size_t query_row,
                                     const Dataset& table,
                                     const std::vector<std::size_t>& candidates,
                                     std::size_t k) {
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(candidates.size());
    for (std::size_t c : candidates) {
        scored.emplace_back(metric.distance(query, query_row, table, c), c);
    }
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(take), scored.end());
    std::vector<std::size_t> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(scored[i].second);
    return out;
}

}  // namespace autopriv
