#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace autopriv {

// One error type for all domain failures; messages carry the context.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ColumnKind { Numeric, Categorical };

// Column-major storage: `numeric` is populated for Numeric columns, `tokens`
// for Categorical ones. Data is complete after construction — load_csv
// imputes missing cells (numeric -> per-column median, categorical -> the
// reserved token "__NA__") and records how many cells that touched.
struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    std::vector<double> numeric;
    std::vector<std::string> tokens;
    std::size_t missing_imputed = 0;

    std::size_t size() const {
        return kind == ColumnKind::Numeric ? numeric.size() : tokens.size();
    }
};

inline constexpr const char* kMissingCategory = "__NA__";

// A generic cell value; which member is meaningful depends on the column kind.
struct CellValue {
    double num = 0.0;
    std::string cat;
};

using RowValues = std::vector<CellValue>;

// Typed tabular table with a binary categorical class target. Immutable
// after construction; safe for concurrent reads.
class Dataset {
public:
    Dataset(std::string name, std::vector<Column> columns, std::string target);

    const std::string& name() const { return name_; }
    const std::string& target() const { return target_; }
    std::size_t target_index() const { return target_index_; }

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return columns_.size(); }
    std::size_t n_predictors() const { return columns_.size() - 1; }

    const std::vector<Column>& columns() const { return columns_; }
    const Column& column(std::size_t i) const { return columns_[i]; }
    const Column& column(const std::string& name) const;
    int column_index(const std::string& name) const;  // -1 when absent

    std::vector<std::size_t> predictor_indices() const;

    // Class tokens sorted lexicographically; the larger token is the
    // positive class.
    const std::string& negative_label() const { return neg_label_; }
    const std::string& positive_label() const { return pos_label_; }
    std::vector<int> binary_labels() const;
    int label_of(std::size_t row) const;

    CellValue cell(std::size_t row, std::size_t col) const;
    RowValues row_values(std::size_t row) const;

    Dataset select_rows(const std::vector<std::size_t>& rows) const;
    Dataset with_rows_appended(const std::vector<RowValues>& extra) const;

    bool same_schema(const Dataset& other) const;
    // Throws naming the first mismatched column.
    void require_same_schema(const Dataset& other) const;

    bool content_equals(const Dataset& other) const;

private:
    std::string name_;
    std::vector<Column> columns_;
    std::string target_;
    std::size_t target_index_ = 0;
    std::size_t n_rows_ = 0;
    std::string neg_label_, pos_label_;
};

struct Holdout {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    double fraction = 0.0;
    std::uint64_t seed = 0;
};

// Reads an RFC-4180 CSV with a mandatory header. Kind inference: a column is
// Numeric iff every non-missing cell parses as a finite real, else
// Categorical. Missing markers: empty cell, "NA", "NaN" (case-insensitive).
// The target column is always treated as Categorical (its tokens are class
// labels even when they look numeric) and must have exactly two distinct
// non-missing values.
Dataset load_csv(const std::filesystem::path& path, const std::string& target);

// Same, but column kinds are taken from `schema` instead of re-inferred.
// Header names/order must match; a numeric cell that fails to parse is an
// error rather than a kind flip.
Dataset load_csv_with_schema(const std::filesystem::path& path, const Dataset& schema);

// Floats serialized with shortest round-trip representation, so
// load_csv(write_csv(ds)) reproduces ds bit-exactly.
void write_csv(const Dataset& ds, const std::filesystem::path& path);
std::string to_csv_string(const Dataset& ds);

// Stratified holdout: |test| = round(fraction*n), per-class counts within
// 1 of fraction*class_count (largest remainder), deterministic per seed.
Holdout holdout_split(const Dataset& ds, double fraction, std::uint64_t seed);

// Round-half-up for non-negative quantities.
inline std::size_t round_half_up(double x) {
    return static_cast<std::size_t>(x + 0.5);
}

}  // namespace autopriv
