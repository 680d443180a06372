#include "autopriv/tabular.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "autopriv/csv.hpp"
#include "autopriv/rng.hpp"

namespace autopriv {
namespace {

bool is_missing_marker(const std::string& cell) {
    if (cell.empty()) return true;
    if (cell.size() == 2) {
        return (cell[0] == 'N' || cell[0] == 'n') && (cell[1] == 'A' || cell[1] == 'a');
    }
    if (cell.size() == 3) {
        std::string low;
        for (char c : cell) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        return low == "nan";
    }
    return false;
}

bool parse_finite(const std::string& cell, double& out) {
    const char* first = cell.data();
    const char* last = first + cell.size();
    // Tolerate surrounding spaces but nothing else beyond the number.
    while (first < last && *first == ' ') ++first;
    while (last > first && *(last - 1) == ' ') --last;
    if (first == last) return false;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) return false;
    if (!std::isfinite(v)) return false;
    out = v;
    return true;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    if (n % 2 == 1) return v[n / 2];
    return (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

Column build_numeric_column(const std::string& name, const csv::Table& t, std::size_t col) {
    Column c;
    c.name = name;
    c.kind = ColumnKind::Numeric;
    c.numeric.resize(t.rows.size());
    std::vector<std::size_t> missing;
    std::vector<double> present;
    present.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string& cell = t.rows[r][col];
        if (is_missing_marker(cell)) {
            missing.push_back(r);
            continue;
        }
        double v = 0.0;
        parse_finite(cell, v);  // caller guaranteed this succeeds
        c.numeric[r] = v;
        present.push_back(v);
    }
    const double med = median_of(std::move(present));
    for (std::size_t r : missing) c.numeric[r] = med;
    c.missing_imputed = missing.size();
    return c;
}

Column build_categorical_column(const std::string& name, const csv::Table& t, std::size_t col) {
    Column c;
    c.name = name;
    c.kind = ColumnKind::Categorical;
    c.tokens.resize(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string& cell = t.rows[r][col];
        if (is_missing_marker(cell)) {
            c.tokens[r] = kMissingCategory;
            ++c.missing_imputed;
        } else {
            c.tokens[r] = cell;
        }
    }
    return c;
}

Dataset from_table(const csv::Table& t, const std::string& origin, const std::string& name,
                   const std::string& target, const Dataset* schema) {
    if (t.header.empty()) throw Error(origin + ": no header row");
    {
        std::set<std::string> seen;
        for (const auto& h : t.header) {
            if (!seen.insert(h).second) throw Error(origin + ": duplicate column name '" + h + "'");
        }
    }
    if (schema) {
        if (t.header.size() != schema->n_cols()) {
            throw Error(origin + ": expected " + std::to_string(schema->n_cols()) +
                        " columns, got " + std::to_string(t.header.size()));
        }
        for (std::size_t i = 0; i < t.header.size(); ++i) {
            if (t.header[i] != schema->column(i).name) {
                throw Error(origin + ": column " + std::to_string(i) + " is '" + t.header[i] +
                            "', expected '" + schema->column(i).name + "'");
            }
        }
    }
    const std::string& tgt = schema ? schema->target() : target;
    std::size_t target_col = t.header.size();
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i] == tgt) target_col = i;
    }
    if (target_col == t.header.size()) {
        throw Error(origin + ": target column '" + tgt + "' not found");
    }
    if (t.rows.empty()) throw Error(origin + ": no data rows");

    std::vector<Column> cols;
    cols.reserve(t.header.size());
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        bool numeric;
        if (schema) {
            numeric = schema->column(i).kind == ColumnKind::Numeric;
            if (numeric) {
                for (std::size_t r = 0; r < t.rows.size(); ++r) {
                    const std::string& cell = t.rows[r][i];
                    double v;
                    if (!is_missing_marker(cell) && !parse_finite(cell, v)) {
                        throw Error(origin + ": line " + std::to_string(r + 2) + ": column '" +
                                    t.header[i] + "' expected numeric, got '" + cell + "'");
                    }
                }
            }
        } else if (i == target_col) {
            // Class labels stay categorical even when they look numeric.
            numeric = false;
        } else {
            numeric = true;
            bool any_present = false;
            for (const auto& row : t.rows) {
                const std::string& cell = row[i];
                if (is_missing_marker(cell)) continue;
                any_present = true;
                double v;
                if (!parse_finite(cell, v)) {
                    numeric = false;
                    break;
                }
            }
            if (!any_present) numeric = false;  // all-missing -> categorical __NA__
        }
        cols.push_back(numeric ? build_numeric_column(t.header[i], t, i)
                               : build_categorical_column(t.header[i], t, i));
    }
    return Dataset(name, std::move(cols), tgt);
}

}  // namespace

Dataset::Dataset(std::string name, std::vector<Column> columns, std::string target)
    : name_(std::move(name)), columns_(std::move(columns)), target_(std::move(target)) {
    if (columns_.empty()) throw Error(name_ + ": dataset has no columns");
    n_rows_ = columns_.front().size();
    for (const auto& c : columns_) {
        if (c.size() != n_rows_) {
            throw Error(name_ + ": column '" + c.name + "' has " + std::to_string(c.size()) +
                        " rows, expected " + std::to_string(n_rows_));
        }
    }
    if (n_rows_ == 0) throw Error(name_ + ": dataset has no rows");
    bool found = false;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i].name == target_) {
            target_index_ = i;
            found = true;
        }
    }
    if (!found) throw Error(name_ + ": target column '" + target_ + "' not found");
    const Column& tc = columns_[target_index_];
    if (tc.kind != ColumnKind::Categorical) {
        throw Error(name_ + ": target column '" + target_ + "' must be categorical");
    }
    std::set<std::string> labels(tc.tokens.begin(), tc.tokens.end());
    if (labels.size() != 2) {
        throw Error(name_ + ": target column '" + target_ + "' has " +
                    std::to_string(labels.size()) + " distinct values, expected 2");
    }
    auto it = labels.begin();
    neg_label_ = *it++;
    pos_label_ = *it;
}

const Column& Dataset::column(const std::string& name) const {
    int i = column_index(name);
    if (i < 0) throw Error(name_ + ": no column named '" + name + "'");
    return columns_[static_cast<std::size_t>(i)];
}

int Dataset::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

std::vector<std::size_t> Dataset::predictor_indices() const {
    std::vector<std::size_t> out;
    out.reserve(columns_.size() - 1);
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (i != target_index_) out.push_back(i);
    }
    return out;
}

std::vector<int> Dataset::binary_labels() const {
    const auto& toks = columns_[target_index_].tokens;
    std::vector<int> y(toks.size());
    for (std::size_t i = 0; i < toks.size(); ++i) y[i] = toks[i] == pos_label_ ? 1 : 0;
    return y;
}

int Dataset::label_of(std::size_t row) const {
    return columns_[target_index_].tokens[row] == pos_label_ ? 1 : 0;
}

CellValue Dataset::cell(std::size_t row, std::size_t col) const {
    const Column& c = columns_[col];
    CellValue v;
    if (c.kind == ColumnKind::Numeric) {
        v.num = c.numeric[row];
    } else {
        v.cat = c.tokens[row];
    }
    return v;
}

RowValues Dataset::row_values(std::size_t row) const {
    RowValues out(columns_.size());
    for (std::size_t c = 0; c < columns_.size(); ++c) out[c] = cell(row, c);
    return out;
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& rows) const {
    std::vector<Column> cols;
    cols.reserve(columns_.size());
    for (const auto& c : columns_) {
        Column nc;
        nc.name = c.name;
        nc.kind = c.kind;
        if (c.kind == ColumnKind::Numeric) {
            nc.numeric.reserve(rows.size());
            for (std::size_t r : rows) nc.numeric.push_back(c.numeric[r]);
        } else {
            nc.tokens.reserve(rows.size());
            for (std::size_t r : rows) nc.tokens.push_back(c.tokens[r]);
        }
        cols.push_back(std::move(nc));
    }
    return Dataset(name_, std::move(cols), target_);
}

Dataset Dataset::with_rows_appended(const std::vector<RowValues>& extra) const {
    std::vector<Column> cols = columns_;
    for (const auto& row : extra) {
        if (row.size() != columns_.size()) {
            throw Error(name_ + ": appended row has " + std::to_string(row.size()) +
                        " cells, expected " + std::to_string(columns_.size()));
        }
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (cols[c].kind == ColumnKind::Numeric) {
                cols[c].numeric.push_back(row[c].num);
            } else {
                cols[c].tokens.push_back(row[c].cat);
            }
        }
    }
    return Dataset(name_, std::move(cols), target_);
}

bool Dataset::same_schema(const Dataset& other) const {
    if (columns_.size() != other.columns_.size()) return false;
    if (target_ != other.target_) return false;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i].name != other.columns_[i].name) return false;
        if (columns_[i].kind != other.columns_[i].kind) return false;
    }
    return true;
}

void Dataset::require_same_schema(const Dataset& other) const {
    if (columns_.size() != other.columns_.size()) {
        throw Error(name_ + " vs " + other.name_ + ": column count " +
                    std::to_string(columns_.size()) + " vs " + std::to_string(other.columns_.size()));
    }
    if (target_ != other.target_) {
        throw Error(name_ + " vs " + other.name_ + ": target '" + target_ + "' vs '" +
                    other.target_ + "'");
    }
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i].name != other.columns_[i].name || columns_[i].kind != other.columns_[i].kind) {
            throw Error(name_ + " vs " + other.name_ + ": column " + std::to_string(i) +
                        " ('" + columns_[i].name + "') differs in name or kind");
        }
    }
}

bool Dataset::content_equals(const Dataset& other) const {
    if (!same_schema(other) || n_rows_ != other.n_rows_) return false;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        const Column& a = columns_[i];
        const Column& b = other.columns_[i];
        if (a.kind == ColumnKind::Numeric) {
            for (std::size_t r = 0; r < n_rows_; ++r) {
                // Bit-level compare so that -0.0 vs 0.0 or NaN payloads surface.
                if (a.numeric[r] != b.numeric[r]) return false;
            }
        } else {
            if (a.tokens != b.tokens) return false;
        }
    }
    return true;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& target) {
    csv::Table t = csv::read_file(path);
    return from_table(t, path.filename().string(), path.stem().string(), target, nullptr);
}

Dataset load_csv_with_schema(const std::filesystem::path& path, const Dataset& schema) {
    csv::Table t = csv::read_file(path);
    return from_table(t, path.filename().string(), path.stem().string(), "", &schema);
}

std::string to_csv_string(const Dataset& ds) {
    std::string out;
    {
        std::vector<std::string> hdr;
        hdr.reserve(ds.n_cols());
        for (const auto& c : ds.columns()) hdr.push_back(c.name);
        out += csv::format_row(hdr);
    }
    std::vector<std::string> cells(ds.n_cols());
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        for (std::size_t c = 0; c < ds.n_cols(); ++c) {
            const Column& col = ds.column(c);
            cells[c] = col.kind == ColumnKind::Numeric ? csv::format_double(col.numeric[r])
                                                       : col.tokens[r];
        }
        out += csv::format_row(cells);
    }
    return out;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f << to_csv_string(ds);
    if (!f) throw Error("write failed: " + path.string());
}

Holdout holdout_split(const Dataset& ds, double fraction, std::uint64_t seed) {
    if (fraction <= 0.0 || fraction >= 1.0) {
        throw Error("holdout fraction must be in (0,1), got " + std::to_string(fraction));
    }
    const std::size_t n = ds.n_rows();
    const std::size_t want_test = round_half_up(fraction * static_cast<double>(n));
    if (want_test == 0 || want_test >= n) {
        throw Error("holdout of " + std::to_string(want_test) + " rows from " + std::to_string(n) +
                    " leaves an empty partition");
    }

    // Group rows by class, preserving row order within each group.
    std::vector<std::size_t> neg, pos;
    const auto y = ds.binary_labels();
    for (std::size_t i = 0; i < n; ++i) (y[i] ? pos : neg).push_back(i);

    // Largest-remainder apportionment of the test quota over the two classes.
    // A class never moves wholesale into test: capacity is size-1 so both
    // partitions keep every class (each class has >= 2 rows by precondition).
    struct Share {
        std::vector<std::size_t>* rows;
        double exact;
        std::size_t take;
    };
    std::vector<Share> shares;
    for (auto* g : {&neg, &pos}) {
        double exact = fraction * static_cast<double>(g->size());
        shares.push_back({g, exact, static_cast<std::size_t>(exact)});
    }
    std::size_t assigned = 0;
    for (const auto& s : shares) assigned += s.take;
    // Hand out remaining seats by descending fractional remainder; ties go to
    // the earlier (negative-label) class for determinism.
    std::vector<std::size_t> order(shares.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        double ra = shares[a].exact - std::floor(shares[a].exact);
        double rb = shares[b].exact - std::floor(shares[b].exact);
        return ra > rb;
    });
    while (assigned < want_test) {
        bool progress = false;
        for (std::size_t i : order) {
            if (assigned >= want_test) break;
            Share& s = shares[i];
            if (s.take + 1 < s.rows->size()) {
                ++s.take;
                ++assigned;
                progress = true;
            }
        }
        if (!progress) break;  // every class at capacity (extreme fractions)
    }
    // A zero-count class would vanish from the test side; pull a seat over
    // from the better-represented class.
    for (auto& s : shares) {
        if (s.take == 0) {
            auto& other = (&s == &shares[0]) ? shares[1] : shares[0];
            if (other.take >= 2) {
                --other.take;
                ++s.take;
            }
        }
    }

    Holdout h;
    h.fraction = fraction;
    h.seed = seed;
    Rng rng(derive_seed(seed, ds.name(), "holdout"));
    for (auto& s : shares) {
        std::vector<std::size_t> idx = *s.rows;
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i < s.take ? h.test_idx : h.train_idx).push_back(idx[i]);
        }
    }
    std::sort(h.train_idx.begin(), h.train_idx.end());
    std::sort(h.test_idx.begin(), h.test_idx.end());
    return h;
}

}  // namespace autopriv
