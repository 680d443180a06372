#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "autopriv/csv.hpp"
#include "autopriv/rng.hpp"
#include "autopriv/synth.hpp"
#include "autopriv/tabular.hpp"

using namespace autopriv;
namespace fs = std::filesystem;

namespace {

// Small mixed-type table with tunable size; QI risk plays no role here, the
// highrisk set is passed in explicitly.
Dataset make_table(std::size_t n, unsigned salt = 0) {
    Rng rng(1000 + salt);
    Column a{"a", ColumnKind::Numeric, {}, {}, 0};
    Column b{"b", ColumnKind::Numeric, {}, {}, 0};
    Column t{"t", ColumnKind::Categorical, {}, {}, 0};
    Column cls{"class", ColumnKind::Categorical, {}, {}, 0};
    for (std::size_t i = 0; i < n; ++i) {
        a.numeric.push_back(rng.unit() * 10.0);
        b.numeric.push_back(static_cast<double>(rng.below(100)));
        t.tokens.push_back(rng.coin() ? "red" : "blue");
        cls.tokens.push_back(rng.coin() ? "yes" : "no");
    }
    // Ensure both classes appear.
    cls.tokens[0] = "yes";
    cls.tokens[1] = "no";
    return Dataset("mem", {a, b, t, cls}, "class");
}

std::vector<std::size_t> iota_idx(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

}  // namespace

TEST_CASE("config grid has 89 entries in a stable canonical order") {
    auto grid = enumerate_config_grid();
    CHECK(grid.size() == 89);

    // Oracle for the PrivateSMOTE block: enumerate the 3*3*5 product directly.
    std::size_t smote = 0;
    for (const auto& c : grid) {
        if (c.technique == Technique::PrivateSMOTE) ++smote;
    }
    CHECK(smote == 45);

    // 3 QI sets cross the grid into 267 per-dataset solutions.
    CHECK(grid.size() * 3 == 267);

    // Technique block layout and ordinal stability.
    CHECK(grid[0].technique == Technique::CopulaGAN);
    CHECK(grid[4].technique == Technique::TVAE);
    CHECK(grid[8].technique == Technique::CTGAN);
    CHECK(grid[12].technique == Technique::DPGAN);
    CHECK(grid[28].technique == Technique::PATEGAN);
    CHECK(grid[44].technique == Technique::PrivateSMOTE);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(grid[i].config_id == static_cast<int>(i));

    // Last key varies fastest within each block.
    CHECK(grid[0].params == std::map<std::string, double>{{"epochs", 100}, {"batch_size", 50}});
    CHECK(grid[1].params == std::map<std::string, double>{{"epochs", 100}, {"batch_size", 100}});
    CHECK(grid[12].params ==
          std::map<std::string, double>{{"epochs", 100}, {"batch_size", 50}, {"epsilon", 0.1}});
    CHECK(grid[13].params ==
          std::map<std::string, double>{{"epochs", 100}, {"batch_size", 50}, {"epsilon", 0.5}});
    CHECK(grid[44].params ==
          std::map<std::string, double>{{"N", 1}, {"knn", 1}, {"epsilon", 0.1}});
    CHECK(grid[45].params ==
          std::map<std::string, double>{{"N", 1}, {"knn", 1}, {"epsilon", 0.5}});
    CHECK(grid[88].params ==
          std::map<std::string, double>{{"N", 3}, {"knn", 5}, {"epsilon", 10.0}});

    // Pure function: two enumerations agree entry by entry.
    auto again = enumerate_config_grid();
    REQUIRE(again.size() == grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(again[i].technique == grid[i].technique);
        CHECK(again[i].params == grid[i].params);
    }
}

TEST_CASE("replica count is N per highest-risk row") {
    Dataset ds = make_table(40);
    auto highrisk = iota_idx(10);
    CHECK(private_smote(ds, highrisk, 1, 3, 1.0, 9).size() == 10);
    CHECK(private_smote(ds, highrisk, 3, 3, 1.0, 9).size() == 30);
}

TEST_CASE("a lone highest-risk row self-interpolates with zero-range noise") {
    Dataset ds = make_table(30);
    std::vector<std::size_t> highrisk{4};
    auto rows = private_smote(ds, highrisk, 2, 5, 1.0, 123);
    REQUIRE(rows.size() == 2);
    // Single-row partition: interpolation collapses to t and the noise scale
    // (range 0) is degenerate, so numeric cells reproduce t exactly.
    for (const auto& row : rows) {
        CHECK(row[0].num == ds.column("a").numeric[4]);
        CHECK(row[1].num == ds.column("b").numeric[4]);
        CHECK(row[2].cat == ds.column("t").tokens[4]);
        CHECK(row[3].cat == ds.column("class").tokens[4]);
    }
}

TEST_CASE("Laplace noise magnitude matches its analytic mean") {
    // Construction that isolates the noise term: all same-class highest-risk
    // rows share attribute value 5, so interpolation contributes nothing and
    // output - 5 is pure Laplace. Two opposite-class rows at 4 and 6 set the
    // partition range to 2; two non-risk rows at +-1000 widen the clamp
    // bounds so clamping never bites. With epsilon=1 the scale b = 2/1 and
    // E|noise| = b = 2.
    const std::size_t n_same = 3334;
    Column a{"a", ColumnKind::Numeric, {}, {}, 0};
    Column cls{"class", ColumnKind::Categorical, {}, {}, 0};
    for (std::size_t i = 0; i < n_same; ++i) {
        a.numeric.push_back(5.0);
        cls.tokens.push_back("pos");
    }
    a.numeric.push_back(4.0);
    cls.tokens.push_back("neg");
    a.numeric.push_back(6.0);
    cls.tokens.push_back("neg");
    a.numeric.push_back(-1000.0);
    cls.tokens.push_back("neg");
    a.numeric.push_back(1000.0);
    cls.tokens.push_back("pos");
    Dataset ds("laplace_rig", {a, cls}, "class");

    auto highrisk = iota_idx(n_same + 2);  // excludes the two clamp wideners
    auto rows = private_smote(ds, highrisk, 3, 5, 1.0, 2024);
    REQUIRE(rows.size() == (n_same + 2) * 3);

    double sum_abs = 0.0;
    std::size_t count = 0;
    for (const auto& row : rows) {
        if (row[1].cat != "pos") continue;  // skip the two range-setting rows
        sum_abs += std::abs(row[0].num - 5.0);
        ++count;
    }
    REQUIRE(count == n_same * 3);
    const double mean_abs = sum_abs / static_cast<double>(count);
    CHECK(mean_abs == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("huge epsilon reduces synthesis to near-pure interpolation") {
    Dataset ds = make_table(60, 3);
    auto highrisk = iota_idx(20);
    auto rows = private_smote(ds, highrisk, 2, 3, 1e6, 31);
    // Any output must lie within the span of its class's highest-risk values
    // plus a sliver for the (tiny) residual noise.
    const auto labels = ds.binary_labels();
    for (std::size_t col : {std::size_t{0}, std::size_t{1}}) {
        const auto& vals = ds.column(col).numeric;
        for (int cls : {0, 1}) {
            double lo = 1e300, hi = -1e300;
            for (std::size_t r : highrisk) {
                if (labels[r] != cls) continue;
                lo = std::min(lo, vals[r]);
                hi = std::max(hi, vals[r]);
            }
            const double slack = 1e-3 * (hi - lo) + 1e-9;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const std::size_t t = highrisk[i / 2];
                if (labels[t] != cls) continue;
                CHECK(rows[i][col].num >= lo - slack);
                CHECK(rows[i][col].num <= hi + slack);
            }
        }
    }
}

TEST_CASE("categorical cells come from the seed row or its neighbor") {
    Dataset ds = make_table(50, 7);
    auto highrisk = iota_idx(50);
    auto rows = private_smote(ds, highrisk, 1, 5, 1.0, 77);
    const auto& toks = ds.column("t").tokens;
    std::set<std::string> all(toks.begin(), toks.end());
    for (const auto& row : rows) CHECK(all.count(row[2].cat) == 1);
    // Labels are copied from the seed row.
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i][3].cat == ds.column("class").tokens[highrisk[i]]);
    }
}

TEST_CASE("synthesis is deterministic per seed") {
    Dataset ds = make_table(40, 1);
    auto highrisk = iota_idx(15);
    auto r1 = private_smote(ds, highrisk, 2, 3, 0.5, 555);
    auto r2 = private_smote(ds, highrisk, 2, 3, 0.5, 555);
    REQUIRE(r1.size() == r2.size());
    for (std::size_t i = 0; i < r1.size(); ++i) {
        for (std::size_t c = 0; c < r1[i].size(); ++c) {
            CHECK(r1[i][c].num == r2[i][c].num);
            CHECK(r1[i][c].cat == r2[i][c].cat);
        }
    }
    auto r3 = private_smote(ds, highrisk, 2, 3, 0.5, 556);
    bool any_diff = false;
    for (std::size_t i = 0; i < r1.size() && !any_diff; ++i) {
        any_diff = r1[i][0].num != r3[i][0].num;
    }
    CHECK(any_diff);
}

TEST_CASE("variant sizes follow (n - removed) + N*removed") {
    Dataset ds = make_table(100, 2);
    auto highrisk = iota_idx(20);
    PrivacyConfig cfg = config_grid()[44];
    auto rows1 = private_smote(ds, highrisk, 1, 3, 1.0, 5);
    ProtectedVariant v1 = assemble_variant(ds, highrisk, rows1, QISet{0, {"a"}}, cfg, 5);
    CHECK(v1.data.n_rows() == 100);
    CHECK(v1.replaced == 20);
    CHECK(v1.synthesized == 20);

    auto rows3 = private_smote(ds, highrisk, 3, 3, 1.0, 5);
    ProtectedVariant v3 = assemble_variant(ds, highrisk, rows3, QISet{0, {"a"}}, cfg, 5);
    CHECK(v3.data.n_rows() == 140);
}

TEST_CASE("no removed row survives verbatim in an assembled variant") {
    Dataset ds = make_table(120, 9);
    auto highrisk = iota_idx(30);
    auto rows = private_smote(ds, highrisk, 2, 3, 5.0, 404);
    ProtectedVariant v = assemble_variant(ds, highrisk, rows, QISet{0, {"a", "b"}},
                                          config_grid()[50], 404);

    // Oracle: exhaustive row-by-row comparison on all columns.
    auto equal_rows = [&](const Dataset& x, std::size_t i, const Dataset& y, std::size_t j) {
        for (std::size_t c = 0; c < x.n_cols(); ++c) {
            if (x.column(c).kind == ColumnKind::Numeric) {
                if (x.column(c).numeric[i] != y.column(c).numeric[j]) return false;
            } else {
                if (x.column(c).tokens[i] != y.column(c).tokens[j]) return false;
            }
        }
        return true;
    };
    for (std::size_t r : highrisk) {
        for (std::size_t m = 0; m < v.data.n_rows(); ++m) {
            CHECK_FALSE(equal_rows(ds, r, v.data, m));
        }
    }

    // Non-risk rows keep their labels exactly, in source order.
    for (std::size_t r = 30, m = 0; r < 120; ++r, ++m) {
        CHECK(v.data.column("class").tokens[m] == ds.column("class").tokens[r]);
    }
}

TEST_CASE("assemble_variant rejects a synthetic row equal to a removed one") {
    Dataset ds = make_table(10, 4);
    std::vector<std::size_t> highrisk{0, 1};
    std::vector<RowValues> fake{ds.row_values(0)};
    CHECK_THROWS_AS(
        assemble_variant(ds, highrisk, fake, QISet{0, {"a"}}, config_grid()[44], 1), Error);
}

TEST_CASE("marginal baseline draws from the highest-risk marginals") {
    Dataset ds = make_table(60, 5);
    auto highrisk = iota_idx(25);
    auto rows = marginal_baseline_synth(ds, highrisk, 99);
    CHECK(rows.size() == 25);

    // Membership oracle: every value appears among the highest-risk rows.
    for (std::size_t c = 0; c < ds.n_cols(); ++c) {
        const Column& col = ds.column(c);
        std::set<std::string> support;
        for (std::size_t r : highrisk) {
            support.insert(col.kind == ColumnKind::Numeric ? csv::format_double(col.numeric[r])
                                                           : col.tokens[r]);
        }
        for (const auto& row : rows) {
            const std::string v = col.kind == ColumnKind::Numeric
                                      ? csv::format_double(row[c].num)
                                      : row[c].cat;
            CHECK(support.count(v) == 1);
        }
    }
}

TEST_CASE("marginal baseline maps a constant column to a constant") {
    Column a{"a", ColumnKind::Numeric, {7, 7, 7, 7}, {}, 0};
    Column cls{"class", ColumnKind::Categorical, {}, {"x", "y", "x", "y"}, 0};
    Dataset ds("mem", {a, cls}, "class");
    auto rows = marginal_baseline_synth(ds, {0, 1, 2, 3}, 1);
    for (const auto& row : rows) CHECK(row[0].num == 7.0);
    CHECK_THROWS_AS(marginal_baseline_synth(ds, {}, 1), Error);
}

TEST_CASE("external variant import validates config and schema") {
    Dataset ds = make_table(30, 6);
    fs::path dir = fs::temp_directory_path() / "synth_import";
    fs::create_directories(dir);

    // A valid external variant: same schema, arbitrary rows.
    fs::path good = dir / "good.csv";
    write_csv(ds.select_rows(iota_idx(20)), good);
    std::map<std::string, double> ok{{"epochs", 100}, {"batch_size", 50}};
    ProtectedVariant v = import_external_variant(good, ds, QISet{1, {"a", "b"}},
                                                 Technique::CTGAN, ok, 10, 3);
    CHECK(v.config.technique == Technique::CTGAN);
    CHECK(v.config.config_id == 8);
    CHECK(v.data.n_rows() == 20);

    // Off-grid parameters are refused.
    std::map<std::string, double> bad{{"epochs", 300}, {"batch_size", 50}};
    CHECK_THROWS_WITH_AS(
        import_external_variant(good, ds, QISet{1, {"a"}}, Technique::CTGAN, bad, 10, 3),
        "CTGAN batch_size=50 epochs=300: parameter outside the supported configuration grid",
        Error);

    // Column-order permutation is named in the error.
    fs::path permuted = dir / "permuted.csv";
    {
        std::ofstream f(permuted);
        f << "b,a,t,class\n1,2,red,yes\n3,4,blue,no\n";
    }
    CHECK_THROWS_WITH_AS(
        import_external_variant(permuted, ds, QISet{1, {"a"}}, Technique::CTGAN, ok, 10, 3),
        "permuted.csv: column 0 is 'b', expected 'a'", Error);
}

TEST_CASE("variants round-trip through save and load") {
    Dataset ds = make_table(80, 8);
    auto highrisk = iota_idx(16);
    auto rows = private_smote(ds, highrisk, 2, 3, 1.0, 42);
    ProtectedVariant v = assemble_variant(ds, highrisk, rows, QISet{2, {"a", "t"}},
                                          config_grid()[60], 42);
    fs::path root = fs::temp_directory_path() / "synth_store";
    fs::remove_all(root);
    save_variant(v, root);

    fs::path expect = root / "mem" / "2" / "60.csv";
    REQUIRE(fs::exists(expect));
    REQUIRE(fs::exists(root / "mem" / "2" / "60.json"));

    ProtectedVariant back = load_variant(expect, ds);
    CHECK(back.source == "mem");
    CHECK(back.qi_set.id == 2);
    CHECK(back.qi_set.columns == std::vector<std::string>{"a", "t"});
    CHECK(back.config.config_id == 60);
    CHECK(back.replaced == 16);
    CHECK(back.synthesized == 32);
    CHECK(back.seed == 42);
    CHECK(back.data.content_equals(v.data));
}
