#include "autopriv/metamodel.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "autopriv/csv.hpp"
#include "autopriv/rng.hpp"
#include "doctest.h"

using namespace autopriv;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kDim = 34;

std::vector<MetaRow> planted_rows(std::size_t n, std::uint64_t seed,
                                  const std::vector<double>& coef, double intercept,
                                  bool link_inverts = false) {
    Rng rng(seed);
    std::vector<MetaRow> rows;
    for (std::size_t i = 0; i < n; ++i) {
        MetaRow r;
        r.dataset = "synthetic";
        r.qi_id = static_cast<int>(i % 3);
        r.config_id = static_cast<int>(i % 89);
        for (std::size_t j = 0; j < kDim; ++j) r.features.push_back(rng.normal());
        double y = intercept;
        for (std::size_t j = 0; j < kDim; ++j) y += coef[j] * r.features[j];
        r.y_perf = y;
        r.y_link = link_inverts ? -y : y;
        rows.push_back(std::move(r));
    }
    return rows;
}

// Raw-scale coefficient j of a fitted model (undo the standardization).
double raw_coef(const MetaModel& m, std::size_t j) {
    return m.coefficients[j] / m.feature_sds[j];
}

std::vector<PrivacyConfig> fake_pool(int n) {
    std::vector<PrivacyConfig> pool;
    for (int i = 0; i < n; ++i) {
        pool.push_back({Technique::PrivateSMOTE,
                        {{"N", 1.0}, {"knn", 1.0}, {"epsilon", 0.1 + i}},
                        i});
    }
    return pool;
}

Dataset demo_dataset(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::ostringstream os;
    os << "x1,x2,class\n";
    for (std::size_t i = 0; i < n; ++i) {
        const bool pos = i % 2 == 0;
        os << csv::format_double(rng.normal() + (pos ? 1.0 : 0.0)) << ","
           << csv::format_double(rng.unit()) << "," << (pos ? "yes" : "no") << "\n";
    }
    const auto p = fs::temp_directory_path() / "metamodel_demo.csv";
    std::ofstream f(p, std::ios::binary);
    f << os.str();
    f.close();
    return load_csv(p, "class");
}

}  // namespace

TEST_CASE("planted linear data is recovered to 1e-6") {
    // y = 2*x1 - 3*x7 + 0.5 with zero noise: the ridge penalty of 1e-8 is
    // negligible, so the fit must match the exact interpolating solution,
    // which is the planted one.
    std::vector<double> coef(kDim, 0.0);
    coef[1] = 2.0;
    coef[7] = -3.0;
    const auto rows = planted_rows(200, 11, coef, 0.5);
    const MetaModel m = fit_meta(rows, MetaTarget::Performance);
    for (std::size_t j = 0; j < kDim; ++j) {
        CHECK(raw_coef(m, j) == doctest::Approx(coef[j]).epsilon(1e-6).scale(1.0));
    }
    // Training rows reproduce their targets.
    std::vector<std::vector<double>> feats;
    for (const auto& r : rows) feats.push_back(r.features);
    const auto preds = predict_meta(m, feats);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(preds[i] == doctest::Approx(rows[i].y_perf).epsilon(1e-6).scale(1.0));
    }
    CHECK(m.target == MetaTarget::Performance);
}

TEST_CASE("linkability target trains on y_link") {
    std::vector<double> coef(kDim, 0.0);
    coef[3] = 1.5;
    const auto rows = planted_rows(120, 13, coef, 0.2, /*link_inverts=*/true);
    const MetaModel m = fit_meta(rows, MetaTarget::Linkability);
    CHECK(raw_coef(m, 3) == doctest::Approx(-1.5).epsilon(1e-6));
    CHECK(m.target == MetaTarget::Linkability);
}

TEST_CASE("constant target yields intercept-only model") {
    auto rows = planted_rows(50, 17, std::vector<double>(kDim, 0.0), 0.0);
    for (auto& r : rows) r.y_perf = 0.42;
    const MetaModel m = fit_meta(rows, MetaTarget::Performance);
    CHECK(m.intercept == doctest::Approx(0.42).epsilon(1e-12));
    for (std::size_t j = 0; j < kDim; ++j) {
        CHECK(std::fabs(raw_coef(m, j)) < 1e-9);
    }
    const auto preds = predict_meta(m, {rows[0].features, rows[1].features});
    CHECK(preds[0] == doctest::Approx(0.42).epsilon(1e-9));
    CHECK(preds[1] == doctest::Approx(0.42).epsilon(1e-9));
}

TEST_CASE("underdetermined fit stays finite thanks to the ridge guard") {
    std::vector<double> coef(kDim, 0.0);
    coef[0] = 1.0;
    const auto rows = planted_rows(10, 19, coef, 0.1);  // 10 rows, 34 features
    const MetaModel m = fit_meta(rows, MetaTarget::Performance);
    for (double c : m.coefficients) CHECK(std::isfinite(c));
    std::vector<std::vector<double>> feats{rows[0].features};
    CHECK(std::isfinite(predict_meta(m, feats)[0]));
}

TEST_CASE("fit_meta validates its inputs") {
    const auto one = planted_rows(1, 3, std::vector<double>(kDim, 0.0), 0.0);
    CHECK_THROWS_AS((void)fit_meta(one, MetaTarget::Performance), Error);
    auto bad = planted_rows(5, 3, std::vector<double>(kDim, 0.0), 0.0);
    bad[2].features.pop_back();
    CHECK_THROWS_AS((void)fit_meta(bad, MetaTarget::Performance), Error);
    const auto ok = planted_rows(5, 3, std::vector<double>(kDim, 0.0), 0.0);
    CHECK_THROWS_AS((void)fit_meta(ok, MetaTarget::Performance, -1.0), Error);
}

TEST_CASE("predict_meta rejects untrained models and bad widths") {
    MetaModel untrained;
    CHECK_THROWS_WITH_AS((void)predict_meta(untrained, {}), "meta-model is untrained", Error);
    const auto rows = planted_rows(40, 23, std::vector<double>(kDim, 0.0), 1.0);
    const MetaModel m = fit_meta(rows, MetaTarget::Performance);
    CHECK_THROWS_AS((void)predict_meta(m, {std::vector<double>(10, 0.0)}), Error);
    CHECK(predict_meta(m, {}).empty());
    const auto preds = predict_meta(m, {rows[0].features, rows[1].features, rows[2].features});
    CHECK(preds.size() == 3);
}

TEST_CASE("fractional ranks average over ties") {
    CHECK(fractional_ranks({10, 20, 20, 30}) == std::vector<double>{1, 2.5, 2.5, 4});
    CHECK(fractional_ranks({5}) == std::vector<double>{1});
    CHECK(fractional_ranks({7, 7, 7}) == std::vector<double>{2, 2, 2});
    // Rank sum over n values is always n(n+1)/2.
    Rng rng(3);
    std::vector<double> vals;
    for (int i = 0; i < 89; ++i) vals.push_back(static_cast<double>(rng.below(10)));
    const auto ranks = fractional_ranks(vals);
    double sum = 0.0;
    for (double r : ranks) sum += r;
    CHECK(sum == doctest::Approx(89.0 * 90.0 / 2.0).epsilon(1e-12));
}

TEST_CASE("worked 4-config ranking example") {
    // pred_perf (0.6, 0.6, 0.5, 0.4) -> perf ranks (3.5, 3.5, 2, 1)
    // pred_link (0.1, 0.2, 0.1, 0.3) -> link ranks (3.5, 2, 3.5, 1)
    // avg (3.5, 2.75, 2.75, 1); the c2/c3 tie breaks by higher pred_perf.
    const auto pool = fake_pool(4);
    const auto rec = rank_configs(pool, {0.6, 0.6, 0.5, 0.4}, {0.1, 0.2, 0.1, 0.3}, 0);
    REQUIRE(rec.size() == 4);
    CHECK(rec[0].config.config_id == 0);
    CHECK(rec[0].avg_rank == doctest::Approx(3.5));
    CHECK(rec[1].config.config_id == 1);
    CHECK(rec[1].avg_rank == doctest::Approx(2.75));
    CHECK(rec[2].config.config_id == 2);
    CHECK(rec[2].avg_rank == doctest::Approx(2.75));
    CHECK(rec[3].config.config_id == 3);
    CHECK(rec[3].avg_rank == doctest::Approx(1.0));
}

TEST_CASE("pareto-dominant config ranks first") {
    const auto pool = fake_pool(2);
    const auto rec = rank_configs(pool, {0.9, 0.6}, {0.05, 0.4}, 0);
    CHECK(rec[0].config.config_id == 0);  // higher perf AND lower link
    CHECK(rec[0].avg_rank == doctest::Approx(2.0));
    CHECK(rec[1].avg_rank == doctest::Approx(1.0));
}

TEST_CASE("ordering is invariant under strictly increasing transforms") {
    Rng rng(7);
    const auto pool = fake_pool(89);
    std::vector<double> perf, link;
    for (int i = 0; i < 89; ++i) {
        perf.push_back(rng.unit());
        link.push_back(rng.unit());
    }
    const auto base = rank_configs(pool, perf, link, 0);
    std::vector<double> perf_t(perf.size()), link_t(link.size());
    for (std::size_t i = 0; i < perf.size(); ++i) {
        perf_t[i] = std::exp(2.0 * perf[i]) + 1.0;  // strictly increasing
        link_t[i] = std::atan(link[i]);             // strictly increasing
    }
    const auto transformed = rank_configs(pool, perf_t, link_t, 0);
    REQUIRE(base.size() == transformed.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(base[i].config.config_id == transformed[i].config.config_id);
        CHECK(base[i].avg_rank == doctest::Approx(transformed[i].avg_rank));
    }
    // Rank bounds and rank-sum conservation.
    double sum = 0.0;
    for (const auto& e : base) {
        CHECK(e.avg_rank >= 1.0);
        CHECK(e.avg_rank <= 89.0);
        sum += e.avg_rank;
    }
    CHECK(sum == doctest::Approx(89.0 * 90.0 / 2.0));
}

TEST_CASE("constant linkability model degenerates to pure performance order") {
    Rng rng(15);
    const auto pool = fake_pool(20);
    std::vector<double> perf;
    for (int i = 0; i < 20; ++i) perf.push_back(rng.unit());
    const auto rec = rank_configs(pool, perf, std::vector<double>(20, 0.3), 0);
    for (std::size_t i = 0; i + 1 < rec.size(); ++i) {
        CHECK(rec[i].pred_perf >= rec[i + 1].pred_perf);
    }
}

TEST_CASE("recommend crosses a new dataset with the canonical grid") {
    // Meta-rows built directly over the 89 canonical configs with targets
    // that depend only on epsilon: y_perf rises with epsilon, y_link falls.
    // The recommender must then put the nine epsilon=10 configs on top.
    // (Their predictions tie analytically, so we assert the block, not an
    // ordering within it: solver round-off decides those micro-ties.)
    const Dataset ds = demo_dataset(60, 99);
    const auto mf = extract(ds, 5);
    std::vector<MetaRow> rows;
    for (const auto& cfg : config_grid()) {
        MetaRow r;
        r.dataset = "train";
        r.config_id = cfg.config_id;
        r.features = mf.values;
        const auto enc = encode_config(cfg);
        r.features.insert(r.features.end(), enc.values.begin(), enc.values.end());
        const double eps = enc.values[8];
        r.y_perf = 0.3 + 0.05 * eps;
        r.y_link = 0.9 - 0.05 * eps;
        rows.push_back(std::move(r));
    }
    const MetaModel perf = fit_meta(rows, MetaTarget::Performance);
    const MetaModel link = fit_meta(rows, MetaTarget::Linkability);

    const auto rec = recommend(ds, perf, link, 20, 5);
    REQUIRE(rec.size() == 20);
    CHECK(rec[0].config.technique == Technique::PrivateSMOTE);
    CHECK(rec[0].config.param("epsilon") == 10.0);
    // All nine epsilon=10 configs occupy the top block.
    std::set<int> top_ids;
    for (int i = 0; i < 9; ++i) {
        const auto& e = rec[static_cast<std::size_t>(i)];
        CHECK(e.config.technique == Technique::PrivateSMOTE);
        CHECK(e.config.param("epsilon") == 10.0);
        top_ids.insert(e.config.config_id);
    }
    CHECK(top_ids.size() == 9);
    // Sorted by avg_rank descending.
    for (std::size_t i = 0; i + 1 < rec.size(); ++i) {
        CHECK(rec[i].avg_rank >= rec[i + 1].avg_rank);
    }

    MetaModel untrained;
    CHECK_THROWS_AS((void)recommend(ds, untrained, link, 5, 5), Error);
}

TEST_CASE("meta-model persistence round-trips") {
    std::vector<double> coef(kDim, 0.0);
    coef[5] = 0.7;
    const auto rows = planted_rows(60, 31, coef, -0.2);
    const MetaModel m = fit_meta(rows, MetaTarget::Performance);
    const auto path = fs::temp_directory_path() / "meta_model.json";
    save_meta_model(m, path);
    const MetaModel loaded = load_meta_model(path);
    CHECK(loaded.target == m.target);
    CHECK(loaded.intercept == m.intercept);
    CHECK(loaded.coefficients == m.coefficients);
    CHECK(loaded.feature_means == m.feature_means);
    CHECK(loaded.feature_sds == m.feature_sds);
    CHECK(loaded.ridge_lambda == m.ridge_lambda);

    // Tampered version tag is rejected.
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto pos = text.find("mf-v1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 5, "mf-v9");
    const auto bad = fs::temp_directory_path() / "meta_model_bad.json";
    std::ofstream out(bad, std::ios::binary);
    out << text;
    out.close();
    CHECK_THROWS_AS((void)load_meta_model(bad), Error);
    CHECK_THROWS_AS((void)load_meta_model(fs::temp_directory_path() / "no_such.json"), Error);
}

TEST_CASE("meta-dataset csv round-trips byte-identically") {
    std::vector<double> coef(kDim, 0.0);
    coef[2] = 1.0;
    auto rows = planted_rows(25, 37, coef, 0.0);
    rows[3].dataset = "name,with\"tricky\nchars";
    const auto path = fs::temp_directory_path() / "meta_rows.csv";
    write_meta_dataset(rows, path);
    const auto loaded = load_meta_dataset(path);
    REQUIRE(loaded.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(loaded[i].dataset == rows[i].dataset);
        CHECK(loaded[i].qi_id == rows[i].qi_id);
        CHECK(loaded[i].config_id == rows[i].config_id);
        CHECK(loaded[i].features == rows[i].features);
        CHECK(loaded[i].y_perf == rows[i].y_perf);
        CHECK(loaded[i].y_link == rows[i].y_link);
    }
    // Re-writing the loaded rows reproduces the file byte for byte.
    const auto path2 = fs::temp_directory_path() / "meta_rows2.csv";
    write_meta_dataset(loaded, path2);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);

    // Header tampering is rejected.
    std::string text = sa;
    text.replace(text.find("y_perf"), 6, "y_prof");
    const auto bad = fs::temp_directory_path() / "meta_rows_bad.csv";
    std::ofstream out(bad, std::ios::binary);
    out << text;
    out.close();
    CHECK_THROWS_AS((void)load_meta_dataset(bad), Error);
}
