// Generates the bundled demonstration corpus: three small binary-target
// datasets for the end-to-end pipeline plus one extra dataset (new/delta.csv)
// for exercising the recommendation step. Columns are deliberately
// low-cardinality so quasi-identifier tuples repeat the way they do in
// coarse survey data.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "autopriv/rng.hpp"
#include "autopriv/tabular.hpp"

using namespace autopriv;
namespace fs = std::filesystem;

namespace {

int pick(Rng& rng, const std::vector<double>& weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double u = rng.unit() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        u -= weights[i];
        if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
}

Column int_column(const std::string& name, std::size_t n, Rng& rng,
                  const std::vector<double>& weights) {
    Column c;
    c.name = name;
    c.kind = ColumnKind::Numeric;
    c.numeric.reserve(n);
    for (std::size_t i = 0; i < n; ++i) c.numeric.push_back(pick(rng, weights));
    return c;
}

Column cat_column(const std::string& name, std::size_t n, Rng& rng,
                  const std::vector<std::string>& levels,
                  const std::vector<double>& weights) {
    Column c;
    c.name = name;
    c.kind = ColumnKind::Categorical;
    c.tokens.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        c.tokens.push_back(levels[static_cast<std::size_t>(pick(rng, weights))]);
    }
    return c;
}

// Class label from a noisy linear score over the named numeric columns,
// thresholded at the median so both classes stay near balance.
Column label_column(const std::vector<Column>& cols, Rng& rng,
                    const std::vector<std::pair<std::string, double>>& signal,
                    double noise) {
    const std::size_t n = cols.front().size();
    std::vector<double> score(n, 0.0);
    for (const auto& [name, w] : signal) {
        for (const auto& c : cols) {
            if (c.name == name) {
                for (std::size_t i = 0; i < n; ++i) score[i] += w * c.numeric[i];
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) score[i] += noise * rng.normal();
    std::vector<double> sorted = score;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[n / 2];
    Column c;
    c.name = "class";
    c.kind = ColumnKind::Categorical;
    c.tokens.reserve(n);
    for (std::size_t i = 0; i < n; ++i) c.tokens.push_back(score[i] > median ? "yes" : "no");
    return c;
}

void write_dataset(const std::string& name, std::vector<Column> cols, const fs::path& path) {
    Dataset ds(name, std::move(cols), "class");
    fs::create_directories(path.parent_path());
    write_csv(ds, path);
    std::printf("%s: %zu rows, %zu predictors\n", path.string().c_str(), ds.n_rows(),
                ds.n_predictors());
}

void make_alpha(const fs::path& dir, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "alpha"));
    const std::size_t n = 960;
    std::vector<Column> cols;
    cols.push_back(int_column("age_band", n, rng, {0.35, 0.3, 0.2, 0.1, 0.05}));
    cols.push_back(int_column("household", n, rng, {0.55, 0.3, 0.15}));
    cols.push_back(int_column("visits", n, rng, {0.5, 0.25, 0.15, 0.1}));
    cols.push_back(int_column("plan", n, rng, {0.6, 0.25, 0.15}));
    cols.push_back(int_column("tenure", n, rng, {0.4, 0.3, 0.2, 0.1}));
    cols.push_back(int_column("claims", n, rng, {0.7, 0.2, 0.1}));
    cols.push_back(int_column("score_band", n, rng, {0.3, 0.3, 0.25, 0.15}));
    cols.push_back(int_column("usage", n, rng, {0.45, 0.35, 0.2}));
    cols.push_back(cat_column("region", n, rng, {"north", "south", "east"}, {0.5, 0.3, 0.2}));
    cols.push_back(cat_column("channel", n, rng, {"web", "phone"}, {0.65, 0.35}));
    cols.push_back(cat_column("segment", n, rng, {"a", "b", "c"}, {0.45, 0.35, 0.2}));
    cols.push_back(label_column(
        cols, rng, {{"age_band", 0.8}, {"visits", 1.1}, {"score_band", -0.9}, {"usage", 0.7}},
        1.1));
    write_dataset("alpha", std::move(cols), dir / "alpha.csv");
}

void make_beta(const fs::path& dir, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "beta"));
    const std::size_t n = 1000;
    std::vector<Column> cols;
    cols.push_back(int_column("grade", n, rng, {0.3, 0.3, 0.2, 0.12, 0.08}));
    cols.push_back(int_column("dept", n, rng, {0.4, 0.3, 0.3}));
    cols.push_back(int_column("shift", n, rng, {0.55, 0.45}));
    cols.push_back(int_column("seniority", n, rng, {0.35, 0.3, 0.2, 0.15}));
    cols.push_back(int_column("training", n, rng, {0.6, 0.25, 0.15}));
    cols.push_back(int_column("incidents", n, rng, {0.75, 0.15, 0.1}));
    cols.push_back(int_column("overtime", n, rng, {0.5, 0.3, 0.2}));
    cols.push_back(int_column("rating", n, rng, {0.25, 0.35, 0.25, 0.15}));
    cols.push_back(int_column("team_size", n, rng, {0.4, 0.35, 0.25}));
    cols.push_back(int_column("site", n, rng, {0.5, 0.3, 0.2}));
    cols.push_back(cat_column("contract", n, rng, {"full", "part", "temp"}, {0.6, 0.25, 0.15}));
    cols.push_back(cat_column("union_member", n, rng, {"y", "n"}, {0.55, 0.45}));
    cols.push_back(cat_column("badge", n, rng, {"k1", "k2", "k3", "k4"},
                              {0.4, 0.3, 0.2, 0.1}));
    cols.push_back(label_column(
        cols, rng,
        {{"grade", 1.0}, {"seniority", 0.8}, {"incidents", -1.2}, {"rating", 0.9}}, 1.3));
    write_dataset("beta", std::move(cols), dir / "beta.csv");
}

void make_gamma(const fs::path& dir, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "gamma"));
    const std::size_t n = 920;
    std::vector<Column> cols;
    cols.push_back(int_column("income_band", n, rng, {0.3, 0.28, 0.22, 0.12, 0.08}));
    cols.push_back(int_column("dependents", n, rng, {0.45, 0.3, 0.15, 0.1}));
    cols.push_back(int_column("residence", n, rng, {0.5, 0.3, 0.2}));
    cols.push_back(int_column("loans", n, rng, {0.65, 0.2, 0.15}));
    cols.push_back(int_column("cards", n, rng, {0.4, 0.35, 0.25}));
    cols.push_back(int_column("late_payments", n, rng, {0.7, 0.2, 0.1}));
    cols.push_back(int_column("inquiries", n, rng, {0.55, 0.25, 0.2}));
    cols.push_back(int_column("savings_band", n, rng, {0.35, 0.3, 0.2, 0.15}));
    cols.push_back(cat_column("employment", n, rng, {"salaried", "self", "retired"},
                              {0.55, 0.3, 0.15}));
    cols.push_back(cat_column("housing", n, rng, {"own", "rent"}, {0.6, 0.4}));
    cols.push_back(label_column(
        cols, rng,
        {{"income_band", 1.1}, {"late_payments", -1.4}, {"savings_band", 0.8},
         {"loans", -0.6}},
        1.2));
    write_dataset("gamma", std::move(cols), dir / "gamma.csv");
}

void make_delta(const fs::path& dir, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "delta"));
    const std::size_t n = 500;
    std::vector<Column> cols;
    cols.push_back(int_column("stage", n, rng, {0.4, 0.3, 0.2, 0.1}));
    cols.push_back(int_column("dose_band", n, rng, {0.5, 0.3, 0.2}));
    cols.push_back(int_column("prior_visits", n, rng, {0.45, 0.3, 0.15, 0.1}));
    cols.push_back(int_column("comorbidities", n, rng, {0.6, 0.25, 0.15}));
    cols.push_back(int_column("lab_band", n, rng, {0.35, 0.35, 0.3}));
    cols.push_back(int_column("followups", n, rng, {0.5, 0.3, 0.2}));
    cols.push_back(cat_column("clinic", n, rng, {"c1", "c2", "c3"}, {0.45, 0.35, 0.2}));
    cols.push_back(cat_column("referral", n, rng, {"gp", "er"}, {0.7, 0.3}));
    cols.push_back(label_column(
        cols, rng, {{"stage", 1.2}, {"lab_band", 0.9}, {"comorbidities", -1.0}}, 1.0));
    write_dataset("delta", std::move(cols), dir / "new" / "delta.csv");
}

}  // namespace

int main(int argc, char** argv) {
    fs::path dir = "corpus";
    std::uint64_t seed = 7;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--seed" && i + 1 < argc) {
            seed = std::stoull(argv[++i]);
        } else if (arg.rfind("--", 0) == 0) {
            std::fprintf(stderr, "usage: make_demo_corpus [out_dir] [--seed N]\n");
            return 2;
        } else {
            dir = arg;
        }
    }
    try {
        make_alpha(dir, seed);
        make_beta(dir, seed);
        make_gamma(dir, seed);
        make_delta(dir, seed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "make_demo_corpus: %s\n", e.what());
        return 1;
    }
    return 0;
}
