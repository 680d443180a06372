#include "autopriv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "autopriv/csv.hpp"
#include "autopriv/gower.hpp"
#include "autopriv/rng.hpp"

namespace autopriv {
namespace {

constexpr const char* kTechniqueNames[] = {"CopulaGAN", "TVAE",    "CTGAN",
                                           "DPGAN",     "PATEGAN", "PrivateSMOTE"};

// Folds -0.0 into +0.0 so keys agree with == semantics.
std::string numeric_key(double v) {
    if (v == 0.0) v = 0.0;
    return csv::format_double(v);
}

std::vector<std::string> row_key(const Dataset& ds, std::size_t row) {
    std::vector<std::string> key(ds.n_cols());
    for (std::size_t c = 0; c < ds.n_cols(); ++c) {
        const Column& col = ds.column(c);
        key[c] = col.kind == ColumnKind::Numeric ? numeric_key(col.numeric[row]) : col.tokens[row];
    }
    return key;
}

std::vector<std::string> row_key(const Dataset& schema, const RowValues& row) {
    std::vector<std::string> key(schema.n_cols());
    for (std::size_t c = 0; c < schema.n_cols(); ++c) {
        key[c] = schema.column(c).kind == ColumnKind::Numeric ? numeric_key(row[c].num)
                                                              : row[c].cat;
    }
    return key;
}

}  // namespace

const char* technique_name(Technique t) { return kTechniqueNames[static_cast<int>(t)]; }

Technique technique_from_name(const std::string& name) {
    for (int i = 0; i < 6; ++i) {
        if (name == kTechniqueNames[i]) return static_cast<Technique>(i);
    }
    throw Error("unknown privacy technique '" + name + "'");
}

double PrivacyConfig::param(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end()) {
        throw Error(std::string(technique_name(technique)) + ": missing parameter '" + key + "'");
    }
    return it->second;
}

std::string PrivacyConfig::label() const {
    std::string s = technique_name(technique);
    for (const auto& [k, v] : params) {
        s += " " + k + "=" + csv::format_double(v);
    }
    return s;
}

std::vector<PrivacyConfig> enumerate_config_grid() {
    std::vector<PrivacyConfig> grid;
    const std::vector<double> epochs{100, 200};
    const std::vector<double> batches{50, 100};
    const std::vector<double> dp_eps{0.1, 0.5, 1.0, 5.0};
    for (Technique t : {Technique::CopulaGAN, Technique::TVAE, Technique::CTGAN}) {
        for (double e : epochs)
            for (double b : batches)
                grid.push_back({t, {{"epochs", e}, {"batch_size", b}}, -1});
    }
    for (Technique t : {Technique::DPGAN, Technique::PATEGAN}) {
        for (double e : epochs)
            for (double b : batches)
                for (double eps : dp_eps)
                    grid.push_back({t, {{"epochs", e}, {"batch_size", b}, {"epsilon", eps}}, -1});
    }
    for (double n : {1.0, 2.0, 3.0})
        for (double k : {1.0, 3.0, 5.0})
            for (double eps : {0.1, 0.5, 1.0, 5.0, 10.0})
                grid.push_back({Technique::PrivateSMOTE, {{"N", n}, {"knn", k}, {"epsilon", eps}}, -1});
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i].config_id = static_cast<int>(i);
    return grid;
}

const std::vector<PrivacyConfig>& config_grid() {
    static const std::vector<PrivacyConfig> grid = enumerate_config_grid();
    return grid;
}

int find_config_id(Technique technique, const std::map<std::string, double>& params) {
    for (const auto& c : config_grid()) {
        if (c.technique == technique && c.params == params) return c.config_id;
    }
    return -1;
}

std::vector<RowValues> private_smote(const Dataset& ds,
                                     const std::vector<std::size_t>& highrisk,
                                     int n_replicas, int knn, double epsilon,
                                     std::uint64_t seed) {
    if (highrisk.empty()) throw Error(ds.name() + ": no highest-risk rows to synthesize");
    if (n_replicas < 1) throw Error("replica count must be >= 1");
    if (knn < 1) throw Error("knn must be >= 1");
    if (epsilon <= 0.0) throw Error("epsilon must be > 0");

    const auto predictors = ds.predictor_indices();
    const GowerMetric metric(ds, predictors);

    // Per-column noise scale (partition range / epsilon) and clamp bounds
    // (observed range of the full source table).
    std::map<std::size_t, double> noise_scale, clamp_lo, clamp_hi;
    for (std::size_t c : predictors) {
        const Column& col = ds.column(c);
        if (col.kind != ColumnKind::Numeric) continue;
        double lo = col.numeric[highrisk.front()], hi = lo;
        for (std::size_t r : highrisk) {
            lo = std::min(lo, col.numeric[r]);
            hi = std::max(hi, col.numeric[r]);
        }
        noise_scale[c] = (hi - lo) / epsilon;
        auto [mn, mx] = std::minmax_element(col.numeric.begin(), col.numeric.end());
        clamp_lo[c] = *mn;
        clamp_hi[c] = *mx;
    }

    // Neighbor pools: same-class highest-risk rows, nearest first.
    const auto labels = ds.binary_labels();
    std::vector<std::vector<std::size_t>> pool(highrisk.size());
    for (std::size_t i = 0; i < highrisk.size(); ++i) {
        const std::size_t t = highrisk[i];
        std::vector<std::size_t> same_class;
        for (std::size_t r : highrisk) {
            if (r != t && labels[r] == labels[t]) same_class.push_back(r);
        }
        pool[i] = knn_indices(metric, ds, t, ds, same_class,
                              static_cast<std::size_t>(knn));
    }

    std::set<std::vector<std::string>> forbidden;
    for (std::size_t r : highrisk) forbidden.insert(row_key(ds, r));

    Rng rng(seed);
    std::vector<RowValues> out;
    out.reserve(highrisk.size() * static_cast<std::size_t>(n_replicas));
    for (std::size_t i = 0; i < highrisk.size(); ++i) {
        const std::size_t t = highrisk[i];
        for (int rep = 0; rep < n_replicas; ++rep) {
            RowValues row(ds.n_cols());
            for (int attempt = 0; attempt < 100; ++attempt) {
                const std::size_t u =
                    pool[i].empty() ? t : pool[i][rng.below(pool[i].size())];
                for (std::size_t c = 0; c < ds.n_cols(); ++c) {
                    const Column& col = ds.column(c);
                    if (c == ds.target_index()) {
                        row[c].cat = col.tokens[t];
                    } else if (col.kind == ColumnKind::Numeric) {
                        const double tv = col.numeric[t];
                        const double uv = col.numeric[u];
                        double v = tv + rng.unit() * (uv - tv) + rng.laplace(noise_scale[c]);
                        row[c].num = std::clamp(v, clamp_lo[c], clamp_hi[c]);
                    } else {
                        row[c].cat = rng.coin() ? col.tokens[t] : col.tokens[u];
                    }
                }
                if (!forbidden.count(row_key(ds, row))) break;
            }
            out.push_back(std::move(row));
        }
    }
    return out;
}

std::vector<RowValues> marginal_baseline_synth(const Dataset& ds,
                                               const std::vector<std::size_t>& highrisk,
                                               std::uint64_t seed) {
    if (highrisk.empty()) throw Error(ds.name() + ": no highest-risk rows to synthesize");
    Rng rng(seed);
    std::vector<RowValues> out;
    out.reserve(highrisk.size());
    for (std::size_t i = 0; i < highrisk.size(); ++i) {
        RowValues row(ds.n_cols());
        for (std::size_t c = 0; c < ds.n_cols(); ++c) {
            const Column& col = ds.column(c);
            const std::size_t pick = highrisk[rng.below(highrisk.size())];
            if (col.kind == ColumnKind::Numeric) {
                row[c].num = col.numeric[pick];
            } else {
                row[c].cat = col.tokens[pick];
            }
        }
        out.push_back(std::move(row));
    }
    return out;
}

ProtectedVariant assemble_variant(const Dataset& ds,
                                  const std::vector<std::size_t>& highrisk,
                                  const std::vector<RowValues>& synthetic,
                                  const QISet& qis, const PrivacyConfig& config,
                                  std::uint64_t seed) {
    std::set<std::size_t> drop(highrisk.begin(), highrisk.end());
    std::vector<std::size_t> keep;
    keep.reserve(ds.n_rows() - drop.size());
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        if (!drop.count(r)) keep.push_back(r);
    }

    std::set<std::vector<std::string>> removed;
    for (std::size_t r : highrisk) removed.insert(row_key(ds, r));
    for (std::size_t i = 0; i < synthetic.size(); ++i) {
        if (synthetic[i].size() != ds.n_cols()) {
            throw Error(ds.name() + ": synthetic row " + std::to_string(i) + " has " +
                        std::to_string(synthetic[i].size()) + " cells, expected " +
                        std::to_string(ds.n_cols()));
        }
        if (removed.count(row_key(ds, synthetic[i]))) {
            throw Error(ds.name() + ": synthetic row " + std::to_string(i) +
                        " reproduces a removed highest-risk row verbatim");
        }
    }

    Dataset data = ds.select_rows(keep).with_rows_appended(synthetic);
    return ProtectedVariant{std::move(data), ds.name(),     qis,
                            config,          highrisk.size(), synthetic.size(),
                            seed};
}

ProtectedVariant import_external_variant(const std::filesystem::path& csv_path,
                                         const Dataset& source, const QISet& qis,
                                         Technique technique,
                                         const std::map<std::string, double>& params,
                                         std::size_t replaced, std::uint64_t seed) {
    const int id = find_config_id(technique, params);
    if (id < 0) {
        std::string detail;
        for (const auto& [k, v] : params) detail += " " + k + "=" + csv::format_double(v);
        throw Error(std::string(technique_name(technique)) + detail +
                    ": parameter outside the supported configuration grid");
    }
    Dataset data = load_csv_with_schema(csv_path, source);
    PrivacyConfig config = config_grid()[static_cast<std::size_t>(id)];
    const std::size_t synthesized = data.n_rows() >= source.n_rows() - replaced
                                        ? data.n_rows() - (source.n_rows() - replaced)
                                        : 0;
    return ProtectedVariant{std::move(data), source.name(), qis,    config,
                            replaced,        synthesized,   seed};
}

std::filesystem::path variant_relpath(const ProtectedVariant& v) {
    return std::filesystem::path(v.source) / std::to_string(v.qi_set.id) /
           (std::to_string(v.config.config_id) + ".csv");
}

void save_variant(const ProtectedVariant& v, const std::filesystem::path& root) {
    const std::filesystem::path csv_path = root / variant_relpath(v);
    std::filesystem::create_directories(csv_path.parent_path());
    write_csv(v.data, csv_path);

    nlohmann::json j;
    j["source"] = v.source;
    j["qi_set"] = {{"id", v.qi_set.id}, {"columns", v.qi_set.columns}};
    j["technique"] = technique_name(v.config.technique);
    j["params"] = v.config.params;
    j["replaced"] = v.replaced;
    j["synthesized"] = v.synthesized;
    j["seed"] = v.seed;
    std::filesystem::path side = csv_path;
    side.replace_extension(".json");
    std::ofstream f(side, std::ios::binary);
    if (!f) throw Error("cannot open " + side.string() + " for writing");
    f << j.dump(2) << "\n";
}

ProtectedVariant load_variant(const std::filesystem::path& csv_path, const Dataset& source) {
    std::filesystem::path side = csv_path;
    side.replace_extension(".json");
    std::ifstream f(side);
    if (!f) throw Error("missing provenance sidecar " + side.string());
    nlohmann::json j = nlohmann::json::parse(f);

    QISet qis;
    qis.id = j.at("qi_set").at("id").get<int>();
    qis.columns = j.at("qi_set").at("columns").get<std::vector<std::string>>();
    const Technique tech = technique_from_name(j.at("technique").get<std::string>());
    const auto params = j.at("params").get<std::map<std::string, double>>();
    const int id = find_config_id(tech, params);
    if (id < 0) {
        throw Error(side.string() + ": parameters outside the supported configuration grid");
    }
    if (j.at("source").get<std::string>() != source.name()) {
        throw Error(side.string() + ": variant of '" + j.at("source").get<std::string>() +
                    "', expected '" + source.name() + "'");
    }
    Dataset data = load_csv_with_schema(csv_path, source);
    return ProtectedVariant{std::move(data),
                            source.name(),
                            std::move(qis),
                            config_grid()[static_cast<std::size_t>(id)],
                            j.at("replaced").get<std::size_t>(),
                            j.at("synthesized").get<std::size_t>(),
                            j.at("seed").get<std::uint64_t>()};
}

}  // namespace autopriv
