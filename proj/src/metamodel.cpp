#include "autopriv/metamodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "autopriv/csv.hpp"
#include "json.hpp"

namespace autopriv {
namespace {

constexpr std::size_t kFeatureDim = kMetaFeatureCount + kConfigEncodingCount;

double parse_number(const std::string& field, const std::string& context) {
    double v = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw Error(context + ": expected a number, got '" + field + "'");
    }
    return v;
}

// Solves A x = b for symmetric positive definite A via Cholesky; returns
// false when a pivot collapses.
bool cholesky_solve(std::vector<double> a, std::vector<double> b, std::size_t n,
                    std::vector<double>& x) {
    // A = L L^T, in-place lower triangle.
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (d <= 0.0 || !std::isfinite(d)) return false;
        const double l = std::sqrt(d);
        a[j * n + j] = l;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / l;
        }
    }
    // Forward: L y = b.
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    // Back: L^T x = y.
    x.assign(n, 0.0);
    for (std::size_t ii = n; ii > 0; --ii) {
        const std::size_t i = ii - 1;
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[k * n + i] * x[k];
        x[i] = s / a[i * n + i];
    }
    return true;
}

const std::vector<std::string>& meta_header() {
    static const std::vector<std::string> header = [] {
        std::vector<std::string> h = {"dataset", "qi_id", "config_id"};
        for (const auto& n : meta_feature_names()) h.push_back(n);
        for (const auto& n : config_encoding_names()) h.push_back(n);
        h.push_back("y_perf");
        h.push_back("y_link");
        return h;
    }();
    return header;
}

}  // namespace

const char* meta_target_name(MetaTarget t) {
    return t == MetaTarget::Performance ? "performance" : "linkability";
}

MetaTarget meta_target_from_name(const std::string& name) {
    if (name == "performance") return MetaTarget::Performance;
    if (name == "linkability") return MetaTarget::Linkability;
    throw Error("unknown meta-model target '" + name + "'");
}

std::vector<double> fractional_ranks(const std::vector<double>& values) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size(), 0.0);
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && values[idx[j]] == values[idx[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = avg;
        i = j;
    }
    return ranks;
}

MetaModel fit_meta(const std::vector<MetaRow>& rows, MetaTarget target, double ridge_lambda) {
    if (rows.size() < 2) throw Error("meta-model needs at least 2 rows");
    if (ridge_lambda < 0.0) throw Error("ridge lambda must be >= 0");
    const std::size_t n = rows.size();
    for (const auto& r : rows) {
        if (r.features.size() != kFeatureDim) {
            throw Error("meta-row feature length " + std::to_string(r.features.size()) +
                        ", expected " + std::to_string(kFeatureDim));
        }
    }

    MetaModel m;
    m.target = target;
    m.ridge_lambda = ridge_lambda;
    m.feature_means.assign(kFeatureDim, 0.0);
    m.feature_sds.assign(kFeatureDim, 1.0);
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
        double mean = 0.0;
        for (const auto& r : rows) mean += r.features[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& r : rows) {
            var += (r.features[j] - mean) * (r.features[j] - mean);
        }
        var /= static_cast<double>(n);
        m.feature_means[j] = mean;
        if (var > 0.0) m.feature_sds[j] = std::sqrt(var);
    }

    std::vector<double> y(n);
    double y_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = target == MetaTarget::Performance ? rows[i].y_perf : rows[i].y_link;
        y_mean += y[i];
    }
    y_mean /= static_cast<double>(n);
    m.intercept = y_mean;

    // Standardized design; centered target. Normal equations with the ridge
    // term keep the system positive definite even when n < kFeatureDim.
    std::vector<double> xs(n * kFeatureDim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < kFeatureDim; ++j) {
            xs[i * kFeatureDim + j] =
                (rows[i].features[j] - m.feature_means[j]) / m.feature_sds[j];
        }
    }
    std::vector<double> xtx(kFeatureDim * kFeatureDim, 0.0);
    std::vector<double> xty(kFeatureDim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = &xs[i * kFeatureDim];
        const double yc = y[i] - y_mean;
        for (std::size_t j = 0; j < kFeatureDim; ++j) {
            xty[j] += xi[j] * yc;
            for (std::size_t k = j; k < kFeatureDim; ++k) {
                xtx[j * kFeatureDim + k] += xi[j] * xi[k];
            }
        }
    }
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
        for (std::size_t k = 0; k < j; ++k) {
            xtx[j * kFeatureDim + k] = xtx[k * kFeatureDim + j];
        }
    }

    double lambda = std::max(ridge_lambda, 1e-12);
    for (int attempt = 0; attempt < 8; ++attempt) {
        std::vector<double> a = xtx;
        for (std::size_t j = 0; j < kFeatureDim; ++j) a[j * kFeatureDim + j] += lambda;
        if (cholesky_solve(std::move(a), xty, kFeatureDim, m.coefficients)) {
            return m;
        }
        lambda *= 100.0;  // jitter retry for numerically defective designs
    }
    throw Error("meta-model normal equations are numerically singular");
}

std::vector<double> predict_meta(const MetaModel& model,
                                 const std::vector<std::vector<double>>& feature_rows) {
    if (!model.trained()) throw Error("meta-model is untrained");
    std::vector<double> out;
    out.reserve(feature_rows.size());
    for (const auto& f : feature_rows) {
        if (f.size() != model.coefficients.size()) {
            throw Error("feature length " + std::to_string(f.size()) + ", expected " +
                        std::to_string(model.coefficients.size()));
        }
        double yhat = model.intercept;
        for (std::size_t j = 0; j < f.size(); ++j) {
            yhat += model.coefficients[j] * (f[j] - model.feature_means[j]) /
                    model.feature_sds[j];
        }
        out.push_back(yhat);
    }
    return out;
}

Recommendation rank_configs(const std::vector<PrivacyConfig>& pool,
                            const std::vector<double>& pred_perf,
                            const std::vector<double>& pred_link, std::size_t top_n) {
    if (pool.size() != pred_perf.size() || pool.size() != pred_link.size()) {
        throw Error("rank_configs: prediction counts do not match the config pool");
    }
    const auto perf_ranks = fractional_ranks(pred_perf);
    std::vector<double> neg_link(pred_link.size());
    for (std::size_t i = 0; i < pred_link.size(); ++i) neg_link[i] = -pred_link[i];
    const auto link_ranks = fractional_ranks(neg_link);

    Recommendation rec;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        rec.push_back({pool[i], pred_perf[i], pred_link[i],
                       (perf_ranks[i] + link_ranks[i]) / 2.0});
    }
    std::sort(rec.begin(), rec.end(), [](const RecommendationEntry& a,
                                         const RecommendationEntry& b) {
        if (a.avg_rank != b.avg_rank) return a.avg_rank > b.avg_rank;
        if (a.pred_perf != b.pred_perf) return a.pred_perf > b.pred_perf;
        return a.config.config_id < b.config.config_id;
    });
    if (top_n > 0 && rec.size() > top_n) rec.resize(top_n);
    return rec;
}

Recommendation recommend_from_pool(const MetaFeatureVector& mf,
                                   const std::vector<PrivacyConfig>& pool,
                                   const MetaModel& model_perf, const MetaModel& model_link,
                                   std::size_t top_n) {
    if (!model_perf.trained() || !model_link.trained()) {
        throw Error("meta-model is untrained");
    }
    if (pool.empty()) throw Error("config pool is empty");
    std::vector<std::vector<double>> features;
    features.reserve(pool.size());
    for (const auto& cfg : pool) {
        std::vector<double> f = mf.values;
        const auto enc = encode_config(cfg);
        f.insert(f.end(), enc.values.begin(), enc.values.end());
        features.push_back(std::move(f));
    }
    return rank_configs(pool, predict_meta(model_perf, features),
                        predict_meta(model_link, features), top_n);
}

Recommendation recommend(const Dataset& new_ds, const MetaModel& model_perf,
                         const MetaModel& model_link, std::size_t top_n, std::uint64_t seed) {
    return recommend_from_pool(extract(new_ds, seed), config_grid(), model_perf, model_link,
                               top_n);
}

void save_meta_model(const MetaModel& model, const std::filesystem::path& path) {
    nlohmann::json j;
    j["target"] = meta_target_name(model.target);
    j["mf_version"] = kMetaFeatureVersion;
    j["intercept"] = model.intercept;
    j["coefficients"] = model.coefficients;
    j["feature_means"] = model.feature_means;
    j["feature_sds"] = model.feature_sds;
    j["ridge_lambda"] = model.ridge_lambda;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << j.dump(2) << "\n";
}

MetaModel load_meta_model(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot read " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
    try {
        const std::string version = j.at("mf_version").get<std::string>();
        if (version != kMetaFeatureVersion) {
            throw Error(path.string() + ": meta-feature version '" + version +
                        "', expected '" + kMetaFeatureVersion + "'");
        }
        MetaModel m;
        m.target = meta_target_from_name(j.at("target").get<std::string>());
        m.intercept = j.at("intercept").get<double>();
        m.coefficients = j.at("coefficients").get<std::vector<double>>();
        m.feature_means = j.at("feature_means").get<std::vector<double>>();
        m.feature_sds = j.at("feature_sds").get<std::vector<double>>();
        m.ridge_lambda = j.at("ridge_lambda").get<double>();
        if (m.coefficients.size() != kFeatureDim ||
            m.feature_means.size() != kFeatureDim || m.feature_sds.size() != kFeatureDim) {
            throw Error(path.string() + ": coefficient block is not " +
                        std::to_string(kFeatureDim) + " wide");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

void write_meta_dataset(const std::vector<MetaRow>& rows, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << csv::format_row(meta_header()) << "\n";
    for (const auto& r : rows) {
        if (r.features.size() != kFeatureDim) {
            throw Error("meta-row feature length " + std::to_string(r.features.size()) +
                        ", expected " + std::to_string(kFeatureDim));
        }
        std::vector<std::string> fields = {r.dataset, std::to_string(r.qi_id),
                                           std::to_string(r.config_id)};
        for (double v : r.features) fields.push_back(csv::format_double(v));
        fields.push_back(csv::format_double(r.y_perf));
        fields.push_back(csv::format_double(r.y_link));
        f << csv::format_row(fields) << "\n";
    }
}

std::vector<MetaRow> load_meta_dataset(const std::filesystem::path& path) {
    const csv::Table t = csv::read_file(path);
    if (t.header != meta_header()) {
        throw Error(path.string() + ": header does not match the meta-dataset schema");
    }
    std::vector<MetaRow> rows;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& raw = t.rows[i];
        const std::string ctx = path.string() + ": row " + std::to_string(i + 1);
        MetaRow r;
        r.dataset = raw[0];
        r.qi_id = static_cast<int>(parse_number(raw[1], ctx));
        r.config_id = static_cast<int>(parse_number(raw[2], ctx));
        for (std::size_t j = 0; j < kFeatureDim; ++j) {
            r.features.push_back(parse_number(raw[3 + j], ctx));
        }
        r.y_perf = parse_number(raw[3 + kFeatureDim], ctx);
        r.y_link = parse_number(raw[4 + kFeatureDim], ctx);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace autopriv
