#include "autopriv/metafeat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <utility>

#include "autopriv/csv.hpp"
#include "autopriv/gower.hpp"
#include "autopriv/learning.hpp"
#include "autopriv/rng.hpp"

namespace autopriv {
namespace {

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Sample standard deviation (n-1); fewer than two values -> 0.
double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Skewness g1 = m3/m2^1.5 and excess kurtosis g2 = m4/m2^2 - 3 from
// population central moments; a zero second moment imputes both to 0.
std::pair<double, double> skew_kurtosis(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    if (v.empty()) return {0.0, 0.0};
    const double m = mean_of(v);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : v) {
        const double d = x - m;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (m2 <= 0.0) return {0.0, 0.0};
    return {m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

double pearson_abs(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean_of(a), mb = mean_of(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return std::fabs(sab / std::sqrt(saa * sbb));
}

// Discretization used by all entropy computations: numeric columns map to
// 10 equal-width bins over [min, max] (constant columns collapse to bin 0),
// categorical columns map tokens to dense ids.
std::vector<int> discretize(const Column& col) {
    std::vector<int> out(col.kind == ColumnKind::Numeric ? col.numeric.size()
                                                         : col.tokens.size());
    if (col.kind == ColumnKind::Numeric) {
        const auto [mn_it, mx_it] = std::minmax_element(col.numeric.begin(), col.numeric.end());
        const double mn = *mn_it, mx = *mx_it;
        if (mx <= mn) return out;  // all zeros
        const double width = (mx - mn) / 10.0;
        for (std::size_t i = 0; i < col.numeric.size(); ++i) {
            int b = static_cast<int>((col.numeric[i] - mn) / width);
            out[i] = std::clamp(b, 0, 9);
        }
    } else {
        std::vector<std::string> uniq = col.tokens;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        for (std::size_t i = 0; i < col.tokens.size(); ++i) {
            out[i] = static_cast<int>(
                std::lower_bound(uniq.begin(), uniq.end(), col.tokens[i]) - uniq.begin());
        }
    }
    return out;
}

// Shannon entropy in bits of a discrete sample.
double entropy_bits(const std::vector<int>& xs) {
    std::map<int, std::size_t> counts;
    for (int x : xs) ++counts[x];
    const double n = static_cast<double>(xs.size());
    double h = 0.0;
    for (const auto& [_, c] : counts) {
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return h;
}

double joint_entropy_bits(const std::vector<int>& xs, const std::vector<int>& ys) {
    std::map<std::pair<int, int>, std::size_t> counts;
    for (std::size_t i = 0; i < xs.size(); ++i) ++counts[{xs[i], ys[i]}];
    const double n = static_cast<double>(xs.size());
    double h = 0.0;
    for (const auto& [_, c] : counts) {
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return h;
}

// Landmarker split: rows ranked by a content hash mixed with the seed, the
// smallest ~70% train the landmarker and the rest evaluate it. Hash-based
// membership makes the split invariant under row permutation.
void hash_split(const Dataset& ds, std::uint64_t seed, std::vector<std::size_t>& train,
                std::vector<std::size_t>& eval) {
    const std::size_t n = ds.n_rows();
    std::vector<std::pair<std::uint64_t, std::size_t>> hashed(n);
    for (std::size_t r = 0; r < n; ++r) {
        std::string key;
        for (std::size_t c = 0; c < ds.n_cols(); ++c) {
            const Column& col = ds.column(c);
            key += col.kind == ColumnKind::Numeric ? csv::format_double(col.numeric[r])
                                                   : col.tokens[r];
            key += '\x1f';
        }
        hashed[r] = {fnv1a64(key, derive_seed(seed, "landmark")), r};
    }
    std::sort(hashed.begin(), hashed.end());
    std::size_t n_train = round_half_up(0.7 * static_cast<double>(n));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        (i < n_train ? train : eval).push_back(hashed[i].second);
    }
    std::sort(train.begin(), train.end());
    std::sort(eval.begin(), eval.end());
}

// 1-NN landmarker: each evaluation row is scored with the mean label of the
// training rows at exactly the minimal Gower distance (averaging over
// co-minimal neighbors keeps the score independent of row order).
double nn1_landmark(const Dataset& ds, const std::vector<std::size_t>& train,
                    const std::vector<std::size_t>& eval) {
    const GowerMetric metric(ds, ds.predictor_indices());
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t e : eval) {
        double best = std::numeric_limits<double>::infinity();
        double label_sum = 0.0;
        std::size_t ties = 0;
        for (std::size_t t : train) {
            const double d = metric.distance(ds, e, ds, t);
            if (d < best) {
                best = d;
                label_sum = ds.label_of(t);
                ties = 1;
            } else if (d == best) {
                label_sum += ds.label_of(t);
                ++ties;
            }
        }
        scores.push_back(label_sum / static_cast<double>(ties));
        labels.push_back(ds.label_of(e));
    }
    try {
        return auc(scores, labels);
    } catch (const Error&) {
        return 0.0;  // single-class evaluation side
    }
}

// Decision-stump landmarker: the best (numeric predictor, threshold) pair is
// chosen by training-side AUC of the two-sided mean-label scorer and then
// scored on the evaluation side. No numeric predictors -> imputed 0.
double stump_landmark(const Dataset& ds, const std::vector<std::size_t>& train,
                      const std::vector<std::size_t>& eval) {
    struct Stump {
        std::size_t col = 0;
        double threshold = 0.0;
        double low_score = 0.5, high_score = 0.5;
    };
    double best_auc = -1.0;
    Stump best;
    std::vector<int> train_labels;
    for (std::size_t t : train) train_labels.push_back(ds.label_of(t));

    for (std::size_t c : ds.predictor_indices()) {
        const Column& col = ds.column(c);
        if (col.kind != ColumnKind::Numeric) continue;
        std::vector<double> vals;
        for (std::size_t t : train) vals.push_back(col.numeric[t]);
        std::vector<double> uniq = vals;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        for (std::size_t i = 0; i + 1 < uniq.size(); ++i) {
            const double thr = (uniq[i] + uniq[i + 1]) / 2.0;
            double low_sum = 0.0, high_sum = 0.0;
            std::size_t low_n = 0, high_n = 0;
            for (std::size_t k = 0; k < vals.size(); ++k) {
                if (vals[k] <= thr) {
                    low_sum += train_labels[k];
                    ++low_n;
                } else {
                    high_sum += train_labels[k];
                    ++high_n;
                }
            }
            const double low_score = low_n ? low_sum / static_cast<double>(low_n) : 0.5;
            const double high_score = high_n ? high_sum / static_cast<double>(high_n) : 0.5;
            std::vector<double> scores;
            for (double v : vals) scores.push_back(v <= thr ? low_score : high_score);
            double a;
            try {
                a = auc(scores, train_labels);
            } catch (const Error&) {
                continue;
            }
            if (a > best_auc) {
                best_auc = a;
                best = {c, thr, low_score, high_score};
            }
        }
    }
    if (best_auc < 0.0) return 0.0;

    std::vector<double> scores;
    std::vector<int> labels;
    const Column& col = ds.column(best.col);
    for (std::size_t e : eval) {
        scores.push_back(col.numeric[e] <= best.threshold ? best.low_score : best.high_score);
        labels.push_back(ds.label_of(e));
    }
    try {
        return auc(scores, labels);
    } catch (const Error&) {
        return 0.0;
    }
}

}  // namespace

const std::vector<std::string>& meta_feature_names() {
    static const std::vector<std::string> names = {
        "n_rows",          "n_predictors",     "dim_ratio",       "frac_numeric",
        "frac_categorical", "minority_fraction", "mean_of_means",  "sd_of_means",
        "mean_of_sds",     "sd_of_sds",        "mean_skewness",   "sd_skewness",
        "mean_kurtosis",   "sd_kurtosis",      "mean_abs_corr",   "sd_abs_corr",
        "class_entropy",   "mean_attr_entropy", "sd_attr_entropy", "mean_mutual_info",
        "noise_signal_ratio", "nn1_auc",       "stump_auc"};
    return names;
}

const std::vector<std::string>& config_encoding_names() {
    static const std::vector<std::string> names = {
        "is_copulagan", "is_tvae", "is_ctgan",  "is_dpgan", "is_pategan", "is_privatesmote",
        "epochs",       "batch_size", "epsilon", "N",        "knn"};
    return names;
}

double MetaFeatureVector::at(const std::string& name) const {
    const auto& names = meta_feature_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return values.at(i);
    }
    throw Error("unknown meta-feature '" + name + "'");
}

MetaFeatureVector extract(const Dataset& ds, std::uint64_t seed) {
    const double n = static_cast<double>(ds.n_rows());
    const auto pred = ds.predictor_indices();
    const double p = static_cast<double>(pred.size());

    std::size_t n_numeric = 0;
    std::vector<std::vector<double>> norm_cols;  // min-max normalized numerics
    for (std::size_t c : pred) {
        const Column& col = ds.column(c);
        if (col.kind != ColumnKind::Numeric) continue;
        ++n_numeric;
        const auto [mn_it, mx_it] = std::minmax_element(col.numeric.begin(), col.numeric.end());
        const double mn = *mn_it, range = *mx_it - *mn_it;
        std::vector<double> norm(col.numeric.size(), 0.0);
        if (range > 0.0) {
            for (std::size_t i = 0; i < norm.size(); ++i) {
                norm[i] = (col.numeric[i] - mn) / range;
            }
        }
        norm_cols.push_back(std::move(norm));
    }

    std::vector<double> means, sds, skews, kurts;
    for (const auto& colvals : norm_cols) {
        means.push_back(mean_of(colvals));
        sds.push_back(sd_of(colvals));
        const auto [sk, ku] = skew_kurtosis(colvals);
        skews.push_back(sk);
        kurts.push_back(ku);
    }

    std::vector<double> abs_corrs;
    for (std::size_t i = 0; i < norm_cols.size(); ++i) {
        for (std::size_t j = i + 1; j < norm_cols.size(); ++j) {
            abs_corrs.push_back(pearson_abs(norm_cols[i], norm_cols[j]));
        }
    }

    const auto labels = ds.binary_labels();
    std::size_t n_pos = 0;
    for (int v : labels) n_pos += static_cast<std::size_t>(v);
    const double minority =
        n > 0 ? static_cast<double>(std::min(n_pos, labels.size() - n_pos)) / n : 0.0;

    std::vector<int> y(labels.begin(), labels.end());
    const double class_entropy = entropy_bits(y);

    std::vector<double> attr_entropies, mutual_infos;
    for (std::size_t c : pred) {
        const std::vector<int> xd = discretize(ds.column(c));
        const double hx = entropy_bits(xd);
        attr_entropies.push_back(hx);
        mutual_infos.push_back(hx + class_entropy - joint_entropy_bits(xd, y));
    }
    const double mean_attr_entropy = mean_of(attr_entropies);
    const double mean_mi = mean_of(mutual_infos);
    const double noise_signal =
        (mean_attr_entropy - mean_mi) / std::max(mean_mi, 1e-12);

    std::vector<std::size_t> lm_train, lm_eval;
    hash_split(ds, seed, lm_train, lm_eval);
    const double nn1 = nn1_landmark(ds, lm_train, lm_eval);
    const double stump = stump_landmark(ds, lm_train, lm_eval);

    MetaFeatureVector mf;
    mf.values = {n,
                 p,
                 n > 0 ? p / n : 0.0,
                 p > 0 ? static_cast<double>(n_numeric) / p : 0.0,
                 p > 0 ? static_cast<double>(pred.size() - n_numeric) / p : 0.0,
                 minority,
                 mean_of(means),
                 sd_of(means),
                 mean_of(sds),
                 sd_of(sds),
                 mean_of(skews),
                 sd_of(skews),
                 mean_of(kurts),
                 sd_of(kurts),
                 mean_of(abs_corrs),
                 sd_of(abs_corrs),
                 class_entropy,
                 mean_attr_entropy,
                 sd_of(attr_entropies),
                 mean_mi,
                 noise_signal,
                 nn1,
                 stump};
    for (double& v : mf.values) {
        if (!std::isfinite(v)) v = 0.0;
    }
    return mf;
}

ConfigEncoding encode_config(const PrivacyConfig& config) {
    ConfigEncoding enc;
    enc.values.assign(kConfigEncodingCount, 0.0);
    const int slot = static_cast<int>(config.technique);
    if (slot < 0 || slot > 5) throw Error("unknown technique in config encoding");
    enc.values[static_cast<std::size_t>(slot)] = 1.0;
    const auto set_if = [&](const char* key, std::size_t index) {
        auto it = config.params.find(key);
        if (it != config.params.end()) enc.values[index] = it->second;
    };
    set_if("epochs", 6);
    set_if("batch_size", 7);
    set_if("epsilon", 8);
    set_if("N", 9);
    set_if("knn", 10);
    return enc;
}

}  // namespace autopriv
