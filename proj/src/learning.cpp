#include "autopriv/learning.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>

#include "autopriv/csv.hpp"
#include "autopriv/rng.hpp"

namespace autopriv {
namespace {

constexpr const char* kAlgorithmNames[] = {"BoostClassic", "BoostNewton", "SGDLinear", "MLP"};

double sigmoid(double z) {
    if (z >= 0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// ---------------------------------------------------------------------------
// Feature encoding: numeric columns pass through (optionally standardized),
// categorical columns expand to one-hot over the training token set. The
// encoder freezes the training schema so predict-time inputs are checked.

struct Encoder {
    struct Feature {
        std::size_t col = 0;
        bool one_hot = false;
        std::string token;        // one-hot target token
        double mean = 0.0, sd = 1.0;  // identity unless standardized
    };
    std::vector<std::string> col_names;
    std::vector<ColumnKind> col_kinds;
    std::string target;
    std::vector<Feature> features;

    static Encoder build(const Dataset& train, bool standardize) {
        Encoder enc;
        enc.target = train.target();
        for (const auto& c : train.columns()) {
            enc.col_names.push_back(c.name);
            enc.col_kinds.push_back(c.kind);
        }
        for (std::size_t c : train.predictor_indices()) {
            const Column& col = train.column(c);
            if (col.kind == ColumnKind::Numeric) {
                Feature f;
                f.col = c;
                if (standardize) {
                    double mean = 0.0;
                    for (double v : col.numeric) mean += v;
                    mean /= static_cast<double>(col.numeric.size());
                    double var = 0.0;
                    for (double v : col.numeric) var += (v - mean) * (v - mean);
                    var /= static_cast<double>(col.numeric.size());
                    f.mean = mean;
                    f.sd = var > 0.0 ? std::sqrt(var) : 1.0;
                }
                enc.features.push_back(f);
            } else {
                std::vector<std::string> toks = col.tokens;
                std::sort(toks.begin(), toks.end());
                toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
                for (auto& t : toks) {
                    Feature f;
                    f.col = c;
                    f.one_hot = true;
                    f.token = t;
                    enc.features.push_back(f);
                }
            }
        }
        return enc;
    }

    void check_schema(const Dataset& ds) const {
        if (ds.n_cols() != col_names.size() || ds.target() != target) {
            throw Error(ds.name() + ": schema differs from the training schema");
        }
        for (std::size_t i = 0; i < col_names.size(); ++i) {
            if (ds.column(i).name != col_names[i] || ds.column(i).kind != col_kinds[i]) {
                throw Error(ds.name() + ": column '" + ds.column(i).name +
                            "' differs from the training schema");
            }
        }
    }

    std::size_t dim() const { return features.size(); }

    // Row-major n x dim matrix.
    std::vector<double> encode(const Dataset& ds) const {
        check_schema(ds);
        const std::size_t n = ds.n_rows();
        std::vector<double> x(n * features.size());
        for (std::size_t j = 0; j < features.size(); ++j) {
            const Feature& f = features[j];
            const Column& col = ds.column(f.col);
            if (f.one_hot) {
                for (std::size_t r = 0; r < n; ++r) {
                    x[r * features.size() + j] = col.tokens[r] == f.token ? 1.0 : 0.0;
                }
            } else {
                for (std::size_t r = 0; r < n; ++r) {
                    x[r * features.size() + j] = (col.numeric[r] - f.mean) / f.sd;
                }
            }
        }
        return x;
    }
};

// ---------------------------------------------------------------------------
// Depth-limited regression trees on histogram bins (<= 64 quantile
// thresholds per feature), shared by both boosting flavors: the split gain
// and leaf weight use the second-order form gain ~ G^2/(H+lambda); the
// classic flavor passes unit hessians and lambda = 0, which reduces to
// least-squares residual fitting with mean-residual leaves.

struct TreeNode {
    int feature = -1;  // -1 = leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(const double* x) const {
        int i = 0;
        while (nodes[i].feature >= 0) {
            i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
        }
        return nodes[i].value;
    }
};

struct BinnedMatrix {
    std::size_t n = 0, d = 0;
    std::vector<std::vector<double>> thresholds;  // per feature, sorted
    std::vector<std::uint8_t> bin;                // n x d

    static BinnedMatrix build(const std::vector<double>& x, std::size_t n, std::size_t d) {
        BinnedMatrix m;
        m.n = n;
        m.d = d;
        m.thresholds.resize(d);
        m.bin.resize(n * d);
        std::vector<double> vals(n);
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t r = 0; r < n; ++r) vals[r] = x[r * d + j];
            std::sort(vals.begin(), vals.end());
            std::vector<double> uniq(vals);
            uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
            auto& th = m.thresholds[j];
            if (uniq.size() > 1) {
                if (uniq.size() <= 64) {
                    th.assign(uniq.begin(), uniq.end() - 1);  // all but the max
                } else {
                    for (int q = 1; q < 64; ++q) {
                        th.push_back(vals[vals.size() * static_cast<std::size_t>(q) / 64]);
                    }
                    std::sort(th.begin(), th.end());
                    th.erase(std::unique(th.begin(), th.end()), th.end());
                    if (!th.empty() && th.back() == uniq.back()) th.pop_back();
                }
            }
            for (std::size_t r = 0; r < n; ++r) {
                // bin = count of thresholds < value; split at threshold t means
                // "value <= t goes left", i.e. bin(value) <= index(t).
                m.bin[r * d + j] = static_cast<std::uint8_t>(
                    std::lower_bound(th.begin(), th.end(), x[r * d + j]) - th.begin());
            }
        }
        return m;
    }
};

struct TreeBuilder {
    const BinnedMatrix& bins;
    const std::vector<double>& g;
    const std::vector<double>& h;
    double lambda;
    int max_depth;
    std::vector<std::size_t> order;  // work array of sample indices
    Tree tree;

    static constexpr double kMinGain = 1e-12;

    double leaf_value(double gs, double hs) const {
        return hs + lambda > 1e-12 ? -gs / (hs + lambda) : 0.0;
    }

    int build(std::size_t lo, std::size_t hi, int depth) {
        double gs = 0.0, hs = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            gs += g[order[i]];
            hs += h[order[i]];
        }
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        double best_gain = kMinGain;
        std::size_t best_feature = 0;
        int best_bin = -1;
        if (depth < max_depth && hi - lo >= 2) {
            const double parent = gs * gs / (hs + lambda);
            std::array<double, 65> gb{}, hb{};
            std::array<std::size_t, 65> cb{};
            for (std::size_t j = 0; j < bins.d; ++j) {
                const std::size_t nth = bins.thresholds[j].size();
                if (nth == 0) continue;
                gb.fill(0.0);
                hb.fill(0.0);
                cb.fill(0);
                for (std::size_t i = lo; i < hi; ++i) {
                    const std::uint8_t b = bins.bin[order[i] * bins.d + j];
                    gb[b] += g[order[i]];
                    hb[b] += h[order[i]];
                    ++cb[b];
                }
                double gl = 0.0, hl = 0.0;
                std::size_t cl = 0;
                for (std::size_t b = 0; b < nth; ++b) {
                    gl += gb[b];
                    hl += hb[b];
                    cl += cb[b];
                    if (cl == 0 || cl == hi - lo) continue;
                    const double gr = gs - gl, hr = hs - hl;
                    if (hl + lambda <= 1e-12 || hr + lambda <= 1e-12) continue;
                    const double gain =
                        0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent);
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_feature = j;
                        best_bin = static_cast<int>(b);
                    }
                }
            }
        }

        if (best_bin < 0) {
            tree.nodes[node_id].value = leaf_value(gs, hs);
            return node_id;
        }
        const auto mid = std::stable_partition(
            order.begin() + static_cast<long>(lo), order.begin() + static_cast<long>(hi),
            [&](std::size_t r) {
                return bins.bin[r * bins.d + best_feature] <= static_cast<std::uint8_t>(best_bin);
            });
        const std::size_t split = static_cast<std::size_t>(mid - order.begin());
        tree.nodes[node_id].feature = static_cast<int>(best_feature);
        tree.nodes[node_id].threshold =
            bins.thresholds[best_feature][static_cast<std::size_t>(best_bin)];
        const int l = build(lo, split, depth + 1);
        const int r = build(split, hi, depth + 1);
        tree.nodes[node_id].left = l;
        tree.nodes[node_id].right = r;
        return node_id;
    }
};

Tree build_tree(const BinnedMatrix& bins, const std::vector<double>& g,
                const std::vector<double>& h, double lambda, int max_depth) {
    TreeBuilder b{bins, g, h, lambda, max_depth, {}, {}};
    b.order.resize(bins.n);
    std::iota(b.order.begin(), b.order.end(), std::size_t{0});
    b.build(0, bins.n, 0);
    return b.tree;
}

// ---------------------------------------------------------------------------
// Fitted predictors.

struct BoostState {
    double base_score = 0.0;
    double learning_rate = 0.0;
    std::vector<Tree> trees;

    double raw(const double* x) const {
        double f = base_score;
        for (const auto& t : trees) f += learning_rate * t.predict(x);
        return f;
    }
};

struct LinearState {
    std::vector<double> w;
    double b = 0.0;
};

struct MlpState {
    MlpWeights w;
};

}  // namespace

struct Model::Impl {
    Algorithm algorithm = Algorithm::BoostClassic;
    Encoder encoder;
    BoostState boost;
    LinearState linear;
    MlpState mlp;

    std::vector<double> scores(const Dataset& rows) const {
        const std::vector<double> x = encoder.encode(rows);
        const std::size_t n = rows.n_rows();
        const std::size_t d = encoder.dim();
        std::vector<double> out(n);
        switch (algorithm) {
            case Algorithm::BoostClassic:
            case Algorithm::BoostNewton:
                for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid(boost.raw(&x[i * d]));
                break;
            case Algorithm::SGDLinear:
                for (std::size_t i = 0; i < n; ++i) {
                    double z = linear.b;
                    for (std::size_t j = 0; j < d; ++j) z += linear.w[j] * x[i * d + j];
                    out[i] = sigmoid(z);
                }
                break;
            case Algorithm::MLP: {
                const auto& w = mlp.w;
                std::vector<double> a(w.hidden);
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t k = 0; k < w.hidden; ++k) {
                        double z = w.b1[k];
                        for (std::size_t j = 0; j < d; ++j) z += w.w1[k * d + j] * x[i * d + j];
                        a[k] = sigmoid(z);
                    }
                    double z = w.b2;
                    for (std::size_t k = 0; k < w.hidden; ++k) z += w.w2[k] * a[k];
                    out[i] = sigmoid(z);
                }
                break;
            }
        }
        return out;
    }
};

std::vector<double> Model::scores(const Dataset& rows) const { return impl_->scores(rows); }

std::size_t Model::boosting_rounds() const { return impl_->boost.trees.size(); }

const char* algorithm_name(Algorithm a) { return kAlgorithmNames[static_cast<int>(a)]; }

Algorithm algorithm_from_name(const std::string& name) {
    for (int i = 0; i < 4; ++i) {
        if (name == kAlgorithmNames[i]) return static_cast<Algorithm>(i);
    }
    throw Error("unknown learning algorithm '" + name + "'");
}

double LearnerSpec::param(const std::string& key) const {
    auto it = hyperparams.find(key);
    if (it == hyperparams.end()) {
        throw Error(std::string(algorithm_name(algorithm)) + ": missing hyperparameter '" + key +
                    "'");
    }
    return it->second;
}

std::string LearnerSpec::label() const {
    std::string s = algorithm_name(algorithm);
    for (const auto& [k, v] : hyperparams) s += " " + k + "=" + csv::format_double(v);
    return s;
}

std::vector<LearnerSpec> enumerate_learner_space() {
    std::vector<LearnerSpec> specs;
    for (Algorithm a : {Algorithm::BoostClassic, Algorithm::BoostNewton}) {
        for (double n : {100.0, 250.0, 500.0})
            for (double depth : {4.0, 7.0, 10.0})
                for (double lr : {0.01, 0.1})
                    specs.push_back(
                        {a, {{"n_estimators", n}, {"max_depth", depth}, {"learning_rate", lr}}, -1});
    }
    for (double alpha : {100.0, 250.0, 500.0})
        for (double iters : {10000.0, 100000.0})
            for (double eta0 : {0.01, 0.1})
                specs.push_back({Algorithm::SGDLinear,
                                 {{"alpha", alpha}, {"max_iter", iters}, {"eta0", eta0}},
                                 -1});
    // hidden is a multiplier of the predictor count p, resolved as
    // ceil(hidden * p) at fit time: 1 -> p, 0.5 -> ceil(p/2), 2/3 -> ceil(2p/3).
    for (double hidden : {1.0, 0.5, 2.0 / 3.0})
        for (double alpha : {0.01, 0.1})
            for (double iters : {10000.0, 100000.0})
                specs.push_back({Algorithm::MLP,
                                 {{"hidden", hidden}, {"alpha", alpha}, {"max_iter", iters}},
                                 -1});
    for (std::size_t i = 0; i < specs.size(); ++i) specs[i].spec_id = static_cast<int>(i);
    return specs;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw Error("auc: " + std::to_string(scores.size()) + " scores vs " +
                    std::to_string(labels.size()) + " labels");
    }
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += static_cast<std::size_t>(y);
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw Error("auc: both classes must be present");

    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Rank-sum with average ranks over ties.
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[idx[k]]) pos_rank_sum += avg_rank;
        }
        i = j;
    }
    const double u = pos_rank_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

void require_both_classes(const Dataset& train) {
    const auto y = train.binary_labels();
    bool pos = false, neg = false;
    for (int v : y) (v ? pos : neg) = true;
    if (!pos || !neg) throw Error(train.name() + ": training data has a single class");
}

Model fit_boosting(const LearnerSpec& spec, const Dataset& train, const Dataset* valid,
                   std::uint64_t seed) {
    (void)seed;  // boosting is seed-free: deterministic greedy splits
    auto impl = std::make_shared<Model::Impl>();
    impl->algorithm = spec.algorithm;
    impl->encoder = Encoder::build(train, /*standardize=*/false);
    const std::size_t n = train.n_rows();
    const std::size_t d = impl->encoder.dim();
    const std::vector<double> x = impl->encoder.encode(train);
    const BinnedMatrix bins = BinnedMatrix::build(x, n, d);
    const auto y = train.binary_labels();

    const int n_estimators = static_cast<int>(spec.param("n_estimators"));
    const int max_depth = static_cast<int>(spec.param("max_depth"));
    const double lr = spec.param("learning_rate");
    // Second-order (Newton) boosting regularizes leaves with lambda = 1;
    // classic first-order residual fitting uses unit hessians, lambda = 0.
    const bool newton = spec.algorithm == Algorithm::BoostNewton;
    const double lambda = newton ? 1.0 : 0.0;

    double pos_rate = 0.0;
    for (int v : y) pos_rate += v;
    pos_rate = std::clamp(pos_rate / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
    impl->boost.base_score = std::log(pos_rate / (1.0 - pos_rate));
    impl->boost.learning_rate = lr;

    std::vector<double> f(n, impl->boost.base_score);
    std::vector<double> g(n), h(n);

    std::vector<double> valid_x;
    std::vector<int> valid_y;
    std::vector<double> valid_f;
    if (valid) {
        valid_x = impl->encoder.encode(*valid);
        valid_y = valid->binary_labels();
        valid_f.assign(valid->n_rows(), impl->boost.base_score);
    }
    double best_valid = -1.0;
    int rounds_since_improve = 0;

    for (int round = 0; round < n_estimators; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(f[i]);
            g[i] = p - static_cast<double>(y[i]);
            h[i] = newton ? p * (1.0 - p) : 1.0;
        }
        Tree tree = build_tree(bins, g, h, lambda, max_depth);
        for (std::size_t i = 0; i < n; ++i) f[i] += lr * tree.predict(&x[i * d]);
        if (valid) {
            for (std::size_t i = 0; i < valid_y.size(); ++i) {
                valid_f[i] += lr * tree.predict(&valid_x[i * d]);
            }
        }
        impl->boost.trees.push_back(std::move(tree));
        if (valid) {
            const double v_auc = auc(valid_f, valid_y);
            if (v_auc > best_valid) {
                best_valid = v_auc;
                rounds_since_improve = 0;
            } else if (++rounds_since_improve >= 10) {
                break;
            }
        }
    }
    return Model(std::move(impl));
}

Model fit_sgd(const LearnerSpec& spec, const Dataset& train, std::uint64_t seed) {
    auto impl = std::make_shared<Model::Impl>();
    impl->algorithm = Algorithm::SGDLinear;
    impl->encoder = Encoder::build(train, /*standardize=*/true);
    const std::size_t n = train.n_rows();
    const std::size_t d = impl->encoder.dim();
    const std::vector<double> x = impl->encoder.encode(train);
    const auto y = train.binary_labels();

    const double alpha = spec.param("alpha");
    const int max_iter = static_cast<int>(spec.param("max_iter"));
    const double eta = spec.param("eta0");
    // The grid's alpha values (100..500) are strong enough to make the naive
    // update diverge at eta0 = 0.1; clipping keeps the weights finite and the
    // per-epoch loss tracking keeps the best epoch regardless.
    constexpr double kClip = 1e6;

    std::vector<double> w(d, 0.0), best_w(d, 0.0);
    double b = 0.0, best_b = 0.0;
    double best_loss = 1e300;
    int epochs_since_improve = 0;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, "sgd"));

    for (int epoch = 0; epoch < max_iter; ++epoch) {
        rng.shuffle(order);
        for (std::size_t i : order) {
            const double* xi = &x[i * d];
            double z = b;
            for (std::size_t j = 0; j < d; ++j) z += w[j] * xi[j];
            const double grad = sigmoid(z) - static_cast<double>(y[i]);
            for (std::size_t j = 0; j < d; ++j) {
                w[j] = std::clamp(w[j] - eta * (grad * xi[j] + alpha * w[j]), -kClip, kClip);
            }
            b = std::clamp(b - eta * grad, -kClip, kClip);
        }
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double z = b;
            for (std::size_t j = 0; j < d; ++j) z += w[j] * x[i * d + j];
            loss += softplus(z) - static_cast<double>(y[i]) * z;
        }
        loss /= static_cast<double>(n);
        double penalty = 0.0;
        for (double v : w) penalty += v * v;
        loss += 0.5 * alpha * penalty / static_cast<double>(n);
        if (loss < best_loss - 1e-4) {
            best_loss = loss;
            best_w = w;
            best_b = b;
            epochs_since_improve = 0;
        } else if (++epochs_since_improve >= 10) {
            break;
        }
    }
    impl->linear.w = std::move(best_w);
    impl->linear.b = best_b;
    return Model(std::move(impl));
}

}  // namespace

namespace {

// Rows processed per step of the training pass. Wide enough that the inner
// loops amortize their setup and fill the vector units; lane loops below are
// all elementwise so they compile to straight SIMD.
constexpr std::size_t kMlpBlock = 16;

// Training-time view of the encoded matrix. Besides the row-major rows it
// keeps a copy where each block of kMlpBlock rows is interleaved column-wise
// (x[b..b+15][j] stored contiguously), so the layer-1 forward pass reduces
// along j independently per lane and vectorizes without reassociating sums.
struct MlpBatch {
    const double* rows = nullptr;  // n x d, row-major
    std::vector<double> interleaved;
    std::size_t n = 0;
    std::size_t d = 0;
};

MlpBatch mlp_prepare(const double* x, std::size_t n, std::size_t d) {
    MlpBatch b;
    b.rows = x;
    b.n = n;
    b.d = d;
    const std::size_t nb = n / kMlpBlock;
    b.interleaved.resize(nb * d * kMlpBlock);
    for (std::size_t blk = 0; blk < nb; ++blk) {
        double* out = b.interleaved.data() + blk * d * kMlpBlock;
        const double* r0 = x + blk * kMlpBlock * d;
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t r = 0; r < kMlpBlock; ++r) out[j * kMlpBlock + r] = r0[r * d + j];
        }
    }
    return b;
}

// The lane loops below sit behind "#pragma GCC unroll 1": left alone, the
// compiler fully unrolls these fixed 16-step loops before vectorization and
// then fails to form SIMD groups from the flattened statements. Keeping them
// rolled lets the loop vectorizer handle them directly.

// exp(t) for t <= 0, one block at a time: Cody-Waite reduction, degree-10
// polynomial (relative error ~2e-13 on this range), 2^k assembled from bits.
// Everything is an elementwise lane loop, so unlike the libm call this
// vectorizes; training spends most of its transcendental budget here.
void exp_block(const double* __restrict t, double* __restrict out) {
    constexpr double kLog2e = 1.4426950408889634074;
    constexpr double kLn2Hi = 6.93147180369123816490e-01;
    constexpr double kLn2Lo = 1.90821492927058770002e-10;
    double red[kMlpBlock];
    double kd[kMlpBlock];
    std::int32_t ki[kMlpBlock];
#pragma GCC unroll 1
    for (std::size_t r = 0; r < kMlpBlock; ++r) {
        const double x = std::max(t[r], -708.0);
        ki[r] = static_cast<std::int32_t>(x * kLog2e - 0.5);  // nearest, x <= 0
        red[r] = x;
    }
#pragma GCC unroll 1
    for (std::size_t r = 0; r < kMlpBlock; ++r) kd[r] = static_cast<double>(ki[r]);
#pragma GCC unroll 1
    for (std::size_t r = 0; r < kMlpBlock; ++r) {
        red[r] = (red[r] - kd[r] * kLn2Hi) - kd[r] * kLn2Lo;
    }
    double p[kMlpBlock];
#pragma GCC unroll 1
    for (std::size_t r = 0; r < kMlpBlock; ++r) {
        const double q = red[r];
        double s = 1.0 / 3628800.0;
        s = s * q + 1.0 / 362880.0;
        s = s * q + 1.0 / 40320.0;
        s = s * q + 1.0 / 5040.0;
        s = s * q + 1.0 / 720.0;
        s = s * q + 1.0 / 120.0;
        s = s * q + 1.0 / 24.0;
        s = s * q + 1.0 / 6.0;
        s = s * q + 0.5;
        s = s * q + 1.0;
        p[r] = s * q + 1.0;
    }
    std::int64_t bits[kMlpBlock];
#pragma GCC unroll 1
    for (std::size_t r = 0; r < kMlpBlock; ++r) {
        bits[r] = static_cast<std::int64_t>(1023 + ki[r]) << 52;
    }
    double two_k[kMlpBlock];
    std::memcpy(two_k, bits, sizeof two_k);
#pragma GCC unroll 1
    for (std::size_t r = 0; r < kMlpBlock; ++r) out[r] = p[r] * two_k[r];
}

// sigmoid over one block via exp(-|z|), which never overflows; the sign is
// folded back in with a lane select.
void sigmoid_block(const double* __restrict z, double* __restrict out) {
    double neg[kMlpBlock];
#pragma GCC unroll 1
    for (std::size_t r = 0; r < kMlpBlock; ++r) neg[r] = std::min(z[r], -z[r]);
    double e[kMlpBlock];
    exp_block(neg, e);
#pragma GCC unroll 1
    for (std::size_t r = 0; r < kMlpBlock; ++r) {
        const double s = 1.0 / (1.0 + e[r]);
        out[r] = z[r] >= 0 ? s : 1.0 - s;
    }
}

// Fused loss + gradient pass; this is the hot loop of the whole search
// phase, so rows are processed four at a time with fixed summation order
// (deterministic, and the inner loops stay vectorizable).
double mlp_epoch(const MlpWeights& w, const MlpBatch& xb, const std::vector<int>& y, double alpha,
                 MlpWeights& grad, std::vector<double>& act) {
    const std::size_t d = w.in_dim;
    const std::size_t hdim = w.hidden;
    const std::size_t n = xb.n;
    grad.in_dim = d;
    grad.hidden = hdim;
    grad.w1.assign(hdim * d, 0.0);
    grad.b1.assign(hdim, 0.0);
    grad.w2.assign(hdim, 0.0);
    grad.b2 = 0.0;
    act.resize(hdim * kMlpBlock);

    double loss = 0.0;
    const std::size_t nb = n / kMlpBlock;
    const double* __restrict w1p = w.w1.data();
    const double* __restrict w2p = w.w2.data();
    const double* __restrict b1p = w.b1.data();
    double* __restrict g1p = grad.w1.data();
    double* __restrict g2p = grad.w2.data();
    double* __restrict gb1p = grad.b1.data();
    double* __restrict actp = act.data();
    for (std::size_t blk = 0; blk < nb; ++blk) {
        const double* __restrict xt = xb.interleaved.data() + blk * d * kMlpBlock;
        const double* __restrict xr = xb.rows + blk * kMlpBlock * d;

        for (std::size_t k = 0; k < hdim; ++k) {
            const double* __restrict wk = w1p + k * d;
            double acc[kMlpBlock];
#pragma GCC unroll 1
            for (std::size_t r = 0; r < kMlpBlock; ++r) acc[r] = b1p[k];
            for (std::size_t j = 0; j < d; ++j) {
                const double c = wk[j];
                const double* __restrict q = xt + j * kMlpBlock;
#pragma GCC unroll 1
                for (std::size_t r = 0; r < kMlpBlock; ++r) acc[r] += c * q[r];
            }
            sigmoid_block(acc, actp + k * kMlpBlock);
        }

        double z[kMlpBlock];
#pragma GCC unroll 1
        for (std::size_t r = 0; r < kMlpBlock; ++r) z[r] = w.b2;
        for (std::size_t k = 0; k < hdim; ++k) {
            const double c = w2p[k];
            const double* __restrict ak = actp + k * kMlpBlock;
#pragma GCC unroll 1
            for (std::size_t r = 0; r < kMlpBlock; ++r) z[r] += c * ak[r];
        }

        // Output layer: reuse exp(-|z|) for both the loss terms (softplus via
        // log1p) and the residuals.
        const int* yy = y.data() + blk * kMlpBlock;
        double negz[kMlpBlock];
#pragma GCC unroll 1
        for (std::size_t r = 0; r < kMlpBlock; ++r) negz[r] = std::min(z[r], -z[r]);
        double e[kMlpBlock];
        exp_block(negz, e);
        double dz[kMlpBlock];
#pragma GCC unroll 1
        for (std::size_t r = 0; r < kMlpBlock; ++r) {
            const double s = 1.0 / (1.0 + e[r]);
            dz[r] = (z[r] >= 0 ? s : 1.0 - s) - static_cast<double>(yy[r]);
        }
        for (std::size_t r = 0; r < kMlpBlock; ++r) {
            const double zpos = z[r] >= 0 ? z[r] : 0.0;
            loss += zpos + std::log1p(e[r]) - static_cast<double>(yy[r]) * z[r];
            grad.b2 += dz[r];
        }

        for (std::size_t k = 0; k < hdim; ++k) {
            double* __restrict ak = actp + k * kMlpBlock;
            const double w2k = w2p[k];
            double gw2 = 0.0, gb1 = 0.0;
            for (std::size_t r = 0; r < kMlpBlock; ++r) gw2 += dz[r] * ak[r];
            // a is dead after this point; overwrite it with the layer-1
            // deltas to keep the scratch footprint small.
#pragma GCC unroll 1
            for (std::size_t r = 0; r < kMlpBlock; ++r) {
                ak[r] = dz[r] * w2k * ak[r] * (1.0 - ak[r]);
            }
            for (std::size_t r = 0; r < kMlpBlock; ++r) gb1 += ak[r];
            g2p[k] += gw2;
            gb1p[k] += gb1;
            double* __restrict gk = g1p + k * d;
            for (std::size_t r4 = 0; r4 < kMlpBlock; r4 += 4) {
                const double d0 = ak[r4], d1 = ak[r4 + 1], d2 = ak[r4 + 2], d3 = ak[r4 + 3];
                const double* __restrict x0 = xr + r4 * d;
                const double* __restrict x1 = x0 + d;
                const double* __restrict x2 = x1 + d;
                const double* __restrict x3 = x2 + d;
#pragma GCC unroll 1
                for (std::size_t j = 0; j < d; ++j) {
                    gk[j] += d0 * x0[j] + d1 * x1[j] + d2 * x2[j] + d3 * x3[j];
                }
            }
        }
    }

    // Leftover rows (n mod block), one at a time.
    for (std::size_t i = nb * kMlpBlock; i < n; ++i) {
        const double* xi = xb.rows + i * d;
        for (std::size_t k = 0; k < hdim; ++k) {
            const double* wk = w.w1.data() + k * d;
            double z1 = w.b1[k];
            for (std::size_t j = 0; j < d; ++j) z1 += wk[j] * xi[j];
            act[k] = sigmoid(z1);
        }
        double z = w.b2;
        for (std::size_t k = 0; k < hdim; ++k) z += w.w2[k] * act[k];
        loss += softplus(z) - static_cast<double>(y[i]) * z;

        const double dz = sigmoid(z) - static_cast<double>(y[i]);
        grad.b2 += dz;
        for (std::size_t k = 0; k < hdim; ++k) {
            grad.w2[k] += dz * act[k];
            const double dpre = dz * w.w2[k] * act[k] * (1.0 - act[k]);
            grad.b1[k] += dpre;
            double* gk = grad.w1.data() + k * d;
            for (std::size_t j = 0; j < d; ++j) gk[j] += dpre * xi[j];
        }
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    loss *= inv_n;
    grad.b2 *= inv_n;
    for (auto& v : grad.w1) v *= inv_n;
    for (auto& v : grad.b1) v *= inv_n;
    for (auto& v : grad.w2) v *= inv_n;

    double penalty = 0.0;
    for (std::size_t k = 0; k < hdim * d; ++k) {
        penalty += w.w1[k] * w.w1[k];
        grad.w1[k] += alpha * inv_n * w.w1[k];
    }
    for (std::size_t k = 0; k < hdim; ++k) {
        penalty += w.w2[k] * w.w2[k];
        grad.w2[k] += alpha * inv_n * w.w2[k];
    }
    return loss + 0.5 * alpha * inv_n * penalty;
}

}  // namespace

double mlp_loss_and_grad(const MlpWeights& w, const std::vector<std::vector<double>>& x,
                         const std::vector<int>& y, double alpha, MlpWeights& grad) {
    const std::size_t n = x.size();
    const std::size_t d = w.in_dim;
    std::vector<double> flat(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(x[i].begin(), x[i].end(), flat.begin() + static_cast<long>(i * d));
    }
    const MlpBatch batch = mlp_prepare(flat.data(), n, d);
    std::vector<double> act;
    return mlp_epoch(w, batch, y, alpha, grad, act);
}

namespace {

Model fit_mlp(const LearnerSpec& spec, const Dataset& train, std::uint64_t seed) {
    auto impl = std::make_shared<Model::Impl>();
    impl->algorithm = Algorithm::MLP;
    impl->encoder = Encoder::build(train, /*standardize=*/true);
    const std::size_t n = train.n_rows();
    const std::size_t d = impl->encoder.dim();
    const std::vector<double> flat = impl->encoder.encode(train);
    const MlpBatch batch = mlp_prepare(flat.data(), n, d);
    const auto y = train.binary_labels();

    const std::size_t p = train.n_predictors();
    const std::size_t hdim = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(spec.param("hidden") * static_cast<double>(p))));
    const double alpha = spec.param("alpha");
    const int max_iter = static_cast<int>(spec.param("max_iter"));
    constexpr double kEta = 0.01;

    MlpWeights w;
    w.in_dim = d;
    w.hidden = hdim;
    Rng rng(derive_seed(seed, "mlp"));
    const double r1 = std::sqrt(6.0 / static_cast<double>(d + hdim));
    const double r2 = std::sqrt(6.0 / static_cast<double>(hdim + 1));
    w.w1.resize(hdim * d);
    for (auto& v : w.w1) v = (rng.unit() * 2.0 - 1.0) * r1;
    w.b1.assign(hdim, 0.0);
    w.w2.resize(hdim);
    for (auto& v : w.w2) v = (rng.unit() * 2.0 - 1.0) * r2;
    w.b2 = 0.0;

    // Full-batch descent moves the loss slowly per epoch, so the stop rule
    // uses a coarser tolerance than the stochastic fitters; with 1e-4 the
    // patience window almost never closes before max_iter.
    MlpWeights grad, best = w;
    std::vector<double> act;
    double best_loss = 1e300;
    int epochs_since_improve = 0;
    for (int epoch = 0; epoch < max_iter; ++epoch) {
        const double loss = mlp_epoch(w, batch, y, alpha, grad, act);
        if (loss < best_loss - 1e-3) {
            best_loss = loss;
            best = w;
            epochs_since_improve = 0;
        } else if (++epochs_since_improve >= 10) {
            break;
        }
        for (std::size_t k = 0; k < w.w1.size(); ++k) w.w1[k] -= kEta * grad.w1[k];
        for (std::size_t k = 0; k < hdim; ++k) {
            w.b1[k] -= kEta * grad.b1[k];
            w.w2[k] -= kEta * grad.w2[k];
        }
        w.b2 -= kEta * grad.b2;
    }
    impl->mlp.w = std::move(best);
    return Model(std::move(impl));
}

// Stratified index split used for the boosting early-stop carve and for
// resource subsampling: deterministic, at least one row per class kept on
// the selected side.
std::vector<std::size_t> stratified_take(const Dataset& ds,
                                         const std::vector<std::size_t>& rows,
                                         double fraction, std::uint64_t seed) {
    std::vector<std::size_t> neg, pos;
    for (std::size_t r : rows) (ds.label_of(r) ? pos : neg).push_back(r);
    Rng rng(seed);
    std::vector<std::size_t> out;
    for (auto* cls : {&neg, &pos}) {
        if (cls->empty()) continue;
        std::vector<std::size_t> idx = *cls;
        rng.shuffle(idx);
        std::size_t take = std::max<std::size_t>(
            1, round_half_up(fraction * static_cast<double>(idx.size())));
        take = std::min(take, idx.size());
        out.insert(out.end(), idx.begin(), idx.begin() + static_cast<long>(take));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

Model fit(const LearnerSpec& spec, const Dataset& train, const Dataset* valid,
          std::uint64_t seed) {
    require_both_classes(train);
    switch (spec.algorithm) {
        case Algorithm::BoostClassic:
        case Algorithm::BoostNewton:
            return fit_boosting(spec, train, valid, seed);
        case Algorithm::SGDLinear:
            return fit_sgd(spec, train, seed);
        case Algorithm::MLP:
            return fit_mlp(spec, train, seed);
    }
    throw Error("unreachable algorithm");
}

std::vector<double> predict_scores(const Model& model, const Dataset& rows) {
    return model.scores(rows);
}

namespace {

bool is_boosting(const LearnerSpec& spec) {
    return spec.algorithm == Algorithm::BoostClassic || spec.algorithm == Algorithm::BoostNewton;
}

// Fit with the 10% validation carve that drives boosting early stopping.
// Non-boosting learners train on everything (they stop on training loss).
Model fit_with_carve(const LearnerSpec& spec, const Dataset& train, std::uint64_t seed) {
    if (is_boosting(spec)) {
        std::vector<std::size_t> all(train.n_rows());
        std::iota(all.begin(), all.end(), std::size_t{0});
        const auto valid_rows = stratified_take(train, all, 0.1, derive_seed(seed, "carve"));
        if (valid_rows.size() >= 2 && valid_rows.size() < train.n_rows()) {
            std::vector<std::size_t> fit_rows;
            std::size_t vi = 0;
            for (std::size_t r = 0; r < train.n_rows(); ++r) {
                if (vi < valid_rows.size() && valid_rows[vi] == r) {
                    ++vi;
                } else {
                    fit_rows.push_back(r);
                }
            }
            // Dataset construction enforces two classes, so check the label
            // mix of both sides before carving (a 1-member class would end
            // up entirely in the validation slice).
            const auto has_both = [&](const std::vector<std::size_t>& rows) {
                bool pos = false, neg = false;
                for (std::size_t r : rows) (train.label_of(r) ? pos : neg) = true;
                return pos && neg;
            };
            if (has_both(fit_rows) && has_both(valid_rows)) {
                const Dataset fit_ds = train.select_rows(fit_rows);
                const Dataset valid_ds = train.select_rows(valid_rows);
                return fit(spec, fit_ds, &valid_ds, seed);
            }
        }
    }
    return fit(spec, train, nullptr, seed);
}

}  // namespace

EvalResult cross_validate(const Dataset& ds, const LearnerSpec& spec, int folds, int repeats,
                          std::uint64_t seed, double resource_fraction) {
    if (folds < 2) throw Error("cross_validate: folds must be >= 2");
    if (repeats < 1) throw Error("cross_validate: repeats must be >= 1");
    if (resource_fraction <= 0.0 || resource_fraction > 1.0) {
        throw Error("cross_validate: resource_fraction must be in (0,1]");
    }
    const auto y = ds.binary_labels();
    std::vector<std::size_t> neg, pos;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg).push_back(i);
    if (static_cast<int>(neg.size()) < folds || static_cast<int>(pos.size()) < folds) {
        throw Error(ds.name() + ": class too small for " + std::to_string(folds) +
                    "-fold stratification");
    }

    const auto t0 = std::chrono::steady_clock::now();
    EvalResult res;
    res.resource_fraction = resource_fraction;
    for (int rep = 0; rep < repeats; ++rep) {
        // Shuffle each class once per repeat, then deal contiguous chunks.
        std::vector<std::vector<std::size_t>> chunks(static_cast<std::size_t>(folds));
        for (const auto* cls : {&neg, &pos}) {
            std::vector<std::size_t> idx = *cls;
            Rng rng(derive_seed(seed, "cv", rep, cls == &pos ? 1 : 0));
            rng.shuffle(idx);
            const std::size_t m = idx.size();
            for (int f = 0; f < folds; ++f) {
                const std::size_t lo = m * static_cast<std::size_t>(f) / static_cast<std::size_t>(folds);
                const std::size_t hi =
                    m * static_cast<std::size_t>(f + 1) / static_cast<std::size_t>(folds);
                for (std::size_t i = lo; i < hi; ++i) {
                    chunks[static_cast<std::size_t>(f)].push_back(idx[i]);
                }
            }
        }
        for (int f = 0; f < folds; ++f) {
            std::vector<std::size_t> test_rows = chunks[static_cast<std::size_t>(f)];
            std::sort(test_rows.begin(), test_rows.end());
            std::vector<std::size_t> train_rows;
            for (int g = 0; g < folds; ++g) {
                if (g == f) continue;
                train_rows.insert(train_rows.end(), chunks[static_cast<std::size_t>(g)].begin(),
                                  chunks[static_cast<std::size_t>(g)].end());
            }
            std::sort(train_rows.begin(), train_rows.end());
            if (resource_fraction < 1.0) {
                train_rows = stratified_take(ds, train_rows, resource_fraction,
                                             derive_seed(seed, "resource", rep, f));
            }
            const Dataset train_ds = ds.select_rows(train_rows);
            const Dataset test_ds = ds.select_rows(test_rows);
            Model model = fit_with_carve(spec, train_ds, derive_seed(seed, "fit", rep, f));
            res.fold_scores.push_back(auc(model.scores(test_ds), test_ds.binary_labels()));
        }
    }
    double mean = 0.0;
    for (double s : res.fold_scores) mean += s;
    mean /= static_cast<double>(res.fold_scores.size());
    double var = 0.0;
    for (double s : res.fold_scores) var += (s - mean) * (s - mean);
    res.cv_auc_mean = mean;
    res.cv_auc_sd = res.fold_scores.size() > 1
                        ? std::sqrt(var / static_cast<double>(res.fold_scores.size() - 1))
                        : 0.0;
    res.fit_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

double holdout_test_auc(const LearnerSpec& spec, const Dataset& train, const Dataset& test,
                        std::uint64_t seed) {
    Model model = fit_with_carve(spec, train, seed);
    return auc(model.scores(test), test.binary_labels());
}

}  // namespace autopriv
