#include "autopriv/stats.hpp"

#include "autopriv/rng.hpp"

namespace autopriv {

double pct_diff(double r_a, double r_b) {
    if (r_b == 0.0) throw Error("pct_diff: reference value is zero");
    return (r_a - r_b) / r_b * 100.0;
}

RopeVerdict rope_classify(double diff_pct, double lo, double hi) {
    if (lo >= hi) throw Error("rope_classify: interval is empty");
    RopeVerdict v;
    v.diff_pct = diff_pct;
    if (diff_pct > hi) {
        v.region = RopeRegion::Win;
    } else if (diff_pct < lo) {
        v.region = RopeRegion::Lose;
    } else {
        v.region = RopeRegion::Draw;
    }
    return v;
}

SignTestResult bayes_sign_test(const std::vector<double>& diffs, double lo, double hi,
                               double prior_weight, int mc_samples, std::uint64_t seed) {
    if (diffs.empty()) throw Error("bayes_sign_test: no differences given");
    if (prior_weight < 0.0) throw Error("bayes_sign_test: prior weight must be >= 0");
    if (mc_samples < 1) throw Error("bayes_sign_test: mc_samples must be >= 1");

    SignTestResult res;
    res.mc_samples = mc_samples;
    res.seed = seed;
    for (double d : diffs) {
        switch (rope_classify(d, lo, hi).region) {
            case RopeRegion::Lose: ++res.n_lose; break;
            case RopeRegion::Draw: ++res.n_draw; break;
            case RopeRegion::Win: ++res.n_win; break;
        }
    }

    const double third = prior_weight / 3.0;
    const double a_lose = res.n_lose + third;
    const double a_draw = res.n_draw + third + 1.0;  // draw pseudo-observation
    const double a_win = res.n_win + third;

    Rng rng(derive_seed(seed, "sign_test"));
    int wins = 0;
    int losses = 0;
    for (int s = 0; s < mc_samples; ++s) {
        const double gl = rng.gamma(a_lose);
        const double gd = rng.gamma(a_draw);
        const double gw = rng.gamma(a_win);
        if (gw > gl && gw > gd) {
            ++wins;
        } else if (gl > gw && gl > gd) {
            ++losses;
        }
        // Everything else, ties included, credits draw.
    }
    res.p_win = static_cast<double>(wins) / mc_samples;
    res.p_lose = static_cast<double>(losses) / mc_samples;
    res.p_draw = 1.0 - res.p_win - res.p_lose;
    return res;
}

}  // namespace autopriv
