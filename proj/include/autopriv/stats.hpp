#pragma once

#include <cstdint>
#include <vector>

#include "autopriv/tabular.hpp"

namespace autopriv {

enum class RopeRegion { Lose, Draw, Win };

struct RopeVerdict {
    RopeRegion region = RopeRegion::Draw;
    double diff_pct = 0.0;
};

struct SignTestResult {
    double p_lose = 0.0;
    double p_draw = 0.0;
    double p_win = 0.0;
    int n_lose = 0;
    int n_draw = 0;
    int n_win = 0;
    int mc_samples = 0;
    std::uint64_t seed = 0;
};

// Percentage difference of r_a relative to r_b: (r_a - r_b) / r_b * 100.
double pct_diff(double r_a, double r_b);

// Classifies a percentage difference against a region of practical
// equivalence [lo, hi]; boundary values count as Draw.
RopeVerdict rope_classify(double diff_pct, double lo = -1.0, double hi = 1.0);

// Bayesian sign test over paired percentage differences.  Counts each diff
// into lose/draw/win via rope_classify, places a Dirichlet posterior over the
// three region probabilities (symmetric prior of weight prior_weight plus one
// pseudo-observation on draw), and estimates via Monte-Carlo how often each
// region's probability is strictly the largest; exact ties credit draw.
SignTestResult bayes_sign_test(const std::vector<double>& diffs, double lo = -1.0,
                               double hi = 1.0, double prior_weight = 1.0,
                               int mc_samples = 50000, std::uint64_t seed = 0);

}  // namespace autopriv
