#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "autopriv/tabular.hpp"

namespace autopriv {

enum class Algorithm { BoostClassic, BoostNewton, SGDLinear, MLP };

const char* algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

// One learner + hyperparameter combination. The MLP's hidden size is
// symbolic (a multiplier of the predictor count p, resolved at fit time), so
// a spec is dataset-independent.
struct LearnerSpec {
    Algorithm algorithm = Algorithm::BoostClassic;
    std::map<std::string, double> hyperparams;
    int spec_id = -1;

    double param(const std::string& key) const;
    std::string label() const;
};

// Canonical 60-spec space: 18 + 18 boosting, 12 linear SGD, 12 MLP, in a
// fixed enumeration order (last hyperparameter varies fastest).
std::vector<LearnerSpec> enumerate_learner_space();

struct EvalResult {
    std::vector<double> fold_scores;
    double cv_auc_mean = 0.0;
    double cv_auc_sd = 0.0;
    double test_auc = 0.0;
    double fit_seconds = 0.0;
    double resource_fraction = 1.0;
};

// Mann-Whitney AUC: (#(pos>neg) + 0.5*#(pos=neg)) / (n_pos*n_neg).
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Opaque fitted scorer; immutable and cheap to copy.
class Model {
public:
    std::vector<double> scores(const Dataset& rows) const;
    // Trees actually built (0 for non-boosting models); exposed so early
    // stopping behavior is observable.
    std::size_t boosting_rounds() const;

    struct Impl;
    explicit Model(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<const Impl> impl_;
};

// Categorical predictors are one-hot encoded internally; numerics are
// standardized for SGDLinear/MLP. `valid`, when given, drives boosting
// early stopping (stop after 10 rounds without validation-AUC improvement);
// SGD/MLP stop on stalled training loss instead.
Model fit(const LearnerSpec& spec, const Dataset& train, const Dataset* valid,
          std::uint64_t seed);

std::vector<double> predict_scores(const Model& model, const Dataset& rows);

// Repeated stratified k-fold CV. resource_fraction < 1 subsamples each
// fold's training side (stratified) before fitting; scores are AUC on the
// held-out fold. test_auc is left 0 (callers with a holdout fill it in).
EvalResult cross_validate(const Dataset& ds, const LearnerSpec& spec, int folds,
                          int repeats, std::uint64_t seed,
                          double resource_fraction = 1.0);

// Fits on all of `train` (with the boosting validation carve) and returns
// AUC on `test`.
double holdout_test_auc(const LearnerSpec& spec, const Dataset& train,
                        const Dataset& test, std::uint64_t seed);

// MLP internals, exposed so the analytic gradient can be checked against
// finite differences.
struct MlpWeights {
    std::size_t in_dim = 0;
    std::size_t hidden = 0;
    std::vector<double> w1;  // hidden x in_dim, row-major
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // hidden
    double b2 = 0.0;
};

// Mean log-loss of a one-hidden-layer logistic network plus
// alpha/(2n) * (|w1|^2 + |w2|^2); writes the analytic gradient into `grad`.
double mlp_loss_and_grad(const MlpWeights& w, const std::vector<std::vector<double>>& x,
                         const std::vector<int>& y, double alpha, MlpWeights& grad);

}  // namespace autopriv
