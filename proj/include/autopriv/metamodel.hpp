#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "autopriv/metafeat.hpp"
#include "autopriv/synth.hpp"

namespace autopriv {

enum class MetaTarget { Performance, Linkability };

const char* meta_target_name(MetaTarget t);
MetaTarget meta_target_from_name(const std::string& name);

// One observation of the meta-dataset: a protected variant's 34-wide feature
// block (23 dataset meta-features + 11 config encoding slots) and the two
// measured outcomes.
struct MetaRow {
    std::string dataset;
    int qi_id = 0;
    int config_id = 0;
    std::vector<double> features;  // length 34
    double y_perf = 0.0;           // best cv AUC found by the search
    double y_link = 0.0;           // adjusted linkability risk
};

// Linear least squares on standardized features with a small ridge term
// (keeps underdetermined fits finite). coefficients empty = untrained.
struct MetaModel {
    MetaTarget target = MetaTarget::Performance;
    double intercept = 0.0;
    std::vector<double> coefficients;
    std::vector<double> feature_means;
    std::vector<double> feature_sds;
    double ridge_lambda = 0.0;

    bool trained() const { return !coefficients.empty(); }
};

MetaModel fit_meta(const std::vector<MetaRow>& rows, MetaTarget target,
                   double ridge_lambda = 1e-8);

// Raw (unclipped) linear predictions, one per feature row.
std::vector<double> predict_meta(const MetaModel& model,
                                 const std::vector<std::vector<double>>& feature_rows);

struct RecommendationEntry {
    PrivacyConfig config;
    double pred_perf = 0.0;
    double pred_link = 0.0;
    double avg_rank = 0.0;
};
using Recommendation = std::vector<RecommendationEntry>;

// Fractional ranks, ascending: the smallest value gets rank 1 and ties share
// the average of the ranks they span.
std::vector<double> fractional_ranks(const std::vector<double>& values);

// Rank-and-sort core: performance ranked ascending by pred_perf (best AUC
// gets the top rank), privacy ranked ascending by -pred_link (lowest risk
// gets the top rank), avg_rank = mean of the two; sorted by avg_rank
// descending, ties by pred_perf descending then config_id ascending;
// truncated to top_n (0 = keep all).
Recommendation rank_configs(const std::vector<PrivacyConfig>& pool,
                            const std::vector<double>& pred_perf,
                            const std::vector<double>& pred_link, std::size_t top_n);

// Prediction-phase entry point: extracts the new dataset's meta-features
// once, crosses them with every canonical config, predicts both targets and
// ranks. The seed feeds only the meta-feature landmarkers.
Recommendation recommend(const Dataset& new_ds, const MetaModel& model_perf,
                         const MetaModel& model_link, std::size_t top_n, std::uint64_t seed);

// Same, but over a caller-chosen config pool (e.g. only configs the models
// were trained on).
Recommendation recommend_from_pool(const MetaFeatureVector& mf,
                                   const std::vector<PrivacyConfig>& pool,
                                   const MetaModel& model_perf, const MetaModel& model_link,
                                   std::size_t top_n);

// JSON persistence; loading validates the meta-feature version tag.
void save_meta_model(const MetaModel& model, const std::filesystem::path& path);
MetaModel load_meta_model(const std::filesystem::path& path);

// meta.csv: dataset, qi_id, config_id, the 34 named feature columns, y_perf,
// y_link. Loading validates the header verbatim.
void write_meta_dataset(const std::vector<MetaRow>& rows, const std::filesystem::path& path);
std::vector<MetaRow> load_meta_dataset(const std::filesystem::path& path);

}  // namespace autopriv
