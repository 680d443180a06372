#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "autopriv/synth.hpp"
#include "autopriv/tabular.hpp"

namespace autopriv {

// Version tag persisted with every meta-dataset; bump when the feature list
// or any definition changes.
inline constexpr const char* kMetaFeatureVersion = "mf-v1";

inline constexpr std::size_t kMetaFeatureCount = 23;
inline constexpr std::size_t kConfigEncodingCount = 11;

// Names in canonical order; the persisted meta-dataset header uses them.
const std::vector<std::string>& meta_feature_names();
const std::vector<std::string>& config_encoding_names();

// 23 reals describing a dataset: size/shape counts, moment summaries of the
// min-max-normalized numeric predictors, pairwise absolute correlations,
// entropies in bits (10 equal-width bins for numerics), and two landmarker
// AUCs. Undefined statistics are imputed to 0, so every value is finite.
struct MetaFeatureVector {
    std::vector<double> values;  // length kMetaFeatureCount

    double at(const std::string& name) const;
};

// 11 reals encoding one privacy configuration: a six-slot one-hot over the
// techniques (canonical order) followed by epochs, batch_size, epsilon, N,
// knn, with 0 for parameters the technique does not use.
struct ConfigEncoding {
    std::vector<double> values;  // length kConfigEncodingCount
};

// Deterministic per seed; the seed only feeds the landmarkers' internal
// 70/30 split, which samples by row-content hash so the result is invariant
// under row permutation.
MetaFeatureVector extract(const Dataset& ds, std::uint64_t seed);

ConfigEncoding encode_config(const PrivacyConfig& config);

}  // namespace autopriv
