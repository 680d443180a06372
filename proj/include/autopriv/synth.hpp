#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "autopriv/riskprofile.hpp"
#include "autopriv/tabular.hpp"

namespace autopriv {

enum class Technique { CopulaGAN, TVAE, CTGAN, DPGAN, PATEGAN, PrivateSMOTE };

const char* technique_name(Technique t);
Technique technique_from_name(const std::string& name);

// One point of the privacy-configuration grid. Param keys depend on the
// technique: the three plain generative models carry {epochs, batch_size},
// the differentially private ones add epsilon, and PrivateSMOTE carries
// {N, knn, epsilon}.
struct PrivacyConfig {
    Technique technique = Technique::PrivateSMOTE;
    std::map<std::string, double> params;
    int config_id = -1;

    double param(const std::string& key) const;
    std::string label() const;  // e.g. "PrivateSMOTE N=1 knn=3 epsilon=0.5"
};

// The canonical 89-point grid: techniques in fixed order, parameter values
// in lexicographic order (last key varies fastest). config_id is the
// position in this list.
std::vector<PrivacyConfig> enumerate_config_grid();
const std::vector<PrivacyConfig>& config_grid();  // cached copy of the above

// Position of (technique, params) in the canonical grid, or -1.
int find_config_id(Technique technique, const std::map<std::string, double>& params);

// A protected dataset plus the provenance needed to reproduce or audit it.
struct ProtectedVariant {
    Dataset data;
    std::string source;
    QISet qi_set;
    PrivacyConfig config;
    std::size_t replaced = 0;
    std::size_t synthesized = 0;
    std::uint64_t seed = 0;
};

// Interpolation-based synthesis of the highest-risk records: each such row t
// yields N replicas built from t and a uniformly chosen neighbor u among t's
// knn nearest same-class highest-risk rows (Gower distance on predictors).
// Numeric cells interpolate between t and u and receive Laplace noise of
// scale (partition range)/epsilon, clamped to the source column's observed
// bounds; categorical cells take t's or u's value with probability 1/2; the
// label is copied from t. With no same-class neighbor, t interpolates with
// itself. Rows that would reproduce a highest-risk source row verbatim are
// redrawn (bounded retries).
std::vector<RowValues> private_smote(const Dataset& ds,
                                     const std::vector<std::size_t>& highrisk,
                                     int n_replicas, int knn, double epsilon,
                                     std::uint64_t seed);

// Test baseline: one replica per highest-risk row, every column sampled
// i.i.d. from that column's empirical marginal over the highest-risk rows.
std::vector<RowValues> marginal_baseline_synth(const Dataset& ds,
                                               const std::vector<std::size_t>& highrisk,
                                               std::uint64_t seed);

// Variant = (source rows minus highest-risk, in source order) followed by
// the synthetic rows. Throws if a removed row survives verbatim among the
// synthetic rows.
ProtectedVariant assemble_variant(const Dataset& ds,
                                  const std::vector<std::size_t>& highrisk,
                                  const std::vector<RowValues>& synthetic,
                                  const QISet& qis, const PrivacyConfig& config,
                                  std::uint64_t seed);

// Ingestion path for variants produced by external generative models: the
// CSV must match the source schema and the declared config must sit on the
// canonical grid.
ProtectedVariant import_external_variant(const std::filesystem::path& csv_path,
                                         const Dataset& source, const QISet& qis,
                                         Technique technique,
                                         const std::map<std::string, double>& params,
                                         std::size_t replaced, std::uint64_t seed);

// Persistence: <root>/<dataset>/<qi_id>/<config_id>.csv plus a JSON sidecar
// carrying {source, qi_set, technique, params, replaced, synthesized, seed}.
std::filesystem::path variant_relpath(const ProtectedVariant& v);
void save_variant(const ProtectedVariant& v, const std::filesystem::path& root);
ProtectedVariant load_variant(const std::filesystem::path& csv_path, const Dataset& source);

}  // namespace autopriv
