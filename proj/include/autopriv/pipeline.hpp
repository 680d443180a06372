#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "autopriv/metamodel.hpp"
#include "autopriv/stats.hpp"
#include "autopriv/synth.hpp"

namespace autopriv {

// Run-wide settings. Loaded from a flat key-value text file (one `key =
// value` per line, '#' comments); every key matches a field name below.
// Corpus datasets are the *.csv files directly under corpus_dir, each with a
// binary "class" target column; everything the run produces lands under
// out_dir.
struct PipelineConfig {
    std::filesystem::path corpus_dir;
    std::filesystem::path out_dir;
    std::uint64_t master_seed = 0;
    int qi_count = 3;
    double qi_fraction = 0.4;
    std::string optimizer = "sh";  // grid | random | sh | hyperband | oracle
    std::size_t link_k = 10;
    double holdout_fraction = 0.2;
    std::size_t n_targets = 0;  // 0: min(500, train rows)
    int top_n = 20;
    int worker_count = 0;  // 0: all hardware threads
};

PipelineConfig parse_pipeline_config(const std::string& text, const std::string& origin);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
void validate_config(const PipelineConfig& cfg);

// 64-bit FNV-1a over the file's raw bytes, as fixed-width hex.
std::string content_hash(const std::filesystem::path& path);

// Per-work-unit seed: a hash of the master seed, the phase name and the
// unit's coordinates, so results never depend on scheduling or worker count.
// Baseline / dataset-level units pass qi_id = -1 and config_id = -1.
std::uint64_t unit_seed(std::uint64_t master_seed, const std::string& phase,
                        const std::string& dataset, int qi_id, int config_id);

// Runs fn(0..n-1) on up to worker_count threads (0 = hardware concurrency).
// fn must write only to its own slot; the first exception is rethrown after
// all workers finish.
void parallel_for(std::size_t n, int worker_count,
                  const std::function<void(std::size_t)>& fn);

struct ProducedFile {
    std::string path;  // relative to out_dir
    std::string hash;
};

struct PhaseRecord {
    std::string phase;
    std::string status;  // "ok" once the phase ran to completion
    std::uint64_t seed = 0;
    double seconds = 0.0;
    std::map<std::string, std::string> input_hashes;
    std::vector<ProducedFile> produced;
};

// Append-or-replace log of completed phases, persisted as manifest.json in
// out_dir. Hashes of produced files are reproducible given identical inputs
// and master_seed; the hash recorded for evaluations.csv is computed with the
// wall-clock column stripped so that invariant survives timing jitter.
struct RunManifest {
    std::vector<PhaseRecord> phases;

    void upsert(PhaseRecord rec);
    const PhaseRecord* find(const std::string& phase) const;
};

void save_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest load_manifest(const std::filesystem::path& path);

// Row of evaluations.csv.
struct EvalRow {
    std::string dataset;
    int qi_id = -1;     // -1 for the original-data baseline
    int config_id = -1; // -1 for the original-data baseline
    int spec_id = -1;
    std::vector<double> fold_scores;
    double cv_auc_mean = 0.0;
    double cv_auc_sd = 0.0;
    double test_auc = 0.0;
    double fit_seconds = 0.0;
};

std::vector<EvalRow> load_evaluations(const std::filesystem::path& path);

// Row of linkability.csv.
struct LinkRow {
    std::string dataset;
    int qi_id = 0;
    int config_id = 0;
    std::size_t n_targets = 0;
    std::size_t k = 0;
    double naive_rate = 0.0;
    double control_rate = 0.0;
    double adjusted_risk = 0.0;
};

std::vector<LinkRow> load_link_rows(const std::filesystem::path& path);

// Protection phase: per dataset, splits off the holdout, samples qi_count QI
// sets over the training partition, writes risk profiles, generates the 45
// interpolation-based variants per QI set natively and registers import
// slots for the 44 external generative configs.
PhaseRecord run_protect(const PipelineConfig& cfg);

// Development phase, performance half: runs the configured optimizer over
// the 60-spec learner space on every variant plus each original training
// partition (the pct_diff baselines), writing evaluations.csv and per-unit
// search ledgers.
PhaseRecord run_evaluate(const PipelineConfig& cfg);

// Development phase, privacy half: linkability of every variant with
// k = link_k against the holdout control, writing linkability.csv.
PhaseRecord run_attack(const PipelineConfig& cfg);

// Joins meta-features + config encoding + y_perf + y_link per variant into
// meta.csv; variants missing either measurement are logged to
// meta_excluded.csv instead.
PhaseRecord build_metadataset(const PipelineConfig& cfg);

// Fits the twin ridge models from meta.csv and persists them under models/.
PhaseRecord run_meta_fit(const PipelineConfig& cfg);

// Prediction phase: loads the persisted models (or fits them from meta.csv),
// extracts the new dataset's meta-features, scores every config with
// training support and writes the ranked list to recommendations/.
Recommendation cmd_recommend(const PipelineConfig& cfg,
                             const std::filesystem::path& new_csv,
                             const std::string& target);

// Fixed-width text table of a recommendation (one row per entry).
std::string format_recommendation(const Recommendation& rec);

// Pairs two evaluations.csv files on (dataset, qi_id, config_id) and runs
// the Bayes sign test over the percentage differences of their test AUCs
// (first file relative to the second).
struct CompareReport {
    std::size_t n_pairs = 0;
    SignTestResult test;
};

CompareReport compare_evaluations(const std::filesystem::path& a,
                                  const std::filesystem::path& b, double lo = -1.0,
                                  double hi = 1.0, double prior_weight = 1.0,
                                  int mc_samples = 50000, std::uint64_t seed = 0);

}  // namespace autopriv
