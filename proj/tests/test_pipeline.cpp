#include "autopriv/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "autopriv/csv.hpp"
#include "autopriv/linkattack.hpp"
#include "autopriv/metafeat.hpp"
#include "autopriv/metamodel.hpp"
#include "autopriv/rng.hpp"
#include "autopriv/synth.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace autopriv;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    f << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

// Small binary table: four continuous predictors, the first carrying the
// class signal. Unique cell values keep every row in the highest-risk set.
std::string tiny_table(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    std::ostringstream os;
    os << std::setprecision(17);
    os << "f1,f2,f3,f4,class\n";
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        os << rng.unit() + y << ',' << rng.unit() << ',' << rng.unit() << ',' << rng.unit()
           << ',' << y << '\n';
    }
    return os.str();
}

std::size_t count_lines(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("config text parses with defaults, comments and loose whitespace") {
    const PipelineConfig def = parse_pipeline_config("", "cfg");
    CHECK(def.corpus_dir.empty());
    CHECK(def.out_dir.empty());
    CHECK(def.master_seed == 0);
    CHECK(def.qi_count == 3);
    CHECK(def.qi_fraction == doctest::Approx(0.4));
    CHECK(def.optimizer == "sh");
    CHECK(def.link_k == 10);
    CHECK(def.holdout_fraction == doctest::Approx(0.2));
    CHECK(def.n_targets == 0);
    CHECK(def.top_n == 20);
    CHECK(def.worker_count == 0);

    const PipelineConfig cfg = parse_pipeline_config(
        "# run settings\n"
        "corpus_dir = data/corpus   # trailing comment\n"
        "out_dir=results\n"
        "  master_seed =  42\n"
        "\n"
        "qi_count = 5\n"
        "qi_fraction = 0.25\n"
        "optimizer = hyperband\n"
        "link_k = 7\n"
        "holdout_fraction = 0.3\n"
        "n_targets = 123\n"
        "top_n = 9\n"
        "worker_count = 3\n",
        "cfg");
    CHECK(cfg.corpus_dir == fs::path("data/corpus"));
    CHECK(cfg.out_dir == fs::path("results"));
    CHECK(cfg.master_seed == 42);
    CHECK(cfg.qi_count == 5);
    CHECK(cfg.qi_fraction == doctest::Approx(0.25));
    CHECK(cfg.optimizer == "hyperband");
    CHECK(cfg.link_k == 7);
    CHECK(cfg.holdout_fraction == doctest::Approx(0.3));
    CHECK(cfg.n_targets == 123);
    CHECK(cfg.top_n == 9);
    CHECK(cfg.worker_count == 3);
}

TEST_CASE("config parse errors carry origin and line number") {
    CHECK_THROWS_WITH_AS(parse_pipeline_config("corpus_dir data\n", "cfg"),
                         "cfg:1: expected 'key = value', got 'corpus_dir data'", Error);
    CHECK_THROWS_WITH_AS(parse_pipeline_config("\nnope = 1\n", "cfg"),
                         "cfg:2: unknown config key 'nope'", Error);
    CHECK_THROWS_AS(parse_pipeline_config("master_seed = abc\n", "cfg"), Error);
    CHECK_THROWS_AS(load_pipeline_config(fs::temp_directory_path() / "no_such.conf"), Error);
}

TEST_CASE("config validation rejects each out-of-range field") {
    PipelineConfig base;
    base.corpus_dir = "c";
    base.out_dir = "o";
    CHECK_NOTHROW(validate_config(base));

    auto broken = [&base](auto mutate) {
        PipelineConfig c = base;
        mutate(c);
        return c;
    };
    CHECK_THROWS_WITH_AS(
        validate_config(broken([](PipelineConfig& c) { c.corpus_dir.clear(); })),
        "config: corpus_dir is required", Error);
    CHECK_THROWS_WITH_AS(validate_config(broken([](PipelineConfig& c) { c.out_dir.clear(); })),
                         "config: out_dir is required", Error);
    CHECK_THROWS_WITH_AS(validate_config(broken([](PipelineConfig& c) { c.qi_count = 0; })),
                         "config: qi_count must be >= 1", Error);
    CHECK_THROWS_WITH_AS(validate_config(broken([](PipelineConfig& c) { c.qi_fraction = 0.0; })),
                         "config: qi_fraction must be in (0, 1]", Error);
    CHECK_THROWS_WITH_AS(validate_config(broken([](PipelineConfig& c) { c.qi_fraction = 1.5; })),
                         "config: qi_fraction must be in (0, 1]", Error);
    CHECK_THROWS_WITH_AS(validate_config(broken([](PipelineConfig& c) { c.optimizer = "bo"; })),
                         "config: optimizer 'bo' is reserved and not implemented; "
                         "use grid, random, sh, hyperband or oracle",
                         Error);
    CHECK_THROWS_WITH_AS(validate_config(broken([](PipelineConfig& c) { c.optimizer = "sgd"; })),
                         "config: unknown optimizer 'sgd'; use grid, random, sh, hyperband or "
                         "oracle",
                         Error);
    CHECK_THROWS_WITH_AS(validate_config(broken([](PipelineConfig& c) { c.link_k = 0; })),
                         "config: link_k must be >= 1", Error);
    CHECK_THROWS_WITH_AS(
        validate_config(broken([](PipelineConfig& c) { c.holdout_fraction = 0.0; })),
        "config: holdout_fraction must be in (0, 1)", Error);
    CHECK_THROWS_WITH_AS(
        validate_config(broken([](PipelineConfig& c) { c.holdout_fraction = 1.0; })),
        "config: holdout_fraction must be in (0, 1)", Error);
    CHECK_THROWS_WITH_AS(validate_config(broken([](PipelineConfig& c) { c.top_n = -1; })),
                         "config: top_n must be >= 0", Error);
    CHECK_THROWS_WITH_AS(validate_config(broken([](PipelineConfig& c) { c.worker_count = -1; })),
                         "config: worker_count must be >= 0", Error);
}

TEST_CASE("unit seeds repeat exactly and react to every argument") {
    const std::uint64_t s = unit_seed(7, "protect", "alpha", 1, 44);
    CHECK(s == unit_seed(7, "protect", "alpha", 1, 44));

    std::set<std::uint64_t> seen{s};
    CHECK(seen.insert(unit_seed(8, "protect", "alpha", 1, 44)).second);
    CHECK(seen.insert(unit_seed(7, "evaluate", "alpha", 1, 44)).second);
    CHECK(seen.insert(unit_seed(7, "protect", "beta", 1, 44)).second);
    CHECK(seen.insert(unit_seed(7, "protect", "alpha", 2, 44)).second);
    CHECK(seen.insert(unit_seed(7, "protect", "alpha", 1, 45)).second);
    // Baseline sentinels (-1) must not collide with real ids.
    CHECK(seen.insert(unit_seed(7, "protect", "alpha", -1, -1)).second);
    CHECK(seen.insert(unit_seed(7, "protect", "alpha", 0, 0)).second);
}

TEST_CASE("content hash is the fnv1a of the raw bytes") {
    const fs::path p = fs::temp_directory_path() / "pl_hash.bin";
    write_file(p, "abc");
    std::ostringstream expect;
    expect << std::hex << std::setfill('0') << std::setw(16) << fnv1a64("abc");
    CHECK(content_hash(p) == expect.str());

    write_file(p, "abd");
    CHECK(content_hash(p) != expect.str());
    CHECK_THROWS_AS((void)content_hash(fs::temp_directory_path() / "pl_hash_missing.bin"),
                    Error);
}

TEST_CASE("parallel_for visits every index once under any worker count") {
    for (int workers : {0, 1, 3, 16}) {
        std::vector<int> hits(257, 0);
        parallel_for(hits.size(), workers, [&hits](std::size_t i) { hits[i] += 1; });
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
    // n == 0 is a no-op; exceptions surface both on the inline and pooled path.
    parallel_for(0, 4, [](std::size_t) { throw Error("never reached"); });
    CHECK_THROWS_AS(parallel_for(8, 1,
                                 [](std::size_t i) {
                                     if (i == 5) throw Error("boom");
                                 }),
                    Error);
    CHECK_THROWS_AS(parallel_for(8, 4,
                                 [](std::size_t i) {
                                     if (i == 5) throw Error("boom");
                                 }),
                    Error);
}

TEST_CASE("run manifest survives a save/load round trip and upserts in place") {
    RunManifest m;
    PhaseRecord a;
    a.phase = "protect";
    a.status = "ok";
    a.seed = 11;
    a.seconds = 1.5;
    a.input_hashes["alpha.csv"] = "0123456789abcdef";
    a.produced.push_back(ProducedFile{"variants/alpha/0/44.csv", "fedcba9876543210"});
    a.produced.push_back(ProducedFile{"failures.csv", "00000000000000ff"});
    PhaseRecord b;
    b.phase = "evaluate";
    b.status = "ok";
    b.seed = 11;
    b.seconds = 20.0;
    m.upsert(a);
    m.upsert(b);

    const fs::path p = fs::temp_directory_path() / "pl_manifest.json";
    save_manifest(m, p);
    const RunManifest back = load_manifest(p);
    REQUIRE(back.phases.size() == 2);
    CHECK(back.phases[0].phase == "protect");
    CHECK(back.phases[0].status == "ok");
    CHECK(back.phases[0].seed == 11);
    CHECK(back.phases[0].seconds == doctest::Approx(1.5));
    CHECK(back.phases[0].input_hashes.at("alpha.csv") == "0123456789abcdef");
    REQUIRE(back.phases[0].produced.size() == 2);
    CHECK(back.phases[0].produced[0].path == "variants/alpha/0/44.csv");
    CHECK(back.phases[0].produced[0].hash == "fedcba9876543210");
    CHECK(back.find("evaluate") != nullptr);
    CHECK(back.find("attack") == nullptr);

    // Re-running a phase replaces its record without reordering.
    PhaseRecord a2 = a;
    a2.seconds = 9.0;
    RunManifest m2 = back;
    m2.upsert(a2);
    REQUIRE(m2.phases.size() == 2);
    CHECK(m2.phases[0].phase == "protect");
    CHECK(m2.phases[0].seconds == doctest::Approx(9.0));

    write_file(p, "not json");
    CHECK_THROWS_AS(load_manifest(p), Error);
}

TEST_CASE("evaluation and linkability tables round-trip through csv") {
    const fs::path ep = fs::temp_directory_path() / "pl_evals.csv";
    write_file(ep,
               "dataset,qi_id,config_id,spec_id,fold_scores,cv_auc_mean,cv_auc_sd,test_auc,"
               "fit_seconds\n"
               "alpha,-1,-1,12,0.5;0.75;0.625,0.625,0.125,0.7,1.5\n"
               "alpha,0,44,3,0.9,0.9,0,0.8,0.25\n");
    const std::vector<EvalRow> evals = load_evaluations(ep);
    REQUIRE(evals.size() == 2);
    CHECK(evals[0].dataset == "alpha");
    CHECK(evals[0].qi_id == -1);
    CHECK(evals[0].config_id == -1);
    CHECK(evals[0].spec_id == 12);
    REQUIRE(evals[0].fold_scores.size() == 3);
    CHECK(evals[0].fold_scores[1] == doctest::Approx(0.75));
    CHECK(evals[0].cv_auc_mean == doctest::Approx(0.625));
    CHECK(evals[0].cv_auc_sd == doctest::Approx(0.125));
    CHECK(evals[0].test_auc == doctest::Approx(0.7));
    CHECK(evals[0].fit_seconds == doctest::Approx(1.5));
    CHECK(evals[1].qi_id == 0);
    CHECK(evals[1].config_id == 44);
    CHECK(evals[1].fold_scores.size() == 1);

    write_file(ep, "dataset,qi_id,config_id,spec,fold_scores,cv_auc_mean,cv_auc_sd,test_auc,"
                   "fit_seconds\n");
    CHECK_THROWS_WITH_AS((void)load_evaluations(ep),
                         (ep.string() + ": header does not match the evaluations schema").c_str(),
                         Error);

    const fs::path lp = fs::temp_directory_path() / "pl_links.csv";
    write_file(lp, "dataset,qi_id,config_id,n_targets,k,naive_rate,control_rate,adjusted_risk\n"
                   "alpha,0,44,100,10,0.2,0.05,0.15789\n");
    const std::vector<LinkRow> links = load_link_rows(lp);
    REQUIRE(links.size() == 1);
    CHECK(links[0].dataset == "alpha");
    CHECK(links[0].qi_id == 0);
    CHECK(links[0].config_id == 44);
    CHECK(links[0].n_targets == 100);
    CHECK(links[0].k == 10);
    CHECK(links[0].naive_rate == doctest::Approx(0.2));
    CHECK(links[0].control_rate == doctest::Approx(0.05));
    CHECK(links[0].adjusted_risk == doctest::Approx(0.15789));

    write_file(lp, "dataset,qi_id,config_id,n_targets,k,naive,control_rate,adjusted_risk\n");
    CHECK_THROWS_WITH_AS((void)load_link_rows(lp),
                         (lp.string() + ": header does not match the linkability schema").c_str(),
                         Error);
}

TEST_CASE("comparing an evaluation table with itself lands in the rope") {
    const fs::path p = fs::temp_directory_path() / "pl_cmp.csv";
    std::string text =
        "dataset,qi_id,config_id,spec_id,fold_scores,cv_auc_mean,cv_auc_sd,test_auc,"
        "fit_seconds\n";
    for (int i = 0; i < 6; ++i) {
        text += "d" + std::to_string(i) + ",0,44,1,0.5,0.5,0,0." + std::to_string(6 + i % 3) +
                ",1\n";
    }
    write_file(p, text);
    const CompareReport rep = compare_evaluations(p, p);
    CHECK(rep.n_pairs == 6);
    CHECK(rep.test.p_draw > 0.9);
    CHECK(rep.test.p_win + rep.test.p_lose + rep.test.p_draw == doctest::Approx(1.0));

    const fs::path q = fs::temp_directory_path() / "pl_cmp_other.csv";
    write_file(q,
               "dataset,qi_id,config_id,spec_id,fold_scores,cv_auc_mean,cv_auc_sd,test_auc,"
               "fit_seconds\n"
               "elsewhere,0,44,1,0.5,0.5,0,0.6,1\n");
    CHECK_THROWS_WITH(compare_evaluations(p, q), doctest::Contains("no common"));
}

TEST_CASE("phases demand their upstream artifacts") {
    const fs::path corpus = fresh_dir("pl_err_corpus");
    write_file(corpus / "solo.csv", tiny_table(3, 16));
    PipelineConfig cfg;
    cfg.corpus_dir = corpus;
    cfg.out_dir = fresh_dir("pl_err_out");

    CHECK_THROWS_WITH((void)run_evaluate(cfg), doctest::Contains("run the protect phase first"));
    CHECK_THROWS_WITH((void)run_attack(cfg), doctest::Contains("run the protect phase first"));
    CHECK_THROWS_WITH((void)build_metadataset(cfg),
                      doctest::Contains("run the evaluate phase first"));
    CHECK_THROWS_WITH((void)run_meta_fit(cfg), doctest::Contains("run the meta-build phase first"));
    CHECK_THROWS_WITH((void)cmd_recommend(cfg, corpus / "solo.csv", "class"),
                      doctest::Contains("neither persisted meta-models nor meta.csv"));

    PipelineConfig bad = cfg;
    bad.corpus_dir = corpus / "solo.csv";  // a file, not a directory
    CHECK_THROWS_WITH((void)run_protect(bad), doctest::Contains("is not a directory"));
    bad.corpus_dir = fresh_dir("pl_err_empty");
    CHECK_THROWS_WITH((void)run_protect(bad), doctest::Contains("no csv datasets"));
}

TEST_CASE("phases chain end to end on a small corpus") {
    const fs::path corpus = fresh_dir("pl_corpus");
    write_file(corpus / "left.csv", tiny_table(11, 56));
    write_file(corpus / "right.csv", tiny_table(22, 56));
    const fs::path out = fresh_dir("pl_out");

    PipelineConfig cfg;
    cfg.corpus_dir = corpus;
    cfg.out_dir = out;
    cfg.master_seed = 9;
    cfg.qi_count = 1;
    cfg.qi_fraction = 0.5;
    cfg.optimizer = "sh";
    cfg.link_k = 3;
    cfg.holdout_fraction = 0.25;
    cfg.n_targets = 30;
    cfg.top_n = 10;
    cfg.worker_count = 2;

    // --- protection ---
    const PhaseRecord prot = run_protect(cfg);
    CHECK(prot.phase == "protect");
    CHECK(prot.status == "ok");
    CHECK(prot.input_hashes.count("left.csv") == 1);
    CHECK(prot.input_hashes.count("right.csv") == 1);

    const csv::Table train_tab = csv::read_file(out / "splits" / "left_train.csv");
    const csv::Table hold_tab = csv::read_file(out / "splits" / "left_holdout.csv");
    CHECK(train_tab.rows.size() == 42);  // 56 rows, 25% stratified holdout
    CHECK(hold_tab.rows.size() == 14);

    const auto profile = nlohmann::json::parse(slurp(out / "profiles" / "left.json"));
    REQUIRE(profile.is_array());
    REQUIRE(profile.size() == 1);  // qi_count = 1
    CHECK(profile[0]["n"] == 42);
    CHECK(profile[0]["qi_set"]["columns"].size() == 2);  // half of four predictors
    // Continuous uniform cells are pairwise distinct, so every row is unique.
    CHECK(profile[0]["highest_risk_count"] == 42);
    CHECK(profile[0]["highest_risk_fraction"] == doctest::Approx(1.0));
    CHECK(profile[0]["k_histogram"] == nlohmann::json({{"1", 42}}));

    for (const char* ds : {"left", "right"}) {
        std::set<int> ids;
        for (const auto& e : fs::directory_iterator(out / "variants" / ds / "0")) {
            if (e.path().extension() == ".csv") ids.insert(std::stoi(e.path().stem().string()));
        }
        CHECK(ids.size() == 45);  // one variant per generated-technique config
        CHECK(*ids.begin() == 44);
        CHECK(*ids.rbegin() == 88);
    }
    // 44 external import slots per (dataset, qi) pair, plus the header.
    CHECK(count_lines(slurp(out / "import_slots.csv")) == 2 * 44 + 1);
    CHECK(count_lines(slurp(out / "failures.csv")) == 1);

    // Produced-file hashes in the manifest must match the bytes on disk.
    const RunManifest m1 = load_manifest(out / "manifest.json");
    const PhaseRecord* pr = m1.find("protect");
    REQUIRE(pr != nullptr);
    REQUIRE(!pr->produced.empty());
    for (std::size_t i = 0; i < std::min<std::size_t>(5, pr->produced.size()); ++i) {
        CHECK(content_hash(out / pr->produced[i].path) == pr->produced[i].hash);
    }

    // Re-running the phase reproduces the variants byte for byte.
    const std::string v44 = slurp(out / "variants" / "left" / "0" / "44.csv");
    const std::string v88 = slurp(out / "variants" / "right" / "0" / "88.csv");
    run_protect(cfg);
    CHECK(slurp(out / "variants" / "left" / "0" / "44.csv") == v44);
    CHECK(slurp(out / "variants" / "right" / "0" / "88.csv") == v88);
    CHECK(load_manifest(out / "manifest.json").phases.size() == 1);

    // --- model search over baselines and variants ---
    const PhaseRecord ev = run_evaluate(cfg);
    CHECK(ev.status == "ok");
    const std::vector<EvalRow> evals = load_evaluations(out / "evaluations.csv");
    REQUIRE(evals.size() == 2 * (1 + 45));  // per dataset: baseline + variants
    std::size_t baselines = 0;
    for (const auto& r : evals) {
        if (r.qi_id == -1) {
            ++baselines;
            CHECK(r.config_id == -1);
        }
        CHECK(r.spec_id >= 0);
        CHECK(r.spec_id < 60);
        CHECK(r.test_auc >= 0.0);
        CHECK(r.test_auc <= 1.0);
        REQUIRE(!r.fold_scores.empty());
        double mean = 0.0;
        for (double s : r.fold_scores) mean += s;
        mean /= static_cast<double>(r.fold_scores.size());
        CHECK(r.cv_auc_mean == doctest::Approx(mean).epsilon(1e-9));
    }
    CHECK(baselines == 2);
    CHECK(std::is_sorted(evals.begin(), evals.end(), [](const EvalRow& a, const EvalRow& b) {
        return std::tie(a.dataset, a.qi_id, a.config_id) <
               std::tie(b.dataset, b.qi_id, b.config_id);
    }));

    std::size_t ledgers = 0;
    for (const auto& e : fs::directory_iterator(out / "ledgers")) {
        if (e.path().extension() == ".csv") ++ledgers;
    }
    CHECK(ledgers == evals.size());
    // Halving schedule as seen through the persisted ledger: 60/20/7/3 specs.
    const csv::Table led = csv::read_file(out / "ledgers" / "left_baseline.csv");
    CHECK(led.rows.size() == 60 + 20 + 7 + 3);
    std::map<std::string, int> per_round;
    for (const auto& r : led.rows) per_round[r[3]] += 1;
    CHECK(per_round == std::map<std::string, int>{{"0", 60}, {"1", 20}, {"2", 7}, {"3", 3}});

    // --- linkage attack ---
    const PhaseRecord at = run_attack(cfg);
    CHECK(at.status == "ok");
    const std::vector<LinkRow> links = load_link_rows(out / "linkability.csv");
    REQUIRE(links.size() == 2 * 45);
    for (const auto& l : links) {
        CHECK(l.n_targets == 30);
        CHECK(l.k == 3);
        CHECK(l.naive_rate >= 0.0);
        CHECK(l.naive_rate <= 1.0);
        CHECK(l.control_rate >= 0.0);
        CHECK(l.control_rate <= 1.0);
        CHECK(l.adjusted_risk ==
              doctest::Approx(adjusted_linkability(l.naive_rate, l.control_rate)));
    }
    CHECK(nlohmann::json::parse(slurp(out / "attack_report.json")).size() == links.size());

    // --- meta-dataset assembly ---
    const PhaseRecord mb = build_metadataset(cfg);
    CHECK(mb.status == "ok");
    const std::string meta_bytes = slurp(out / "meta.csv");
    build_metadataset(cfg);
    CHECK(slurp(out / "meta.csv") == meta_bytes);  // rerun is byte-identical
    CHECK(count_lines(slurp(out / "meta_excluded.csv")) == 1);

    const std::vector<MetaRow> meta = load_meta_dataset(out / "meta.csv");
    REQUIRE(meta.size() == links.size());
    for (const auto& row : meta) {
        CHECK(row.features.size() == kMetaFeatureCount + kConfigEncodingCount);
        const auto ev_it =
            std::find_if(evals.begin(), evals.end(), [&row](const EvalRow& e) {
                return e.dataset == row.dataset && e.qi_id == row.qi_id &&
                       e.config_id == row.config_id;
            });
        const auto ln_it =
            std::find_if(links.begin(), links.end(), [&row](const LinkRow& l) {
                return l.dataset == row.dataset && l.qi_id == row.qi_id &&
                       l.config_id == row.config_id;
            });
        REQUIRE(ev_it != evals.end());
        REQUIRE(ln_it != links.end());
        CHECK(row.y_perf == doctest::Approx(ev_it->cv_auc_mean).epsilon(1e-12));
        CHECK(row.y_link == doctest::Approx(ln_it->adjusted_risk).epsilon(1e-12));
    }

    // --- meta-model fit and recommendation ---
    const PhaseRecord mf = run_meta_fit(cfg);
    CHECK(mf.status == "ok");
    CHECK(load_meta_model(out / "models" / "meta_perf.json").trained());
    CHECK(load_meta_model(out / "models" / "meta_link.json").trained());
    const RunManifest all = load_manifest(out / "manifest.json");
    for (const char* ph : {"protect", "evaluate", "attack", "meta-build", "meta-fit"}) {
        const PhaseRecord* rec = all.find(ph);
        REQUIRE(rec != nullptr);
        CHECK(rec->status == "ok");
    }

    const fs::path probe = fs::temp_directory_path() / "pl_probe.csv";
    write_file(probe, tiny_table(33, 40));
    const Recommendation rec = cmd_recommend(cfg, probe, "class");
    REQUIRE(rec.size() == 10);  // top_n
    for (std::size_t i = 0; i < rec.size(); ++i) {
        // Only configurations the meta-models saw may be recommended; every
        // trained variant here came from the generated-technique block.
        CHECK(rec[i].config.config_id >= 44);
        CHECK(rec[i].config.config_id <= 88);
        CHECK(rec[i].config.technique == Technique::PrivateSMOTE);
        if (i > 0) CHECK(rec[i - 1].avg_rank >= rec[i].avg_rank);
    }
    const auto saved = nlohmann::json::parse(slurp(out / "recommendations" / "pl_probe.json"));
    CHECK(saved["entries"].size() == rec.size());
    CHECK(saved["top_n"] == 10);

    const std::string table = format_recommendation(rec);
    CHECK(count_lines(table) == rec.size() + 1);
    CHECK(table.find("technique") != std::string::npos);

    // Tampered meta rows must not be rankable against the canonical grid.
    const fs::path out_bad = fresh_dir("pl_out_bad");
    std::string tampered = meta_bytes;
    const std::size_t at_pos = tampered.find(",44,");
    REQUIRE(at_pos != std::string::npos);
    tampered.replace(at_pos, 4, ",444,");
    write_file(out_bad / "meta.csv", tampered);
    PipelineConfig bad = cfg;
    bad.out_dir = out_bad;
    CHECK_THROWS_WITH((void)cmd_recommend(bad, probe, "class"),
                      doctest::Contains("outside the canonical grid"));

    // --- comparison of two runs (here: a run against itself) ---
    const CompareReport same = compare_evaluations(out / "evaluations.csv",
                                                   out / "evaluations.csv");
    CHECK(same.n_pairs == evals.size());
    CHECK(same.test.p_draw > 0.9);
}
