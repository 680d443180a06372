#include "autopriv/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "autopriv/cash.hpp"
#include "autopriv/csv.hpp"
#include "autopriv/learning.hpp"
#include "autopriv/linkattack.hpp"
#include "autopriv/metafeat.hpp"
#include "autopriv/riskprofile.hpp"
#include "autopriv/rng.hpp"
#include "json.hpp"

namespace autopriv {
namespace fs = std::filesystem;

namespace {

// Sample budget of the `random` strategy; the other strategies derive their
// budgets from the space size.
constexpr int kRandomSearchIters = 20;

// Conventional target column for corpus datasets.
constexpr const char* kCorpusTarget = "class";

double parse_double(const std::string& s, const std::string& ctx) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = b + s.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) {
        throw Error(ctx + ": expected a number, got '" + s + "'");
    }
    return v;
}

long long parse_int(const std::string& s, const std::string& ctx) {
    long long v = 0;
    const char* b = s.data();
    const char* e = b + s.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) {
        throw Error(ctx + ": expected an integer, got '" + s + "'");
    }
    return v;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setfill('0') << std::setw(16) << v;
    return os.str();
}

std::string read_bytes(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f << text;
}

// Hash of evaluations.csv with the trailing wall-clock column dropped, so
// the manifest stays reproducible across reruns.
std::string eval_hash_sans_timing(const fs::path& path) {
    const csv::Table t = csv::read_file(path);
    SeedMixer m;
    auto mix_row = [&m](const std::vector<std::string>& fields, std::size_t keep) {
        for (std::size_t i = 0; i < keep; ++i) m.mix(std::string_view(fields[i]));
    };
    mix_row(t.header, t.header.empty() ? 0 : t.header.size() - 1);
    for (const auto& r : t.rows) mix_row(r, r.empty() ? 0 : r.size() - 1);
    return hex64(m.get());
}

std::string aggregate_hash(const std::vector<ProducedFile>& files) {
    SeedMixer m;
    for (const auto& f : files) {
        m.mix(std::string_view(f.path));
        m.mix(std::string_view(f.hash));
    }
    return hex64(m.get());
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

// ---------------------------------------------------------------------------
// corpus loading and deterministic splits

struct CorpusSet {
    std::string name;
    Dataset train;
    Dataset holdout;
};

std::vector<fs::path> corpus_files(const PipelineConfig& cfg) {
    if (!fs::is_directory(cfg.corpus_dir)) {
        throw Error("corpus_dir '" + cfg.corpus_dir.string() + "' is not a directory");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(cfg.corpus_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw Error("no csv datasets under '" + cfg.corpus_dir.string() + "'");
    }
    return files;
}

std::vector<CorpusSet> load_corpus(const PipelineConfig& cfg) {
    std::vector<CorpusSet> corpus;
    for (const auto& path : corpus_files(cfg)) {
        Dataset full = load_csv(path, kCorpusTarget);
        const Holdout split = holdout_split(
            full, cfg.holdout_fraction,
            unit_seed(cfg.master_seed, "holdout", full.name(), -1, -1));
        Dataset train = full.select_rows(split.train_idx);
        Dataset holdout = full.select_rows(split.test_idx);
        corpus.push_back(CorpusSet{full.name(), std::move(train), std::move(holdout)});
    }
    return corpus;
}

const CorpusSet& corpus_entry(const std::vector<CorpusSet>& corpus, const std::string& name) {
    for (const auto& c : corpus) {
        if (c.name == name) return c;
    }
    throw Error("dataset '" + name + "' is not part of the corpus");
}

// ---------------------------------------------------------------------------
// failure log (shared across phases, one file, phase column)

struct FailureRow {
    std::string phase;
    std::string dataset;
    int qi_id = -1;
    int config_id = -1;
    std::string reason;
};

const char* kFailureHeader = "phase,dataset,qi_id,config_id,reason";

std::vector<FailureRow> load_failures(const fs::path& path) {
    std::vector<FailureRow> rows;
    if (!fs::exists(path)) return rows;
    const csv::Table t = csv::read_file(path);
    for (const auto& r : t.rows) {
        if (r.size() != 5) throw Error(path.string() + ": malformed failure row");
        FailureRow f;
        f.phase = r[0];
        f.dataset = r[1];
        f.qi_id = static_cast<int>(parse_int(r[2], path.string()));
        f.config_id = static_cast<int>(parse_int(r[3], path.string()));
        f.reason = r[4];
        rows.push_back(std::move(f));
    }
    return rows;
}

// Replaces the given phase's rows while leaving other phases' entries alone.
void rewrite_failures(const fs::path& path, const std::string& phase,
                      std::vector<FailureRow> fresh) {
    std::vector<FailureRow> rows = load_failures(path);
    rows.erase(std::remove_if(rows.begin(), rows.end(),
                              [&phase](const FailureRow& r) { return r.phase == phase; }),
               rows.end());
    rows.insert(rows.end(), fresh.begin(), fresh.end());
    std::sort(rows.begin(), rows.end(), [](const FailureRow& a, const FailureRow& b) {
        return std::tie(a.phase, a.dataset, a.qi_id, a.config_id, a.reason) <
               std::tie(b.phase, b.dataset, b.qi_id, b.config_id, b.reason);
    });
    std::string out = std::string(kFailureHeader) + "\n";
    for (const auto& r : rows) {
        out += csv::format_row({r.phase, r.dataset, std::to_string(r.qi_id),
                                std::to_string(r.config_id), r.reason});
        out += "\n";
    }
    write_text(path, out);
}

// ---------------------------------------------------------------------------
// variant discovery

struct VariantRef {
    std::string dataset;
    int qi_id = 0;
    int config_id = 0;
    fs::path csv_path;
};

std::vector<VariantRef> discover_variants(const fs::path& root) {
    std::vector<VariantRef> out;
    if (!fs::is_directory(root)) return out;
    for (const auto& ds_dir : fs::directory_iterator(root)) {
        if (!ds_dir.is_directory()) continue;
        for (const auto& qi_dir : fs::directory_iterator(ds_dir.path())) {
            if (!qi_dir.is_directory()) continue;
            int qi = 0;
            try {
                qi = static_cast<int>(parse_int(qi_dir.path().filename().string(), "qi"));
            } catch (const Error&) {
                continue;
            }
            for (const auto& file : fs::directory_iterator(qi_dir.path())) {
                if (!file.is_regular_file() || file.path().extension() != ".csv") continue;
                int cid = 0;
                try {
                    cid = static_cast<int>(parse_int(file.path().stem().string(), "config"));
                } catch (const Error&) {
                    continue;
                }
                out.push_back(VariantRef{ds_dir.path().filename().string(), qi, cid,
                                         file.path()});
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const VariantRef& a, const VariantRef& b) {
        return std::tie(a.dataset, a.qi_id, a.config_id) <
               std::tie(b.dataset, b.qi_id, b.config_id);
    });
    return out;
}

RunManifest manifest_or_empty(const fs::path& path) {
    if (!fs::exists(path)) return RunManifest{};
    return load_manifest(path);
}

void commit_phase(const PipelineConfig& cfg, PhaseRecord rec) {
    const fs::path path = cfg.out_dir / "manifest.json";
    RunManifest m = manifest_or_empty(path);
    m.upsert(std::move(rec));
    save_manifest(m, path);
}

std::string relpath(const fs::path& p, const fs::path& root) {
    return fs::relative(p, root).generic_string();
}

void add_produced(PhaseRecord& rec, const fs::path& file, const fs::path& root) {
    rec.produced.push_back(ProducedFile{relpath(file, root), content_hash(file)});
}

}  // namespace

// ---------------------------------------------------------------------------
// config

PipelineConfig parse_pipeline_config(const std::string& text, const std::string& origin) {
    PipelineConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        const std::string where = origin + ":" + std::to_string(lineno);
        if (eq == std::string::npos) {
            throw Error(where + ": expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "corpus_dir") {
            cfg.corpus_dir = value;
        } else if (key == "out_dir") {
            cfg.out_dir = value;
        } else if (key == "master_seed") {
            cfg.master_seed = static_cast<std::uint64_t>(parse_int(value, where));
        } else if (key == "qi_count") {
            cfg.qi_count = static_cast<int>(parse_int(value, where));
        } else if (key == "qi_fraction") {
            cfg.qi_fraction = parse_double(value, where);
        } else if (key == "optimizer") {
            cfg.optimizer = value;
        } else if (key == "link_k") {
            cfg.link_k = static_cast<std::size_t>(parse_int(value, where));
        } else if (key == "holdout_fraction") {
            cfg.holdout_fraction = parse_double(value, where);
        } else if (key == "n_targets") {
            cfg.n_targets = static_cast<std::size_t>(parse_int(value, where));
        } else if (key == "top_n") {
            cfg.top_n = static_cast<int>(parse_int(value, where));
        } else if (key == "worker_count") {
            cfg.worker_count = static_cast<int>(parse_int(value, where));
        } else {
            throw Error(where + ": unknown config key '" + key + "'");
        }
    }
    return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    return parse_pipeline_config(read_bytes(path), path.string());
}

void validate_config(const PipelineConfig& cfg) {
    if (cfg.corpus_dir.empty()) throw Error("config: corpus_dir is required");
    if (cfg.out_dir.empty()) throw Error("config: out_dir is required");
    if (cfg.qi_count < 1) throw Error("config: qi_count must be >= 1");
    if (cfg.qi_fraction <= 0.0 || cfg.qi_fraction > 1.0) {
        throw Error("config: qi_fraction must be in (0, 1]");
    }
    if (cfg.optimizer == "bo") {
        throw Error("config: optimizer 'bo' is reserved and not implemented; "
                    "use grid, random, sh, hyperband or oracle");
    }
    if (cfg.optimizer != "grid" && cfg.optimizer != "random" && cfg.optimizer != "sh" &&
        cfg.optimizer != "hyperband" && cfg.optimizer != "oracle") {
        throw Error("config: unknown optimizer '" + cfg.optimizer +
                    "'; use grid, random, sh, hyperband or oracle");
    }
    if (cfg.link_k < 1) throw Error("config: link_k must be >= 1");
    if (cfg.holdout_fraction <= 0.0 || cfg.holdout_fraction >= 1.0) {
        throw Error("config: holdout_fraction must be in (0, 1)");
    }
    if (cfg.top_n < 0) throw Error("config: top_n must be >= 0");
    if (cfg.worker_count < 0) throw Error("config: worker_count must be >= 0");
}

// ---------------------------------------------------------------------------
// hashing, seeds, parallel execution

std::string content_hash(const fs::path& path) {
    return hex64(fnv1a64(read_bytes(path)));
}

std::uint64_t unit_seed(std::uint64_t master_seed, const std::string& phase,
                        const std::string& dataset, int qi_id, int config_id) {
    return derive_seed(master_seed, phase, dataset,
                       static_cast<std::uint64_t>(static_cast<std::int64_t>(qi_id)),
                       static_cast<std::uint64_t>(static_cast<std::int64_t>(config_id)));
}

void parallel_for(std::size_t n, int worker_count, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    std::size_t workers = worker_count > 0 ? static_cast<std::size_t>(worker_count)
                                           : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr first_error;
    auto body = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// manifest

void RunManifest::upsert(PhaseRecord rec) {
    for (auto& p : phases) {
        if (p.phase == rec.phase) {
            p = std::move(rec);
            return;
        }
    }
    phases.push_back(std::move(rec));
}

const PhaseRecord* RunManifest::find(const std::string& phase) const {
    for (const auto& p : phases) {
        if (p.phase == phase) return &p;
    }
    return nullptr;
}

void save_manifest(const RunManifest& manifest, const fs::path& path) {
    nlohmann::json j;
    j["phases"] = nlohmann::json::array();
    for (const auto& p : manifest.phases) {
        nlohmann::json jp;
        jp["phase"] = p.phase;
        jp["status"] = p.status;
        jp["seed"] = p.seed;
        jp["seconds"] = p.seconds;
        jp["input_hashes"] = p.input_hashes;
        jp["produced"] = nlohmann::json::array();
        for (const auto& f : p.produced) {
            jp["produced"].push_back({{"path", f.path}, {"hash", f.hash}});
        }
        j["phases"].push_back(std::move(jp));
    }
    write_text(path, j.dump(2) + "\n");
}

RunManifest load_manifest(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
    RunManifest m;
    for (const auto& jp : j.at("phases")) {
        PhaseRecord p;
        p.phase = jp.at("phase").get<std::string>();
        p.status = jp.at("status").get<std::string>();
        p.seed = jp.at("seed").get<std::uint64_t>();
        p.seconds = jp.at("seconds").get<double>();
        p.input_hashes = jp.at("input_hashes").get<std::map<std::string, std::string>>();
        for (const auto& jf : jp.at("produced")) {
            p.produced.push_back(ProducedFile{jf.at("path").get<std::string>(),
                                              jf.at("hash").get<std::string>()});
        }
        m.phases.push_back(std::move(p));
    }
    return m;
}

// ---------------------------------------------------------------------------
// evaluations.csv / linkability.csv persistence

namespace {

const char* kEvalHeader =
    "dataset,qi_id,config_id,spec_id,fold_scores,cv_auc_mean,cv_auc_sd,test_auc,fit_seconds";

std::string format_eval_row(const EvalRow& r) {
    std::string folds;
    for (std::size_t i = 0; i < r.fold_scores.size(); ++i) {
        if (i) folds += ';';
        folds += csv::format_double(r.fold_scores[i]);
    }
    return csv::format_row({r.dataset, std::to_string(r.qi_id), std::to_string(r.config_id),
                            std::to_string(r.spec_id), folds, csv::format_double(r.cv_auc_mean),
                            csv::format_double(r.cv_auc_sd), csv::format_double(r.test_auc),
                            csv::format_double(r.fit_seconds)});
}

void write_evaluations(const std::vector<EvalRow>& rows, const fs::path& path) {
    std::string out = std::string(kEvalHeader) + "\n";
    for (const auto& r : rows) out += format_eval_row(r) + "\n";
    write_text(path, out);
}

const char* kLinkHeader =
    "dataset,qi_id,config_id,n_targets,k,naive_rate,control_rate,adjusted_risk";

void write_link_rows(const std::vector<LinkRow>& rows, const fs::path& path) {
    std::string out = std::string(kLinkHeader) + "\n";
    for (const auto& r : rows) {
        out += csv::format_row({r.dataset, std::to_string(r.qi_id), std::to_string(r.config_id),
                                std::to_string(r.n_targets), std::to_string(r.k),
                                csv::format_double(r.naive_rate),
                                csv::format_double(r.control_rate),
                                csv::format_double(r.adjusted_risk)});
        out += "\n";
    }
    write_text(path, out);
}

}  // namespace

std::vector<EvalRow> load_evaluations(const fs::path& path) {
    const csv::Table t = csv::read_file(path);
    const csv::Table expect = csv::parse(std::string(kEvalHeader) + "\n", "schema");
    if (t.header != expect.header) {
        throw Error(path.string() + ": header does not match the evaluations schema");
    }
    std::vector<EvalRow> rows;
    for (const auto& r : t.rows) {
        if (r.size() != 9) throw Error(path.string() + ": malformed evaluation row");
        EvalRow e;
        e.dataset = r[0];
        e.qi_id = static_cast<int>(parse_int(r[1], path.string()));
        e.config_id = static_cast<int>(parse_int(r[2], path.string()));
        e.spec_id = static_cast<int>(parse_int(r[3], path.string()));
        std::istringstream folds(r[4]);
        std::string part;
        while (std::getline(folds, part, ';')) {
            if (!part.empty()) e.fold_scores.push_back(parse_double(part, path.string()));
        }
        e.cv_auc_mean = parse_double(r[5], path.string());
        e.cv_auc_sd = parse_double(r[6], path.string());
        e.test_auc = parse_double(r[7], path.string());
        e.fit_seconds = parse_double(r[8], path.string());
        rows.push_back(std::move(e));
    }
    return rows;
}

std::vector<LinkRow> load_link_rows(const fs::path& path) {
    const csv::Table t = csv::read_file(path);
    const csv::Table expect = csv::parse(std::string(kLinkHeader) + "\n", "schema");
    if (t.header != expect.header) {
        throw Error(path.string() + ": header does not match the linkability schema");
    }
    std::vector<LinkRow> rows;
    for (const auto& r : t.rows) {
        if (r.size() != 8) throw Error(path.string() + ": malformed linkability row");
        LinkRow l;
        l.dataset = r[0];
        l.qi_id = static_cast<int>(parse_int(r[1], path.string()));
        l.config_id = static_cast<int>(parse_int(r[2], path.string()));
        l.n_targets = static_cast<std::size_t>(parse_int(r[3], path.string()));
        l.k = static_cast<std::size_t>(parse_int(r[4], path.string()));
        l.naive_rate = parse_double(r[5], path.string());
        l.control_rate = parse_double(r[6], path.string());
        l.adjusted_risk = parse_double(r[7], path.string());
        rows.push_back(std::move(l));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// protection phase

PhaseRecord run_protect(const PipelineConfig& cfg) {
    validate_config(cfg);
    Timer timer;
    PhaseRecord rec;
    rec.phase = "protect";
    rec.seed = cfg.master_seed;

    for (const auto& path : corpus_files(cfg)) {
        rec.input_hashes[path.filename().string()] = content_hash(path);
    }
    const std::vector<CorpusSet> corpus = load_corpus(cfg);
    fs::create_directories(cfg.out_dir);

    std::vector<FailureRow> failures;
    std::vector<std::string> slot_lines;

    // Unit of work: one (dataset, qi_set, PrivateSMOTE config) triple.
    struct ProtectUnit {
        const CorpusSet* ds = nullptr;
        QISet qi;
        std::vector<std::size_t> highrisk;
        PrivacyConfig config;
    };
    std::vector<ProtectUnit> units;
    std::vector<PrivacyConfig> smote_configs;
    std::vector<const PrivacyConfig*> external_configs;
    for (const auto& c : config_grid()) {
        if (c.technique == Technique::PrivateSMOTE) {
            smote_configs.push_back(c);
        } else {
            external_configs.push_back(&c);
        }
    }

    fs::create_directories(cfg.out_dir / "splits");
    for (const auto& ds : corpus) {
        write_csv(ds.train, cfg.out_dir / "splits" / (ds.name + "_train.csv"));
        write_csv(ds.holdout, cfg.out_dir / "splits" / (ds.name + "_holdout.csv"));

        const auto qi_sets = sample_qi_sets(
            ds.train, cfg.qi_count, cfg.qi_fraction,
            unit_seed(cfg.master_seed, "qi", ds.name, -1, -1));

        nlohmann::json profile = nlohmann::json::array();
        for (const auto& qi : qi_sets) {
            const RiskProfile rp = equivalence_classes(ds.train, qi);
            nlohmann::json jq;
            jq["qi_set"] = {{"id", qi.id}, {"columns", qi.columns}};
            jq["n"] = ds.train.n_rows();
            nlohmann::json hist = nlohmann::json::object();
            for (const auto& [k, count] : rp.k_histogram) hist[std::to_string(k)] = count;
            jq["k_histogram"] = std::move(hist);
            jq["highest_risk_count"] = rp.highest_risk.size();
            jq["highest_risk_fraction"] =
                ds.train.n_rows() == 0
                    ? 0.0
                    : static_cast<double>(rp.highest_risk.size()) / ds.train.n_rows();
            profile.push_back(std::move(jq));

            for (const PrivacyConfig* ext : external_configs) {
                const fs::path slot = fs::path("variants") / ds.name / std::to_string(qi.id) /
                                      (std::to_string(ext->config_id) + ".csv");
                slot_lines.push_back(csv::format_row(
                    {ds.name, std::to_string(qi.id), std::to_string(ext->config_id),
                     technique_name(ext->technique), ext->label(), slot.generic_string()}));
            }

            if (rp.highest_risk.empty()) {
                failures.push_back(FailureRow{"protect", ds.name, qi.id, -1,
                                              "no highest-risk rows under this QI set"});
                continue;
            }
            for (const auto& c : smote_configs) {
                units.push_back(ProtectUnit{&ds, qi, rp.highest_risk, c});
            }
        }
        write_text(cfg.out_dir / "profiles" / (ds.name + ".json"), profile.dump(2) + "\n");
    }

    std::vector<std::unique_ptr<ProtectedVariant>> slots(units.size());
    std::mutex fail_mu;
    parallel_for(units.size(), cfg.worker_count, [&](std::size_t i) {
        const ProtectUnit& u = units[i];
        const std::uint64_t seed = unit_seed(cfg.master_seed, "protect", u.ds->name, u.qi.id,
                                             u.config.config_id);
        try {
            const auto rows = private_smote(
                u.ds->train, u.highrisk, static_cast<int>(u.config.param("N")),
                static_cast<int>(u.config.param("knn")), u.config.param("epsilon"), seed);
            slots[i] = std::make_unique<ProtectedVariant>(
                assemble_variant(u.ds->train, u.highrisk, rows, u.qi, u.config, seed));
        } catch (const Error& e) {
            std::lock_guard<std::mutex> lock(fail_mu);
            failures.push_back(
                FailureRow{"protect", u.ds->name, u.qi.id, u.config.config_id, e.what()});
        }
    });

    const fs::path vroot = cfg.out_dir / "variants";
    for (const auto& slot : slots) {
        if (slot) save_variant(*slot, vroot);
    }

    std::sort(slot_lines.begin(), slot_lines.end());
    std::string slots_csv = "dataset,qi_id,config_id,technique,params,path\n";
    for (const auto& line : slot_lines) slots_csv += line + "\n";
    write_text(cfg.out_dir / "import_slots.csv", slots_csv);

    rewrite_failures(cfg.out_dir / "failures.csv", "protect", std::move(failures));

    for (const auto& ds : corpus) {
        add_produced(rec, cfg.out_dir / "splits" / (ds.name + "_train.csv"), cfg.out_dir);
        add_produced(rec, cfg.out_dir / "splits" / (ds.name + "_holdout.csv"), cfg.out_dir);
        add_produced(rec, cfg.out_dir / "profiles" / (ds.name + ".json"), cfg.out_dir);
    }
    for (const auto& slot : slots) {
        if (!slot) continue;
        fs::path csv_path = vroot / variant_relpath(*slot);
        fs::path side = csv_path;
        side.replace_extension(".json");
        add_produced(rec, csv_path, cfg.out_dir);
        add_produced(rec, side, cfg.out_dir);
    }
    add_produced(rec, cfg.out_dir / "import_slots.csv", cfg.out_dir);
    add_produced(rec, cfg.out_dir / "failures.csv", cfg.out_dir);

    rec.status = "ok";
    rec.seconds = timer.seconds();
    commit_phase(cfg, rec);
    return rec;
}

// ---------------------------------------------------------------------------
// development phase: optimizer runs

namespace {

SearchOutcome run_optimizer(const std::string& optimizer, const std::vector<LearnerSpec>& space,
                            const Dataset& data, const Dataset& holdout, std::uint64_t seed) {
    if (optimizer == "grid") return grid_search(space, data, seed);
    if (optimizer == "random") return random_search(space, data, kRandomSearchIters, seed);
    if (optimizer == "sh") return successive_halving(space, data, seed);
    if (optimizer == "hyperband") return hyperband(space, data, seed);
    if (optimizer == "oracle") return oracle_best(space, data, holdout, seed);
    throw Error("unknown optimizer '" + optimizer + "'");
}

void write_ledger(const std::vector<LedgerEntry>& ledger, const fs::path& path) {
    std::string out = "spec_id,resource_fraction,cv_auc,round,bracket\n";
    for (const auto& e : ledger) {
        out += csv::format_row({std::to_string(e.spec_id), csv::format_double(e.resource_fraction),
                                csv::format_double(e.cv_auc), std::to_string(e.round),
                                std::to_string(e.bracket)});
        out += "\n";
    }
    write_text(path, out);
}

}  // namespace

PhaseRecord run_evaluate(const PipelineConfig& cfg) {
    validate_config(cfg);
    Timer timer;
    PhaseRecord rec;
    rec.phase = "evaluate";
    rec.seed = cfg.master_seed;

    const std::vector<CorpusSet> corpus = load_corpus(cfg);
    const std::vector<VariantRef> variants = discover_variants(cfg.out_dir / "variants");
    if (variants.empty()) {
        throw Error("no variants under '" + (cfg.out_dir / "variants").string() +
                    "'; run the protect phase first");
    }
    const std::vector<LearnerSpec> space = enumerate_learner_space();

    // Baselines (original training partitions) first, then every variant.
    struct EvalUnit {
        std::string dataset;
        int qi_id = -1;
        int config_id = -1;
        const VariantRef* variant = nullptr;  // null for baselines
    };
    std::vector<EvalUnit> units;
    for (const auto& ds : corpus) units.push_back(EvalUnit{ds.name, -1, -1, nullptr});
    for (const auto& v : variants) {
        units.push_back(EvalUnit{v.dataset, v.qi_id, v.config_id, &v});
    }

    struct EvalSlot {
        bool ok = false;
        EvalRow row;
        std::vector<LedgerEntry> ledger;
        std::string failure;
    };
    std::vector<EvalSlot> slots(units.size());

    parallel_for(units.size(), cfg.worker_count, [&](std::size_t i) {
        const EvalUnit& u = units[i];
        EvalSlot& slot = slots[i];
        const CorpusSet& ds = corpus_entry(corpus, u.dataset);
        const std::uint64_t seed =
            unit_seed(cfg.master_seed, "evaluate", u.dataset, u.qi_id, u.config_id);
        try {
            SearchOutcome outcome;
            if (u.variant == nullptr) {
                outcome = run_optimizer(cfg.optimizer, space, ds.train, ds.holdout, seed);
                if (cfg.optimizer != "oracle") {
                    outcome.best_result.test_auc = holdout_test_auc(
                        outcome.best_spec, ds.train, ds.holdout,
                        evaluation_seed(seed, outcome.best_spec.spec_id));
                }
            } else {
                const ProtectedVariant v = load_variant(u.variant->csv_path, ds.train);
                outcome = run_optimizer(cfg.optimizer, space, v.data, ds.holdout, seed);
                if (cfg.optimizer != "oracle") {
                    outcome.best_result.test_auc = holdout_test_auc(
                        outcome.best_spec, v.data, ds.holdout,
                        evaluation_seed(seed, outcome.best_spec.spec_id));
                }
            }
            slot.row = EvalRow{u.dataset,
                               u.qi_id,
                               u.config_id,
                               outcome.best_spec.spec_id,
                               outcome.best_result.fold_scores,
                               outcome.best_result.cv_auc_mean,
                               outcome.best_result.cv_auc_sd,
                               outcome.best_result.test_auc,
                               outcome.best_result.fit_seconds};
            slot.ledger = std::move(outcome.evaluations);
            slot.ok = true;
        } catch (const Error& e) {
            slot.failure = e.what();
        }
    });

    std::vector<EvalRow> rows;
    std::vector<FailureRow> failures;
    std::vector<ProducedFile> ledger_files;
    for (std::size_t i = 0; i < units.size(); ++i) {
        const EvalUnit& u = units[i];
        EvalSlot& slot = slots[i];
        if (!slot.ok) {
            failures.push_back(
                FailureRow{"evaluate", u.dataset, u.qi_id, u.config_id, slot.failure});
            continue;
        }
        rows.push_back(std::move(slot.row));
        const std::string stem =
            u.variant == nullptr
                ? u.dataset + "_baseline"
                : u.dataset + "_qi" + std::to_string(u.qi_id) + "_cfg" +
                      std::to_string(u.config_id);
        const fs::path lpath = cfg.out_dir / "ledgers" / (stem + ".csv");
        write_ledger(slot.ledger, lpath);
        ledger_files.push_back(ProducedFile{relpath(lpath, cfg.out_dir), content_hash(lpath)});
    }
    std::sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
        return std::tie(a.dataset, a.qi_id, a.config_id) <
               std::tie(b.dataset, b.qi_id, b.config_id);
    });
    write_evaluations(rows, cfg.out_dir / "evaluations.csv");
    rewrite_failures(cfg.out_dir / "failures.csv", "evaluate", std::move(failures));

    std::vector<ProducedFile> variant_hashes;
    for (const auto& v : variants) {
        variant_hashes.push_back(
            ProducedFile{relpath(v.csv_path, cfg.out_dir), content_hash(v.csv_path)});
    }
    rec.input_hashes["variants"] = aggregate_hash(variant_hashes);
    rec.produced.push_back(ProducedFile{"evaluations.csv",
                                        eval_hash_sans_timing(cfg.out_dir / "evaluations.csv")});
    for (auto& f : ledger_files) rec.produced.push_back(std::move(f));
    add_produced(rec, cfg.out_dir / "failures.csv", cfg.out_dir);

    rec.status = "ok";
    rec.seconds = timer.seconds();
    commit_phase(cfg, rec);
    return rec;
}

// ---------------------------------------------------------------------------
// development phase: linkability

PhaseRecord run_attack(const PipelineConfig& cfg) {
    validate_config(cfg);
    Timer timer;
    PhaseRecord rec;
    rec.phase = "attack";
    rec.seed = cfg.master_seed;

    const std::vector<CorpusSet> corpus = load_corpus(cfg);
    const std::vector<VariantRef> variants = discover_variants(cfg.out_dir / "variants");
    if (variants.empty()) {
        throw Error("no variants under '" + (cfg.out_dir / "variants").string() +
                    "'; run the protect phase first");
    }

    struct AttackSlot {
        bool ok = false;
        LinkRow row;
        LinkabilityReport report;
        std::string failure;
    };
    std::vector<AttackSlot> slots(variants.size());

    parallel_for(variants.size(), cfg.worker_count, [&](std::size_t i) {
        const VariantRef& v = variants[i];
        AttackSlot& slot = slots[i];
        const CorpusSet& ds = corpus_entry(corpus, v.dataset);
        const std::size_t auto_cap = std::min<std::size_t>(500, ds.train.n_rows());
        const std::size_t n_targets =
            cfg.n_targets == 0 ? auto_cap : std::min(cfg.n_targets, ds.train.n_rows());
        try {
            const ProtectedVariant pv = load_variant(v.csv_path, ds.train);
            const LinkabilityReport rep = linkability(
                ds.train, pv, pv.qi_set, ds.holdout, n_targets, cfg.link_k,
                unit_seed(cfg.master_seed, "attack", v.dataset, v.qi_id, v.config_id));
            slot.row = LinkRow{v.dataset,       v.qi_id,          v.config_id,
                               rep.n_targets,   rep.k,            rep.naive_rate,
                               rep.control_rate, rep.adjusted_risk};
            slot.report = rep;
            slot.ok = true;
        } catch (const Error& e) {
            slot.failure = e.what();
        }
    });

    std::vector<LinkRow> rows;
    std::vector<FailureRow> failures;
    nlohmann::json report = nlohmann::json::array();
    for (std::size_t i = 0; i < variants.size(); ++i) {
        const VariantRef& v = variants[i];
        AttackSlot& slot = slots[i];
        if (!slot.ok) {
            failures.push_back(FailureRow{"attack", v.dataset, v.qi_id, v.config_id,
                                          slot.failure});
            continue;
        }
        rows.push_back(slot.row);
        nlohmann::json jr;
        jr["dataset"] = v.dataset;
        jr["qi_id"] = v.qi_id;
        jr["config_id"] = v.config_id;
        jr["n_targets"] = slot.report.n_targets;
        jr["k"] = slot.report.k;
        jr["naive_rate"] = slot.report.naive_rate;
        jr["control_rate"] = slot.report.control_rate;
        jr["adjusted_risk"] = slot.report.adjusted_risk;
        jr["aux_a"] = slot.report.aux_a;
        jr["aux_b"] = slot.report.aux_b;
        report.push_back(std::move(jr));
    }
    write_link_rows(rows, cfg.out_dir / "linkability.csv");
    write_text(cfg.out_dir / "attack_report.json", report.dump(2) + "\n");
    rewrite_failures(cfg.out_dir / "failures.csv", "attack", std::move(failures));

    add_produced(rec, cfg.out_dir / "linkability.csv", cfg.out_dir);
    add_produced(rec, cfg.out_dir / "attack_report.json", cfg.out_dir);
    add_produced(rec, cfg.out_dir / "failures.csv", cfg.out_dir);

    rec.status = "ok";
    rec.seconds = timer.seconds();
    commit_phase(cfg, rec);
    return rec;
}

// ---------------------------------------------------------------------------
// meta-dataset assembly

PhaseRecord build_metadataset(const PipelineConfig& cfg) {
    validate_config(cfg);
    Timer timer;
    PhaseRecord rec;
    rec.phase = "meta-build";
    rec.seed = cfg.master_seed;

    const fs::path eval_path = cfg.out_dir / "evaluations.csv";
    const fs::path link_path = cfg.out_dir / "linkability.csv";
    if (!fs::exists(eval_path)) {
        throw Error("missing " + eval_path.string() + "; run the evaluate phase first");
    }
    if (!fs::exists(link_path)) {
        throw Error("missing " + link_path.string() + "; run the attack phase first");
    }

    const std::vector<CorpusSet> corpus = load_corpus(cfg);
    const std::vector<VariantRef> variants = discover_variants(cfg.out_dir / "variants");

    using Key = std::tuple<std::string, int, int>;
    std::map<Key, const EvalRow*> eval_by_key;
    const std::vector<EvalRow> evals = load_evaluations(eval_path);
    for (const auto& e : evals) {
        if (e.qi_id >= 0) eval_by_key[{e.dataset, e.qi_id, e.config_id}] = &e;
    }
    std::map<Key, const LinkRow*> link_by_key;
    const std::vector<LinkRow> links = load_link_rows(link_path);
    for (const auto& l : links) link_by_key[{l.dataset, l.qi_id, l.config_id}] = &l;

    struct MetaSlot {
        bool ok = false;
        MetaRow row;
        std::string reason;
    };
    std::vector<MetaSlot> slots(variants.size());

    parallel_for(variants.size(), cfg.worker_count, [&](std::size_t i) {
        const VariantRef& v = variants[i];
        MetaSlot& slot = slots[i];
        const Key key{v.dataset, v.qi_id, v.config_id};
        const auto ev = eval_by_key.find(key);
        const auto ln = link_by_key.find(key);
        if (ev == eval_by_key.end() || ln == link_by_key.end()) {
            std::string reason;
            if (ev == eval_by_key.end()) reason = "no evaluation row";
            if (ln == link_by_key.end()) {
                if (!reason.empty()) reason += "; ";
                reason += "no linkability row";
            }
            slot.reason = reason;
            return;
        }
        try {
            const CorpusSet& ds = corpus_entry(corpus, v.dataset);
            const ProtectedVariant pv = load_variant(v.csv_path, ds.train);
            const MetaFeatureVector mf = extract(
                pv.data,
                unit_seed(cfg.master_seed, "metafeat", v.dataset, v.qi_id, v.config_id));
            const ConfigEncoding enc = encode_config(pv.config);
            MetaRow row;
            row.dataset = v.dataset;
            row.qi_id = v.qi_id;
            row.config_id = v.config_id;
            row.features = mf.values;
            row.features.insert(row.features.end(), enc.values.begin(), enc.values.end());
            row.y_perf = ev->second->cv_auc_mean;
            row.y_link = ln->second->adjusted_risk;
            slot.row = std::move(row);
            slot.ok = true;
        } catch (const Error& e) {
            slot.reason = e.what();
        }
    });

    std::vector<MetaRow> rows;
    std::string excluded = "dataset,qi_id,config_id,reason\n";
    std::size_t n_excluded = 0;
    for (std::size_t i = 0; i < variants.size(); ++i) {
        if (slots[i].ok) {
            rows.push_back(std::move(slots[i].row));
        } else {
            const VariantRef& v = variants[i];
            excluded += csv::format_row({v.dataset, std::to_string(v.qi_id),
                                         std::to_string(v.config_id), slots[i].reason});
            excluded += "\n";
            ++n_excluded;
        }
    }
    if (rows.empty()) {
        throw Error("no variant has both an evaluation and a linkability row; "
                    "nothing to assemble");
    }
    write_meta_dataset(rows, cfg.out_dir / "meta.csv");
    write_text(cfg.out_dir / "meta_excluded.csv", excluded);
    (void)n_excluded;

    rec.input_hashes["evaluations.csv"] = eval_hash_sans_timing(eval_path);
    rec.input_hashes["linkability.csv"] = content_hash(link_path);
    add_produced(rec, cfg.out_dir / "meta.csv", cfg.out_dir);
    add_produced(rec, cfg.out_dir / "meta_excluded.csv", cfg.out_dir);

    rec.status = "ok";
    rec.seconds = timer.seconds();
    commit_phase(cfg, rec);
    return rec;
}

// ---------------------------------------------------------------------------
// meta-model fitting and recommendation

PhaseRecord run_meta_fit(const PipelineConfig& cfg) {
    validate_config(cfg);
    Timer timer;
    PhaseRecord rec;
    rec.phase = "meta-fit";
    rec.seed = cfg.master_seed;

    const fs::path meta_path = cfg.out_dir / "meta.csv";
    if (!fs::exists(meta_path)) {
        throw Error("missing " + meta_path.string() + "; run the meta-build phase first");
    }
    const std::vector<MetaRow> rows = load_meta_dataset(meta_path);
    const MetaModel perf = fit_meta(rows, MetaTarget::Performance);
    const MetaModel link = fit_meta(rows, MetaTarget::Linkability);
    save_meta_model(perf, cfg.out_dir / "models" / "meta_perf.json");
    save_meta_model(link, cfg.out_dir / "models" / "meta_link.json");

    rec.input_hashes["meta.csv"] = content_hash(meta_path);
    add_produced(rec, cfg.out_dir / "models" / "meta_perf.json", cfg.out_dir);
    add_produced(rec, cfg.out_dir / "models" / "meta_link.json", cfg.out_dir);

    rec.status = "ok";
    rec.seconds = timer.seconds();
    commit_phase(cfg, rec);
    return rec;
}

Recommendation cmd_recommend(const PipelineConfig& cfg, const fs::path& new_csv,
                             const std::string& target) {
    validate_config(cfg);
    const Dataset new_ds = load_csv(new_csv, target);

    const fs::path meta_path = cfg.out_dir / "meta.csv";
    const fs::path perf_path = cfg.out_dir / "models" / "meta_perf.json";
    const fs::path link_path = cfg.out_dir / "models" / "meta_link.json";

    MetaModel perf, link;
    if (fs::exists(perf_path) && fs::exists(link_path)) {
        perf = load_meta_model(perf_path);
        link = load_meta_model(link_path);
    } else if (fs::exists(meta_path)) {
        const std::vector<MetaRow> rows = load_meta_dataset(meta_path);
        perf = fit_meta(rows, MetaTarget::Performance);
        link = fit_meta(rows, MetaTarget::Linkability);
    } else {
        throw Error("neither persisted meta-models nor meta.csv found under '" +
                    cfg.out_dir.string() + "'; run meta-build (and meta-fit) first");
    }

    // Rank only configurations the models actually saw during training.
    std::vector<PrivacyConfig> pool;
    if (fs::exists(meta_path)) {
        std::set<int> seen;
        for (const auto& r : load_meta_dataset(meta_path)) seen.insert(r.config_id);
        for (int id : seen) {
            if (id < 0 || id >= static_cast<int>(config_grid().size())) {
                throw Error(meta_path.string() + ": config_id " + std::to_string(id) +
                            " outside the canonical grid");
            }
            pool.push_back(config_grid()[static_cast<std::size_t>(id)]);
        }
    } else {
        pool = config_grid();
    }

    const MetaFeatureVector mf =
        extract(new_ds, unit_seed(cfg.master_seed, "recommend", new_ds.name(), -1, -1));
    const Recommendation rec =
        recommend_from_pool(mf, pool, perf, link, static_cast<std::size_t>(cfg.top_n));

    nlohmann::json j;
    j["dataset"] = new_ds.name();
    j["mf_version"] = kMetaFeatureVersion;
    j["top_n"] = cfg.top_n;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : rec) {
        nlohmann::json je;
        je["config_id"] = e.config.config_id;
        je["technique"] = technique_name(e.config.technique);
        je["params"] = e.config.params;
        je["pred_perf"] = e.pred_perf;
        je["pred_link"] = e.pred_link;
        je["avg_rank"] = e.avg_rank;
        j["entries"].push_back(std::move(je));
    }
    write_text(cfg.out_dir / "recommendations" / (new_ds.name() + ".json"), j.dump(2) + "\n");
    return rec;
}

std::string format_recommendation(const Recommendation& rec) {
    std::ostringstream os;
    os << std::left << std::setw(4) << "#" << std::setw(14) << "technique" << std::setw(5)
       << "N" << std::setw(5) << "knn" << std::setw(9) << "epsilon" << std::setw(10)
       << "pred_auc" << std::setw(11) << "pred_link" << "avg_rank\n";
    auto param_or_dash = [](const PrivacyConfig& c, const char* key) {
        const auto it = c.params.find(key);
        return it == c.params.end() ? std::string("-") : csv::format_double(it->second);
    };
    os << std::fixed;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        const auto& e = rec[i];
        os << std::left << std::setw(4) << (i + 1) << std::setw(14)
           << technique_name(e.config.technique) << std::setw(5)
           << param_or_dash(e.config, "N") << std::setw(5) << param_or_dash(e.config, "knn")
           << std::setw(9) << param_or_dash(e.config, "epsilon") << std::setprecision(4)
           << std::setw(10) << e.pred_perf << std::setw(11) << e.pred_link
           << std::setprecision(2) << e.avg_rank << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// strategy comparison

CompareReport compare_evaluations(const fs::path& a, const fs::path& b, double lo, double hi,
                                  double prior_weight, int mc_samples, std::uint64_t seed) {
    using Key = std::tuple<std::string, int, int>;
    std::map<Key, double> left;
    for (const auto& r : load_evaluations(a)) left[{r.dataset, r.qi_id, r.config_id}] = r.test_auc;
    std::vector<double> diffs;
    for (const auto& r : load_evaluations(b)) {
        const auto it = left.find({r.dataset, r.qi_id, r.config_id});
        if (it != left.end()) diffs.push_back(pct_diff(it->second, r.test_auc));
    }
    if (diffs.empty()) {
        throw Error("no common (dataset, qi_id, config_id) rows between '" + a.string() +
                    "' and '" + b.string() + "'");
    }
    CompareReport report;
    report.n_pairs = diffs.size();
    report.test = bayes_sign_test(diffs, lo, hi, prior_weight, mc_samples, seed);
    return report;
}

}  // namespace autopriv
