#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "autopriv/pipeline.hpp"
#include "autopriv/riskprofile.hpp"
#include "json.hpp"

using namespace autopriv;

namespace {

struct GlobalArgs {
    std::string config_path;
    bool seed_set = false;
    std::uint64_t seed = 0;
    int workers = -1;
};

PipelineConfig resolve_config(const GlobalArgs& g, bool config_required) {
    PipelineConfig cfg;
    if (!g.config_path.empty()) {
        cfg = load_pipeline_config(g.config_path);
    } else if (config_required) {
        throw Error("this subcommand needs --config <file>");
    }
    if (g.seed_set) cfg.master_seed = g.seed;
    if (g.workers >= 0) cfg.worker_count = g.workers;
    return cfg;
}

void print_phase(const PhaseRecord& rec) {
    std::printf("%s: %s in %.1fs (%zu files)\n", rec.phase.c_str(), rec.status.c_str(),
                rec.seconds, rec.produced.size());
}

int run_profile(const GlobalArgs& g, const std::string& csv_path, const std::string& target) {
    const PipelineConfig cfg = resolve_config(g, false);
    const Dataset ds = load_csv(csv_path, target);
    const auto qi_sets = sample_qi_sets(ds, cfg.qi_count, cfg.qi_fraction,
                                        unit_seed(cfg.master_seed, "qi", ds.name(), -1, -1));
    nlohmann::json out = nlohmann::json::array();
    for (const auto& qi : qi_sets) {
        const RiskProfile rp = equivalence_classes(ds, qi);
        nlohmann::json jq;
        jq["qi_set"] = {{"id", qi.id}, {"columns", qi.columns}};
        jq["n"] = ds.n_rows();
        nlohmann::json hist = nlohmann::json::object();
        for (const auto& [k, count] : rp.k_histogram) hist[std::to_string(k)] = count;
        jq["k_histogram"] = std::move(hist);
        jq["highest_risk_count"] = rp.highest_risk.size();
        jq["highest_risk_fraction"] =
            ds.n_rows() == 0 ? 0.0
                             : static_cast<double>(rp.highest_risk.size()) / ds.n_rows();
        out.push_back(std::move(jq));
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int run_compare(const GlobalArgs& g, const std::string& a, const std::string& b, double lo,
                double hi, double prior, int samples) {
    const PipelineConfig cfg = resolve_config(g, false);
    const CompareReport rep =
        compare_evaluations(a, b, lo, hi, prior, samples, cfg.master_seed);
    nlohmann::json j;
    j["n_pairs"] = rep.n_pairs;
    j["counts"] = {{"lose", rep.test.n_lose}, {"draw", rep.test.n_draw},
                   {"win", rep.test.n_win}};
    j["p_lose"] = rep.test.p_lose;
    j["p_draw"] = rep.test.p_draw;
    j["p_win"] = rep.test.p_win;
    std::cout << j.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"risk profiling, private synthesis and configuration recommendation "
                 "for tabular data"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "pipeline config file (key = value lines)");
    auto* seed_opt = app.add_option("--seed", g.seed, "override master_seed");
    app.add_option("--workers", g.workers, "override worker_count");

    std::string csv_path, target = "class";
    auto* profile = app.add_subcommand("profile", "k-anonymity risk report for one dataset");
    profile->add_option("csv", csv_path, "dataset csv")->required();
    profile->add_option("--target", target, "target column (default: class)");

    auto* protect = app.add_subcommand("protect", "split, profile and synthesize variants");
    std::string optimizer_override;
    auto* evaluate = app.add_subcommand("evaluate", "search learner configurations per variant");
    evaluate->add_option("--optimizer", optimizer_override,
                         "grid | random | sh | hyperband | oracle");
    auto* attack = app.add_subcommand("attack", "linkability of every variant");
    auto* meta_build = app.add_subcommand("meta-build", "assemble meta.csv");
    auto* meta_fit = app.add_subcommand("meta-fit", "fit and persist the twin meta-models");

    std::string rec_csv, rec_target = "class";
    int top_n_override = -1;
    auto* recommend = app.add_subcommand("recommend", "rank configurations for a new dataset");
    recommend->add_option("csv", rec_csv, "new dataset csv")->required();
    recommend->add_option("--target", rec_target, "target column (default: class)");
    recommend->add_option("--top-n", top_n_override, "override top_n");

    std::string cmp_a, cmp_b;
    double rope_lo = -1.0, rope_hi = 1.0, prior = 1.0;
    int samples = 50000;
    auto* compare = app.add_subcommand("compare", "Bayes sign test between two evaluation runs");
    compare->add_option("a", cmp_a, "evaluations.csv of run A")->required();
    compare->add_option("b", cmp_b, "evaluations.csv of run B (reference)")->required();
    compare->add_option("--lo", rope_lo, "equivalence-region lower bound (%)");
    compare->add_option("--hi", rope_hi, "equivalence-region upper bound (%)");
    compare->add_option("--prior", prior, "Dirichlet prior weight");
    compare->add_option("--samples", samples, "Monte-Carlo samples");

    for (CLI::App* sub : app.get_subcommands(nullptr)) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);
    g.seed_set = seed_opt->count() > 0;

    try {
        if (profile->parsed()) return run_profile(g, csv_path, target);
        if (protect->parsed()) {
            print_phase(run_protect(resolve_config(g, true)));
            return 0;
        }
        if (evaluate->parsed()) {
            PipelineConfig cfg = resolve_config(g, true);
            if (!optimizer_override.empty()) cfg.optimizer = optimizer_override;
            print_phase(run_evaluate(cfg));
            return 0;
        }
        if (attack->parsed()) {
            print_phase(run_attack(resolve_config(g, true)));
            return 0;
        }
        if (meta_build->parsed()) {
            print_phase(build_metadataset(resolve_config(g, true)));
            return 0;
        }
        if (meta_fit->parsed()) {
            print_phase(run_meta_fit(resolve_config(g, true)));
            return 0;
        }
        if (recommend->parsed()) {
            PipelineConfig cfg = resolve_config(g, true);
            if (top_n_override >= 0) cfg.top_n = top_n_override;
            const Recommendation rec = cmd_recommend(cfg, rec_csv, rec_target);
            std::cout << format_recommendation(rec);
            return 0;
        }
        if (compare->parsed()) {
            return run_compare(g, cmp_a, cmp_b, rope_lo, rope_hi, prior, samples);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "autopriv: %s\n", e.what());
        return 1;
    }
    return 0;
}
