#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "topicopt/corpus.hpp"
#include "topicopt/harness.hpp"
#include "topicopt/objective.hpp"
#include "topicopt/pabbo.hpp"
#include "topicopt/rng.hpp"

namespace {

using namespace topicopt;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

int cmd_preprocess(const std::string& input, const std::string& output,
                   PreprocessConfig cfg, bool keep_stopwords) {
    if (!keep_stopwords) cfg.stopwords = default_stopwords();
    BuildReport report;
    const auto docs = read_lines(input);
    const auto matrix = build_matrix(docs, cfg, &report);
    save_matrix(matrix, output);
    std::cout << "wrote " << output << ": " << matrix.n_rows << " docs, "
              << matrix.n_cols << " terms, " << matrix.total_count()
              << " tokens (" << report.removed_docs.size()
              << " empty docs removed)\n";
    return 0;
}

int cmd_gen_corpus(const PlantedParams& p, std::uint64_t seed,
                   const std::string& output) {
    const auto matrix = generate_planted_corpus(p.t_true, p.vocab, p.docs,
                                                p.doc_len, p.concentration,
                                                seed);
    save_matrix(matrix, output);
    std::cout << "wrote " << output << ": " << matrix.n_rows << " docs, "
              << matrix.n_cols << " terms, " << p.t_true
              << " planted topics\n";
    return 0;
}

int cmd_meta_train(std::size_t episodes, std::uint64_t seed,
                   const std::string& output) {
    pabbo::MetaTrainConfig cfg;
    cfg.episodes = episodes;
    const auto t0 = std::chrono::steady_clock::now();
    const auto params = pabbo::meta_train(pabbo::default_task_sampler, cfg,
                                          seed);
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    pabbo::save_policy(params, {seed, episodes}, output);
    std::cout << "wrote " << output << " after " << episodes << " episodes ("
              << static_cast<int>(secs) << " s)\n";
    return 0;
}

struct OptimizeArgs {
    std::string method = "SABBO";
    std::string objective = "lda";
    std::string matrix_path;
    std::string checkpoint;
    std::string output = "trajectory.csv";
    std::size_t budget = 20;
    std::size_t pool_size = 5;
    std::uint64_t seed = 0;
    int target = 37;
    SearchSpace space{2, 50};
    double holdout_frac = 0.2;
    TrainConfig lda;
};

int cmd_optimize(const OptimizeArgs& a) {
    std::optional<Objective> obj;
    if (a.objective == "lda") {
        if (a.matrix_path.empty()) {
            throw std::runtime_error("--matrix is required for the lda objective");
        }
        auto full = load_matrix(a.matrix_path);
        auto [tr, va] = split(full, a.holdout_frac, derive_seed(a.seed, 99));
        TrainConfig lda = a.lda;
        lda.seed = a.seed;
        obj = make_lda_objective(
            std::make_shared<const DocumentTermMatrix>(std::move(tr)),
            std::make_shared<const DocumentTermMatrix>(std::move(va)), a.space,
            lda);
    } else if (a.objective == "absdiff") {
        const double target = a.target;
        obj = Objective::over_integers(
            [target](double t) { return std::abs(t - target); }, a.space);
    } else if (a.objective == "gp1d") {
        obj = sample_gp1d(a.seed);
    } else {
        throw std::runtime_error("unknown objective: " + a.objective);
    }
    obj->set_budget(a.budget);

    Rng pool_rng(a.seed);
    std::vector<double> pool(a.pool_size);
    const bool integer = obj->domain() == Objective::Domain::integer_t;
    for (auto& q : pool) {
        q = integer ? static_cast<double>(pool_rng.uniform_int(
                          obj->space().t_min, obj->space().t_max))
                    : pool_rng.uniform(obj->lo(), obj->hi());
    }
    Rng rng(derive_seed(a.seed, 1));
    Trajectory traj;
    if (a.method == "GA" || a.method == "ES") {
        if (!integer) {
            throw std::runtime_error(a.method +
                                     " requires an integer search space");
        }
        std::vector<int> init;
        for (double q : pool) init.push_back(static_cast<int>(std::llround(q)));
        if (a.method == "GA") {
            GaConfig cfg;
            while (init.size() < cfg.pop_size) {
                init.push_back(static_cast<int>(
                    rng.uniform_int(obj->space().t_min, obj->space().t_max)));
            }
            init.resize(cfg.pop_size);
            traj = run_ga(*obj, cfg, init, a.budget, rng);
        } else {
            traj = run_es(*obj, EsConfig{}, init, a.budget, rng);
        }
    } else if (a.method == "SABBO") {
        traj = run_sabbo(*obj, SabboState{}, a.budget, pool, rng);
    } else if (a.method == "PABBO") {
        if (a.checkpoint.empty()) {
            throw std::runtime_error("--checkpoint is required for PABBO");
        }
        const auto params = pabbo::load_policy(a.checkpoint);
        traj = pabbo::run_pabbo(*obj, params, 64, 0.1, a.budget, pool, rng);
    } else {
        throw std::runtime_error("unknown method: " + a.method);
    }
    std::ofstream out(a.output);
    if (!out) throw std::runtime_error("cannot write file: " + a.output);
    export_ledger_csv(traj.records, out);
    std::cout << a.method << ": best query " << format_number(traj.best_query())
              << " value " << format_number(traj.final_best()) << " after "
              << traj.records.size() << " evaluations; ledger in " << a.output
              << "\n";
    return 0;
}

int report_failures(const std::vector<Trajectory>& trajectories) {
    int failures = 0;
    for (const auto& tr : trajectories) {
        if (!tr.failed) continue;
        failures += 1;
        std::cerr << "cell failed: " << tr.dataset << "/" << tr.method
                  << " trial " << tr.trial << ": " << tr.error << "\n";
    }
    return failures;
}

int cmd_bench(const ExperimentConfig& cfg, const std::string& out_prefix) {
    const auto trajectories = run_experiment(cfg);
    export_files(trajectories, out_prefix);
    std::cout << summary_to_csv(summarize(trajectories));
    std::cout << "wrote " << out_prefix << "_{trajectories,summary}.csv, "
              << out_prefix << "_aggregate.json, " << out_prefix
              << "_policy_ms.csv\n";
    return report_failures(trajectories) > 0 ? 2 : 0;
}

int cmd_report(const std::string& input, const std::string& out_prefix) {
    std::ifstream in(input);
    if (!in) throw std::runtime_error("cannot open file: " + input);
    const auto trajectories = import_trajectory_csv(in);
    std::cout << summary_to_csv(summarize(trajectories));
    if (!out_prefix.empty()) {
        std::ofstream sum(out_prefix + "_summary.csv");
        if (!sum) {
            throw std::runtime_error("cannot write file: " + out_prefix +
                                     "_summary.csv");
        }
        sum << summary_to_csv(summarize(trajectories));
        std::ofstream agg(out_prefix + "_aggregate.json");
        if (!agg) {
            throw std::runtime_error("cannot write file: " + out_prefix +
                                     "_aggregate.json");
        }
        agg << aggregate_to_json(trajectories);
        std::cout << "wrote " << out_prefix << "_summary.csv and " << out_prefix
                  << "_aggregate.json\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Topic-count selection benchmark: LDA validation perplexity "
                 "as a budgeted black box, optimized by GA, ES, PABBO and "
                 "SABBO"};
    app.require_subcommand(1);

    // preprocess
    auto* pre = app.add_subcommand("preprocess",
                                   "Build a document-term matrix from a text "
                                   "file (one document per line)");
    std::string pre_input, pre_output = "matrix.json";
    PreprocessConfig pre_cfg;
    bool keep_stopwords = false;
    pre->add_option("--input", pre_input, "Input text file")->required();
    pre->add_option("--output", pre_output, "Output matrix JSON");
    pre->add_option("--max-vocab", pre_cfg.max_vocab, "Vocabulary cap");
    pre->add_option("--min-df", pre_cfg.min_df, "Minimum document frequency");
    pre->add_option("--max-df-frac", pre_cfg.max_df_frac,
                    "Maximum document-frequency fraction");
    pre->add_flag("--keep-stopwords", keep_stopwords,
                  "Skip stopword filtering");
    bool no_lowercase = false;
    pre->add_flag("--no-lowercase", no_lowercase, "Keep original casing");

    // gen-corpus
    auto* gen = app.add_subcommand("gen-corpus",
                                   "Generate a planted-topic synthetic corpus");
    PlantedParams planted;
    std::uint64_t gen_seed = 0;
    std::string gen_output = "planted.json";
    gen->add_option("--t-true", planted.t_true, "Number of planted topics");
    gen->add_option("--vocab", planted.vocab, "Vocabulary size");
    gen->add_option("--docs", planted.docs, "Number of documents");
    gen->add_option("--doc-len", planted.doc_len, "Tokens per document");
    gen->add_option("--concentration", planted.concentration,
                    "Dirichlet concentration");
    gen->add_option("--seed", gen_seed, "Generation seed");
    gen->add_option("--output", gen_output, "Output matrix JSON");

    // meta-train
    auto* mt = app.add_subcommand("meta-train",
                                  "Train the PABBO policy on synthetic tasks");
    std::size_t mt_episodes = 2000;
    std::uint64_t mt_seed = 7;
    std::string mt_output = "pabbo_checkpoint.json";
    mt->add_option("--episodes", mt_episodes, "Training episodes");
    mt->add_option("--seed", mt_seed, "Training seed");
    mt->add_option("--output", mt_output, "Checkpoint path");

    // optimize
    auto* opt = app.add_subcommand("optimize",
                                   "Run one optimizer on one objective");
    OptimizeArgs oa;
    opt->add_option("--method", oa.method, "GA, ES, PABBO or SABBO");
    opt->add_option("--objective", oa.objective, "lda, absdiff or gp1d");
    opt->add_option("--matrix", oa.matrix_path, "Matrix JSON (lda objective)");
    opt->add_option("--checkpoint", oa.checkpoint, "PABBO policy checkpoint");
    opt->add_option("--output", oa.output, "Ledger CSV path");
    opt->add_option("--budget", oa.budget, "Evaluation budget");
    opt->add_option("--pool-size", oa.pool_size, "Initial pool size");
    opt->add_option("--seed", oa.seed, "Run seed")->required();
    opt->add_option("--target", oa.target, "absdiff target");
    opt->add_option("--space-min", oa.space.t_min, "Smallest topic count");
    opt->add_option("--space-max", oa.space.t_max, "Largest topic count");
    opt->add_option("--holdout-frac", oa.holdout_frac, "Validation fraction");
    opt->add_option("--lda-passes", oa.lda.passes, "LDA training passes");

    // bench
    auto* bench = app.add_subcommand("bench",
                                     "Run the full multi-method experiment");
    std::string bench_config, out_prefix = "bench";
    ExperimentConfig flags;  // flag values land here, then override the config
    std::uint64_t bench_seed = 0;
    bench->add_option("--config", bench_config, "Experiment config JSON");
    bench->add_option("--out-prefix", out_prefix, "Output file prefix");
    auto* o_seed = bench->add_option("--seed", bench_seed, "Master seed");
    o_seed->required();
    auto* o_name = bench->add_option("--dataset-name", flags.dataset_name);
    auto* o_matrix = bench->add_option("--matrix", flags.matrix_path);
    PlantedParams bench_planted;
    auto* o_ptrue = bench->add_option("--planted-t-true", bench_planted.t_true);
    auto* o_pvocab = bench->add_option("--planted-vocab", bench_planted.vocab);
    auto* o_pdocs = bench->add_option("--planted-docs", bench_planted.docs);
    auto* o_plen = bench->add_option("--planted-doc-len", bench_planted.doc_len);
    auto* o_pconc =
        bench->add_option("--planted-concentration", bench_planted.concentration);
    auto* o_holdout = bench->add_option("--holdout-frac", flags.holdout_frac);
    auto* o_methods = bench->add_option("--methods", flags.methods)
                          ->delimiter(',');
    auto* o_budget = bench->add_option("--budget", flags.budget);
    auto* o_trials = bench->add_option("--trials", flags.trials);
    auto* o_pool = bench->add_option("--init-pool-size", flags.init_pool_size);
    auto* o_smin = bench->add_option("--space-min", flags.space.t_min);
    auto* o_smax = bench->add_option("--space-max", flags.space.t_max);
    auto* o_passes = bench->add_option("--lda-passes", flags.lda.passes);
    auto* o_batch = bench->add_option("--lda-batch-size", flags.lda.batch_size);
    auto* o_tau0 = bench->add_option("--lda-tau0", flags.lda.tau0);
    auto* o_kappa = bench->add_option("--lda-kappa", flags.lda.kappa);
    auto* o_eiters =
        bench->add_option("--lda-e-step-iters", flags.lda.e_step_iters);
    auto* o_etol = bench->add_option("--lda-e-step-tol", flags.lda.e_step_tol);
    auto* o_par = bench->add_flag("--lda-parallel,!--lda-serial",
                                  flags.lda.parallel);
    auto* o_gapop = bench->add_option("--ga-pop-size", flags.ga.pop_size);
    auto* o_gael = bench->add_option("--ga-n-elite", flags.ga.n_elite);
    auto* o_gak = bench->add_option("--ga-tournament-k", flags.ga.tournament_k);
    auto* o_gacx = bench->add_option("--ga-p-cross", flags.ga.p_cross);
    auto* o_gamut = bench->add_option("--ga-p-mut", flags.ga.p_mut);
    auto* o_gadt = bench->add_option("--ga-delta-t", flags.ga.delta_t);
    auto* o_gabw = bench->add_option("--ga-bit-width", flags.ga.bit_width);
    auto* o_esmu = bench->add_option("--es-mu", flags.es.mu);
    auto* o_esla = bench->add_option("--es-lambda", flags.es.lambda);
    auto* o_essig = bench->add_option("--es-sigma", flags.es.sigma);
    auto* o_samu = bench->add_option("--sabbo-mu0", flags.sabbo.mu);
    auto* o_sasig = bench->add_option("--sabbo-sigma2", flags.sabbo.sigma2);
    auto* o_sak = bench->add_option("--sabbo-k", flags.sabbo.K);
    auto* o_sarho = bench->add_option("--sabbo-rho", flags.sabbo.rho);
    auto* o_ckpt = bench->add_option("--checkpoint", flags.pabbo_checkpoint);
    auto* o_pcand =
        bench->add_option("--pabbo-candidates", flags.pabbo_candidates);
    auto* o_prho =
        bench->add_option("--pabbo-explore-rho", flags.pabbo_explore_rho);

    // report
    auto* rep = app.add_subcommand("report",
                                   "Summarize an exported trajectory CSV");
    std::string rep_input, rep_prefix;
    rep->add_option("--input", rep_input, "Trajectory CSV")->required();
    rep->add_option("--out-prefix", rep_prefix,
                    "Also write <prefix>_summary.csv and <prefix>_aggregate.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (pre->parsed()) {
            pre_cfg.lowercase = !no_lowercase;
            return cmd_preprocess(pre_input, pre_output, pre_cfg,
                                  keep_stopwords);
        }
        if (gen->parsed()) return cmd_gen_corpus(planted, gen_seed, gen_output);
        if (mt->parsed()) return cmd_meta_train(mt_episodes, mt_seed, mt_output);
        if (opt->parsed()) return cmd_optimize(oa);
        if (bench->parsed()) {
            ExperimentConfig cfg;
            if (!bench_config.empty()) {
                cfg = config_from_json_text(read_file(bench_config));
            }
            cfg.master_seed = bench_seed;
            if (*o_name) cfg.dataset_name = flags.dataset_name;
            if (*o_matrix) {
                cfg.matrix_path = flags.matrix_path;
                cfg.planted.reset();
            }
            if (*o_ptrue || *o_pvocab || *o_pdocs || *o_plen || *o_pconc) {
                PlantedParams p = cfg.planted.value_or(PlantedParams{});
                if (*o_ptrue) p.t_true = bench_planted.t_true;
                if (*o_pvocab) p.vocab = bench_planted.vocab;
                if (*o_pdocs) p.docs = bench_planted.docs;
                if (*o_plen) p.doc_len = bench_planted.doc_len;
                if (*o_pconc) p.concentration = bench_planted.concentration;
                cfg.planted = p;
                cfg.matrix_path.clear();
            }
            if (*o_holdout) cfg.holdout_frac = flags.holdout_frac;
            if (*o_methods) cfg.methods = flags.methods;
            if (*o_budget) cfg.budget = flags.budget;
            if (*o_trials) cfg.trials = flags.trials;
            if (*o_pool) cfg.init_pool_size = flags.init_pool_size;
            if (*o_smin) cfg.space.t_min = flags.space.t_min;
            if (*o_smax) cfg.space.t_max = flags.space.t_max;
            if (*o_passes) cfg.lda.passes = flags.lda.passes;
            if (*o_batch) cfg.lda.batch_size = flags.lda.batch_size;
            if (*o_tau0) cfg.lda.tau0 = flags.lda.tau0;
            if (*o_kappa) cfg.lda.kappa = flags.lda.kappa;
            if (*o_eiters) cfg.lda.e_step_iters = flags.lda.e_step_iters;
            if (*o_etol) cfg.lda.e_step_tol = flags.lda.e_step_tol;
            if (*o_par) cfg.lda.parallel = flags.lda.parallel;
            if (*o_gapop) cfg.ga.pop_size = flags.ga.pop_size;
            if (*o_gael) cfg.ga.n_elite = flags.ga.n_elite;
            if (*o_gak) cfg.ga.tournament_k = flags.ga.tournament_k;
            if (*o_gacx) cfg.ga.p_cross = flags.ga.p_cross;
            if (*o_gamut) cfg.ga.p_mut = flags.ga.p_mut;
            if (*o_gadt) cfg.ga.delta_t = flags.ga.delta_t;
            if (*o_gabw) cfg.ga.bit_width = flags.ga.bit_width;
            if (*o_esmu) cfg.es.mu = flags.es.mu;
            if (*o_esla) cfg.es.lambda = flags.es.lambda;
            if (*o_essig) cfg.es.sigma = flags.es.sigma;
            if (*o_samu) cfg.sabbo.mu = flags.sabbo.mu;
            if (*o_sasig) cfg.sabbo.sigma2 = flags.sabbo.sigma2;
            if (*o_sak) cfg.sabbo.K = flags.sabbo.K;
            if (*o_sarho) cfg.sabbo.rho = flags.sabbo.rho;
            if (*o_ckpt) cfg.pabbo_checkpoint = flags.pabbo_checkpoint;
            if (*o_pcand) cfg.pabbo_candidates = flags.pabbo_candidates;
            if (*o_prho) cfg.pabbo_explore_rho = flags.pabbo_explore_rho;
            return cmd_bench(cfg, out_prefix);
        }
        if (rep->parsed()) return cmd_report(rep_input, rep_prefix);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
