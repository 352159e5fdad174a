#include "topicopt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "nlohmann/json.hpp"
#include "topicopt/corpus.hpp"
#include "topicopt/rng.hpp"

namespace topicopt {

namespace {

using json = nlohmann::json;

// Corpus generation and splitting draw from master-derived streams that are
// disjoint from every trial stream (trial 0's stream is the master itself).
constexpr std::uint64_t kCorpusSalt = 0xD1B54A32D192ED03ull;
constexpr std::uint64_t kSplitSalt = 0xA0761D6478BD642Full;

const std::vector<std::string> kKnownMethods = {"GA", "ES", "PABBO", "SABBO"};

// Stream ids are tied to the method identity, not its position in the
// methods list, so a subset run reproduces the full run's trajectories.
std::uint64_t method_stream_id(const std::string& method) {
    for (std::size_t i = 0; i < kKnownMethods.size(); ++i) {
        if (kKnownMethods[i] == method) return i + 1;
    }
    throw std::invalid_argument("unknown method: " + method);
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (cfg.budget < 1) throw std::invalid_argument("budget must be >= 1");
    if (cfg.methods.empty()) {
        throw std::invalid_argument("methods must be non-empty");
    }
    for (const auto& m : cfg.methods) method_stream_id(m);
    if (!(cfg.holdout_frac > 0.0 && cfg.holdout_frac < 1.0)) {
        throw std::invalid_argument("holdout_frac must be in (0, 1)");
    }
}

json planted_to_json(const PlantedParams& p) {
    return {{"t_true", p.t_true},
            {"vocab", p.vocab},
            {"docs", p.docs},
            {"doc_len", p.doc_len},
            {"concentration", p.concentration}};
}

PlantedParams planted_from_json(const json& j) {
    PlantedParams p;
    p.t_true = j.value("t_true", p.t_true);
    p.vocab = j.value("vocab", p.vocab);
    p.docs = j.value("docs", p.docs);
    p.doc_len = j.value("doc_len", p.doc_len);
    p.concentration = j.value("concentration", p.concentration);
    return p;
}

std::vector<int> pool_as_population(const std::vector<double>& pool,
                                    std::size_t target,
                                    const SearchSpace& space, Rng& rng,
                                    std::string* note) {
    std::vector<int> pop;
    pop.reserve(target);
    for (double q : pool) {
        if (pop.size() == target) break;
        pop.push_back(static_cast<int>(std::llround(q)));
    }
    if (pool.size() > target && note) {
        *note = "initial pool truncated to population size " +
                std::to_string(target);
    }
    if (pop.size() < target && note) {
        *note = "initial pool padded to population size " +
                std::to_string(target) + " with uniform queries";
    }
    while (pop.size() < target) {
        pop.push_back(static_cast<int>(rng.uniform_int(space.t_min, space.t_max)));
    }
    return pop;
}

struct CellStats {
    std::vector<const Trajectory*> completed;
};

// Groups trajectories by (dataset, method) preserving first-seen order.
std::vector<std::pair<std::pair<std::string, std::string>, CellStats>>
group_cells(const std::vector<Trajectory>& trajectories) {
    std::vector<std::pair<std::pair<std::string, std::string>, CellStats>> out;
    for (const auto& tr : trajectories) {
        const auto key = std::make_pair(tr.dataset, tr.method);
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const auto& e) { return e.first == key; });
        if (it == out.end()) {
            out.push_back({key, CellStats{}});
            it = out.end() - 1;
        }
        if (!tr.failed) it->second.completed.push_back(&tr);
    }
    return out;
}

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    sd = 0.0;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial_index) {
    return derive_seed(master_seed, trial_index);
}

ExperimentConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("invalid config JSON: ") +
                                    e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config must be an object");
    ExperimentConfig cfg;
    cfg.dataset_name = j.value("dataset_name", cfg.dataset_name);
    cfg.matrix_path = j.value("matrix_path", cfg.matrix_path);
    if (j.contains("planted") && !j.at("planted").is_null()) {
        cfg.planted = planted_from_json(j.at("planted"));
    }
    cfg.holdout_frac = j.value("holdout_frac", cfg.holdout_frac);
    if (j.contains("methods")) {
        cfg.methods = j.at("methods").get<std::vector<std::string>>();
    }
    cfg.budget = j.value("budget", cfg.budget);
    cfg.trials = j.value("trials", cfg.trials);
    cfg.init_pool_size = j.value("init_pool_size", cfg.init_pool_size);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    if (j.contains("space")) {
        const auto& s = j.at("space");
        cfg.space.t_min = s.value("t_min", cfg.space.t_min);
        cfg.space.t_max = s.value("t_max", cfg.space.t_max);
    }
    if (j.contains("lda")) {
        const auto& l = j.at("lda");
        cfg.lda.passes = l.value("passes", cfg.lda.passes);
        cfg.lda.batch_size = l.value("batch_size", cfg.lda.batch_size);
        cfg.lda.tau0 = l.value("tau0", cfg.lda.tau0);
        cfg.lda.kappa = l.value("kappa", cfg.lda.kappa);
        cfg.lda.e_step_iters = l.value("e_step_iters", cfg.lda.e_step_iters);
        cfg.lda.e_step_tol = l.value("e_step_tol", cfg.lda.e_step_tol);
        cfg.lda.seed = l.value("seed", cfg.lda.seed);
        cfg.lda.parallel = l.value("parallel", cfg.lda.parallel);
    }
    if (j.contains("ga")) {
        const auto& g = j.at("ga");
        cfg.ga.pop_size = g.value("pop_size", cfg.ga.pop_size);
        cfg.ga.n_elite = g.value("n_elite", cfg.ga.n_elite);
        cfg.ga.tournament_k = g.value("tournament_k", cfg.ga.tournament_k);
        cfg.ga.p_cross = g.value("p_cross", cfg.ga.p_cross);
        cfg.ga.p_mut = g.value("p_mut", cfg.ga.p_mut);
        cfg.ga.delta_t = g.value("delta_t", cfg.ga.delta_t);
        cfg.ga.bit_width = g.value("bit_width", cfg.ga.bit_width);
    }
    if (j.contains("es")) {
        const auto& e = j.at("es");
        cfg.es.mu = e.value("mu", cfg.es.mu);
        cfg.es.lambda = e.value("lambda", cfg.es.lambda);
        cfg.es.sigma = e.value("sigma", cfg.es.sigma);
    }
    if (j.contains("sabbo")) {
        const auto& s = j.at("sabbo");
        cfg.sabbo.mu = s.value("mu", cfg.sabbo.mu);
        cfg.sabbo.sigma2 = s.value("sigma2", cfg.sabbo.sigma2);
        cfg.sabbo.K = s.value("K", cfg.sabbo.K);
        cfg.sabbo.rho = s.value("rho", cfg.sabbo.rho);
    }
    cfg.pabbo_checkpoint = j.value("pabbo_checkpoint", cfg.pabbo_checkpoint);
    cfg.pabbo_candidates = j.value("pabbo_candidates", cfg.pabbo_candidates);
    cfg.pabbo_explore_rho = j.value("pabbo_explore_rho", cfg.pabbo_explore_rho);
    validate(cfg);
    return cfg;
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
    json j;
    j["dataset_name"] = cfg.dataset_name;
    j["matrix_path"] = cfg.matrix_path;
    if (cfg.planted) j["planted"] = planted_to_json(*cfg.planted);
    j["holdout_frac"] = cfg.holdout_frac;
    j["methods"] = cfg.methods;
    j["budget"] = cfg.budget;
    j["trials"] = cfg.trials;
    j["init_pool_size"] = cfg.init_pool_size;
    j["master_seed"] = cfg.master_seed;
    j["space"] = {{"t_min", cfg.space.t_min}, {"t_max", cfg.space.t_max}};
    j["lda"] = {{"passes", cfg.lda.passes},
                {"batch_size", cfg.lda.batch_size},
                {"tau0", cfg.lda.tau0},
                {"kappa", cfg.lda.kappa},
                {"e_step_iters", cfg.lda.e_step_iters},
                {"e_step_tol", cfg.lda.e_step_tol},
                {"seed", cfg.lda.seed},
                {"parallel", cfg.lda.parallel}};
    j["ga"] = {{"pop_size", cfg.ga.pop_size},
               {"n_elite", cfg.ga.n_elite},
               {"tournament_k", cfg.ga.tournament_k},
               {"p_cross", cfg.ga.p_cross},
               {"p_mut", cfg.ga.p_mut},
               {"delta_t", cfg.ga.delta_t},
               {"bit_width", cfg.ga.bit_width}};
    j["es"] = {{"mu", cfg.es.mu},
               {"lambda", cfg.es.lambda},
               {"sigma", cfg.es.sigma}};
    j["sabbo"] = {{"mu", cfg.sabbo.mu},
                  {"sigma2", cfg.sabbo.sigma2},
                  {"K", cfg.sabbo.K},
                  {"rho", cfg.sabbo.rho}};
    j["pabbo_checkpoint"] = cfg.pabbo_checkpoint;
    j["pabbo_candidates"] = cfg.pabbo_candidates;
    j["pabbo_explore_rho"] = cfg.pabbo_explore_rho;
    return j.dump(2) + "\n";
}

std::vector<Trajectory> run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    const bool has_path = !cfg.matrix_path.empty();
    if (has_path == cfg.planted.has_value()) {
        throw std::invalid_argument(
            "config must set exactly one of matrix_path or planted");
    }
    DocumentTermMatrix full =
        has_path ? load_matrix(cfg.matrix_path)
                 : generate_planted_corpus(
                       cfg.planted->t_true, cfg.planted->vocab,
                       cfg.planted->docs, cfg.planted->doc_len,
                       cfg.planted->concentration,
                       cfg.master_seed ^ kCorpusSalt);
    auto [train_m, val_m] =
        split(full, cfg.holdout_frac, cfg.master_seed ^ kSplitSalt);
    auto train = std::make_shared<const DocumentTermMatrix>(std::move(train_m));
    auto validation =
        std::make_shared<const DocumentTermMatrix>(std::move(val_m));

    const bool wants_pabbo =
        std::find(cfg.methods.begin(), cfg.methods.end(), "PABBO") !=
        cfg.methods.end();
    std::optional<pabbo::Params> policy;
    std::string policy_error;
    if (wants_pabbo) {
        if (cfg.pabbo_checkpoint.empty()) {
            policy_error = "PABBO requires a policy checkpoint path";
        } else {
            try {
                policy = pabbo::load_policy(cfg.pabbo_checkpoint);
            } catch (const std::exception& e) {
                policy_error = e.what();
            }
        }
    }

    std::vector<Trajectory> out;
    out.reserve(cfg.trials * cfg.methods.size());
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
        const std::uint64_t ts = trial_seed(cfg.master_seed, trial);
        Rng pool_rng(ts);
        std::vector<double> pool(cfg.init_pool_size);
        for (auto& q : pool) {
            q = static_cast<double>(
                pool_rng.uniform_int(cfg.space.t_min, cfg.space.t_max));
        }
        for (const auto& method : cfg.methods) {
            Trajectory cell;
            cell.dataset = cfg.dataset_name;
            cell.method = method;
            cell.trial = trial;
            cell.seed = ts;
            try {
                TrainConfig lda = cfg.lda;
                lda.seed = ts;
                Objective obj =
                    make_lda_objective(train, validation, cfg.space, lda);
                obj.set_budget(cfg.budget);
                Rng rng(derive_seed(ts, method_stream_id(method)));
                Trajectory run;
                std::string note;
                if (method == "GA") {
                    const auto init = pool_as_population(
                        pool, cfg.ga.pop_size, cfg.space, rng, &note);
                    run = run_ga(obj, cfg.ga, init, cfg.budget, rng);
                } else if (method == "ES") {
                    const auto init = pool_as_population(
                        pool, std::max(pool.size(), cfg.es.mu), cfg.space, rng,
                        &note);
                    run = run_es(obj, cfg.es, init, cfg.budget, rng);
                } else if (method == "SABBO") {
                    run = run_sabbo(obj, cfg.sabbo, cfg.budget, pool, rng);
                } else {
                    if (!policy) throw std::runtime_error(policy_error);
                    run = pabbo::run_pabbo(obj, *policy, cfg.pabbo_candidates,
                                           cfg.pabbo_explore_rho, cfg.budget,
                                           pool, rng);
                }
                if (run.records.size() != cfg.budget) {
                    throw std::runtime_error(
                        "cell issued " + std::to_string(run.records.size()) +
                        " queries, expected " + std::to_string(cfg.budget));
                }
                cell.records = std::move(run.records);
                cell.boundaries = std::move(run.boundaries);
                cell.policy_ms = std::move(run.policy_ms);
                cell.note = note;
            } catch (const std::exception& e) {
                cell.failed = true;
                cell.error = e.what();
            }
            out.push_back(std::move(cell));
        }
    }
    return out;
}

SummaryTable summarize(const std::vector<Trajectory>& trajectories) {
    SummaryTable table;
    for (const auto& [key, stats] : group_cells(trajectories)) {
        SummaryRow row;
        row.dataset = key.first;
        row.method = key.second;
        row.n = stats.completed.size();
        if (row.n == 0) {
            row.missing = true;
        } else {
            std::vector<double> finals;
            finals.reserve(row.n);
            for (const auto* tr : stats.completed) {
                finals.push_back(tr->final_best());
            }
            mean_std(finals, row.mean, row.stddev);
            row.single_trial = row.n == 1;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string summary_to_csv(const SummaryTable& table) {
    std::ostringstream out;
    out << "dataset,method,n_trials,mean_final_best,std_final_best,"
           "single_trial,missing\n";
    for (const auto& r : table.rows) {
        out << r.dataset << ',' << r.method << ',' << r.n << ',';
        if (r.missing) {
            out << ",";
        } else {
            out << format_number(r.mean) << ',' << format_number(r.stddev);
        }
        out << ',' << (r.single_trial ? 1 : 0) << ',' << (r.missing ? 1 : 0)
            << '\n';
    }
    return out.str();
}

std::string aggregate_to_json(const std::vector<Trajectory>& trajectories) {
    json cells = json::array();
    for (const auto& [key, stats] : group_cells(trajectories)) {
        json cell;
        cell["dataset"] = key.first;
        cell["method"] = key.second;
        cell["trials"] = stats.completed.size();
        std::size_t n_steps = SIZE_MAX;
        for (const auto* tr : stats.completed) {
            n_steps = std::min(n_steps, tr->records.size());
        }
        if (stats.completed.empty()) n_steps = 0;
        std::vector<std::size_t> steps(n_steps);
        std::vector<double> means(n_steps), stds(n_steps), times(n_steps);
        for (std::size_t s = 0; s < n_steps; ++s) {
            steps[s] = s + 1;
            std::vector<double> bests, cums;
            for (const auto* tr : stats.completed) {
                bests.push_back(tr->best_so_far()[s]);
                cums.push_back(tr->cumulative_ms()[s]);
            }
            double m, sd, tm, tsd;
            mean_std(bests, m, sd);
            mean_std(cums, tm, tsd);
            means[s] = m;
            stds[s] = sd;
            times[s] = tm;
        }
        cell["by_step"] = {{"step", steps}, {"mean", means}, {"std", stds}};
        cell["by_time"] = {{"mean_cumulative_ms", times},
                           {"mean", means},
                           {"std", stds}};
        cells.push_back(std::move(cell));
    }
    json j;
    j["format_version"] = 1;
    j["cells"] = std::move(cells);
    return j.dump(2) + "\n";
}

void export_files(const std::vector<Trajectory>& trajectories,
                  const std::string& prefix) {
    auto open = [](const std::string& path) {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write file: " + path);
        return out;
    };
    {
        auto out = open(prefix + "_trajectories.csv");
        export_trajectory_csv(trajectories, out);
    }
    {
        auto out = open(prefix + "_summary.csv");
        out << summary_to_csv(summarize(trajectories));
    }
    {
        auto out = open(prefix + "_aggregate.json");
        out << aggregate_to_json(trajectories);
    }
    {
        auto out = open(prefix + "_policy_ms.csv");
        export_policy_ms_csv(trajectories, out);
    }
}

}  // namespace topicopt
