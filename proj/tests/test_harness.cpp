#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "topicopt/harness.hpp"
#include "topicopt/pabbo.hpp"
#include "topicopt/rng.hpp"

#include "nlohmann/json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

using namespace topicopt;
using json = nlohmann::json;

namespace {

Trajectory make_run(const std::string& dataset, const std::string& method,
                    std::size_t trial, const std::vector<double>& values,
                    double ms_each) {
    Trajectory tr;
    tr.dataset = dataset;
    tr.method = method;
    tr.trial = trial;
    for (std::size_t i = 0; i < values.size(); ++i) {
        EvalRecord rec;
        rec.step_index = i + 1;
        rec.query = 10.0 + static_cast<double>(i);
        rec.value = values[i];
        rec.wall_clock_ms = ms_each;
        tr.records.push_back(rec);
    }
    return tr;
}

ExperimentConfig tiny_config(const std::string& checkpoint) {
    ExperimentConfig cfg;
    cfg.dataset_name = "tiny";
    cfg.planted = PlantedParams{2, 30, 40, 20, 0.2};
    cfg.holdout_frac = 0.2;
    cfg.methods = {"GA", "ES", "PABBO", "SABBO"};
    cfg.budget = 6;
    cfg.trials = 2;
    cfg.init_pool_size = 3;
    cfg.master_seed = 9001;
    cfg.space = SearchSpace{2, 8};
    cfg.lda.passes = 1;
    cfg.lda.batch_size = 16;
    cfg.lda.e_step_iters = 20;
    cfg.ga.pop_size = 4;
    cfg.ga.n_elite = 1;
    cfg.pabbo_checkpoint = checkpoint;
    cfg.pabbo_candidates = 8;
    return cfg;
}

const std::string kCkptPath = "harness_test_ckpt.json";

void write_test_checkpoint() {
    Rng r(11);
    pabbo::save_policy(pabbo::init_params(r), pabbo::CheckpointInfo{11, 0},
                       kCkptPath);
}

template <typename F>
std::string thrown_message(F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("trial seeds are the master seed xored with scaled indices") {
    const std::uint64_t master = 77;
    CHECK(trial_seed(master, 0) == master);
    for (std::size_t i : {std::size_t{1}, std::size_t{5}, std::size_t{12}}) {
        CHECK(trial_seed(master, i) ==
              (master ^ (static_cast<std::uint64_t>(i) *
                         0x9E3779B97F4A7C15ull)));
    }
    CHECK(trial_seed(0, 1) == 0x9E3779B97F4A7C15ull);
}

TEST_CASE("experiment configs round-trip through JSON") {
    ExperimentConfig cfg;
    cfg.dataset_name = "demo";
    cfg.planted = PlantedParams{3, 50, 60, 25, 0.3};
    cfg.holdout_frac = 0.25;
    cfg.methods = {"ES", "GA"};
    cfg.budget = 9;
    cfg.trials = 4;
    cfg.init_pool_size = 2;
    cfg.master_seed = 99;
    cfg.space = SearchSpace{3, 40};
    cfg.lda.passes = 2;
    cfg.lda.batch_size = 64;
    cfg.lda.tau0 = 2.0;
    cfg.lda.kappa = 0.6;
    cfg.lda.e_step_iters = 50;
    cfg.lda.e_step_tol = 1e-4;
    cfg.lda.parallel = false;
    cfg.ga.pop_size = 6;
    cfg.ga.n_elite = 1;
    cfg.ga.tournament_k = 2;
    cfg.ga.p_cross = 0.8;
    cfg.ga.p_mut = 0.2;
    cfg.ga.delta_t = 3;
    cfg.ga.bit_width = 6;
    cfg.es.mu = 3;
    cfg.es.lambda = 7;
    cfg.es.sigma = 2.5;
    cfg.sabbo.mu = 0.4;
    cfg.sabbo.sigma2 = 0.03;
    cfg.sabbo.K = 8;
    cfg.sabbo.rho = 0.04;
    cfg.pabbo_checkpoint = "ck.json";
    cfg.pabbo_candidates = 32;
    cfg.pabbo_explore_rho = 0.2;

    const ExperimentConfig back = config_from_json_text(config_to_json_text(cfg));
    CHECK(back.dataset_name == "demo");
    REQUIRE(back.planted.has_value());
    CHECK(back.planted->t_true == 3);
    CHECK(back.planted->vocab == 50);
    CHECK(back.planted->docs == 60);
    CHECK(back.planted->doc_len == 25);
    CHECK(back.planted->concentration == 0.3);
    CHECK(back.holdout_frac == 0.25);
    CHECK(back.methods == std::vector<std::string>{"ES", "GA"});
    CHECK(back.budget == 9);
    CHECK(back.trials == 4);
    CHECK(back.init_pool_size == 2);
    CHECK(back.master_seed == 99);
    CHECK(back.space.t_min == 3);
    CHECK(back.space.t_max == 40);
    CHECK(back.lda.passes == 2);
    CHECK(back.lda.batch_size == 64);
    CHECK(back.lda.tau0 == 2.0);
    CHECK(back.lda.kappa == 0.6);
    CHECK(back.lda.e_step_iters == 50);
    CHECK(back.lda.e_step_tol == 1e-4);
    CHECK(back.lda.parallel == false);
    CHECK(back.ga.pop_size == 6);
    CHECK(back.ga.n_elite == 1);
    CHECK(back.ga.tournament_k == 2);
    CHECK(back.ga.p_cross == 0.8);
    CHECK(back.ga.p_mut == 0.2);
    CHECK(back.ga.delta_t == 3);
    CHECK(back.ga.bit_width == 6);
    CHECK(back.es.mu == 3);
    CHECK(back.es.lambda == 7);
    CHECK(back.es.sigma == 2.5);
    CHECK(back.sabbo.mu == 0.4);
    CHECK(back.sabbo.sigma2 == 0.03);
    CHECK(back.sabbo.K == 8);
    CHECK(back.sabbo.rho == 0.04);
    CHECK(back.pabbo_checkpoint == "ck.json");
    CHECK(back.pabbo_candidates == 32);
    CHECK(back.pabbo_explore_rho == 0.2);
}

TEST_CASE("config parsing fills defaults and rejects bad fields") {
    const ExperimentConfig cfg = config_from_json_text("{}");
    CHECK(cfg.dataset_name == "planted");
    CHECK(cfg.budget == 20);
    CHECK(cfg.trials == 10);
    CHECK(cfg.init_pool_size == 5);
    CHECK(cfg.space.t_min == 2);
    CHECK(cfg.space.t_max == 50);
    CHECK(cfg.methods.size() == 4);
    CHECK_FALSE(cfg.planted.has_value());

    CHECK(thrown_message([] { (void)config_from_json_text("not json"); })
              .find("invalid config JSON") != std::string::npos);
    CHECK_THROWS_AS((void)config_from_json_text("[1,2]"),
                    std::invalid_argument);
    CHECK(thrown_message([] {
              (void)config_from_json_text(R"({"methods":["GA","XX"]})");
          }).find("unknown method: XX") != std::string::npos);
    CHECK_THROWS_AS((void)config_from_json_text(R"({"trials":0})"),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)config_from_json_text(R"({"budget":0})"),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)config_from_json_text(R"({"holdout_frac":1.5})"),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)config_from_json_text(R"({"methods":[]})"),
                    std::invalid_argument);
}

TEST_CASE("experiments share one pool per trial and spend the exact budget") {
    write_test_checkpoint();
    const ExperimentConfig cfg = tiny_config(kCkptPath);
    const auto out = run_experiment(cfg);
    REQUIRE(out.size() == 8);

    for (std::size_t trial = 0; trial < 2; ++trial) {
        for (std::size_t m = 0; m < 4; ++m) {
            const Trajectory& cell = out[trial * 4 + m];
            CHECK(cell.dataset == "tiny");
            CHECK(cell.method == cfg.methods[m]);
            CHECK(cell.trial == trial);
            CHECK(cell.seed == trial_seed(cfg.master_seed, trial));
            REQUIRE_FALSE(cell.failed);
            REQUIRE(cell.records.size() == cfg.budget);
            for (const auto& rec : cell.records) {
                CHECK(rec.query >= 2.0);
                CHECK(rec.query <= 8.0);
                CHECK(rec.value > 0.0);
                CHECK(std::isfinite(rec.value));
            }
        }
        // Every method starts from the same three pool queries.
        const Trajectory& ga = out[trial * 4 + 0];
        for (std::size_t m = 1; m < 4; ++m) {
            const Trajectory& other = out[trial * 4 + m];
            for (std::size_t i = 0; i < cfg.init_pool_size; ++i) {
                CHECK(other.records[i].query == ga.records[i].query);
            }
        }
    }

    // Pool padding up to each population size is reported per cell.
    CHECK(out[0].note ==
          "initial pool padded to population size 4 with uniform queries");
    CHECK(out[1].note ==
          "initial pool padded to population size 5 with uniform queries");
    CHECK(out[2].note.empty());
    CHECK(out[3].note.empty());

    // Different trials draw different pools.
    bool pools_differ = false;
    for (std::size_t i = 0; i < cfg.init_pool_size; ++i) {
        if (out[0].records[i].query != out[4].records[i].query) {
            pools_differ = true;
        }
    }
    CHECK(pools_differ);

    // The whole experiment replays bitwise from the master seed.
    const auto again = run_experiment(cfg);
    REQUIRE(again.size() == out.size());
    for (std::size_t c = 0; c < out.size(); ++c) {
        REQUIRE(again[c].records.size() == out[c].records.size());
        for (std::size_t i = 0; i < out[c].records.size(); ++i) {
            CHECK(again[c].records[i].query == out[c].records[i].query);
            CHECK(again[c].records[i].value == out[c].records[i].value);
            CHECK(again[c].records[i].cache_hit == out[c].records[i].cache_hit);
        }
    }

    const SummaryTable table = summarize(out);
    REQUIRE(table.rows.size() == 4);
    for (const auto& row : table.rows) {
        CHECK(row.n == 2);
        CHECK_FALSE(row.missing);
        CHECK_FALSE(row.single_trial);
        CHECK(std::isfinite(row.mean));
        CHECK(row.mean > 0.0);
    }
    std::remove(kCkptPath.c_str());
}

TEST_CASE("a broken cell is isolated while the rest of the grid completes") {
    ExperimentConfig cfg = tiny_config("missing_ckpt_xyz.json");
    cfg.trials = 1;
    const auto out = run_experiment(cfg);
    REQUIRE(out.size() == 4);
    for (std::size_t m = 0; m < 4; ++m) {
        if (cfg.methods[m] == "PABBO") {
            CHECK(out[m].failed);
            CHECK(out[m].error.find("cannot open policy file") !=
                  std::string::npos);
            CHECK(out[m].records.empty());
        } else {
            CHECK_FALSE(out[m].failed);
            CHECK(out[m].records.size() == cfg.budget);
        }
    }

    const SummaryTable table = summarize(out);
    REQUIRE(table.rows.size() == 4);
    CHECK(table.rows[2].method == "PABBO");
    CHECK(table.rows[2].missing);
    CHECK(table.rows[2].n == 0);
    const std::string csv = summary_to_csv(table);
    CHECK(csv.find("tiny,PABBO,0,,,0,1\n") != std::string::npos);

    ExperimentConfig blank = cfg;
    blank.pabbo_checkpoint = "";
    const auto out2 = run_experiment(blank);
    CHECK(out2[2].failed);
    CHECK(out2[2].error == "PABBO requires a policy checkpoint path");
}

TEST_CASE("the dataset source must be exactly one of file or generator") {
    ExperimentConfig both = tiny_config(kCkptPath);
    both.matrix_path = "some_matrix.json";
    CHECK(thrown_message([&] { (void)run_experiment(both); })
              .find("exactly one of matrix_path or planted") !=
          std::string::npos);

    ExperimentConfig neither = tiny_config(kCkptPath);
    neither.planted.reset();
    CHECK_THROWS_AS((void)run_experiment(neither), std::invalid_argument);
}

TEST_CASE("summaries aggregate final bests with sample standard deviation") {
    std::vector<Trajectory> runs;
    runs.push_back(make_run("d", "GA", 0, {7.0, 3.0}, 1.0));
    runs.push_back(make_run("d", "GA", 1, {5.0, 6.0}, 1.0));
    runs.push_back(make_run("d", "ES", 0, {7.0}, 1.0));
    Trajectory dead;
    dead.dataset = "d";
    dead.method = "SABBO";
    dead.trial = 0;
    dead.failed = true;
    dead.error = "boom";
    runs.push_back(dead);

    const SummaryTable table = summarize(runs);
    REQUIRE(table.rows.size() == 3);
    CHECK(table.rows[0].method == "GA");
    CHECK(table.rows[0].n == 2);
    // finals 3 and 5: mean 4, sample std sqrt(2).
    CHECK(table.rows[0].mean == 4.0);
    CHECK(table.rows[0].stddev == std::sqrt(2.0));
    CHECK_FALSE(table.rows[0].single_trial);
    CHECK(table.rows[1].method == "ES");
    CHECK(table.rows[1].single_trial);
    CHECK(table.rows[1].stddev == 0.0);
    CHECK(table.rows[2].missing);

    const std::string csv = summary_to_csv(table);
    CHECK(csv ==
          "dataset,method,n_trials,mean_final_best,std_final_best,"
          "single_trial,missing\n"
          "d,GA,2,4,1.4142135623730951,0,0\n"
          "d,ES,1,7,0,1,0\n"
          "d,SABBO,0,,,0,1\n");
}

TEST_CASE("aggregate curves align trials on the shortest completed run") {
    std::vector<Trajectory> runs;
    runs.push_back(make_run("d", "GA", 0, {5.0, 3.0}, 1.0));
    runs.push_back(make_run("d", "GA", 1, {4.0, 6.0, 2.0}, 2.0));
    Trajectory dead;
    dead.dataset = "d";
    dead.method = "ES";
    dead.failed = true;
    runs.push_back(dead);

    const json j = json::parse(aggregate_to_json(runs));
    CHECK(j.at("format_version") == 1);
    REQUIRE(j.at("cells").size() == 2);
    const json& ga = j.at("cells").at(0);
    CHECK(ga.at("dataset") == "d");
    CHECK(ga.at("method") == "GA");
    CHECK(ga.at("trials") == 2);
    // Two and three records: curves stop at step 2.
    CHECK(ga.at("by_step").at("step") == json({1, 2}));
    CHECK(ga.at("by_step").at("mean").at(0).get<double>() == 4.5);
    CHECK(ga.at("by_step").at("mean").at(1).get<double>() == 3.5);
    CHECK(ga.at("by_step").at("std").at(0).get<double>() == std::sqrt(0.5));
    CHECK(ga.at("by_step").at("std").at(1).get<double>() == std::sqrt(0.5));
    CHECK(ga.at("by_time").at("mean_cumulative_ms").at(0).get<double>() == 1.5);
    CHECK(ga.at("by_time").at("mean_cumulative_ms").at(1).get<double>() == 3.0);
    CHECK(ga.at("by_time").at("mean") == ga.at("by_step").at("mean"));
    CHECK(ga.at("by_time").at("std") == ga.at("by_step").at("std"));

    const json& es = j.at("cells").at(1);
    CHECK(es.at("method") == "ES");
    CHECK(es.at("trials") == 0);
    CHECK(es.at("by_step").at("step").empty());
}

TEST_CASE("export writes the four result files next to the given prefix") {
    std::vector<Trajectory> runs;
    runs.push_back(make_run("d", "GA", 0, {5.0, 3.0}, 1.0));
    export_files(runs, "harness_export_test");

    const auto slurp = [](const std::string& path) {
        std::ifstream in(path);
        REQUIRE(in.good());
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        return text;
    };
    const std::string traj = slurp("harness_export_test_trajectories.csv");
    CHECK(traj.rfind("dataset,method,trial,step,query,value,best_so_far,"
                     "wall_clock_ms,cache_hit\n", 0) == 0);
    const std::string summary = slurp("harness_export_test_summary.csv");
    CHECK(summary.rfind("dataset,method,n_trials,", 0) == 0);
    const std::string pol = slurp("harness_export_test_policy_ms.csv");
    CHECK(pol.rfind("dataset,method,trial,step,policy_ms", 0) == 0);
    const json agg = json::parse(slurp("harness_export_test_aggregate.json"));
    CHECK(agg.at("format_version") == 1);

    for (const char* suffix :
         {"_trajectories.csv", "_summary.csv", "_aggregate.json",
          "_policy_ms.csv"}) {
        std::remove((std::string("harness_export_test") + suffix).c_str());
    }

    CHECK(thrown_message([&] { export_files(runs, "no_such_dir/x"); })
              .find("cannot write file") != std::string::npos);
}
