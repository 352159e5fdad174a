#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "topicopt/evo.hpp"
#include "topicopt/lda.hpp"
#include "topicopt/objective.hpp"
#include "topicopt/pabbo.hpp"
#include "topicopt/sabbo.hpp"
#include "topicopt/trajectory.hpp"

namespace topicopt {

struct PlantedParams {
    std::size_t t_true = 5;
    std::size_t vocab = 200;
    std::size_t docs = 500;
    std::size_t doc_len = 80;
    double concentration = 0.1;
};

struct ExperimentConfig {
    std::string dataset_name = "planted";
    std::string matrix_path;                 // preprocessed matrix JSON, or
    std::optional<PlantedParams> planted;    // generate on the fly
    double holdout_frac = 0.2;
    std::vector<std::string> methods = {"GA", "ES", "PABBO", "SABBO"};
    std::size_t budget = 20;
    std::size_t trials = 10;
    std::size_t init_pool_size = 5;
    std::uint64_t master_seed = 0;
    SearchSpace space{2, 50};
    TrainConfig lda;
    GaConfig ga;
    EsConfig es;
    SabboState sabbo;
    std::string pabbo_checkpoint;
    std::size_t pabbo_candidates = 64;
    double pabbo_explore_rho = 0.1;
};

ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& cfg);

// Shared-pool protocol: per trial, one uniformly sampled pool of
// init_pool_size queries is handed to every method together with a fresh
// objective (same LDA seed per trial); each cell runs to exactly
// cfg.budget queries. A failing cell is recorded and skipped, the rest
// proceed.
std::vector<Trajectory> run_experiment(const ExperimentConfig& cfg);

struct SummaryRow {
    std::string dataset;
    std::string method;
    std::size_t n = 0;        // completed trials
    double mean = 0.0;
    double stddev = 0.0;      // sample std, n-1 denominator; 0 when n == 1
    bool single_trial = false;
    bool missing = false;     // no completed trajectory in the cell
};
struct SummaryTable {
    std::vector<SummaryRow> rows;
};

SummaryTable summarize(const std::vector<Trajectory>& trajectories);

// Writes <prefix>_trajectories.csv, <prefix>_summary.csv,
// <prefix>_aggregate.json and <prefix>_policy_ms.csv.
void export_files(const std::vector<Trajectory>& trajectories,
                  const std::string& prefix);

std::string summary_to_csv(const SummaryTable& table);
std::string aggregate_to_json(const std::vector<Trajectory>& trajectories);

// trial_seed = master_seed XOR (trial_index * 0x9E3779B97F4A7C15)
std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial_index);

}  // namespace topicopt
