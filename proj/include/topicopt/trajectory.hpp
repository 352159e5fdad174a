#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "topicopt/objective.hpp"

namespace topicopt {

// One (method, trial) run: the objective ledger plus derived curves.
// policy_ms[i] is the optimizer-side computation time spent choosing
// records[i] (nonzero only for PABBO/SABBO steps).
struct Trajectory {
    std::string dataset;
    std::string method;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    std::vector<EvalRecord> records;
    std::vector<std::size_t> boundaries;  // 1-based steps starting a generation
    std::vector<double> policy_ms;
    std::string note;
    bool failed = false;
    std::string error;

    std::vector<double> best_so_far() const;
    std::vector<double> cumulative_ms() const;
    double final_best() const;
    // Query achieving the minimum value; ties go to the smaller query.
    double best_query() const;
};

// columns: dataset,method,trial,step,query,value,best_so_far,wall_clock_ms,cache_hit
void export_trajectory_csv(const std::vector<Trajectory>& trajectories,
                           std::ostream& out);
std::vector<Trajectory> import_trajectory_csv(std::istream& in);

// columns: dataset,method,trial,step,policy_ms
void export_policy_ms_csv(const std::vector<Trajectory>& trajectories,
                          std::ostream& out);

}  // namespace topicopt
