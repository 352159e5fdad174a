#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "topicopt/trajectory.hpp"

#include <sstream>
#include <stdexcept>
#include <vector>

using namespace topicopt;

namespace {

Trajectory sample_trajectory() {
    Trajectory tr;
    tr.dataset = "planted";
    tr.method = "GA";
    tr.trial = 2;
    tr.seed = 101;
    tr.records.push_back({1, 30.0, 7.0, 1.5, false});
    tr.records.push_back({2, 50.0, 4.0, 2.0, false});
    tr.records.push_back({3, 44.0, 9.0, 0.5, false});
    tr.records.push_back({4, 50.0, 4.0, 0.0, true});
    tr.records.push_back({5, 12.0, 4.0, 1.0, false});
    return tr;
}

}  // namespace

TEST_CASE("best_so_far is the running minimum") {
    Trajectory tr = sample_trajectory();
    CHECK(tr.best_so_far() == std::vector<double>{7.0, 4.0, 4.0, 4.0, 4.0});
    CHECK(tr.final_best() == 4.0);
    for (std::size_t i = 1; i < tr.best_so_far().size(); ++i) {
        CHECK(tr.best_so_far()[i] <= tr.best_so_far()[i - 1]);
    }
}

TEST_CASE("cumulative time is non-decreasing and sums the ledger") {
    Trajectory tr = sample_trajectory();
    const std::vector<double> expected = {1.5, 3.5, 4.0, 4.0, 5.0};
    CHECK(tr.cumulative_ms() == expected);
}

TEST_CASE("best query breaks value ties toward the smaller query") {
    Trajectory tr = sample_trajectory();
    // Value 4.0 is reached at queries 50, 50, and 12.
    CHECK(tr.best_query() == 12.0);
}

TEST_CASE("empty trajectories refuse to summarize") {
    Trajectory tr;
    CHECK_THROWS_AS(tr.final_best(), std::logic_error);
    CHECK_THROWS_AS(tr.best_query(), std::logic_error);
    CHECK(tr.best_so_far().empty());
    CHECK(tr.cumulative_ms().empty());
}

TEST_CASE("trajectory csv round-trips records exactly") {
    Trajectory a = sample_trajectory();
    Trajectory b = sample_trajectory();
    b.method = "ES";
    b.trial = 0;
    b.records[1].query = 3.25;

    std::ostringstream out;
    export_trajectory_csv({a, b}, out);

    std::istringstream in(out.str());
    std::vector<Trajectory> back = import_trajectory_csv(in);
    REQUIRE(back.size() == 2);
    CHECK(back[0].dataset == "planted");
    CHECK(back[0].method == "GA");
    CHECK(back[0].trial == 2);
    CHECK(back[1].method == "ES");
    CHECK(back[1].trial == 0);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(back[0].records[i].step_index == a.records[i].step_index);
        CHECK(back[0].records[i].query == a.records[i].query);
        CHECK(back[0].records[i].value == a.records[i].value);
        CHECK(back[0].records[i].wall_clock_ms == a.records[i].wall_clock_ms);
        CHECK(back[0].records[i].cache_hit == a.records[i].cache_hit);
    }
    CHECK(back[1].records[1].query == 3.25);
    CHECK(back[1].final_best() == a.final_best());
}

TEST_CASE("export writes the documented header and skips failed runs") {
    Trajectory ok = sample_trajectory();
    Trajectory bad = sample_trajectory();
    bad.trial = 9;
    bad.failed = true;
    bad.error = "synthetic";

    std::ostringstream out;
    export_trajectory_csv({ok, bad}, out);
    const std::string text = out.str();
    CHECK(text.rfind("dataset,method,trial,step,query,value,best_so_far,"
                     "wall_clock_ms,cache_hit\n",
                     0) == 0);
    CHECK(text.find("planted,GA,9,") == std::string::npos);

    // First data row is exact: derived best equals the first value.
    std::istringstream lines(text);
    std::string header, row;
    std::getline(lines, header);
    std::getline(lines, row);
    CHECK(row == "planted,GA,2,1,30,7,7,1.5,0");
}

TEST_CASE("import validates header and row shape") {
    std::istringstream empty("");
    CHECK_THROWS_WITH_AS(import_trajectory_csv(empty),
                         "trajectory csv: missing header", std::runtime_error);

    std::istringstream wrong("step,value\n");
    CHECK_THROWS_WITH_AS(import_trajectory_csv(wrong),
                         "trajectory csv: unexpected header",
                         std::runtime_error);

    std::istringstream short_row(
        "dataset,method,trial,step,query,value,best_so_far,wall_clock_ms,"
        "cache_hit\n"
        "planted,GA,0,1,30\n");
    CHECK_THROWS_WITH_AS(import_trajectory_csv(short_row),
                         "trajectory csv: short row", std::runtime_error);
}

TEST_CASE("policy time sidecar aligns rows with ledger steps") {
    Trajectory tr = sample_trajectory();
    tr.method = "SABBO";
    tr.policy_ms = {0.0, 0.25, 0.5};  // shorter than records: rest pad as 0

    std::ostringstream out;
    export_policy_ms_csv({tr}, out);
    CHECK(out.str() ==
          "dataset,method,trial,step,policy_ms\n"
          "planted,SABBO,2,1,0\n"
          "planted,SABBO,2,2,0.25\n"
          "planted,SABBO,2,3,0.5\n"
          "planted,SABBO,2,4,0\n"
          "planted,SABBO,2,5,0\n");

    // Runs without recorded policy time produce no rows at all.
    Trajectory none = sample_trajectory();
    std::ostringstream out2;
    export_policy_ms_csv({none}, out2);
    CHECK(out2.str() == "dataset,method,trial,step,policy_ms\n");
}
