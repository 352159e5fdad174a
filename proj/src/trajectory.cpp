#include "topicopt/trajectory.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace topicopt {

std::vector<double> Trajectory::best_so_far() const {
    std::vector<double> out;
    out.reserve(records.size());
    double best = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        best = i == 0 ? records[i].value : std::min(best, records[i].value);
        out.push_back(best);
    }
    return out;
}

std::vector<double> Trajectory::cumulative_ms() const {
    std::vector<double> out;
    out.reserve(records.size());
    double acc = 0.0;
    for (const auto& r : records) {
        acc += r.wall_clock_ms;
        out.push_back(acc);
    }
    return out;
}

double Trajectory::final_best() const {
    if (records.empty()) {
        throw std::logic_error("final_best: empty trajectory");
    }
    return best_so_far().back();
}

double Trajectory::best_query() const {
    if (records.empty()) {
        throw std::logic_error("best_query: empty trajectory");
    }
    double bv = records.front().value;
    double bq = records.front().query;
    for (const auto& r : records) {
        if (r.value < bv || (r.value == bv && r.query < bq)) {
            bv = r.value;
            bq = r.query;
        }
    }
    return bq;
}

void export_trajectory_csv(const std::vector<Trajectory>& trajectories,
                           std::ostream& out) {
    out << "dataset,method,trial,step,query,value,best_so_far,wall_clock_ms,"
           "cache_hit\n";
    for (const auto& tr : trajectories) {
        if (tr.failed) continue;
        double best = 0.0;
        bool first = true;
        for (const auto& r : tr.records) {
            best = first ? r.value : std::min(best, r.value);
            first = false;
            out << tr.dataset << ',' << tr.method << ',' << tr.trial << ','
                << r.step_index << ',' << format_number(r.query) << ','
                << format_number(r.value) << ',' << format_number(best) << ','
                << format_number(r.wall_clock_ms) << ','
                << (r.cache_hit ? 1 : 0) << '\n';
        }
    }
}

std::vector<Trajectory> import_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("trajectory csv: missing header");
    }
    if (line != "dataset,method,trial,step,query,value,best_so_far,"
                "wall_clock_ms,cache_hit") {
        throw std::runtime_error("trajectory csv: unexpected header");
    }
    std::vector<Trajectory> out;
    auto cell = [](std::istringstream& ss) {
        std::string s;
        if (!std::getline(ss, s, ',')) {
            throw std::runtime_error("trajectory csv: short row");
        }
        return s;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        const std::string dataset = cell(ss);
        const std::string method = cell(ss);
        const std::size_t trial = std::stoull(cell(ss));
        EvalRecord r;
        r.step_index = std::stoull(cell(ss));
        r.query = std::stod(cell(ss));
        r.value = std::stod(cell(ss));
        cell(ss);  // best_so_far is derived; ignored on import
        r.wall_clock_ms = std::stod(cell(ss));
        r.cache_hit = cell(ss) == "1";
        if (out.empty() || out.back().dataset != dataset ||
            out.back().method != method || out.back().trial != trial) {
            Trajectory t;
            t.dataset = dataset;
            t.method = method;
            t.trial = trial;
            out.push_back(std::move(t));
        }
        out.back().records.push_back(r);
    }
    return out;
}

void export_policy_ms_csv(const std::vector<Trajectory>& trajectories,
                          std::ostream& out) {
    out << "dataset,method,trial,step,policy_ms\n";
    for (const auto& tr : trajectories) {
        if (tr.failed || tr.policy_ms.empty()) continue;
        for (std::size_t i = 0; i < tr.records.size(); ++i) {
            const double ms = i < tr.policy_ms.size() ? tr.policy_ms[i] : 0.0;
            out << tr.dataset << ',' << tr.method << ',' << tr.trial << ','
                << tr.records[i].step_index << ',' << format_number(ms) << '\n';
        }
    }
}

}  // namespace topicopt
