#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "topicopt/corpus.hpp"
#include "topicopt/lda.hpp"

namespace topicopt {

struct SearchSpace {
    int t_min = 2;
    int t_max = 1000;
};

// One ledger entry. step_index is 1-based and strictly increasing; cache
// hits consume budget but skip recomputation, so wall_clock_ms == 0 exactly
// when cache_hit.
struct EvalRecord {
    std::size_t step_index = 0;
    double query = 0.0;
    double value = 0.0;
    double wall_clock_ms = 0.0;
    bool cache_hit = false;
};

class BudgetExhausted : public std::runtime_error {
public:
    BudgetExhausted() : std::runtime_error("objective budget exhausted") {}
};

enum class Direction { minimize, maximize };

// Budgeted, cached, ledger-backed black box. Values are always reported in
// minimize convention: a maximize task is sign-flipped at construction.
class Objective {
public:
    enum class Domain { integer_t, real_x };

    static Objective over_integers(std::function<double(double)> fn,
                                   SearchSpace space,
                                   Direction dir = Direction::minimize);
    static Objective over_reals(std::function<double(double)> fn, double lo,
                                double hi,
                                Direction dir = Direction::minimize);

    EvalRecord evaluate(double query);

    void set_budget(std::size_t budget) { budget_ = budget; }
    std::size_t budget() const { return budget_; }
    std::size_t used() const { return ledger_.size(); }
    std::size_t remaining() const {
        return budget_ > used() ? budget_ - used() : 0;
    }

    const std::vector<EvalRecord>& ledger() const { return ledger_; }
    bool has_best() const { return !ledger_.empty(); }
    double best_value() const;
    double best_query() const;

    Domain domain() const { return domain_; }
    SearchSpace space() const { return space_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }

private:
    Objective() = default;

    std::function<double(double)> fn_;
    Domain domain_ = Domain::integer_t;
    SearchSpace space_;
    double lo_ = 0.0, hi_ = 1.0;
    bool flipped_ = false;
    std::size_t budget_ = SIZE_MAX;
    std::map<double, double> cache_;
    std::vector<EvalRecord> ledger_;
};

EvalRecord evaluate(Objective& obj, double query);

// Validation-perplexity objective over integer T; priors are alpha = beta =
// 1/T exactly for the queried T.
Objective make_lda_objective(std::shared_ptr<const DocumentTermMatrix> train,
                             std::shared_ptr<const DocumentTermMatrix> validation,
                             SearchSpace space, TrainConfig lda_config);

// 10 + x^2 - 10 cos(2 pi x)
double rastrigin_1d(double x);

// One draw from a GP prior on a uniform grid over [0,1], linearly
// interpolated between grid points.
struct GridFunction {
    std::vector<double> values;
    double operator()(double x) const;
};
GridFunction sample_gp1d_function(std::uint64_t seed, double lengthscale = 0.1,
                                  std::size_t grid_size = 256);
Objective sample_gp1d(std::uint64_t seed, double lengthscale = 0.1,
                      std::size_t grid_size = 256);

// header: step,query,value,best_so_far,wall_clock_ms,cache_hit
void export_ledger_csv(const std::vector<EvalRecord>& ledger, std::ostream& out);

// Shortest round-trip decimal text for a double; integral values print
// without a decimal point.
std::string format_number(double v);

}  // namespace topicopt
