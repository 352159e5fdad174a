#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "topicopt/objective.hpp"
#include "topicopt/rng.hpp"

#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

using namespace topicopt;

namespace {

Objective absdiff(double target, int lo = 2, int hi = 1000) {
    SearchSpace space;
    space.t_min = lo;
    space.t_max = hi;
    return Objective::over_integers(
        [target](double q) { return std::abs(q - target); }, space);
}

}  // namespace

TEST_CASE("rastrigin known points") {
    CHECK(rastrigin_1d(0.0) == 0.0);
    CHECK(std::abs(rastrigin_1d(1.0) - 1.0) < 1e-12);
    CHECK(std::abs(rastrigin_1d(0.5) - 20.25) < 1e-12);
    CHECK(std::abs(rastrigin_1d(-0.5) - 20.25) < 1e-12);
}

TEST_CASE("budget is enforced exactly") {
    Objective obj = absdiff(37);
    obj.set_budget(5);
    CHECK(obj.remaining() == 5);
    for (int i = 0; i < 5; ++i) obj.evaluate(10 + i);
    CHECK(obj.used() == 5);
    CHECK(obj.remaining() == 0);
    CHECK_THROWS_WITH_AS(obj.evaluate(50), "objective budget exhausted",
                         BudgetExhausted);
    CHECK(obj.used() == 5);
}

TEST_CASE("step indexes are 1-based and strictly increasing") {
    Objective obj = absdiff(37);
    obj.set_budget(4);
    for (std::size_t i = 1; i <= 4; ++i) {
        EvalRecord rec = obj.evaluate(static_cast<double>(2 * i + 10));
        CHECK(rec.step_index == i);
    }
    for (std::size_t i = 1; i < obj.ledger().size(); ++i) {
        CHECK(obj.ledger()[i].step_index ==
              obj.ledger()[i - 1].step_index + 1);
    }
}

TEST_CASE("repeat queries hit the cache but still consume budget") {
    Objective obj = absdiff(37);
    obj.set_budget(3);

    EvalRecord first = obj.evaluate(40);
    CHECK_FALSE(first.cache_hit);
    CHECK(first.value == 3.0);
    CHECK(first.wall_clock_ms > 0.0);

    EvalRecord second = obj.evaluate(40);
    CHECK(second.cache_hit);
    CHECK(second.value == first.value);
    CHECK(second.wall_clock_ms == 0.0);
    CHECK(obj.used() == 2);

    obj.evaluate(40);
    CHECK_THROWS_AS(obj.evaluate(40), BudgetExhausted);
}

TEST_CASE("integer domain rounds near-integers and rejects the rest") {
    Objective obj = absdiff(37);
    EvalRecord rec = obj.evaluate(10.0 + 1e-10);
    CHECK(rec.query == 10.0);
    CHECK(rec.value == 27.0);

    CHECK_THROWS_AS(obj.evaluate(10.4), std::out_of_range);
    CHECK_THROWS_AS(obj.evaluate(1.0), std::out_of_range);     // below t_min
    CHECK_THROWS_AS(obj.evaluate(1001.0), std::out_of_range);  // above t_max
    // Rejected queries never reach the ledger.
    CHECK(obj.used() == 1);
    obj.evaluate(2.0);
    obj.evaluate(1000.0);
    CHECK(obj.used() == 3);
}

TEST_CASE("real domain checks bounds and keeps queries unrounded") {
    Objective obj = Objective::over_reals(
        [](double x) { return (x - 0.25) * (x - 0.25); }, 0.0, 1.0);
    CHECK(obj.domain() == Objective::Domain::real_x);
    CHECK(obj.evaluate(0.0).value == doctest::Approx(0.0625));
    CHECK(obj.evaluate(1.0).query == 1.0);
    CHECK(obj.evaluate(0.3).query == 0.3);
    CHECK_THROWS_AS(obj.evaluate(-0.01), std::out_of_range);
    CHECK_THROWS_AS(obj.evaluate(1.01), std::out_of_range);
}

TEST_CASE("maximize flips the sign into minimize convention") {
    SearchSpace space;
    space.t_min = 0;
    space.t_max = 10;
    Objective obj = Objective::over_integers(
        [](double q) { return q; }, space, Direction::maximize);
    obj.evaluate(3);
    obj.evaluate(7);
    CHECK(obj.best_value() == -7.0);
    CHECK(obj.best_query() == 7.0);
}

TEST_CASE("ties on value resolve to the smaller query") {
    SearchSpace space;
    space.t_min = 2;
    space.t_max = 100;
    Objective obj =
        Objective::over_integers([](double) { return 1.5; }, space);
    obj.evaluate(30);
    obj.evaluate(20);
    obj.evaluate(25);
    CHECK(obj.best_value() == 1.5);
    CHECK(obj.best_query() == 20.0);
    CHECK(obj.has_best());
}

TEST_CASE("grid function interpolates linearly and clamps") {
    GridFunction g;
    g.values = {0.0, 2.0, 4.0};
    CHECK(g(0.0) == 0.0);
    CHECK(g(0.5) == 2.0);
    CHECK(g(0.25) == 1.0);
    CHECK(g(1.0) == 4.0);
    CHECK(g(-3.0) == 0.0);
    CHECK(g(7.0) == 4.0);
}

TEST_CASE("gp draws are seed-deterministic with unit marginal variance") {
    GridFunction a = sample_gp1d_function(5, 0.1, 64);
    GridFunction b = sample_gp1d_function(5, 0.1, 64);
    CHECK(a.values == b.values);
    GridFunction c = sample_gp1d_function(6, 0.1, 64);
    CHECK(a.values != c.values);
    CHECK(a.values.size() == 64);

    // f(0) = L00 z0 with K00 = 1: variance 1 across seeds.
    const int n = 20000;
    double sum = 0.0, sumsq = 0.0;
    for (int s = 0; s < n; ++s) {
        const double v = sample_gp1d_function(1000 + s, 0.1, 16).values[0];
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.03);
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("gp draws decorrelate across the lengthscale") {
    // corr(f(0), f(1)) with lengthscale 0.5 is exp(-2); with 0.1 it is ~0.
    const int n = 20000;
    double s00 = 0.0, s11 = 0.0, s01 = 0.0, m0 = 0.0, m1 = 0.0;
    for (int s = 0; s < n; ++s) {
        GridFunction g = sample_gp1d_function(55000 + s, 0.5, 8);
        const double a = g.values.front(), b = g.values.back();
        m0 += a;
        m1 += b;
        s00 += a * a;
        s11 += b * b;
        s01 += a * b;
    }
    m0 /= n;
    m1 /= n;
    const double corr = (s01 / n - m0 * m1) /
                        std::sqrt((s00 / n - m0 * m0) * (s11 / n - m1 * m1));
    CHECK(corr == doctest::Approx(std::exp(-2.0)).epsilon(0.15));
}

TEST_CASE("gp draws are smooth at the default lengthscale") {
    GridFunction g = sample_gp1d_function(7);
    CHECK(g.values.size() == 256);
    double max_step = 0.0;
    for (std::size_t i = 1; i < g.values.size(); ++i) {
        max_step = std::max(max_step, std::abs(g.values[i] - g.values[i - 1]));
    }
    // Adjacent grid points at spacing 1/255 of lengthscale 0.1 stay close.
    CHECK(max_step < 0.5);

    CHECK_THROWS_AS(sample_gp1d_function(1, 0.1, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_gp1d_function(1, 0.0, 64), std::invalid_argument);
}

TEST_CASE("gp objective is a bounded real-domain black box") {
    Objective obj = sample_gp1d(99);
    CHECK(obj.domain() == Objective::Domain::real_x);
    CHECK(obj.lo() == 0.0);
    CHECK(obj.hi() == 1.0);
    obj.set_budget(2);
    const double v = obj.evaluate(0.5).value;
    GridFunction g = sample_gp1d_function(99);
    CHECK(v == g(0.5));
}

TEST_CASE("lda objective evaluates perplexity with priors of one over T") {
    auto corpus = generate_planted_corpus(3, 60, 40, 25, 0.2, 61);
    auto [train_m, val_m] = split(corpus, 0.2, 62);
    auto train = std::make_shared<const DocumentTermMatrix>(std::move(train_m));
    auto val = std::make_shared<const DocumentTermMatrix>(std::move(val_m));

    TrainConfig cfg;
    cfg.passes = 1;
    cfg.batch_size = 16;
    cfg.seed = 63;

    SearchSpace space;
    space.t_min = 2;
    space.t_max = 20;
    Objective obj = make_lda_objective(train, val, space, cfg);

    EvalRecord rec = obj.evaluate(4);
    const double prior = 1.0 / 4.0;
    const LdaModel direct = fit(*train, 4, prior, prior, cfg);
    CHECK(rec.value == perplexity(direct, *val));
    CHECK(rec.value > 1.0);
    CHECK(rec.value < 60.0);

    // Same T again: served from cache without refitting.
    EvalRecord again = obj.evaluate(4);
    CHECK(again.cache_hit);
    CHECK(again.value == rec.value);

    CHECK_THROWS_AS(make_lda_objective(nullptr, val, space, cfg),
                    std::invalid_argument);
    SearchSpace bad;
    bad.t_min = 5;
    bad.t_max = 2;
    CHECK_THROWS_AS(make_lda_objective(train, val, bad, cfg),
                    std::invalid_argument);
}

TEST_CASE("ledger csv lays out exact rows") {
    std::vector<EvalRecord> ledger;
    ledger.push_back({1, 37.0, 5.0, 0.25, false});
    ledger.push_back({2, 2.5, 3.0, 0.125, false});
    ledger.push_back({3, 2.5, 3.0, 0.0, true});
    std::ostringstream out;
    export_ledger_csv(ledger, out);
    CHECK(out.str() ==
          "step,query,value,best_so_far,wall_clock_ms,cache_hit\n"
          "1,37,5,5,0.25,0\n"
          "2,2.5,3,3,0.125,0\n"
          "3,2.5,3,3,0,1\n");
}

TEST_CASE("numbers format as shortest round-trip text") {
    CHECK(format_number(37.0) == "37");
    CHECK(format_number(-2.0) == "-2");
    CHECK(format_number(0.0) == "0");
    CHECK(format_number(2.5) == "2.5");
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1.7548) == "1.7548");
    const double v = 123.456789;
    CHECK(std::stod(format_number(v)) == v);
}

TEST_CASE("free evaluate forwards to the objective") {
    Objective obj = absdiff(5, 2, 10);
    EvalRecord rec = evaluate(obj, 7);
    CHECK(rec.value == 2.0);
    CHECK(obj.used() == 1);
}
