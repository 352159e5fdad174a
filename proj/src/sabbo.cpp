#include "topicopt/sabbo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace topicopt {

namespace {

constexpr double kSigma2Floor = 1e-4;
constexpr double kSigma2Cap = 1.0;  // normalized space has width 1

double clip01(double x) { return std::min(1.0, std::max(0.0, x)); }

}  // namespace

double sabbo_to_query(const Objective& obj, double x) {
    if (obj.domain() == Objective::Domain::real_x) {
        return std::min(obj.hi(), std::max(obj.lo(), x));
    }
    const SearchSpace s = obj.space();
    const double span = static_cast<double>(s.t_max - s.t_min);
    const long long t =
        s.t_min + std::llround(clip01(x) * span);
    return static_cast<double>(
        std::min<long long>(s.t_max, std::max<long long>(s.t_min, t)));
}

double sabbo_to_normalized(const Objective& obj, double query) {
    if (obj.domain() == Objective::Domain::real_x) {
        const double span = obj.hi() - obj.lo();
        return span > 0.0 ? (query - obj.lo()) / span : 0.0;
    }
    const SearchSpace s = obj.space();
    const double span = static_cast<double>(s.t_max - s.t_min);
    return span > 0.0 ? (query - s.t_min) / span : 0.0;
}

std::vector<double> rank_shape(const std::vector<double>& values) {
    const std::size_t K = values.size();
    if (K == 0) return {};
    if (K == 1) return {0.0};
    // order sorted by descending value: position 0 is the worst
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         return values[a] > values[b];
                     });
    std::vector<double> u(K);
    std::size_t i = 0;
    while (i < K) {
        std::size_t j = i;
        while (j + 1 < K && values[order[j + 1]] == values[order[i]]) ++j;
        // tie block shares the mean of its positions' utilities
        double mean = 0.0;
        for (std::size_t k = i; k <= j; ++k) {
            mean += static_cast<double>(k) / static_cast<double>(K - 1) - 0.5;
        }
        mean /= static_cast<double>(j - i + 1);
        for (std::size_t k = i; k <= j; ++k) u[order[k]] = mean;
        i = j + 1;
    }
    return u;
}

SabboState sabbo_step(const SabboState& state, Objective& obj, Rng& rng,
                      ShapedBatch* batch_out) {
    if (state.K < 1) throw std::invalid_argument("sabbo_step: K must be >= 1");
    const double prec = 1.0 / state.sigma2;
    const double sd = std::sqrt(state.sigma2);

    std::vector<double> xs;
    xs.reserve(state.K + 2);
    for (std::size_t k = 0; k < state.K; ++k) {
        xs.push_back(clip01(state.mu + sd * rng.normal()));
    }
    xs.push_back(clip01(state.mu - state.rho));
    xs.push_back(clip01(state.mu + state.rho));

    std::vector<double> vals;
    vals.reserve(xs.size());
    std::size_t spent = 0;
    for (double x : xs) {
        try {
            vals.push_back(obj.evaluate(sabbo_to_query(obj, x)).value);
            spent += 1;
        } catch (const BudgetExhausted&) {
            throw SabboPartialStep(spent);
        }
    }

    std::vector<double> u = rank_shape(vals);
    std::vector<double> w(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) w[i] = -u[i];

    // Fold the worst value inside the rho-ball to rank-worst badness.
    std::size_t worst = xs.size();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (std::abs(xs[i] - state.mu) <= state.rho + 1e-12) {
            if (worst == xs.size() || vals[i] > vals[worst]) worst = i;
        }
    }
    if (worst < xs.size()) w[worst] = 0.5;

    double ghat = 0.0;
    double G = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double d = xs[i] - state.mu;
        ghat += w[i] * prec * d;
        G += w[i] * prec * d * d * prec;
    }
    ghat /= static_cast<double>(state.K);
    G /= static_cast<double>(state.K);

    const double beta = 1.0 / static_cast<double>(state.t);
    SabboState next = state;
    next.mu = clip01(state.mu - beta * state.sigma2 * ghat);
    const double prec_next = prec + 2.0 * beta * G;
    next.sigma2 = 1.0 / std::min(1.0 / kSigma2Floor,
                                 std::max(1.0 / kSigma2Cap, prec_next));
    next.t = state.t + 1;

    if (batch_out) {
        batch_out->xs = std::move(xs);
        batch_out->values = std::move(vals);
        batch_out->utilities = std::move(u);
        batch_out->weights = std::move(w);
    }
    return next;
}

Trajectory run_sabbo(Objective& obj, SabboState state0, std::size_t budget,
                     const std::vector<double>& init_pop, Rng& rng) {
    Trajectory traj;
    traj.method = "SABBO";
    auto remaining = [&] {
        return budget > traj.records.size() ? budget - traj.records.size() : 0;
    };
    auto track = [&](const EvalRecord& r, double policy_ms) {
        traj.records.push_back(r);
        traj.policy_ms.push_back(policy_ms);
    };

    // Shared pool: evaluate, seed mu at the best member.
    double best_val = 0.0;
    double best_x = state0.mu;
    bool have = false;
    for (double q : init_pop) {
        if (remaining() == 0) return traj;
        const EvalRecord r = obj.evaluate(q);
        track(r, 0.0);
        if (!have || r.value < best_val) {
            have = true;
            best_val = r.value;
            best_x = sabbo_to_normalized(obj, r.query);
        }
    }
    SabboState state = state0;
    if (have) state.mu = best_x;

    const std::size_t step_cost = state.K + 2;
    while (remaining() >= step_cost) {
        traj.boundaries.push_back(traj.records.size() + 1);
        const std::size_t before = obj.ledger().size();
        const auto t0 = std::chrono::steady_clock::now();
        state = sabbo_step(state, obj, rng);
        const auto t1 = std::chrono::steady_clock::now();
        const double policy_ms =
            std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0)
                .count() /
            1e6;
        // Attribute the step's queries to the trajectory; the policy-side
        // time (step wall time minus objective time) goes on its first record.
        double obj_ms = 0.0;
        for (std::size_t i = before; i < obj.ledger().size(); ++i) {
            obj_ms += obj.ledger()[i].wall_clock_ms;
        }
        bool first = true;
        for (std::size_t i = before; i < obj.ledger().size(); ++i) {
            track(obj.ledger()[i], first ? std::max(0.0, policy_ms - obj_ms) : 0.0);
            first = false;
        }
    }
    // Leftover budget: keep sampling the final search distribution.
    const double sd = std::sqrt(state.sigma2);
    while (remaining() > 0) {
        const double x =
            std::min(1.0, std::max(0.0, state.mu + sd * rng.normal()));
        const EvalRecord r = obj.evaluate(sabbo_to_query(obj, x));
        track(r, 0.0);
    }
    return traj;
}

}  // namespace topicopt
