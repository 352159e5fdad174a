#include "topicopt/evo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace topicopt {

namespace {

int clamp_to_space(long long t, const SearchSpace& space) {
    if (t < space.t_min) return space.t_min;
    if (t > space.t_max) return space.t_max;
    return static_cast<int>(t);
}

bool better(const Individual& a, const Individual& b) {
    if (a.fitness != b.fitness) return a.fitness < b.fitness;
    return a.t < b.t;
}

}  // namespace

std::pair<int, int> binary_crossover(int t1, int t2, int j, int bit_width) {
    if (bit_width < 1 || bit_width > 30) {
        throw std::invalid_argument("binary_crossover: bad bit width");
    }
    if (j < 1 || j > bit_width - 1) {
        throw std::invalid_argument("binary_crossover: j must be in 1..width-1");
    }
    const int full = (1 << bit_width) - 1;
    if (t1 < 0 || t2 < 0 || t1 > full || t2 > full) {
        throw std::invalid_argument("binary_crossover: parent out of range");
    }
    const int mask = ((1 << j) - 1) << (bit_width - j);
    const int c1 = (t1 & mask) | (t2 & ~mask & full);
    const int c2 = (t2 & mask) | (t1 & ~mask & full);
    return {c1, c2};
}

int mutate(int t, int delta_t, const SearchSpace& space, Rng& rng) {
    if (delta_t < 1) throw std::invalid_argument("mutate: delta_t must be >= 1");
    const long long eps = rng.uniform_int(-delta_t, delta_t);
    return clamp_to_space(static_cast<long long>(t) + eps, space);
}

int tournament_select(const Population& pop, std::size_t k, Rng& rng) {
    if (pop.empty()) {
        throw std::invalid_argument("tournament_select: empty population");
    }
    if (k < 1) throw std::invalid_argument("tournament_select: k must be >= 1");
    Individual best = pop[rng.below(pop.size())];
    for (std::size_t i = 1; i < k; ++i) {
        const Individual& c = pop[rng.below(pop.size())];
        if (better(c, best)) best = c;
    }
    return best.t;
}

Trajectory run_ga(Objective& obj, const GaConfig& cfg,
                  const std::vector<int>& init_pop, std::size_t budget,
                  Rng& rng) {
    if (cfg.n_elite >= cfg.pop_size) {
        throw std::invalid_argument("run_ga: n_elite must be < pop_size");
    }
    if ((1 << cfg.bit_width) <= obj.space().t_max) {
        throw std::invalid_argument("run_ga: 2^bit_width must exceed t_max");
    }
    if (init_pop.size() != cfg.pop_size) {
        throw std::invalid_argument("run_ga: init_pop size must equal pop_size");
    }
    if (budget < cfg.pop_size) {
        throw std::runtime_error("run_ga: budget too small for the population");
    }

    Trajectory traj;
    traj.method = "GA";
    auto eval = [&](int t) {
        const EvalRecord r = obj.evaluate(static_cast<double>(t));
        traj.records.push_back(r);
        traj.policy_ms.push_back(0.0);
        return r.value;
    };
    auto remaining = [&] {
        return budget > traj.records.size() ? budget - traj.records.size() : 0;
    };

    std::vector<int> pop = init_pop;
    while (remaining() > 0) {
        traj.boundaries.push_back(traj.records.size() + 1);
        // Evaluate the whole current population; repeats are cache hits but
        // still consume budget.
        Population scored;
        for (int t : pop) {
            if (remaining() == 0) return traj;
            scored.push_back({t, eval(t)});
        }
        std::sort(scored.begin(), scored.end(), better);
        Population next(scored.begin(), scored.begin() + cfg.n_elite);

        const std::size_t n_off = cfg.pop_size - cfg.n_elite;
        std::vector<int> offspring;
        while (offspring.size() < n_off) {
            const int p1 = tournament_select(scored, cfg.tournament_k, rng);
            const int p2 = tournament_select(scored, cfg.tournament_k, rng);
            int c1 = p1, c2 = p2;
            if (rng.uniform() < cfg.p_cross) {
                const int j = static_cast<int>(rng.uniform_int(1, cfg.bit_width - 1));
                std::tie(c1, c2) = binary_crossover(p1, p2, j, cfg.bit_width);
            }
            if (rng.uniform() < cfg.p_mut) c1 = mutate(c1, cfg.delta_t, obj.space(), rng);
            if (rng.uniform() < cfg.p_mut) c2 = mutate(c2, cfg.delta_t, obj.space(), rng);
            offspring.push_back(clamp_to_space(c1, obj.space()));
            offspring.push_back(clamp_to_space(c2, obj.space()));
        }
        Population scored_off;
        for (int t : offspring) {
            if (remaining() == 0) return traj;
            scored_off.push_back({t, eval(t)});
        }
        std::sort(scored_off.begin(), scored_off.end(), better);
        for (std::size_t i = 0; i < n_off && i < scored_off.size(); ++i) {
            next.push_back(scored_off[i]);
        }
        pop.clear();
        for (const auto& ind : next) pop.push_back(ind.t);
    }
    return traj;
}

Trajectory run_es(Objective& obj, const EsConfig& cfg,
                  const std::vector<int>& init_pop, std::size_t budget,
                  Rng& rng) {
    if (cfg.mu < 1 || cfg.lambda < 1) {
        throw std::invalid_argument("run_es: mu and lambda must be >= 1");
    }
    if (init_pop.size() < cfg.mu) {
        throw std::invalid_argument("run_es: init_pop must have >= mu entries");
    }
    if (budget < cfg.mu) {
        throw std::runtime_error("run_es: budget too small for the parent set");
    }

    Trajectory traj;
    traj.method = "ES";
    auto eval = [&](int t) {
        const EvalRecord r = obj.evaluate(static_cast<double>(t));
        traj.records.push_back(r);
        traj.policy_ms.push_back(0.0);
        return r.value;
    };
    auto remaining = [&] {
        return budget > traj.records.size() ? budget - traj.records.size() : 0;
    };

    std::vector<int> parents(init_pop.begin(), init_pop.begin() + cfg.mu);
    while (remaining() > 0) {
        traj.boundaries.push_back(traj.records.size() + 1);
        Population scored;
        for (int t : parents) {
            if (remaining() == 0) return traj;
            scored.push_back({t, eval(t)});
        }
        Population offspring;
        for (std::size_t i = 0; i < cfg.lambda; ++i) {
            if (remaining() == 0) break;
            const int parent = parents[rng.below(cfg.mu)];
            const long long child =
                std::llround(static_cast<double>(parent) +
                             rng.normal(0.0, cfg.sigma));
            const int c = clamp_to_space(child, obj.space());
            offspring.push_back({c, eval(c)});
        }
        Population all = scored;
        all.insert(all.end(), offspring.begin(), offspring.end());
        std::sort(all.begin(), all.end(), better);
        parents.clear();
        for (std::size_t i = 0; i < cfg.mu && i < all.size(); ++i) {
            parents.push_back(all[i].t);
        }
        if (offspring.empty()) break;  // budget died inside the offspring loop
    }
    return traj;
}

}  // namespace topicopt
