#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "topicopt/objective.hpp"
#include "topicopt/rng.hpp"
#include "topicopt/trajectory.hpp"

namespace topicopt {

struct GaConfig {
    std::size_t pop_size = 10;
    std::size_t n_elite = 2;
    std::size_t tournament_k = 3;
    double p_cross = 0.9;
    double p_mut = 0.3;
    int delta_t = 5;
    int bit_width = 10;
};

struct EsConfig {
    std::size_t mu = 5;
    std::size_t lambda = 10;
    double sigma = 5.0;
};

struct Individual {
    int t = 0;
    double fitness = 0.0;
};
using Population = std::vector<Individual>;

// mask = (2^j - 1) << (bit_width - j); c1 = (t1 & mask) | (t2 & ~mask),
// c2 symmetric. Children may leave the search space; callers clamp.
std::pair<int, int> binary_crossover(int t1, int t2, int j, int bit_width);

// clamp(t + eps, t_min, t_max) with eps uniform over {-delta_t..delta_t}.
int mutate(int t, int delta_t, const SearchSpace& space, Rng& rng);

// k members sampled with replacement; lowest fitness wins, ties to smaller T.
int tournament_select(const Population& pop, std::size_t k, Rng& rng);

// Generational GA with elitism. Every generation re-evaluates the current
// population and then the offspring pool; duplicates hit the objective cache
// but still consume budget. init_pop must have exactly cfg.pop_size members.
Trajectory run_ga(Objective& obj, const GaConfig& cfg,
                  const std::vector<int>& init_pop, std::size_t budget,
                  Rng& rng);

// (mu + lambda) ES: offspring = round(parent + Normal(0, sigma^2)) clipped to
// the space, parents re-evaluated each generation, best mu survive.
Trajectory run_es(Objective& obj, const EsConfig& cfg,
                  const std::vector<int>& init_pop, std::size_t budget,
                  Rng& rng);

}  // namespace topicopt
