#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "topicopt/objective.hpp"
#include "topicopt/rng.hpp"
#include "topicopt/trajectory.hpp"

namespace topicopt {

// Search distribution N(mu, sigma2) over the normalized space [0,1].
// Integer objectives are queried through the affine map to [t_min, t_max].
struct SabboState {
    double mu = 0.5;
    double sigma2 = 0.0625;  // 0.25^2
    std::size_t t = 1;       // step counter driving beta_t = 1/t
    std::size_t K = 10;
    double rho = 0.05;
};

// Thrown when the budget runs out inside a step; carries how many
// evaluations the partial step spent.
class SabboPartialStep : public std::runtime_error {
public:
    explicit SabboPartialStep(std::size_t spent)
        : std::runtime_error("sabbo step ran out of budget mid-step"),
          evaluations_spent(spent) {}
    std::size_t evaluations_spent;
};

// Rank-based utilities: best (lowest) value gets +0.5, worst -0.5, evenly
// spaced by rank; tied values share their block's mean utility. Invariant to
// any strictly monotone transform of the values.
std::vector<double> rank_shape(const std::vector<double>& values);

struct ShapedBatch {
    std::vector<double> xs;       // normalized sample + probe locations
    std::vector<double> values;
    std::vector<double> utilities;
    std::vector<double> weights;  // badness weights after neighborhood fold
};

// One natural-gradient step: K Gaussian samples plus the two probes
// mu +- rho are evaluated; the worst value inside the rho-ball is folded to
// rank-worst badness; mu moves against the shaped gradient with beta_t = 1/t
// and the precision takes the matching second-order update. sigma2 is kept
// in [1e-4, 1].
SabboState sabbo_step(const SabboState& state, Objective& obj, Rng& rng,
                      ShapedBatch* batch_out = nullptr);

// Evaluates init_pop, starts mu at the best pool member, then steps while a
// full step fits in the budget; leftover budget is spent on draws from the
// final search distribution.
Trajectory run_sabbo(Objective& obj, SabboState state0, std::size_t budget,
                     const std::vector<double>& init_pop, Rng& rng);

// Normalized x <-> integer query mapping used for integer-domain objectives.
double sabbo_to_query(const Objective& obj, double x);
double sabbo_to_normalized(const Objective& obj, double query);

}  // namespace topicopt
