#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "topicopt/objective.hpp"
#include "topicopt/pabbo_net.hpp"
#include "topicopt/rng.hpp"
#include "topicopt/trajectory.hpp"

namespace topicopt::pabbo {

// Evaluation history in the policy's own coordinates: x normalized to [0,1],
// goodness = -value (higher is better regardless of task direction).
struct History {
    std::vector<double> xs;
    std::vector<double> goodness;
    std::size_t size() const { return xs.size(); }
    void add(double x, double g) {
        xs.push_back(x);
        goodness.push_back(g);
    }
};

// History tokens: (x, min-max normalized goodness, flag 0). A degenerate
// value range maps to 0.5.
Mat encode_history(const History& hist);

// Acquisition scores for K candidate locations in [0,1] given the history.
std::vector<double> score_candidates(const Params& p, const History& hist,
                                     const std::vector<double>& candidates);

// Samples K candidates uniformly from the space; with probability
// explore_rho returns a uniform query, otherwise softmax-samples a candidate
// by acquisition score. Returns the query in objective coordinates.
double select_next(const Params& p, const History& hist,
                   const SearchSpace& space, std::size_t K, double explore_rho,
                   Rng& rng);
// Same policy over the unit interval (synthetic tasks).
double select_next_unit(const Params& p, const History& hist, std::size_t K,
                        double explore_rho, Rng& rng);

struct MetaTask {
    std::function<double(double)> latent;  // goodness over [0,1], maximized
    double best = 0.0;                     // max of latent, for regret
    std::string family;
};
using TaskSampler = std::function<MetaTask(Rng&)>;

MetaTask sample_gp_task(Rng& rng);
MetaTask sample_rastrigin_task(Rng& rng);
// 50/50 mixture of the two families.
MetaTask default_task_sampler(Rng& rng);

struct MetaTrainConfig {
    std::size_t episodes = 2000;
    std::size_t horizon = 20;        // H: history length per rollout
    std::size_t n_rollouts = 4;      // B rollouts sharing task and pool
    std::size_t n_candidates = 64;   // K per policy step
    std::size_t pool_max = 5;        // init pool size ~ uniform{0..pool_max}
    double gamma = 0.99;             // reward-to-go discount
    double lr = 3e-4;
    double clip_norm = 10.0;
    std::size_t aux_n_pred = 64;
    double aux_noise = 0.05;
    double aux_weight = 1.0;
    std::vector<std::size_t> aux_prefixes = {5, 9, 13, 17, 20};
};

struct EpisodeStats {
    double mean_return = 0.0;
    double aux_bce = 0.0;
};

// One policy rollout to horizon H with per-step reward-to-go returns.
struct RolloutTapeStep {
    Tape tape;
    std::vector<std::size_t> cand_idx;
    std::vector<double> pi;
    std::size_t action = 0;
};
struct Rollout {
    History hist;
    std::vector<double> reward_to_go;
    std::vector<RolloutTapeStep> steps;
};
Rollout rollout_once(const Params& p, const MetaTask& task,
                     const std::vector<std::pair<double, double>>& pool,
                     Rng& rng, const MetaTrainConfig& cfg);

// REINFORCE: dq = -A_t (onehot(a) - pi) per step, accumulated into grads.
void backprop_steps(const Params& p, const std::vector<RolloutTapeStep>& steps,
                    const std::vector<double>& advantages, Grads& grads);

// Preference auxiliary loss: the history prefix is the context, n_pred fresh
// uniform probes are prediction tokens, consecutive probe pairs are labeled
// by noisy latent comparison; BCE on prediction-head differences. Returns
// the mean BCE (0.693 and no gradient when the history has < 2 entries).
double aux_pass(const Params& p, const History& hist, const MetaTask& task,
                Rng& rng, Grads& grads, const MetaTrainConfig& cfg);

// REINFORCE on discounted reward-to-go with a per-episode mean baseline
// across n_rollouts paired rollouts, plus the preference auxiliary at fixed
// history prefixes. Returns the running average of the second half of
// training. Throws a numeric error naming the episode on divergence.
Params meta_train(const TaskSampler& sampler, const MetaTrainConfig& cfg,
                  std::uint64_t seed,
                  std::vector<EpisodeStats>* trace = nullptr);

// Seeds the history with the shared pool (consuming budget; exhaustion
// mid-seed returns right away), then alternates explore/policy queries until
// the budget is spent. The answer is the best evaluated query.
Trajectory run_pabbo(Objective& obj, const Params& params, std::size_t K,
                     double explore_rho, std::size_t budget,
                     const std::vector<double>& init_pop, Rng& rng);

struct CheckpointInfo {
    std::uint64_t seed = 0;
    std::size_t episodes = 0;
};
void save_policy(const Params& p, const CheckpointInfo& info,
                 const std::string& path);
Params load_policy(const std::string& path, CheckpointInfo* info = nullptr);

}  // namespace topicopt::pabbo
