#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "topicopt/corpus.hpp"

namespace topicopt {

// Variational topic-word parameters. lambda is T x V row-major; every entry
// stays strictly positive (the prior beta is folded into every update).
struct LdaModel {
    std::size_t T = 0;
    std::size_t V = 0;
    double alpha = 0.0;
    double beta = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> lambda;  // T * V

    double lam(std::size_t t, std::size_t w) const { return lambda[t * V + w]; }
};

struct TrainConfig {
    std::size_t passes = 3;
    std::size_t batch_size = 128;
    double tau0 = 1.0;
    double kappa = 0.7;
    std::size_t e_step_iters = 100;
    double e_step_tol = 1e-3;
    std::uint64_t seed = 0;
    bool parallel = true;  // OpenMP document loop; serial path is the reference
};

struct DocTopicPosterior {
    std::vector<double> gamma;
    std::size_t n_iters = 0;
    bool converged = false;
};

// One document's sparse counts.
struct SparseDoc {
    std::vector<std::uint32_t> words;
    std::vector<std::uint32_t> counts;
};

SparseDoc get_row(const DocumentTermMatrix& m, std::size_t d);

// Online variational Bayes over mini-batches with learning rate
// (tau0 + t)^(-kappa). Topic-word init is Gamma(100, 0.01) from config.seed;
// the per-pass document order reshuffle draws from the same stream.
LdaModel fit(const DocumentTermMatrix& train, std::size_t T, double alpha,
             double beta, const TrainConfig& config);

// Fixed-point gamma update against frozen topics. An empty document returns
// gamma = (alpha, ..., alpha) untouched.
DocTopicPosterior infer_posterior(const LdaModel& model, const SparseDoc& doc,
                                  std::size_t e_step_iters = 100,
                                  double e_step_tol = 1e-3);

// exp(-(sum_dw n_dw log p(w|d)) / sum_d n_d) with p(w|d) = sum_t theta_td
// phi_tw; theta re-inferred per document from its full counts.
double perplexity(const LdaModel& model, const DocumentTermMatrix& eval_set);

// Per-document variational bound with topics frozen; non-decreasing across
// fixed-point iterations.
double doc_bound(const LdaModel& model, const SparseDoc& doc,
                 const std::vector<double>& gamma);

// JSON round-trip with an explicit format version.
std::string model_to_json(const LdaModel& model);
LdaModel model_from_json(const std::string& text);
void save_model(const LdaModel& model, const std::string& path);
LdaModel load_model(const std::string& path);

}  // namespace topicopt
