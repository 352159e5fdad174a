#pragma once

#include <cstdint>
#include <vector>

#include "topicopt/corpus.hpp"

namespace topicopt {

// Per-document E-step output for one mini-batch. ratios[i][k] is
// count / phinorm for the k-th stored word of batch document i; together with
// expelogtheta it reconstructs the topic-word sufficient statistics.
struct BatchEStep {
    std::vector<std::vector<double>> gammas;
    std::vector<std::vector<double>> expelogtheta;
    std::vector<std::vector<double>> ratios;
};

// Both drivers run the identical per-document fixed point; the parallel one
// distributes documents across OpenMP threads. Outputs are bitwise equal
// because each document's arithmetic is self-contained.
BatchEStep e_step_batch_serial(const DocumentTermMatrix& m,
                               const std::vector<std::size_t>& docs,
                               const std::vector<double>& expelogbeta,
                               std::size_t T, double alpha, std::size_t iters,
                               double tol);
BatchEStep e_step_batch_parallel(const DocumentTermMatrix& m,
                                 const std::vector<std::size_t>& docs,
                                 const std::vector<double>& expelogbeta,
                                 std::size_t T, double alpha, std::size_t iters,
                                 double tol);

// Serial fixed-order reduction into sstats (T x V row-major); keeps fit
// results independent of thread count.
void accumulate_sstats(const DocumentTermMatrix& m,
                       const std::vector<std::size_t>& docs,
                       const std::vector<double>& expelogbeta, std::size_t T,
                       const BatchEStep& batch, std::vector<double>& sstats);

// Per-document held-out log likelihood sums (ll, n_tokens) for perplexity.
// expelogbeta drives the gamma fixed point; phi (row-normalized lambda)
// scores the tokens.
std::vector<std::pair<double, double>> doc_loglik_serial(
    const DocumentTermMatrix& eval_set, const std::vector<double>& expelogbeta,
    const std::vector<double>& phi, std::size_t T, double alpha,
    std::size_t e_step_iters, double e_step_tol);
std::vector<std::pair<double, double>> doc_loglik_parallel(
    const DocumentTermMatrix& eval_set, const std::vector<double>& expelogbeta,
    const std::vector<double>& phi, std::size_t T, double alpha,
    std::size_t e_step_iters, double e_step_tol);

}  // namespace topicopt
