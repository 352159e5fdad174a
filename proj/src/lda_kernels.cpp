#include "topicopt/lda_kernels.hpp"

#include <cmath>

#include "topicopt/special_math.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace topicopt {

namespace {

constexpr double kPhiFloor = 1e-100;  // keeps phinorm away from 0

struct DocResult {
    std::vector<double> gamma;
    std::vector<double> expelogtheta;
    std::vector<double> ratios;
};

void exp_elog_theta(const std::vector<double>& gamma, std::vector<double>& out) {
    double total = 0.0;
    for (double g : gamma) total += g;
    const double dg_total = digamma(total);
    for (std::size_t t = 0; t < gamma.size(); ++t) {
        out[t] = std::exp(digamma(gamma[t]) - dg_total);
    }
}

// Fixed-point gamma update for one document against frozen expelogbeta.
DocResult e_step_doc(const DocumentTermMatrix& m, std::size_t d,
                     const std::vector<double>& expelogbeta, std::size_t T,
                     double alpha, std::size_t iters, double tol) {
    const std::size_t V = m.n_cols;
    const std::size_t lo = m.row_offsets[d];
    const std::size_t hi = m.row_offsets[d + 1];
    const std::size_t nnz = hi - lo;

    DocResult r;
    r.gamma.assign(T, 0.0);
    r.expelogtheta.assign(T, 0.0);
    r.ratios.assign(nnz, 0.0);

    double n_d = 0.0;
    for (std::size_t i = lo; i < hi; ++i) n_d += m.counts[i];
    for (std::size_t t = 0; t < T; ++t) {
        r.gamma[t] = alpha + n_d / static_cast<double>(T);
    }
    exp_elog_theta(r.gamma, r.expelogtheta);

    std::vector<double> phinorm(nnz);
    std::vector<double> gnew(T);
    for (std::size_t it = 0; it < iters; ++it) {
        for (std::size_t i = 0; i < nnz; ++i) {
            const std::size_t w = m.col_indices[lo + i];
            double s = 0.0;
            for (std::size_t t = 0; t < T; ++t) {
                s += r.expelogtheta[t] * expelogbeta[t * V + w];
            }
            phinorm[i] = s + kPhiFloor;
        }
        for (std::size_t t = 0; t < T; ++t) {
            double acc = 0.0;
            for (std::size_t i = 0; i < nnz; ++i) {
                const std::size_t w = m.col_indices[lo + i];
                acc += m.counts[lo + i] / phinorm[i] * expelogbeta[t * V + w];
            }
            gnew[t] = alpha + r.expelogtheta[t] * acc;
        }
        double change = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            change += std::abs(gnew[t] - r.gamma[t]);
        }
        r.gamma.swap(gnew);
        exp_elog_theta(r.gamma, r.expelogtheta);
        if (change / static_cast<double>(T) < tol) break;
    }
    for (std::size_t i = 0; i < nnz; ++i) {
        const std::size_t w = m.col_indices[lo + i];
        double s = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            s += r.expelogtheta[t] * expelogbeta[t * V + w];
        }
        r.ratios[i] = m.counts[lo + i] / (s + kPhiFloor);
    }
    return r;
}

BatchEStep run_batch(const DocumentTermMatrix& m,
                     const std::vector<std::size_t>& docs,
                     const std::vector<double>& expelogbeta, std::size_t T,
                     double alpha, std::size_t iters, double tol,
                     bool parallel) {
    BatchEStep out;
    const std::size_t n = docs.size();
    out.gammas.resize(n);
    out.expelogtheta.resize(n);
    out.ratios.resize(n);
    if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            DocResult r =
                e_step_doc(m, docs[i], expelogbeta, T, alpha, iters, tol);
            out.gammas[i] = std::move(r.gamma);
            out.expelogtheta[i] = std::move(r.expelogtheta);
            out.ratios[i] = std::move(r.ratios);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            DocResult r =
                e_step_doc(m, docs[i], expelogbeta, T, alpha, iters, tol);
            out.gammas[i] = std::move(r.gamma);
            out.expelogtheta[i] = std::move(r.expelogtheta);
            out.ratios[i] = std::move(r.ratios);
        }
    }
    return out;
}

std::pair<double, double> doc_loglik(const DocumentTermMatrix& m, std::size_t d,
                                     const std::vector<double>& expelogbeta,
                                     const std::vector<double>& phi,
                                     std::size_t T, double alpha,
                                     std::size_t iters, double tol) {
    const std::size_t V = m.n_cols;
    DocResult r = e_step_doc(m, d, expelogbeta, T, alpha, iters, tol);
    double denom = 0.0;
    for (std::size_t t = 0; t < T; ++t) denom += r.gamma[t];
    double ll = 0.0;
    double tokens = 0.0;
    for (std::size_t i = m.row_offsets[d]; i < m.row_offsets[d + 1]; ++i) {
        const std::size_t w = m.col_indices[i];
        double numer = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            numer += r.gamma[t] * phi[t * V + w];
        }
        ll += m.counts[i] * std::log(numer / denom);
        tokens += m.counts[i];
    }
    return {ll, tokens};
}

std::vector<std::pair<double, double>> run_loglik(
    const DocumentTermMatrix& eval_set, const std::vector<double>& expelogbeta,
    const std::vector<double>& phi, std::size_t T, double alpha,
    std::size_t iters, double tol, bool parallel) {
    const std::size_t n = eval_set.n_rows;
    std::vector<std::pair<double, double>> out(n);
    if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
        for (std::ptrdiff_t d = 0; d < static_cast<std::ptrdiff_t>(n); ++d) {
            out[d] = doc_loglik(eval_set, d, expelogbeta, phi, T, alpha, iters,
                                tol);
        }
    } else {
        for (std::size_t d = 0; d < n; ++d) {
            out[d] = doc_loglik(eval_set, d, expelogbeta, phi, T, alpha, iters,
                                tol);
        }
    }
    return out;
}

}  // namespace

BatchEStep e_step_batch_serial(const DocumentTermMatrix& m,
                               const std::vector<std::size_t>& docs,
                               const std::vector<double>& expelogbeta,
                               std::size_t T, double alpha, std::size_t iters,
                               double tol) {
    return run_batch(m, docs, expelogbeta, T, alpha, iters, tol, false);
}

BatchEStep e_step_batch_parallel(const DocumentTermMatrix& m,
                                 const std::vector<std::size_t>& docs,
                                 const std::vector<double>& expelogbeta,
                                 std::size_t T, double alpha, std::size_t iters,
                                 double tol) {
    return run_batch(m, docs, expelogbeta, T, alpha, iters, tol, true);
}

void accumulate_sstats(const DocumentTermMatrix& m,
                       const std::vector<std::size_t>& docs,
                       const std::vector<double>& expelogbeta, std::size_t T,
                       const BatchEStep& batch, std::vector<double>& sstats) {
    const std::size_t V = m.n_cols;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const std::size_t d = docs[i];
        const std::size_t lo = m.row_offsets[d];
        const std::size_t nnz = m.row_offsets[d + 1] - lo;
        for (std::size_t k = 0; k < nnz; ++k) {
            const std::size_t w = m.col_indices[lo + k];
            const double ratio = batch.ratios[i][k];
            for (std::size_t t = 0; t < T; ++t) {
                sstats[t * V + w] +=
                    batch.expelogtheta[i][t] * ratio * expelogbeta[t * V + w];
            }
        }
    }
}

std::vector<std::pair<double, double>> doc_loglik_serial(
    const DocumentTermMatrix& eval_set, const std::vector<double>& expelogbeta,
    const std::vector<double>& phi, std::size_t T, double alpha,
    std::size_t e_step_iters, double e_step_tol) {
    return run_loglik(eval_set, expelogbeta, phi, T, alpha, e_step_iters,
                      e_step_tol, false);
}

std::vector<std::pair<double, double>> doc_loglik_parallel(
    const DocumentTermMatrix& eval_set, const std::vector<double>& expelogbeta,
    const std::vector<double>& phi, std::size_t T, double alpha,
    std::size_t e_step_iters, double e_step_tol) {
    return run_loglik(eval_set, expelogbeta, phi, T, alpha, e_step_iters,
                      e_step_tol, true);
}

}  // namespace topicopt
