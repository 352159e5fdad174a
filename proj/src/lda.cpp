#include "topicopt/lda.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "topicopt/lda_kernels.hpp"
#include "topicopt/rng.hpp"
#include "topicopt/special_math.hpp"

namespace topicopt {

namespace {

constexpr int kModelFormatVersion = 1;

// exp(E[log beta_tw]) for every topic row.
std::vector<double> exp_elog_beta(const LdaModel& model) {
    std::vector<double> out(model.T * model.V);
    for (std::size_t t = 0; t < model.T; ++t) {
        double total = 0.0;
        for (std::size_t w = 0; w < model.V; ++w) total += model.lam(t, w);
        const double dg_total = digamma(total);
        for (std::size_t w = 0; w < model.V; ++w) {
            out[t * model.V + w] = std::exp(digamma(model.lam(t, w)) - dg_total);
        }
    }
    return out;
}

std::vector<double> normalized_phi(const LdaModel& model) {
    std::vector<double> phi(model.T * model.V);
    for (std::size_t t = 0; t < model.T; ++t) {
        double total = 0.0;
        for (std::size_t w = 0; w < model.V; ++w) total += model.lam(t, w);
        for (std::size_t w = 0; w < model.V; ++w) {
            phi[t * model.V + w] = model.lam(t, w) / total;
        }
    }
    return phi;
}

}  // namespace

SparseDoc get_row(const DocumentTermMatrix& m, std::size_t d) {
    SparseDoc doc;
    for (std::size_t i = m.row_offsets[d]; i < m.row_offsets[d + 1]; ++i) {
        doc.words.push_back(m.col_indices[i]);
        doc.counts.push_back(m.counts[i]);
    }
    return doc;
}

LdaModel fit(const DocumentTermMatrix& train, std::size_t T, double alpha,
             double beta, const TrainConfig& config) {
    if (T < 1) throw std::invalid_argument("fit: T must be >= 1");
    if (train.n_rows == 0 || train.n_cols == 0) {
        throw std::invalid_argument("fit: empty training matrix");
    }
    if (alpha <= 0.0 || beta <= 0.0) {
        throw std::invalid_argument("fit: priors must be positive");
    }
    const std::size_t V = train.n_cols;
    const std::size_t D = train.n_rows;

    LdaModel model;
    model.T = T;
    model.V = V;
    model.alpha = alpha;
    model.beta = beta;
    model.seed = config.seed;
    model.lambda.resize(T * V);

    Rng rng(config.seed);
    for (auto& v : model.lambda) v = rng.gamma(100.0, 0.01);

    std::vector<std::size_t> order(D);
    for (std::size_t d = 0; d < D; ++d) order[d] = d;

    const std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);
    std::size_t update_count = 0;
    std::vector<double> sstats(T * V);
    for (std::size_t pass = 0; pass < config.passes; ++pass) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < D; start += batch_size) {
            const std::size_t stop = std::min(D, start + batch_size);
            const std::vector<std::size_t> docs(order.begin() + start,
                                                order.begin() + stop);
            const std::vector<double> expelogbeta = exp_elog_beta(model);
            const BatchEStep batch =
                config.parallel
                    ? e_step_batch_parallel(train, docs, expelogbeta, T, alpha,
                                            config.e_step_iters,
                                            config.e_step_tol)
                    : e_step_batch_serial(train, docs, expelogbeta, T, alpha,
                                          config.e_step_iters,
                                          config.e_step_tol);
            std::fill(sstats.begin(), sstats.end(), 0.0);
            accumulate_sstats(train, docs, expelogbeta, T, batch, sstats);

            const double rho = std::pow(
                config.tau0 + static_cast<double>(update_count), -config.kappa);
            const double scale =
                static_cast<double>(D) / static_cast<double>(docs.size());
            for (std::size_t i = 0; i < T * V; ++i) {
                model.lambda[i] = (1.0 - rho) * model.lambda[i] +
                                  rho * (beta + scale * sstats[i]);
            }
            update_count += 1;
        }
    }
    return model;
}

DocTopicPosterior infer_posterior(const LdaModel& model, const SparseDoc& doc,
                                  std::size_t e_step_iters, double e_step_tol) {
    const std::size_t T = model.T;
    DocTopicPosterior post;
    post.gamma.assign(T, model.alpha);

    double n_d = 0.0;
    for (auto c : doc.counts) n_d += c;
    if (doc.words.empty()) {
        post.converged = true;
        return post;
    }
    for (std::size_t t = 0; t < T; ++t) {
        post.gamma[t] = model.alpha + n_d / static_cast<double>(T);
    }
    const std::vector<double> expelogbeta = exp_elog_beta(model);
    std::vector<double> expelogtheta(T);
    auto refresh = [&] {
        double total = 0.0;
        for (double g : post.gamma) total += g;
        const double dg_total = digamma(total);
        for (std::size_t t = 0; t < T; ++t) {
            expelogtheta[t] = std::exp(digamma(post.gamma[t]) - dg_total);
        }
    };
    refresh();

    const std::size_t nnz = doc.words.size();
    std::vector<double> phinorm(nnz);
    std::vector<double> gnew(T);
    for (std::size_t it = 0; it < e_step_iters; ++it) {
        for (std::size_t i = 0; i < nnz; ++i) {
            double s = 0.0;
            for (std::size_t t = 0; t < T; ++t) {
                s += expelogtheta[t] * expelogbeta[t * model.V + doc.words[i]];
            }
            phinorm[i] = s + 1e-100;
        }
        for (std::size_t t = 0; t < T; ++t) {
            double acc = 0.0;
            for (std::size_t i = 0; i < nnz; ++i) {
                acc += doc.counts[i] / phinorm[i] *
                       expelogbeta[t * model.V + doc.words[i]];
            }
            gnew[t] = model.alpha + expelogtheta[t] * acc;
        }
        double change = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            change += std::abs(gnew[t] - post.gamma[t]);
        }
        post.gamma.swap(gnew);
        refresh();
        post.n_iters = it + 1;
        if (change / static_cast<double>(T) < e_step_tol) {
            post.converged = true;
            break;
        }
    }
    return post;
}

double perplexity(const LdaModel& model, const DocumentTermMatrix& eval_set) {
    if (eval_set.n_rows == 0) {
        throw std::invalid_argument("perplexity: empty evaluation set");
    }
    if (eval_set.n_cols != model.V) {
        throw std::invalid_argument("perplexity: vocabulary size mismatch");
    }
    const std::vector<double> expelogbeta = exp_elog_beta(model);
    const std::vector<double> phi = normalized_phi(model);
    const auto parts =
        doc_loglik_parallel(eval_set, expelogbeta, phi, model.T, model.alpha,
                            100, 1e-3);
    double ll = 0.0;
    double tokens = 0.0;
    for (const auto& [l, n] : parts) {
        ll += l;
        tokens += n;
    }
    if (tokens == 0.0) {
        throw std::invalid_argument("perplexity: evaluation set has no tokens");
    }
    return std::exp(-ll / tokens);
}

double doc_bound(const LdaModel& model, const SparseDoc& doc,
                 const std::vector<double>& gamma) {
    const std::size_t T = model.T;
    const std::size_t V = model.V;
    double gsum = 0.0;
    for (double g : gamma) gsum += g;
    const double dg_sum = digamma(gsum);

    std::vector<double> elogtheta(T);
    for (std::size_t t = 0; t < T; ++t) {
        elogtheta[t] = digamma(gamma[t]) - dg_sum;
    }
    // E[log beta] per topic for the doc's words only
    std::vector<double> row_dg(T);
    for (std::size_t t = 0; t < T; ++t) {
        double total = 0.0;
        for (std::size_t w = 0; w < V; ++w) total += model.lam(t, w);
        row_dg[t] = digamma(total);
    }

    double bound = 0.0;
    for (std::size_t i = 0; i < doc.words.size(); ++i) {
        const std::size_t w = doc.words[i];
        // log sum_t exp(elogtheta_t + elogbeta_tw), stabilized
        double best = -1e300;
        std::vector<double> terms(T);
        for (std::size_t t = 0; t < T; ++t) {
            terms[t] =
                elogtheta[t] + (digamma(model.lam(t, w)) - row_dg[t]);
            best = std::max(best, terms[t]);
        }
        double s = 0.0;
        for (std::size_t t = 0; t < T; ++t) s += std::exp(terms[t] - best);
        bound += doc.counts[i] * (best + std::log(s));
    }
    for (std::size_t t = 0; t < T; ++t) {
        bound += (model.alpha - gamma[t]) * elogtheta[t];
        bound += log_gamma(gamma[t]);
    }
    bound -= log_gamma(gsum);
    bound += log_gamma(static_cast<double>(T) * model.alpha) -
             static_cast<double>(T) * log_gamma(model.alpha);
    return bound;
}

std::string model_to_json(const LdaModel& model) {
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["T"] = model.T;
    j["V"] = model.V;
    j["alpha"] = model.alpha;
    j["beta"] = model.beta;
    j["seed"] = model.seed;
    j["lambda"] = model.lambda;
    return j.dump();
}

LdaModel model_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (!j.contains("format_version") ||
        j["format_version"].get<int>() != kModelFormatVersion) {
        throw std::runtime_error("model_from_json: unsupported format version");
    }
    LdaModel m;
    m.T = j.at("T").get<std::size_t>();
    m.V = j.at("V").get<std::size_t>();
    m.alpha = j.at("alpha").get<double>();
    m.beta = j.at("beta").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.lambda = j.at("lambda").get<std::vector<double>>();
    if (m.lambda.size() != m.T * m.V) {
        throw std::runtime_error("model_from_json: lambda shape mismatch");
    }
    for (double v : m.lambda) {
        if (!(v > 0.0)) {
            throw std::runtime_error("model_from_json: nonpositive lambda");
        }
    }
    return m;
}

void save_model(const LdaModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    out << model_to_json(model);
}

LdaModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str());
}

}  // namespace topicopt
