#include "topicopt/objective.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <utility>

#include <Eigen/Dense>

#include "topicopt/rng.hpp"

namespace topicopt {

namespace {

double run_timed(const std::function<double(double)>& fn, double q,
                 double& ms_out) {
    const auto t0 = std::chrono::steady_clock::now();
    const double v = fn(q);
    const auto t1 = std::chrono::steady_clock::now();
    const double ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
    // Clock-tick floor: a computed value never reports exactly 0 ms, which
    // is reserved for cache hits.
    ms_out = std::max(ns / 1e6, 1e-9);
    return v;
}

}  // namespace

Objective Objective::over_integers(std::function<double(double)> fn,
                                   SearchSpace space, Direction dir) {
    Objective o;
    o.domain_ = Domain::integer_t;
    o.space_ = space;
    o.lo_ = space.t_min;
    o.hi_ = space.t_max;
    o.flipped_ = dir == Direction::maximize;
    if (o.flipped_) {
        o.fn_ = [f = std::move(fn)](double q) { return -f(q); };
    } else {
        o.fn_ = std::move(fn);
    }
    return o;
}

Objective Objective::over_reals(std::function<double(double)> fn, double lo,
                                double hi, Direction dir) {
    Objective o;
    o.domain_ = Domain::real_x;
    o.lo_ = lo;
    o.hi_ = hi;
    o.flipped_ = dir == Direction::maximize;
    if (o.flipped_) {
        o.fn_ = [f = std::move(fn)](double q) { return -f(q); };
    } else {
        o.fn_ = std::move(fn);
    }
    return o;
}

EvalRecord Objective::evaluate(double query) {
    if (domain_ == Domain::integer_t) {
        const double r = std::nearbyint(query);
        if (std::abs(query - r) > 1e-9 || r < space_.t_min || r > space_.t_max) {
            throw std::out_of_range("objective query outside search space");
        }
        query = r;
    } else {
        if (!(query >= lo_ && query <= hi_)) {
            throw std::out_of_range("objective query outside search space");
        }
    }
    if (used() >= budget_) throw BudgetExhausted();

    EvalRecord rec;
    rec.step_index = used() + 1;
    rec.query = query;
    auto it = cache_.find(query);
    if (it != cache_.end()) {
        rec.value = it->second;
        rec.wall_clock_ms = 0.0;
        rec.cache_hit = true;
    } else {
        rec.value = run_timed(fn_, query, rec.wall_clock_ms);
        rec.cache_hit = false;
        cache_.emplace(query, rec.value);
    }
    ledger_.push_back(rec);
    return rec;
}

double Objective::best_value() const {
    double bv = ledger_.front().value;
    double bq = ledger_.front().query;
    for (const auto& r : ledger_) {
        if (r.value < bv || (r.value == bv && r.query < bq)) {
            bv = r.value;
            bq = r.query;
        }
    }
    return bv;
}

double Objective::best_query() const {
    double bv = ledger_.front().value;
    double bq = ledger_.front().query;
    for (const auto& r : ledger_) {
        if (r.value < bv || (r.value == bv && r.query < bq)) {
            bv = r.value;
            bq = r.query;
        }
    }
    return bq;
}

EvalRecord evaluate(Objective& obj, double query) { return obj.evaluate(query); }

Objective make_lda_objective(std::shared_ptr<const DocumentTermMatrix> train,
                             std::shared_ptr<const DocumentTermMatrix> validation,
                             SearchSpace space, TrainConfig lda_config) {
    if (!train || !validation) {
        throw std::invalid_argument("make_lda_objective: null matrix");
    }
    if (space.t_min < 1 || space.t_min > space.t_max) {
        throw std::invalid_argument("make_lda_objective: invalid search space");
    }
    auto fn = [train = std::move(train), validation = std::move(validation),
               cfg = lda_config](double q) {
        const std::size_t T = static_cast<std::size_t>(std::llround(q));
        const double prior = 1.0 / static_cast<double>(T);
        const LdaModel model = fit(*train, T, prior, prior, cfg);
        return perplexity(model, *validation);
    };
    return Objective::over_integers(std::move(fn), space, Direction::minimize);
}

double rastrigin_1d(double x) {
    return 10.0 + x * x - 10.0 * std::cos(2.0 * 3.14159265358979323846 * x);
}

double GridFunction::operator()(double x) const {
    const std::size_t n = values.size();
    if (x < 0.0) x = 0.0;
    if (x > 1.0) x = 1.0;
    const double pos = x * static_cast<double>(n - 1);
    std::size_t i = static_cast<std::size_t>(pos);
    if (i > n - 2) i = n - 2;
    const double w = pos - static_cast<double>(i);
    return values[i] * (1.0 - w) + values[i + 1] * w;
}

GridFunction sample_gp1d_function(std::uint64_t seed, double lengthscale,
                                  std::size_t grid_size) {
    if (grid_size < 2 || lengthscale <= 0.0) {
        throw std::invalid_argument("sample_gp1d: bad grid or lengthscale");
    }
    const std::size_t n = grid_size;
    Eigen::MatrixXd K(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = static_cast<double>(i) / static_cast<double>(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            const double xj =
                static_cast<double>(j) / static_cast<double>(n - 1);
            const double d = xi - xj;
            K(i, j) = std::exp(-0.5 * d * d / (lengthscale * lengthscale));
        }
    }
    K.diagonal().array() += 1e-8;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error(
            "sample_gp1d: cholesky factorization failed; increase jitter");
    }
    Rng rng(seed);
    Eigen::VectorXd z(n);
    for (std::size_t i = 0; i < n; ++i) z(i) = rng.normal();
    const Eigen::VectorXd f = llt.matrixL() * z;
    GridFunction g;
    g.values.assign(f.data(), f.data() + n);
    return g;
}

Objective sample_gp1d(std::uint64_t seed, double lengthscale,
                      std::size_t grid_size) {
    GridFunction g = sample_gp1d_function(seed, lengthscale, grid_size);
    return Objective::over_reals(
        [g = std::move(g)](double x) { return g(x); }, 0.0, 1.0,
        Direction::minimize);
}

std::string format_number(double v) {
    if (v == std::nearbyint(v) && std::abs(v) < 1e15) {
        return std::to_string(static_cast<long long>(v));
    }
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void export_ledger_csv(const std::vector<EvalRecord>& ledger,
                       std::ostream& out) {
    out << "step,query,value,best_so_far,wall_clock_ms,cache_hit\n";
    double best = 0.0;
    bool first = true;
    for (const auto& r : ledger) {
        best = first ? r.value : std::min(best, r.value);
        first = false;
        out << r.step_index << ',' << format_number(r.query) << ','
            << format_number(r.value) << ',' << format_number(best) << ','
            << format_number(r.wall_clock_ms) << ',' << (r.cache_hit ? 1 : 0)
            << '\n';
    }
}

}  // namespace topicopt
