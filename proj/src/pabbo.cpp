#include "topicopt/pabbo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "nlohmann/json.hpp"

namespace topicopt::pabbo {

namespace {

using json = nlohmann::json;

// Queries live in objective coordinates; the policy sees [0,1].
struct DomainMap {
    bool integer = true;
    double lo = 0.0;
    double hi = 1.0;

    double norm(double q) const {
        const double span = hi - lo;
        return span > 0.0 ? (q - lo) / span : 0.5;
    }
    double draw(Rng& rng) const {
        if (integer) {
            return static_cast<double>(
                rng.uniform_int(static_cast<std::int64_t>(lo),
                                static_cast<std::int64_t>(hi)));
        }
        return rng.uniform(lo, hi);
    }
};

DomainMap domain_map(const Objective& obj) {
    DomainMap dm;
    if (obj.domain() == Objective::Domain::integer_t) {
        dm.integer = true;
        dm.lo = static_cast<double>(obj.space().t_min);
        dm.hi = static_cast<double>(obj.space().t_max);
    } else {
        dm.integer = false;
        dm.lo = obj.lo();
        dm.hi = obj.hi();
    }
    return dm;
}

std::size_t sample_categorical(const std::vector<double>& pi, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) {
        acc += pi[i];
        if (u < acc) return i;
    }
    return pi.size() - 1;
}

Mat candidate_tokens(const Mat& htok, const std::vector<double>& cand) {
    Mat tokens(htok.rows + cand.size(), 3);
    std::copy(htok.a.begin(), htok.a.end(), tokens.a.begin());
    for (std::size_t i = 0; i < cand.size(); ++i) {
        const std::size_t r = htok.rows + i;
        tokens.a[r * 3 + 0] = cand[i];
        tokens.a[r * 3 + 1] = 0.0;
        tokens.a[r * 3 + 2] = 1.0;
    }
    return tokens;
}

std::vector<bool> context_flags(std::size_t n_ctx, std::size_t n_cand) {
    std::vector<bool> is_ctx(n_ctx + n_cand, false);
    for (std::size_t i = 0; i < n_ctx; ++i) is_ctx[i] = true;
    return is_ctx;
}

std::vector<std::size_t> candidate_indices(std::size_t n_ctx,
                                           std::size_t n_cand) {
    std::vector<std::size_t> idx(n_cand);
    for (std::size_t i = 0; i < n_cand; ++i) idx[i] = n_ctx + i;
    return idx;
}

// Candidates are drawn from rng first, then scored; the action is a softmax
// sample over acquisition scores. Mirrors the training-time step exactly.
struct PolicyChoice {
    std::vector<double> cand;
    RolloutTapeStep step;
};

PolicyChoice policy_step_unit(const Params& p, const History& hist,
                              std::size_t K, Rng& rng) {
    PolicyChoice pc;
    pc.cand.resize(K);
    for (auto& c : pc.cand) c = rng.uniform();
    const Mat htok = encode_history(hist);
    const Mat tokens = candidate_tokens(htok, pc.cand);
    const auto is_ctx = context_flags(hist.size(), K);
    forward(p, tokens, is_ctx, &pc.step.tape);
    pc.step.cand_idx = candidate_indices(hist.size(), K);
    const auto q = head_scores(p, pc.step.tape.xf, pc.step.cand_idx, "acq");
    pc.step.pi = softmax(q);
    pc.step.action = sample_categorical(pc.step.pi, rng);
    return pc;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Parameter names and shapes, for checkpoint validation.
std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>>
expected_shapes() {
    std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> v;
    auto lin = [&](const std::string& n, std::size_t fi, std::size_t fo) {
        v.push_back({n + "_W", {fi, fo}});
        v.push_back({n + "_b", {1, fo}});
    };
    lin("emb0", 3, kDim);
    lin("emb1", kDim, kDim);
    for (std::size_t l = 0; l < kLayers; ++l) {
        const std::string pre = "l" + std::to_string(l) + "_";
        lin(pre + "q", kDim, kDim);
        lin(pre + "k", kDim, kDim);
        lin(pre + "v", kDim, kDim);
        lin(pre + "o", kDim, kDim);
        lin(pre + "f0", kDim, kFF);
        lin(pre + "f1", kFF, kDim);
        v.push_back({pre + "ln1_g", {1, kDim}});
        v.push_back({pre + "ln1_b", {1, kDim}});
        v.push_back({pre + "ln2_g", {1, kDim}});
        v.push_back({pre + "ln2_b", {1, kDim}});
    }
    v.push_back({"lnf_g", {1, kDim}});
    v.push_back({"lnf_b", {1, kDim}});
    lin("acq", kDim, 1);
    lin("pred", kDim, 1);
    return v;
}

}  // namespace

Mat encode_history(const History& hist) {
    const std::size_t n = hist.size();
    Mat tokens(n, 3);
    if (n == 0) return tokens;
    double lo = hist.goodness[0], hi = hist.goodness[0];
    for (double g : hist.goodness) {
        lo = std::min(lo, g);
        hi = std::max(hi, g);
    }
    const bool flat = (hi - lo) < 1e-12;
    for (std::size_t i = 0; i < n; ++i) {
        tokens.a[i * 3 + 0] = hist.xs[i];
        tokens.a[i * 3 + 1] = flat ? 0.5 : (hist.goodness[i] - lo) / (hi - lo);
        tokens.a[i * 3 + 2] = 0.0;
    }
    return tokens;
}

std::vector<double> score_candidates(const Params& p, const History& hist,
                                     const std::vector<double>& candidates) {
    const Mat htok = encode_history(hist);
    const Mat tokens = candidate_tokens(htok, candidates);
    const auto is_ctx = context_flags(hist.size(), candidates.size());
    const Mat xf = forward(p, tokens, is_ctx);
    return head_scores(p, xf, candidate_indices(hist.size(), candidates.size()),
                       "acq");
}

double select_next(const Params& p, const History& hist,
                   const SearchSpace& space, std::size_t K, double explore_rho,
                   Rng& rng) {
    DomainMap dm;
    dm.integer = true;
    dm.lo = static_cast<double>(space.t_min);
    dm.hi = static_cast<double>(space.t_max);
    if (rng.uniform() < explore_rho) return dm.draw(rng);
    std::vector<double> queries(K), xs(K);
    for (std::size_t i = 0; i < K; ++i) {
        queries[i] = dm.draw(rng);
        xs[i] = dm.norm(queries[i]);
    }
    const auto scores = score_candidates(p, hist, xs);
    return queries[sample_categorical(softmax(scores), rng)];
}

double select_next_unit(const Params& p, const History& hist, std::size_t K,
                        double explore_rho, Rng& rng) {
    if (rng.uniform() < explore_rho) return rng.uniform();
    const PolicyChoice pc = policy_step_unit(p, hist, K, rng);
    return pc.cand[pc.step.action];
}

MetaTask sample_gp_task(Rng& rng) {
    const GridFunction gf = sample_gp1d_function(rng.raw());
    MetaTask task;
    task.best = *std::max_element(gf.values.begin(), gf.values.end());
    task.latent = [gf](double x) { return gf(x); };
    task.family = "gp";
    return task;
}

MetaTask sample_rastrigin_task(Rng& rng) {
    const double shift = rng.uniform(0.15, 0.85);
    MetaTask task;
    task.latent = [shift](double x) {
        return -rastrigin_1d(4.0 * (x - shift)) / 40.0;
    };
    task.best = 0.0;
    task.family = "rastrigin";
    return task;
}

MetaTask default_task_sampler(Rng& rng) {
    return rng.uniform() < 0.5 ? sample_gp_task(rng) : sample_rastrigin_task(rng);
}

Rollout rollout_once(const Params& p, const MetaTask& task,
                     const std::vector<std::pair<double, double>>& pool,
                     Rng& rng, const MetaTrainConfig& cfg) {
    Rollout roll;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& [x, g] : pool) {
        roll.hist.add(x, g);
        best = std::max(best, g);
    }
    std::vector<double> rewards;
    const std::size_t n_steps =
        cfg.horizon > pool.size() ? cfg.horizon - pool.size() : 0;
    for (std::size_t t = 0; t < n_steps; ++t) {
        PolicyChoice pc = policy_step_unit(p, roll.hist, cfg.n_candidates, rng);
        const double x = pc.cand[pc.step.action];
        const double y = task.latent(x);
        best = std::max(best, y);
        rewards.push_back(best);
        roll.hist.add(x, y);
        roll.steps.push_back(std::move(pc.step));
    }
    roll.reward_to_go.assign(rewards.size(), 0.0);
    double acc = 0.0;
    for (std::size_t t = rewards.size(); t-- > 0;) {
        acc = rewards[t] + cfg.gamma * acc;
        roll.reward_to_go[t] = acc;
    }
    return roll;
}

void backprop_steps(const Params& p, const std::vector<RolloutTapeStep>& steps,
                    const std::vector<double>& advantages, Grads& grads) {
    if (steps.size() != advantages.size()) {
        throw std::invalid_argument("backprop_steps: advantage count mismatch");
    }
    for (std::size_t t = 0; t < steps.size(); ++t) {
        const double adv = advantages[t];
        if (adv == 0.0) continue;
        const RolloutTapeStep& st = steps[t];
        std::vector<double> dq(st.pi.size());
        for (std::size_t i = 0; i < st.pi.size(); ++i) {
            const double onehot = i == st.action ? 1.0 : 0.0;
            dq[i] = -adv * (onehot - st.pi[i]);
        }
        Mat dxf = head_backward(p, st.tape, st.cand_idx, dq, "acq", grads);
        backward(p, st.tape, dxf, grads);
    }
}

double aux_pass(const Params& p, const History& hist, const MetaTask& task,
                Rng& rng, Grads& grads, const MetaTrainConfig& cfg) {
    if (hist.size() < 2) return 0.693;
    const std::size_t n_pred = cfg.aux_n_pred;
    std::vector<double> px(n_pred);
    for (auto& x : px) x = rng.uniform();
    const Mat htok = encode_history(hist);
    const Mat tokens = candidate_tokens(htok, px);
    const auto is_ctx = context_flags(hist.size(), n_pred);
    Tape tape;
    forward(p, tokens, is_ctx, &tape);
    const auto pidx = candidate_indices(hist.size(), n_pred);
    const auto u = head_scores(p, tape.xf, pidx, "pred");
    std::vector<double> fv(n_pred);
    for (std::size_t i = 0; i < n_pred; ++i) fv[i] = task.latent(px[i]);
    std::vector<double> du(n_pred, 0.0);
    double loss = 0.0;
    const std::size_t nd = n_pred - 1;
    for (std::size_t i = 0; i < nd; ++i) {
        const double a = fv[i] + cfg.aux_noise * rng.normal();
        const double b = fv[i + 1] + cfg.aux_noise * rng.normal();
        const double lab = a > b ? 1.0 : 0.0;
        const double s = sigmoid(u[i] - u[i + 1]);
        loss += -(lab * std::log(s + 1e-12) +
                  (1.0 - lab) * std::log(1.0 - s + 1e-12));
        const double g =
            (s - lab) / static_cast<double>(nd) * cfg.aux_weight;
        du[i] += g;
        du[i + 1] -= g;
    }
    Mat dxf = head_backward(p, tape, pidx, du, "pred", grads);
    backward(p, tape, dxf, grads);
    return loss / static_cast<double>(nd);
}

Params meta_train(const TaskSampler& sampler, const MetaTrainConfig& cfg,
                  std::uint64_t seed, std::vector<EpisodeStats>* trace) {
    Rng rng(seed);
    Params p = init_params(rng);
    Adam opt(p, cfg.lr);
    Params avg;
    for (const auto& [name, m] : p) avg[name] = Mat(m.rows, m.cols);
    std::size_t navg = 0;
    for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
        try {
            const MetaTask task = sampler(rng);
            const std::size_t u = rng.below(cfg.pool_max + 1);
            std::vector<std::pair<double, double>> pool(u);
            for (auto& [x, g] : pool) {
                x = rng.uniform();
                g = task.latent(x);
            }
            Grads grads = zero_grads(p);
            std::vector<Rollout> rolls;
            rolls.reserve(cfg.n_rollouts);
            for (std::size_t b = 0; b < cfg.n_rollouts; ++b) {
                rolls.push_back(rollout_once(p, task, pool, rng, cfg));
            }
            const std::size_t n_steps = rolls.front().reward_to_go.size();
            std::vector<double> mean_g(n_steps, 0.0);
            for (const auto& r : rolls) {
                for (std::size_t t = 0; t < n_steps; ++t) {
                    mean_g[t] += r.reward_to_go[t];
                }
            }
            for (auto& m : mean_g) m /= static_cast<double>(cfg.n_rollouts);
            EpisodeStats stats;
            double bce_sum = 0.0;
            std::size_t bce_n = 0;
            for (const auto& r : rolls) {
                std::vector<double> adv(n_steps);
                for (std::size_t t = 0; t < n_steps; ++t) {
                    adv[t] = (r.reward_to_go[t] - mean_g[t]) /
                             static_cast<double>(cfg.n_rollouts);
                }
                backprop_steps(p, r.steps, adv, grads);
                for (std::size_t pre : cfg.aux_prefixes) {
                    History hb;
                    const std::size_t n = std::min(pre, r.hist.size());
                    for (std::size_t i = 0; i < n; ++i) {
                        hb.add(r.hist.xs[i], r.hist.goodness[i]);
                    }
                    bce_sum += aux_pass(p, hb, task, rng, grads, cfg);
                    bce_n += 1;
                }
                stats.mean_return +=
                    (n_steps > 0 ? r.reward_to_go[0] : 0.0) /
                    static_cast<double>(cfg.n_rollouts);
            }
            stats.aux_bce = bce_n > 0 ? bce_sum / static_cast<double>(bce_n) : 0.0;
            const double gn = global_grad_norm(grads);
            if (!std::isfinite(gn)) {
                throw std::runtime_error("non-finite gradient norm");
            }
            clip_grads(grads, cfg.clip_norm);
            opt.step(p, grads);
            if (ep >= cfg.episodes / 2) {
                navg += 1;
                for (auto& [name, m] : avg) {
                    const Mat& src = p.at(name);
                    for (std::size_t i = 0; i < m.a.size(); ++i) {
                        m.a[i] += (src.a[i] - m.a[i]) / static_cast<double>(navg);
                    }
                }
            }
            if (trace) trace->push_back(stats);
        } catch (const std::exception& e) {
            throw std::runtime_error("meta-training failed at episode " +
                                     std::to_string(ep) + ": " + e.what());
        }
    }
    return navg > 0 ? avg : p;
}

Trajectory run_pabbo(Objective& obj, const Params& params, std::size_t K,
                     double explore_rho, std::size_t budget,
                     const std::vector<double>& init_pop, Rng& rng) {
    Trajectory traj;
    traj.method = "PABBO";
    const DomainMap dm = domain_map(obj);
    History hist;
    for (double q : init_pop) {
        if (traj.records.size() >= budget) break;
        try {
            const EvalRecord rec = obj.evaluate(q);
            traj.records.push_back(rec);
            traj.policy_ms.push_back(0.0);
            hist.add(dm.norm(rec.query), -rec.value);
        } catch (const BudgetExhausted&) {
            return traj;
        }
    }
    while (traj.records.size() < budget) {
        const auto t0 = std::chrono::steady_clock::now();
        double query;
        if (rng.uniform() < explore_rho) {
            query = dm.draw(rng);
        } else {
            std::vector<double> queries(K), xs(K);
            for (std::size_t i = 0; i < K; ++i) {
                queries[i] = dm.draw(rng);
                xs[i] = dm.norm(queries[i]);
            }
            const auto scores = score_candidates(params, hist, xs);
            query = queries[sample_categorical(softmax(scores), rng)];
        }
        const auto t1 = std::chrono::steady_clock::now();
        const double ms =
            std::chrono::duration<double, std::milli>(t1 - t0).count();
        try {
            const EvalRecord rec = obj.evaluate(query);
            traj.records.push_back(rec);
            traj.policy_ms.push_back(ms);
            hist.add(dm.norm(rec.query), -rec.value);
        } catch (const BudgetExhausted&) {
            break;
        }
    }
    return traj;
}

void save_policy(const Params& p, const CheckpointInfo& info,
                 const std::string& path) {
    json j;
    j["format_version"] = 1;
    j["architecture"] = {{"dim", kDim},       {"heads", kHeads},
                         {"head_dim", kHeadDim}, {"ff", kFF},
                         {"layers", kLayers}, {"ln_eps", kLnEps}};
    j["training"] = {{"seed", info.seed}, {"episodes", info.episodes}};
    json w = json::object();
    for (const auto& [name, m] : p) {
        w[name] = {{"rows", m.rows}, {"cols", m.cols}, {"data", m.a}};
    }
    j["weights"] = std::move(w);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write policy file: " + path);
    out << j.dump();
    out << '\n';
    if (!out) throw std::runtime_error("failed writing policy file: " + path);
}

Params load_policy(const std::string& path, CheckpointInfo* info) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open policy file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("invalid policy file " + path + ": " +
                                 e.what());
    }
    if (!j.is_object() || j.value("format_version", 0) != 1) {
        throw std::runtime_error("invalid policy file " + path +
                                 ": unsupported format_version");
    }
    const auto& arch = j.at("architecture");
    if (arch.at("dim") != kDim || arch.at("heads") != kHeads ||
        arch.at("ff") != kFF || arch.at("layers") != kLayers) {
        throw std::runtime_error("invalid policy file " + path +
                                 ": architecture mismatch");
    }
    if (info) {
        info->seed = j.at("training").at("seed").get<std::uint64_t>();
        info->episodes = j.at("training").at("episodes").get<std::size_t>();
    }
    const auto& w = j.at("weights");
    Params p;
    for (const auto& [name, shape] : expected_shapes()) {
        if (!w.contains(name)) {
            throw std::runtime_error("invalid policy file " + path +
                                     ": missing weight " + name);
        }
        const auto& entry = w.at(name);
        Mat m(entry.at("rows").get<std::size_t>(),
              entry.at("cols").get<std::size_t>());
        if (m.rows != shape.first || m.cols != shape.second) {
            throw std::runtime_error("invalid policy file " + path +
                                     ": bad shape for " + name);
        }
        const auto& data = entry.at("data");
        if (data.size() != m.a.size()) {
            throw std::runtime_error("invalid policy file " + path +
                                     ": bad data length for " + name);
        }
        for (std::size_t i = 0; i < m.a.size(); ++i) {
            m.a[i] = data[i].get<double>();
        }
        p[name] = std::move(m);
    }
    return p;
}

}  // namespace topicopt::pabbo
