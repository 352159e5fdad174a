#include "topicopt/pabbo_net.hpp"

#include <cmath>
#include <stdexcept>

namespace topicopt::pabbo {

namespace {

Mat matmul(const Mat& A, const Mat& B) {
    Mat C(A.rows, B.cols);
    for (std::size_t i = 0; i < A.rows; ++i) {
        for (std::size_t k = 0; k < A.cols; ++k) {
            const double a = A.a[i * A.cols + k];
            if (a == 0.0) continue;
            const double* brow = &B.a[k * B.cols];
            double* crow = &C.a[i * C.cols];
            for (std::size_t j = 0; j < B.cols; ++j) crow[j] += a * brow[j];
        }
    }
    return C;
}

// A^T B where A is k x n: result n x m.
Mat matmul_tA(const Mat& A, const Mat& B) {
    Mat C(A.cols, B.cols);
    for (std::size_t k = 0; k < A.rows; ++k) {
        for (std::size_t i = 0; i < A.cols; ++i) {
            const double a = A.a[k * A.cols + i];
            if (a == 0.0) continue;
            const double* brow = &B.a[k * B.cols];
            double* crow = &C.a[i * C.cols];
            for (std::size_t j = 0; j < B.cols; ++j) crow[j] += a * brow[j];
        }
    }
    return C;
}

// Linear layer y = x W + b with W named name_W (in x out), b 1 x out.
Mat linear(const Params& p, const Mat& x, const std::string& name) {
    const Mat& W = p.at(name + "_W");
    const Mat& b = p.at(name + "_b");
    Mat y = matmul(x, W);
    for (std::size_t i = 0; i < y.rows; ++i) {
        for (std::size_t j = 0; j < y.cols; ++j) y.a[i * y.cols + j] += b.a[j];
    }
    return y;
}

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x / 1.4142135623730951));
}

double gelu_grad(double x) {
    const double phi = std::exp(-0.5 * x * x) / 2.5066282746310002;
    return 0.5 * (1.0 + std::erf(x / 1.4142135623730951)) + x * phi;
}

// Row-wise layer norm; returns y and stores xh, s for backward.
Mat ln_fwd(const Mat& x, const Mat& g, const Mat& b, Mat& xh_out,
           std::vector<double>& s_out) {
    Mat y(x.rows, x.cols);
    xh_out = Mat(x.rows, x.cols);
    s_out.assign(x.rows, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* row = &x.a[i * x.cols];
        double mu = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) mu += row[j];
        mu /= static_cast<double>(x.cols);
        double var = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double c = row[j] - mu;
            var += c * c;
        }
        var /= static_cast<double>(x.cols);
        const double s = std::sqrt(var + kLnEps);
        s_out[i] = s;
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double xh = (row[j] - mu) / s;
            xh_out.a[i * x.cols + j] = xh;
            y.a[i * y.cols + j] = xh * g.a[j] + b.a[j];
        }
    }
    return y;
}

// dx = (dxh - mean(dxh) - xh * mean(dxh * xh)) / s
Mat ln_bwd(const Mat& dy, const Mat& xh, const std::vector<double>& s,
           const Mat& g, Mat& dg, Mat& db) {
    Mat dx(dy.rows, dy.cols);
    for (std::size_t i = 0; i < dy.rows; ++i) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < dy.cols; ++j) {
            const double dxh = dy.a[i * dy.cols + j] * g.a[j];
            const double xhv = xh.a[i * xh.cols + j];
            dg.a[j] += dy.a[i * dy.cols + j] * xhv;
            db.a[j] += dy.a[i * dy.cols + j];
            m1 += dxh;
            m2 += dxh * xhv;
        }
        m1 /= static_cast<double>(dy.cols);
        m2 /= static_cast<double>(dy.cols);
        for (std::size_t j = 0; j < dy.cols; ++j) {
            const double dxh = dy.a[i * dy.cols + j] * g.a[j];
            const double xhv = xh.a[i * xh.cols + j];
            dx.a[i * dx.cols + j] = (dxh - m1 - xhv * m2) / s[i];
        }
    }
    return dx;
}

bool finite(const Mat& m) {
    for (double v : m.a) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void check_finite(const Mat& m, const std::string& where) {
    if (!finite(m)) {
        throw std::runtime_error("pabbo forward: non-finite activation in " +
                                 where);
    }
}

void add_linear_grads(const Mat& x_in, const Mat& dy, const std::string& name,
                      Grads& grads) {
    Mat gw = matmul_tA(x_in, dy);
    Mat& gW = grads.at(name + "_W");
    for (std::size_t i = 0; i < gw.a.size(); ++i) gW.a[i] += gw.a[i];
    Mat& gb = grads.at(name + "_b");
    for (std::size_t i = 0; i < dy.rows; ++i) {
        for (std::size_t j = 0; j < dy.cols; ++j) {
            gb.a[j] += dy.a[i * dy.cols + j];
        }
    }
}

// Ascending indices row i may attend: the context tokens plus itself.
// Masked pairs carry exactly zero attention weight, so all computation is
// restricted to this set.
void attended(const std::vector<bool>& is_ctx, std::size_t i,
              std::vector<std::size_t>& out) {
    out.clear();
    for (std::size_t j = 0; j < is_ctx.size(); ++j) {
        if (is_ctx[j] || j == i) out.push_back(j);
    }
}

Mat matmul_tB(const Mat& A, const Mat& B) {
    // A (n x k) times B^T where B is m x k: result n x m.
    Mat C(A.rows, B.rows);
    for (std::size_t i = 0; i < A.rows; ++i) {
        for (std::size_t j = 0; j < B.rows; ++j) {
            double s = 0.0;
            const double* arow = &A.a[i * A.cols];
            const double* brow = &B.a[j * B.cols];
            for (std::size_t k = 0; k < A.cols; ++k) s += arow[k] * brow[k];
            C.a[i * C.cols + j] = s;
        }
    }
    return C;
}

}  // namespace

Params init_params(Rng& rng) {
    Params p;
    auto lin = [&](const std::string& name, std::size_t fi, std::size_t fo) {
        const double s = std::sqrt(2.0 / static_cast<double>(fi + fo));
        Mat W(fi, fo);
        for (auto& v : W.a) v = rng.normal(0.0, s);
        p[name + "_W"] = std::move(W);
        p[name + "_b"] = Mat(1, fo);
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
        Mat ones(1, kDim);
        for (auto& v : ones.a) v = 1.0;
        p[pre + "ln1_g"] = ones;
        p[pre + "ln1_b"] = Mat(1, kDim);
        p[pre + "ln2_g"] = ones;
        p[pre + "ln2_b"] = Mat(1, kDim);
    }
    Mat ones(1, kDim);
    for (auto& v : ones.a) v = 1.0;
    p["lnf_g"] = ones;
    p["lnf_b"] = Mat(1, kDim);
    lin("acq", kDim, 1);
    lin("pred", kDim, 1);
    return p;
}

Grads zero_grads(const Params& p) {
    Grads g;
    for (const auto& [name, m] : p) g[name] = Mat(m.rows, m.cols);
    return g;
}

Mat forward(const Params& p, const Mat& tokens, const std::vector<bool>& is_ctx,
            Tape* tape) {
    if (tokens.cols != 3) {
        throw std::invalid_argument("pabbo forward: tokens must be N x 3");
    }
    if (is_ctx.size() != tokens.rows) {
        throw std::invalid_argument("pabbo forward: is_ctx size mismatch");
    }
    const std::size_t N = tokens.rows;
    Tape local;
    Tape& tp = tape ? *tape : local;
    tp.tokens = tokens;
    tp.is_ctx = is_ctx;

    tp.h0 = linear(p, tokens, "emb0");
    tp.a0 = Mat(N, kDim);
    for (std::size_t i = 0; i < tp.h0.a.size(); ++i) {
        tp.a0.a[i] = gelu(tp.h0.a[i]);
    }
    Mat x = linear(p, tp.a0, "emb1");
    check_finite(x, "embedder");

    tp.layers.assign(kLayers, LayerTape{});
    for (std::size_t l = 0; l < kLayers; ++l) {
        const std::string pre = "l" + std::to_string(l) + "_";
        LayerTape& lc = tp.layers[l];
        lc.x_in = x;
        lc.xn1 = ln_fwd(x, p.at(pre + "ln1_g"), p.at(pre + "ln1_b"), lc.ln1_xh,
                        lc.ln1_s);
        lc.q = linear(p, lc.xn1, pre + "q");
        lc.k = linear(p, lc.xn1, pre + "k");
        lc.v = linear(p, lc.xn1, pre + "v");
        lc.o = Mat(N, kDim);
        lc.attn.assign(kHeads, Mat());
        const double scale = 1.0 / std::sqrt(static_cast<double>(kHeadDim));
        std::vector<std::size_t> ai;
        ai.reserve(N);
        for (std::size_t h = 0; h < kHeads; ++h) {
            const std::size_t off = h * kHeadDim;
            Mat A(N, N);
            for (std::size_t i = 0; i < N; ++i) {
                attended(is_ctx, i, ai);
                const double* qi = &lc.q.a[i * kDim + off];
                double rowmax = -1e300;
                for (std::size_t j : ai) {
                    const double* kj = &lc.k.a[j * kDim + off];
                    double s = 0.0;
                    for (std::size_t d = 0; d < kHeadDim; ++d) s += qi[d] * kj[d];
                    s *= scale;
                    A.a[i * N + j] = s;
                    rowmax = std::max(rowmax, s);
                }
                double denom = 0.0;
                for (std::size_t j : ai) {
                    const double e = std::exp(A.a[i * N + j] - rowmax);
                    A.a[i * N + j] = e;
                    denom += e;
                }
                double* orow = &lc.o.a[i * kDim + off];
                for (std::size_t j : ai) {
                    const double a = A.a[i * N + j] / denom;
                    A.a[i * N + j] = a;
                    const double* vj = &lc.v.a[j * kDim + off];
                    for (std::size_t d = 0; d < kHeadDim; ++d) {
                        orow[d] += a * vj[d];
                    }
                }
            }
            lc.attn[h] = std::move(A);
        }
        Mat att = linear(p, lc.o, pre + "o");
        for (std::size_t i = 0; i < x.a.size(); ++i) x.a[i] += att.a[i];
        lc.x_mid = x;
        lc.xn2 = ln_fwd(x, p.at(pre + "ln2_g"), p.at(pre + "ln2_b"), lc.ln2_xh,
                        lc.ln2_s);
        lc.f0 = linear(p, lc.xn2, pre + "f0");
        lc.fa = Mat(N, kFF);
        for (std::size_t i = 0; i < lc.f0.a.size(); ++i) {
            lc.fa.a[i] = gelu(lc.f0.a[i]);
        }
        Mat f1 = linear(p, lc.fa, pre + "f1");
        for (std::size_t i = 0; i < x.a.size(); ++i) x.a[i] += f1.a[i];
        check_finite(x, "encoder layer " + std::to_string(l));
    }
    tp.xf = ln_fwd(x, p.at("lnf_g"), p.at("lnf_b"), tp.lnf_xh, tp.lnf_s);
    check_finite(tp.xf, "final layer norm");
    return tp.xf;
}

void backward(const Params& p, const Tape& tape, const Mat& dxf, Grads& grads) {
    const std::size_t N = tape.tokens.rows;
    Mat dx = ln_bwd(dxf, tape.lnf_xh, tape.lnf_s, p.at("lnf_g"),
                    grads.at("lnf_g"), grads.at("lnf_b"));
    for (std::size_t li = kLayers; li-- > 0;) {
        const std::string pre = "l" + std::to_string(li) + "_";
        const LayerTape& lc = tape.layers[li];
        // FF block: residual passes dx through, plus the f1 path.
        const Mat& df1 = dx;
        Mat dfa = matmul_tB(df1, p.at(pre + "f1_W"));
        add_linear_grads(lc.fa, df1, pre + "f1", grads);
        Mat df0(N, kFF);
        for (std::size_t i = 0; i < df0.a.size(); ++i) {
            df0.a[i] = dfa.a[i] * gelu_grad(lc.f0.a[i]);
        }
        Mat dxn2 = matmul_tB(df0, p.at(pre + "f0_W"));
        add_linear_grads(lc.xn2, df0, pre + "f0", grads);
        Mat dx2 = ln_bwd(dxn2, lc.ln2_xh, lc.ln2_s, p.at(pre + "ln2_g"),
                         grads.at(pre + "ln2_g"), grads.at(pre + "ln2_b"));
        for (std::size_t i = 0; i < dx.a.size(); ++i) dx.a[i] += dx2.a[i];

        // attention block
        const Mat& datt = dx;
        Mat dO = matmul_tB(datt, p.at(pre + "o_W"));
        add_linear_grads(lc.o, datt, pre + "o", grads);
        Mat dQ(N, kDim), dK(N, kDim), dV(N, kDim);
        const double scale = 1.0 / std::sqrt(static_cast<double>(kHeadDim));
        std::vector<std::size_t> att;
        att.reserve(N);
        std::vector<double> dA(N);
        for (std::size_t h = 0; h < kHeads; ++h) {
            const std::size_t off = h * kHeadDim;
            const Mat& A = lc.attn[h];
            for (std::size_t i = 0; i < N; ++i) {
                attended(tape.is_ctx, i, att);
                const double* doi = &dO.a[i * kDim + off];
                // dA = dO_h V_h^T ; dS row i = A_i * (dA_i - sum_j dA_ij A_ij)
                double dot = 0.0;
                for (std::size_t j : att) {
                    const double* vj = &lc.v.a[j * kDim + off];
                    double s = 0.0;
                    for (std::size_t d = 0; d < kHeadDim; ++d) s += doi[d] * vj[d];
                    dA[j] = s;
                    dot += s * A.a[i * N + j];
                }
                const double* qi = &lc.q.a[i * kDim + off];
                double* dqi = &dQ.a[i * kDim + off];
                for (std::size_t j : att) {
                    const double a = A.a[i * N + j];
                    const double dS = a * (dA[j] - dot);
                    const double* kj = &lc.k.a[j * kDim + off];
                    double* dkj = &dK.a[j * kDim + off];
                    double* dvj = &dV.a[j * kDim + off];
                    for (std::size_t d = 0; d < kHeadDim; ++d) {
                        dqi[d] += dS * kj[d] * scale;
                        dkj[d] += dS * qi[d] * scale;
                        dvj[d] += a * doi[d];
                    }
                }
            }
        }
        Mat dxn1 = matmul_tB(dQ, p.at(pre + "q_W"));
        {
            Mat t = matmul_tB(dK, p.at(pre + "k_W"));
            for (std::size_t i = 0; i < dxn1.a.size(); ++i) dxn1.a[i] += t.a[i];
            t = matmul_tB(dV, p.at(pre + "v_W"));
            for (std::size_t i = 0; i < dxn1.a.size(); ++i) dxn1.a[i] += t.a[i];
        }
        add_linear_grads(lc.xn1, dQ, pre + "q", grads);
        add_linear_grads(lc.xn1, dK, pre + "k", grads);
        add_linear_grads(lc.xn1, dV, pre + "v", grads);
        Mat dx1 = ln_bwd(dxn1, lc.ln1_xh, lc.ln1_s, p.at(pre + "ln1_g"),
                         grads.at(pre + "ln1_g"), grads.at(pre + "ln1_b"));
        for (std::size_t i = 0; i < dx.a.size(); ++i) dx.a[i] += dx1.a[i];
    }
    Mat da0 = matmul_tB(dx, p.at("emb1_W"));
    add_linear_grads(tape.a0, dx, "emb1", grads);
    Mat dh0(N, kDim);
    for (std::size_t i = 0; i < dh0.a.size(); ++i) {
        dh0.a[i] = da0.a[i] * gelu_grad(tape.h0.a[i]);
    }
    add_linear_grads(tape.tokens, dh0, "emb0", grads);
}

std::vector<double> head_scores(const Params& p, const Mat& xf,
                                const std::vector<std::size_t>& idx,
                                const std::string& which) {
    const Mat& W = p.at(which + "_W");
    const Mat& b = p.at(which + "_b");
    std::vector<double> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        double s = 0.0;
        for (std::size_t d = 0; d < kDim; ++d) {
            s += xf.a[idx[i] * kDim + d] * W.a[d];
        }
        out[i] = s + b.a[0];
    }
    return out;
}

Mat head_backward(const Params& p, const Tape& tape,
                  const std::vector<std::size_t>& idx,
                  const std::vector<double>& dscore, const std::string& which,
                  Grads& grads) {
    const Mat& W = p.at(which + "_W");
    Mat dxf(tape.xf.rows, kDim);
    Mat& gW = grads.at(which + "_W");
    Mat& gb = grads.at(which + "_b");
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double ds = dscore[i];
        gb.a[0] += ds;
        for (std::size_t d = 0; d < kDim; ++d) {
            gW.a[d] += tape.xf.a[idx[i] * kDim + d] * ds;
            dxf.a[idx[i] * kDim + d] += ds * W.a[d];
        }
    }
    return dxf;
}

std::vector<double> softmax(const std::vector<double>& scores) {
    double mx = scores.front();
    for (double s : scores) mx = std::max(mx, s);
    std::vector<double> out(scores.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - mx);
        denom += out[i];
    }
    for (auto& v : out) v /= denom;
    return out;
}

double global_grad_norm(const Grads& g) {
    double s = 0.0;
    for (const auto& [name, m] : g) {
        for (double v : m.a) s += v * v;
    }
    return std::sqrt(s);
}

void clip_grads(Grads& g, double max_norm) {
    const double n = global_grad_norm(g);
    if (n <= max_norm || n == 0.0) return;
    const double f = max_norm / n;
    for (auto& [name, m] : g) {
        for (auto& v : m.a) v *= f;
    }
}

Adam::Adam(const Params& p, double lr_, double b1_, double b2_, double eps_)
    : lr(lr_), b1(b1_), b2(b2_), eps(eps_) {
    for (const auto& [name, mat] : p) {
        m[name] = Mat(mat.rows, mat.cols);
        v[name] = Mat(mat.rows, mat.cols);
    }
}

void Adam::step(Params& p, const Grads& g) {
    t += 1;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (auto& [name, mat] : p) {
        const Mat& gm = g.at(name);
        Mat& mm = m.at(name);
        Mat& vm = v.at(name);
        for (std::size_t i = 0; i < mat.a.size(); ++i) {
            mm.a[i] = b1 * mm.a[i] + (1.0 - b1) * gm.a[i];
            vm.a[i] = b2 * vm.a[i] + (1.0 - b2) * gm.a[i] * gm.a[i];
            mat.a[i] -=
                lr * (mm.a[i] / bc1) / (std::sqrt(vm.a[i] / bc2) + eps);
        }
    }
}

}  // namespace topicopt::pabbo
