#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "topicopt/rng.hpp"

namespace topicopt::pabbo {

// Row-major dense matrix, sized for the small policy network.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
    double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

// All weights keyed by name (emb0_W, l0_q_W, ..., acq_W, pred_W and biases).
using Params = std::map<std::string, Mat>;
using Grads = std::map<std::string, Mat>;

inline constexpr std::size_t kDim = 32;
inline constexpr std::size_t kHeads = 2;
inline constexpr std::size_t kHeadDim = kDim / kHeads;
inline constexpr std::size_t kFF = 64;
inline constexpr std::size_t kLayers = 3;
inline constexpr double kLnEps = 1e-5;

// Xavier-normal init, zero biases; the two linear heads use the same scheme.
Params init_params(Rng& rng);
Grads zero_grads(const Params& p);

// Forward activations kept for backprop.
struct LayerTape {
    Mat x_in, xn1, q, k, v, o, x_mid, xn2, f0, fa;
    std::vector<Mat> attn;          // one N x N matrix per head
    std::vector<double> ln1_s, ln2_s;
    Mat ln1_xh, ln2_xh;
};
struct Tape {
    Mat tokens;
    std::vector<bool> is_ctx;
    Mat h0, a0;
    std::vector<LayerTape> layers;
    Mat lnf_xh;
    std::vector<double> lnf_s;
    Mat xf;
};

// tokens: N x 3 rows (query_norm, value_norm, flag). Context tokens are
// attendable by every token; a non-context token is visible only to itself.
// Throws a numeric error naming the first layer that produced a non-finite
// activation.
Mat forward(const Params& p, const Mat& tokens, const std::vector<bool>& is_ctx,
            Tape* tape = nullptr);

// Accumulates parameter gradients for d(loss)/d(xf) into grads.
void backward(const Params& p, const Tape& tape, const Mat& dxf, Grads& grads);

// Linear head ("acq" or "pred") over selected token rows.
std::vector<double> head_scores(const Params& p, const Mat& xf,
                                const std::vector<std::size_t>& idx,
                                const std::string& which);
// Returns the dxf contribution and accumulates head weight gradients.
Mat head_backward(const Params& p, const Tape& tape,
                  const std::vector<std::size_t>& idx,
                  const std::vector<double>& dscore, const std::string& which,
                  Grads& grads);

std::vector<double> softmax(const std::vector<double>& scores);

double global_grad_norm(const Grads& g);
void clip_grads(Grads& g, double max_norm);

struct Adam {
    explicit Adam(const Params& p, double lr = 3e-4, double b1 = 0.9,
                  double b2 = 0.999, double eps = 1e-8);
    void step(Params& p, const Grads& g);
    std::map<std::string, Mat> m, v;
    double lr, b1, b2, eps;
    std::size_t t = 0;
};

}  // namespace topicopt::pabbo
