#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "driftcast/errors.hpp"
#include "driftcast/flow.hpp"
#include "driftcast/rng.hpp"
#include "driftcast/tensor.hpp"

namespace driftcast {

/// Architecture settings. The three use_* toggles drive the ablation grid:
/// all-ones flow gates, identity feature path, and a feed-forward-only
/// sequence mixer respectively.
struct ModelConfig {
    int d_model = 128;
    int d_ff = 256;
    int M = 30;
    int L = 30;
    int H = 8;
    int W = 8;
    std::vector<int> inception_kernels{1, 3, 5};
    int autocorr_top_k = 0; // 0 -> ceil(ln M)
    std::uint64_t seed = 0;
    bool use_optical_attention = true;
    bool use_inception = true;
    bool use_autocorrelation = true;

    int N() const { return H * W; }

    int top_k() const {
        int k = autocorr_top_k > 0 ? autocorr_top_k : static_cast<int>(std::ceil(std::log(static_cast<double>(M))));
        return std::clamp(k, 1, M);
    }

    void validate() const {
        if (d_model < 1 || d_ff < 1) throw ConfigError("ModelConfig: d_model and d_ff must be >= 1");
        if (M < 1 || L < 1 || H < 1 || W < 1) throw ConfigError("ModelConfig: M, L, H, W must be >= 1");
        if (inception_kernels.empty()) throw ConfigError("ModelConfig: need at least one kernel size");
        for (int k : inception_kernels)
            if (k < 1 || k % 2 == 0) throw ConfigError("ModelConfig: kernel sizes must be odd, got " + std::to_string(k));
        if (autocorr_top_k > M) throw ConfigError("ModelConfig: top_k cannot exceed M");
    }
};

/// All learnable weights. Tensors are leaves shared with the recorded graph;
/// the optimizer mutates their values in place between steps.
struct ModelParams {
    std::vector<Tensor> branch_kernels; // one [M, M, k, k] per kernel size
    std::vector<Tensor> branch_biases;  // one [M] per kernel size
    std::vector<Tensor> reducer_blocks; // one [M, M, 1, 1] per kernel size; together the 1x1 reducer over concatenated channels
    Tensor reducer_bias;                // [M]
    Tensor fusion_w;                    // [2N, N]
    Tensor fusion_b;                    // [1, N]
    Tensor enc_w;                       // [N, d_model]
    Tensor enc_b;                       // [1, d_model]
    Tensor q_w, k_w, v_w;               // [d_model, d_model]
    Tensor ff_w1;                       // [d_model, d_ff]
    Tensor ff_b1;                       // [1, d_ff]
    Tensor ff_w2;                       // [d_ff, d_model]
    Tensor ff_b2;                       // [1, d_model]
    Tensor head_w;                      // [d_model, L]
    Tensor head_b;                      // [1, L]

    /// Seeded init, uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], tensors
    /// drawn in declared order.
    static ModelParams init(const ModelConfig& cfg) {
        cfg.validate();
        Rng rng(cfg.seed);
        auto u = [&rng](Shape shape, int fan_in) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            std::vector<double> v(detail::shape_numel(shape));
            for (double& x : v) x = rng.uniform(-bound, bound);
            return Tensor::from(std::move(shape), std::move(v));
        };

        const int M = cfg.M, N = cfg.N(), d = cfg.d_model;
        const int nb = static_cast<int>(cfg.inception_kernels.size());
        ModelParams p;
        for (int k : cfg.inception_kernels) {
            p.branch_kernels.push_back(u(Shape{M, M, k, k}, M * k * k));
            p.branch_biases.push_back(u(Shape{M}, M * k * k));
        }
        for (int b = 0; b < nb; ++b) p.reducer_blocks.push_back(u(Shape{M, M, 1, 1}, nb * M));
        p.reducer_bias = u(Shape{M}, nb * M);
        p.fusion_w = u(Shape{2 * N, N}, 2 * N);
        p.fusion_b = u(Shape{1, N}, 2 * N);
        p.enc_w = u(Shape{N, d}, N);
        p.enc_b = u(Shape{1, d}, N);
        p.q_w = u(Shape{d, d}, d);
        p.k_w = u(Shape{d, d}, d);
        p.v_w = u(Shape{d, d}, d);
        p.ff_w1 = u(Shape{d, cfg.d_ff}, d);
        p.ff_b1 = u(Shape{1, cfg.d_ff}, d);
        p.ff_w2 = u(Shape{cfg.d_ff, d}, cfg.d_ff);
        p.ff_b2 = u(Shape{1, d}, cfg.d_ff);
        p.head_w = u(Shape{d, cfg.L}, d);
        p.head_b = u(Shape{1, cfg.L}, d);
        return p;
    }

    /// Declared checkpoint order with stable names.
    std::vector<std::pair<std::string, Tensor*>> named() {
        std::vector<std::pair<std::string, Tensor*>> out;
        for (std::size_t i = 0; i < branch_kernels.size(); ++i) {
            out.emplace_back("branch_kernel_" + std::to_string(i), &branch_kernels[i]);
            out.emplace_back("branch_bias_" + std::to_string(i), &branch_biases[i]);
        }
        for (std::size_t i = 0; i < reducer_blocks.size(); ++i)
            out.emplace_back("reducer_block_" + std::to_string(i), &reducer_blocks[i]);
        out.emplace_back("reducer_bias", &reducer_bias);
        out.emplace_back("fusion_w", &fusion_w);
        out.emplace_back("fusion_b", &fusion_b);
        out.emplace_back("enc_w", &enc_w);
        out.emplace_back("enc_b", &enc_b);
        out.emplace_back("q_w", &q_w);
        out.emplace_back("k_w", &k_w);
        out.emplace_back("v_w", &v_w);
        out.emplace_back("ff_w1", &ff_w1);
        out.emplace_back("ff_b1", &ff_b1);
        out.emplace_back("ff_w2", &ff_w2);
        out.emplace_back("ff_b2", &ff_b2);
        out.emplace_back("head_w", &head_w);
        out.emplace_back("head_b", &head_b);
        return out;
    }

    std::vector<Tensor*> all() {
        std::vector<Tensor*> out;
        for (auto& [name, t] : named()) out.push_back(t);
        return out;
    }

    void zero_grads() {
        for (Tensor* t : all()) t->zero_grad();
    }
};

// ---------------------------------------------------------------------------
// Flow gates
// ---------------------------------------------------------------------------

/// Flattens a flow sequence into the two gating planes, each M x N:
/// gx holds the row-axis displacements, gy the column-axis ones.
inline std::pair<std::vector<double>, std::vector<double>> flow_gates(const FlowSequence& seq, int M, int N) {
    if (seq.size() != M) throw ShapeError("flow_gates: sequence length " + std::to_string(seq.size()) + " != M");
    std::vector<double> gx(static_cast<std::size_t>(M) * N), gy(gx.size());
    for (int m = 0; m < M; ++m) {
        const FlowField& f = seq.flows[m];
        if (static_cast<int>(f.u.size()) != N)
            throw ShapeError("flow_gates: flow field size " + std::to_string(f.u.size()) + " != N");
        std::copy(f.u.v.begin(), f.u.v.end(), gx.begin() + static_cast<std::ptrdiff_t>(m) * N);
        std::copy(f.v.v.begin(), f.v.v.end(), gy.begin() + static_cast<std::ptrdiff_t>(m) * N);
    }
    return {std::move(gx), std::move(gy)};
}

// ---------------------------------------------------------------------------
// Forward pieces
// ---------------------------------------------------------------------------

namespace detail {

inline void check_input_shape(const char* op, const Tensor& X, const ModelConfig& cfg) {
    if (X.shape().size() != 4 || X.shape()[1] != cfg.M || X.shape()[2] != cfg.H || X.shape()[3] != cfg.W)
        throw ShapeError(std::string(op) + ": input " + shape_str(X.shape()) + " does not match [B," +
                         std::to_string(cfg.M) + "," + std::to_string(cfg.H) + "," + std::to_string(cfg.W) + "]");
}

} // namespace detail

/// Parallel same-padded convolutions at every configured kernel size over the
/// M frames treated as channels, merged by the 1x1 reducer, plus the residual
/// input; spatial dims flattened to N.
inline Tensor inception_forward(const Tensor& X, ModelParams& p, const ModelConfig& cfg) {
    detail::check_input_shape("inception_forward", X, cfg);
    const int B = X.shape()[0];
    Tensor flat = reshape(X, Shape{B, cfg.M, cfg.N()});
    if (!cfg.use_inception) return flat;

    // The 1x1 reduction over concatenated branch channels is computed as the
    // sum of per-branch 1x1 convolutions, which is the same linear map.
    Tensor reduced;
    for (std::size_t bi = 0; bi < p.branch_kernels.size(); ++bi) {
        Tensor branch = conv2d(X, p.branch_kernels[bi], p.branch_biases[bi]);
        Tensor zero_bias = Tensor::zeros(Shape{cfg.M});
        Tensor part = conv2d(branch, p.reducer_blocks[bi], bi == 0 ? p.reducer_bias : zero_bias);
        reduced = bi == 0 ? part : add(reduced, part);
    }
    return add(reshape(reduced, Shape{B, cfg.M, cfg.N()}), flat);
}

/// Elementwise flow gating of the feature map, concatenation of the two
/// directional products, and linear compression back to N.
inline Tensor optical_attention(const Tensor& X, const Tensor& gate_x, const Tensor& gate_y, ModelParams& p,
                                const ModelConfig& cfg) {
    detail::check_input_shape("optical_attention", X, cfg);
    const int B = X.shape()[0];
    const Shape gate_shape{B, cfg.M, cfg.N()};
    if (gate_x.shape() != gate_shape || gate_y.shape() != gate_shape)
        throw ShapeError("optical_attention: gates " + detail::shape_str(gate_x.shape()) + " do not match " +
                         detail::shape_str(gate_shape));

    Tensor V = inception_forward(X, p, cfg);
    Tensor xf = mul(gate_x, V);
    Tensor yf = mul(gate_y, V);
    Tensor integral = concat(xf, yf); // [B, M, 2N]
    return linear(integral, p.fusion_w, &p.fusion_b);
}

/// Affine compression of the fused features into the latent width.
inline Tensor encode(const Tensor& o_tilde, ModelParams& p, const ModelConfig& cfg) {
    if (o_tilde.shape().size() != 3 || o_tilde.shape().back() != cfg.N())
        throw ShapeError("encode: input " + detail::shape_str(o_tilde.shape()) + " does not end in N=" +
                         std::to_string(cfg.N()));
    return linear(o_tilde, p.enc_w, &p.enc_b);
}

/// Per-lag circular correlation scores, averaged over time and feature
/// dimensions: R[b][tau] = (1/(M*d)) * sum_t <q[b][t], k[b][(t-tau) mod M]>.
inline Tensor autocorrelation_scores(const Tensor& q, const Tensor& k) {
    detail::check_same_shape("autocorrelation_scores", q, k);
    if (q.shape().size() != 3)
        throw ShapeError("autocorrelation_scores: expected [B,M,d], got " + detail::shape_str(q.shape()));
    const int B = q.shape()[0], M = q.shape()[1], d = q.shape()[2];
    Tensor ones = Tensor::full(Shape{M * d, 1}, 1.0);
    std::vector<Tensor> cols;
    cols.reserve(static_cast<std::size_t>(M));
    for (int tau = 0; tau < M; ++tau) {
        Tensor prod = mul(q, roll(k, tau, 1));
        Tensor summed = matmul(reshape(prod, Shape{B, M * d}), ones); // [B, 1]
        cols.push_back(scale(summed, 1.0 / (static_cast<double>(M) * d)));
    }
    return reshape(concat(std::span<const Tensor>(cols.data(), cols.size())), Shape{B, M});
}

namespace detail {

/// Lags ordered by batch-mean score, ties broken by smaller lag.
inline std::vector<int> top_lags(const Tensor& scores, int top_k) {
    const int B = scores.shape()[0], M = scores.shape()[1];
    std::vector<double> mean_score(static_cast<std::size_t>(M), 0.0);
    for (int b = 0; b < B; ++b)
        for (int tau = 0; tau < M; ++tau) mean_score[tau] += scores.values()[static_cast<std::size_t>(b) * M + tau];
    std::vector<int> order(static_cast<std::size_t>(M));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mean_score[a] > mean_score[b]; });
    order.resize(static_cast<std::size_t>(top_k));
    return order;
}

} // namespace detail

/// Sequence mixing: project to q/k/v, score every lag, softmax-weight the
/// top-k circular shifts of v, add the residual, then the feed-forward pair
/// with its own residual. With use_autocorrelation off only the feed-forward
/// path remains.
inline Tensor autocorrelation_block(const Tensor& Z, ModelParams& p, const ModelConfig& cfg) {
    if (Z.shape().size() != 3 || Z.shape()[1] != cfg.M || Z.shape()[2] != cfg.d_model)
        throw ShapeError("autocorrelation_block: input " + detail::shape_str(Z.shape()) + " does not match [B," +
                         std::to_string(cfg.M) + "," + std::to_string(cfg.d_model) + "]");
    const int top_k = cfg.top_k();
    if (top_k > cfg.M) throw ConfigError("autocorrelation_block: top_k exceeds M");

    Tensor mixed = Z;
    if (cfg.use_autocorrelation) {
        const int B = Z.shape()[0], M = cfg.M, d = cfg.d_model;
        Tensor q = linear(Z, p.q_w);
        Tensor k = linear(Z, p.k_w);
        Tensor v = linear(Z, p.v_w);
        Tensor scores = autocorrelation_scores(q, k); // [B, M]
        const std::vector<int> lags = detail::top_lags(scores, top_k);
        Tensor weights = softmax(gather(scores, lags)); // [B, top_k]
        Tensor ones_row = Tensor::full(Shape{1, M * d}, 1.0);
        Tensor agg;
        for (int j = 0; j < top_k; ++j) {
            Tensor wj = gather(weights, {j});                                      // [B, 1]
            Tensor wexp = reshape(matmul(wj, ones_row), Shape{B, M, d});           // broadcast via outer product
            Tensor term = mul(wexp, roll(v, lags[static_cast<std::size_t>(j)], 1));
            agg = j == 0 ? term : add(agg, term);
        }
        mixed = add(agg, Z);
    }

    Tensor hidden = relu(linear(mixed, p.ff_w1, &p.ff_b1));
    Tensor ff = linear(hidden, p.ff_w2, &p.ff_b2);
    return add(ff, mixed);
}

/// Projects the latent sequence to the horizon and transposes to [B, L, M].
inline Tensor decode(const Tensor& z_mixed, ModelParams& p, const ModelConfig& cfg) {
    if (z_mixed.shape().size() != 3 || z_mixed.shape()[2] != cfg.d_model)
        throw ShapeError("decode: input " + detail::shape_str(z_mixed.shape()) + " does not end in d_model=" +
                         std::to_string(cfg.d_model));
    Tensor heads = linear(z_mixed, p.head_w, &p.head_b); // [B, M, L]
    return transpose(heads);                             // [B, L, M]
}

/// Full forward pass: optical attention -> encode -> autocorrelation block
/// -> decode. Deterministic given inputs and params.
inline Tensor forward(const Tensor& X, const Tensor& gate_x, const Tensor& gate_y, ModelParams& p,
                      const ModelConfig& cfg) {
    Tensor o_tilde = optical_attention(X, gate_x, gate_y, p, cfg);
    Tensor z = encode(o_tilde, p, cfg);
    Tensor mixed = autocorrelation_block(z, p, cfg);
    return decode(mixed, p, cfg);
}

} // namespace driftcast
