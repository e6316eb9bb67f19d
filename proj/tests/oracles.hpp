#pragma once

// Test-side oracles, kept independent of the library code paths they check.

#include <cmath>
#include <complex>
#include <vector>

#include "driftcast/flow.hpp"

namespace oracles {

/// Frequency-domain circular cross-correlation: per feature channel,
/// IDFT(conj(DFT(k)) * DFT(q)), summed over channels and divided by M*d.
/// Direct O(M^2) DFT, no shared code with the time-domain implementation.
inline std::vector<double> autocorr_scores_dft(const std::vector<double>& q, const std::vector<double>& k, int M,
                                               int d) {
    using cd = std::complex<double>;
    const double two_pi = 2.0 * M_PI;
    std::vector<double> scores(static_cast<std::size_t>(M), 0.0);
    for (int c = 0; c < d; ++c) {
        std::vector<cd> Q(M), K(M);
        for (int f = 0; f < M; ++f) {
            cd qa(0), ka(0);
            for (int t = 0; t < M; ++t) {
                const cd w = std::polar(1.0, -two_pi * f * t / M);
                qa += q[static_cast<std::size_t>(t) * d + c] * w;
                ka += k[static_cast<std::size_t>(t) * d + c] * w;
            }
            Q[f] = qa;
            K[f] = ka;
        }
        for (int tau = 0; tau < M; ++tau) {
            cd acc(0);
            for (int f = 0; f < M; ++f) acc += std::conj(K[f]) * Q[f] * std::polar(1.0, two_pi * f * tau / M);
            scores[tau] += acc.real() / M; // inverse DFT normalization
        }
    }
    for (double& s : scores) s /= static_cast<double>(M) * d;
    return scores;
}

// --- analytic fields for flow oracles ---------------------------------------

/// Smooth band-limited field, defined on all of R^2 so shifted samples are
/// exact: g(i, j) = sin(2*pi*i/P) + cos(2*pi*j/P) + 0.5*sin(2*pi*(i+j)/(2P)).
inline double smooth_field(double i, double j, double period) {
    const double w = 2.0 * M_PI / period;
    return std::sin(w * i) + std::cos(w * j) + 0.5 * std::sin(0.5 * w * (i + j));
}

inline driftcast::Field sampled_field(int H, int W, double shift_i, double shift_j, double period) {
    driftcast::Field f(H, W);
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) f.at(i, j) = smooth_field(i - shift_i, j - shift_j, period);
    return f;
}

inline driftcast::Field gaussian_bump(int H, int W, double ci, double cj, double sigma) {
    driftcast::Field f(H, W);
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j)
            f.at(i, j) = std::exp(-((i - ci) * (i - ci) + (j - cj) * (j - cj)) / (2.0 * sigma * sigma));
    return f;
}

/// Mean Euclidean distance between the estimated flow and a uniform true
/// shift, over cells at least `margin` away from every edge.
inline double mean_interior_flow_error(const driftcast::FlowField& d, double true_i, double true_j, int margin) {
    double acc = 0.0;
    int n = 0;
    for (int i = margin; i < d.H() - margin; ++i)
        for (int j = margin; j < d.W() - margin; ++j) {
            acc += std::hypot(d.u.at(i, j) - true_i, d.v.at(i, j) - true_j);
            ++n;
        }
    return acc / n;
}

/// Total variation of a flow field (sum of absolute forward differences).
inline double total_variation(const driftcast::FlowField& d) {
    double tv = 0.0;
    auto add = [&tv](const driftcast::Field& f) {
        for (int i = 0; i < f.H; ++i)
            for (int j = 0; j < f.W; ++j) {
                if (i + 1 < f.H) tv += std::abs(f.at(i + 1, j) - f.at(i, j));
                if (j + 1 < f.W) tv += std::abs(f.at(i, j + 1) - f.at(i, j));
            }
    };
    add(d.u);
    add(d.v);
    return tv;
}

} // namespace oracles
