#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "driftcast/errors.hpp"

namespace driftcast {

/// M x N matrix whose row m is the flattened frame at time t_{m+1}
/// (row-major flattening of an H x W grid, N = H*W).
struct OriginalAttractor {
    int M = 0;
    int N = 0;
    int H = 0;
    int W = 0;
    std::vector<double> values; // row-major M x N

    double at(int m, int n) const { return values[static_cast<std::size_t>(m) * N + n]; }
};

/// L x M Hankel matrix of one grid point's trajectory segments:
/// values[i][m] = series[m + i], so anti-diagonals are constant.
struct DelayAttractor {
    int L = 0;
    int M = 0;
    int target_index = -1;
    std::vector<double> values; // row-major L x M

    double at(int i, int m) const { return values[static_cast<std::size_t>(i) * M + m]; }
};

inline OriginalAttractor build_original_attractor(std::span<const double> frames, int M, int H, int W) {
    if (M < 1 || H < 1 || W < 1) throw InvariantError("build_original_attractor: sizes must be >= 1");
    if (frames.size() != static_cast<std::size_t>(M) * H * W)
        throw ShapeError("build_original_attractor: frame buffer length " + std::to_string(frames.size()) +
                         " does not equal M*H*W");
    OriginalAttractor o;
    o.M = M;
    o.N = H * W;
    o.H = H;
    o.W = W;
    o.values.assign(frames.begin(), frames.end()); // flattening is the identity on row-major storage
    return o;
}

inline DelayAttractor build_delay_attractor(std::span<const double> series, int M, int L, int target_index = -1) {
    if (M < 1 || L < 1) throw InvariantError("build_delay_attractor: M and L must be >= 1");
    if (series.size() < static_cast<std::size_t>(M) + L - 1)
        throw RangeError("build_delay_attractor: series length " + std::to_string(series.size()) + " < M+L-1 = " +
                         std::to_string(M + L - 1));
    DelayAttractor d;
    d.L = L;
    d.M = M;
    d.target_index = target_index;
    d.values.resize(static_cast<std::size_t>(L) * M);
    for (int i = 0; i < L; ++i)
        for (int m = 0; m < M; ++m) d.values[static_cast<std::size_t>(i) * M + m] = series[m + i];
    return d;
}

enum class ExtractMode { last_column, antidiagonal_mean };

inline ExtractMode parse_extract_mode(const std::string& name) {
    if (name == "last" || name == "last_column") return ExtractMode::last_column;
    if (name == "antidiag" || name == "antidiagonal_mean") return ExtractMode::antidiagonal_mean;
    throw ConfigError("unknown extract mode: " + name);
}

/// Turns a (possibly inexact) L x M delay matrix into a length-L forecast.
/// last_column reads column M-1; antidiagonal_mean averages every entry that
/// predicts the same physical time (r + c == M-1 + i). The two agree exactly
/// on Hankel inputs.
inline std::vector<double> extract_forecast(std::span<const double> d_hat, int L, int M, ExtractMode mode) {
    if (L < 1 || M < 1) throw InvariantError("extract_forecast: L and M must be >= 1");
    if (d_hat.size() != static_cast<std::size_t>(L) * M)
        throw ShapeError("extract_forecast: matrix length " + std::to_string(d_hat.size()) + " does not equal L*M");

    std::vector<double> forecast(static_cast<std::size_t>(L));
    if (mode == ExtractMode::last_column) {
        for (int i = 0; i < L; ++i) forecast[i] = d_hat[static_cast<std::size_t>(i) * M + (M - 1)];
        return forecast;
    }
    for (int i = 0; i < L; ++i) {
        const int diag = (M - 1) + i; // r + c identifies the physical time step
        double sum = 0.0;
        int count = 0;
        for (int r = 0; r < L; ++r) {
            int c = diag - r;
            if (c < 0 || c >= M) continue;
            sum += d_hat[static_cast<std::size_t>(r) * M + c];
            ++count;
        }
        forecast[i] = sum / count;
    }
    return forecast;
}

inline std::vector<double> extract_forecast(const DelayAttractor& d, ExtractMode mode) {
    return extract_forecast(d.values, d.L, d.M, mode);
}

/// Advisory Takens check: the horizon L must exceed twice the attractor's
/// box-counting dimension for the embedding to preserve topology.
inline bool embedding_dimension_ok(int L, double d_o) {
    if (!(d_o > 0.0)) throw InvariantError("embedding_dimension_ok: d_o must be positive");
    return static_cast<double>(L) > 2.0 * d_o;
}

} // namespace driftcast
