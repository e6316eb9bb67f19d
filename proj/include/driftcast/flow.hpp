#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "driftcast/errors.hpp"

namespace driftcast {

/// A single H x W plane of doubles.
struct Field {
    int H = 0;
    int W = 0;
    std::vector<double> v;

    Field() = default;
    Field(int h, int w, double fill = 0.0) : H(h), W(w), v(static_cast<std::size_t>(h) * w, fill) {}

    double at(int i, int j) const { return v[static_cast<std::size_t>(i) * W + j]; }
    double& at(int i, int j) { return v[static_cast<std::size_t>(i) * W + j]; }
    std::size_t size() const { return v.size(); }
};

/// Per-pixel quadratic model f(x) ~ x^T A x + b^T x + c in local coordinates
/// around each pixel. A is symmetric by construction (a01 stores both
/// off-diagonal entries).
struct PolyExpansion {
    int H = 0;
    int W = 0;
    std::vector<double> a00, a01, a11; // A components
    std::vector<double> b0, b1;        // gradient along rows (i) and cols (j)
    std::vector<double> c;

    explicit PolyExpansion(int h = 0, int w = 0)
        : H(h), W(w), a00(static_cast<std::size_t>(h) * w), a01(a00.size()), a11(a00.size()), b0(a00.size()),
          b1(a00.size()), c(a00.size()) {}
};

/// Dense displacement field. u displaces along the row axis (i), v along the
/// column axis (j), both in cells per frame.
struct FlowField {
    Field u;
    Field v;

    FlowField() = default;
    FlowField(int h, int w) : u(h, w), v(h, w) {}
    int H() const { return u.H; }
    int W() const { return u.W; }
};

/// Flows aligned to M observation frames: flows[m] maps frame m to frame m+1
/// and flows[M-1] duplicates flows[M-2].
struct FlowSequence {
    std::vector<FlowField> flows;

    int size() const { return static_cast<int>(flows.size()); }
};

struct FlowParams {
    int pyramid_levels = 4;
    int window_radius = 5;         // neighborhood half-width for both fits
    double gaussian_sigma = 1.5;   // weight falloff inside the neighborhood
    double smoothness_lambda = 0.15; // relative to the local data-term strength
    int iterations = 3;            // fixed-point iterations per level
    double post_smoothing_sigma = 1.0;

    void validate() const {
        if (pyramid_levels < 1) throw InvariantError("FlowParams: pyramid_levels must be >= 1");
        if (window_radius < 1) throw InvariantError("FlowParams: window_radius must be >= 1");
        if (!(gaussian_sigma > 0.0)) throw InvariantError("FlowParams: gaussian_sigma must be positive");
        if (smoothness_lambda < 0.0) throw InvariantError("FlowParams: smoothness_lambda must be >= 0");
        if (iterations < 1) throw InvariantError("FlowParams: iterations must be >= 1");
    }
};

namespace detail {

/// Separable Gaussian blur with truncated, renormalized kernels at borders.
inline Field gaussian_smooth(const Field& f, double sigma) {
    if (!(sigma > 0.0)) return f;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    for (int d = -radius; d <= radius; ++d) k[d + radius] = std::exp(-(d * d) / (2.0 * sigma * sigma));

    Field tmp(f.H, f.W), out(f.H, f.W);
    for (int i = 0; i < f.H; ++i)
        for (int j = 0; j < f.W; ++j) {
            double acc = 0.0, wsum = 0.0;
            for (int d = -radius; d <= radius; ++d) {
                int jj = j + d;
                if (jj < 0 || jj >= f.W) continue;
                acc += k[d + radius] * f.at(i, jj);
                wsum += k[d + radius];
            }
            tmp.at(i, j) = acc / wsum;
        }
    for (int i = 0; i < f.H; ++i)
        for (int j = 0; j < f.W; ++j) {
            double acc = 0.0, wsum = 0.0;
            for (int d = -radius; d <= radius; ++d) {
                int ii = i + d;
                if (ii < 0 || ii >= f.H) continue;
                acc += k[d + radius] * tmp.at(ii, j);
                wsum += k[d + radius];
            }
            out.at(i, j) = acc / wsum;
        }
    return out;
}

/// Solve the symmetric system G x = h in place (n <= 6 here). Throws
/// NumericError when a pivot falls below the rank threshold, so callers can
/// retry with a smaller basis on degenerate windows.
inline void solve_sym(int n, double* G, double* h) {
    double scale = 0.0;
    for (int a = 0; a < n; ++a) scale = std::max(scale, std::abs(G[a * n + a]));
    const double pivot_floor = scale * 1e-9 + 1e-300;

    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(G[r * n + col]) > std::abs(G[piv * n + col])) piv = r;
        if (piv != col) {
            for (int cidx = 0; cidx < n; ++cidx) std::swap(G[col * n + cidx], G[piv * n + cidx]);
            std::swap(h[col], h[piv]);
        }
        double d = G[col * n + col];
        if (std::abs(d) < pivot_floor) throw NumericError("solve_sym: rank-deficient system");
        for (int r = col + 1; r < n; ++r) {
            double factor = G[r * n + col] / d;
            if (factor == 0.0) continue;
            for (int cidx = col; cidx < n; ++cidx) G[r * n + cidx] -= factor * G[col * n + cidx];
            h[r] -= factor * h[col];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double acc = h[r];
        for (int cidx = r + 1; cidx < n; ++cidx) acc -= G[r * n + cidx] * h[cidx];
        h[r] = acc / G[r * n + r];
    }
}

inline double quad_eval(const PolyExpansion& e, std::size_t idx, double di, double dj) {
    return di * (e.a00[idx] * di + e.a01[idx] * dj) + dj * (e.a01[idx] * di + e.a11[idx] * dj) + e.b0[idx] * di +
           e.b1[idx] * dj + e.c[idx];
}

} // namespace detail

/// Gaussian-weighted least-squares fit of the quadratic model at every pixel.
/// Border pixels use truncated windows with renormalized weights, so no
/// padding is involved.
inline PolyExpansion polynomial_expansion(const Field& frame, const FlowParams& params) {
    params.validate();
    for (double x : frame.v)
        if (!std::isfinite(x)) throw NumericError("polynomial_expansion: non-finite input cell");

    const int r = params.window_radius;
    const double inv2s2 = 1.0 / (2.0 * params.gaussian_sigma * params.gaussian_sigma);
    std::vector<double> wrow(static_cast<std::size_t>(2 * r + 1));
    for (int d = -r; d <= r; ++d) wrow[d + r] = std::exp(-(d * d) * inv2s2);

    PolyExpansion e(frame.H, frame.W);
    // Basis ordering: [1, di, dj, di^2, dj^2, di*dj].
    double G[36], h[6];
    for (int i = 0; i < frame.H; ++i) {
        for (int j = 0; j < frame.W; ++j) {
            std::fill(G, G + 36, 0.0);
            std::fill(h, h + 6, 0.0);
            const int di_lo = std::max(-r, -i), di_hi = std::min(r, frame.H - 1 - i);
            const int dj_lo = std::max(-r, -j), dj_hi = std::min(r, frame.W - 1 - j);
            double wsum = 0.0;
            for (int di = di_lo; di <= di_hi; ++di)
                for (int dj = dj_lo; dj <= dj_hi; ++dj) wsum += wrow[di + r] * wrow[dj + r];
            for (int di = di_lo; di <= di_hi; ++di) {
                for (int dj = dj_lo; dj <= dj_hi; ++dj) {
                    const double w = wrow[di + r] * wrow[dj + r] / wsum;
                    const double f = frame.at(i + di, j + dj);
                    const double phi[6] = {1.0, static_cast<double>(di), static_cast<double>(dj),
                                           static_cast<double>(di) * di, static_cast<double>(dj) * dj,
                                           static_cast<double>(di) * dj};
                    for (int a = 0; a < 6; ++a) {
                        h[a] += w * phi[a] * f;
                        for (int b = a; b < 6; ++b) G[a * 6 + b] += w * phi[a] * phi[b];
                    }
                }
            }
            for (int a = 0; a < 6; ++a)
                for (int b = 0; b < a; ++b) G[a * 6 + b] = G[b * 6 + a];

            const std::size_t idx = static_cast<std::size_t>(i) * frame.W + j;
            // Degenerate windows (clamped pyramid levels, 1-cell strips) drop
            // to the largest basis the samples can still determine.
            double G6[36], h6[6];
            std::copy(G, G + 36, G6);
            std::copy(h, h + 6, h6);
            try {
                detail::solve_sym(6, G6, h6);
                e.c[idx] = h6[0];
                e.b0[idx] = h6[1];
                e.b1[idx] = h6[2];
                e.a00[idx] = h6[3];
                e.a11[idx] = h6[4];
                e.a01[idx] = h6[5] / 2.0;
                continue;
            } catch (const NumericError&) {
            }
            double G3[9] = {G[0], G[1], G[2], G[6], G[7], G[8], G[12], G[13], G[14]};
            double h3[3] = {h[0], h[1], h[2]};
            try {
                detail::solve_sym(3, G3, h3);
                e.c[idx] = h3[0];
                e.b0[idx] = h3[1];
                e.b1[idx] = h3[2];
            } catch (const NumericError&) {
                e.c[idx] = h[0]; // weighted mean; weights are normalized
            }
        }
    }
    return e;
}

/// Single-level displacement estimate between two frames. Starting from
/// `init` (zero if null), each fixed-point iteration linearizes brightness
/// constancy around the current flow using the mean gradient of the two
/// expansions, accumulates Gaussian-weighted 2x2 normal equations over the
/// neighborhood, and solves per pixel. The smoothness weight pulls each
/// pixel toward its neighborhood-average flow; the result is Gaussian
/// filtered with post_smoothing_sigma.
inline FlowField estimate_flow_pair(const Field& f1, const Field& f2, const FlowField* init, const FlowParams& params) {
    params.validate();
    if (f1.H != f2.H || f1.W != f2.W)
        throw ShapeError("estimate_flow_pair: frame shapes differ (" + std::to_string(f1.H) + "x" + std::to_string(f1.W) +
                         " vs " + std::to_string(f2.H) + "x" + std::to_string(f2.W) + ")");
    if (init && (init->H() != f1.H || init->W() != f1.W))
        throw ShapeError("estimate_flow_pair: init shape differs from the frames");

    const int H = f1.H, W = f1.W;
    const PolyExpansion e1 = polynomial_expansion(f1, params);
    const PolyExpansion e2 = polynomial_expansion(f2, params);

    FlowField d = init ? *init : FlowField(H, W);

    const int r = params.window_radius;
    const double inv2s2 = 1.0 / (2.0 * params.gaussian_sigma * params.gaussian_sigma);
    std::vector<double> wrow(static_cast<std::size_t>(2 * r + 1));
    for (int k = -r; k <= r; ++k) wrow[k + r] = std::exp(-(k * k) * inv2s2);

    Field bb0(H, W), bb1(H, W), rhs(H, W); // per-pixel mean gradient and residual target
    const double lambda = params.smoothness_lambda;

    for (int iter = 0; iter < params.iterations; ++iter) {
        // Pointwise linearization at the current flow.
        double grad_scale = 0.0; // mean squared gradient, makes lambda dimensionless
        for (int i = 0; i < H; ++i) {
            for (int j = 0; j < W; ++j) {
                const std::size_t idx = static_cast<std::size_t>(i) * W + j;
                const double ti = std::clamp(i + d.u.v[idx], 0.0, static_cast<double>(H - 1));
                const double tj = std::clamp(j + d.v.v[idx], 0.0, static_cast<double>(W - 1));
                const int ri = static_cast<int>(std::lround(ti));
                const int rj = static_cast<int>(std::lround(tj));
                const double di = ti - ri, dj = tj - rj;
                const std::size_t widx = static_cast<std::size_t>(ri) * W + rj;

                const double g2i = e2.b0[widx] + 2.0 * (e2.a00[widx] * di + e2.a01[widx] * dj);
                const double g2j = e2.b1[widx] + 2.0 * (e2.a01[widx] * di + e2.a11[widx] * dj);
                bb0.v[idx] = 0.5 * (e1.b0[idx] + g2i);
                bb1.v[idx] = 0.5 * (e1.b1[idx] + g2j);

                const double x2 = detail::quad_eval(e2, widx, di, dj);
                const double resid = e1.c[idx] - x2; // X1(x) - X2(x + d)
                rhs.v[idx] = resid + bb0.v[idx] * d.u.v[idx] + bb1.v[idx] * d.v.v[idx];
                grad_scale += 0.5 * (bb0.v[idx] * bb0.v[idx] + bb1.v[idx] * bb1.v[idx]);
            }
        }
        grad_scale /= static_cast<double>(H) * W;
        const double lp = lambda * grad_scale;

        // Neighborhood-average of the current flow for the smoothness pull.
        Field ubar(H, W), vbar(H, W);
        for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) {
                double su = 0.0, sv = 0.0;
                int n = 0;
                for (int di = -1; di <= 1; ++di)
                    for (int dj = -1; dj <= 1; ++dj) {
                        if (di == 0 && dj == 0) continue;
                        int ii = i + di, jj = j + dj;
                        if (ii < 0 || ii >= H || jj < 0 || jj >= W) continue;
                        su += d.u.at(ii, jj);
                        sv += d.v.at(ii, jj);
                        ++n;
                    }
                ubar.at(i, j) = su / n;
                vbar.at(i, j) = sv / n;
            }

        // Windowed normal equations, normalized weights, solved per pixel.
        FlowField next(H, W);
        for (int i = 0; i < H; ++i) {
            for (int j = 0; j < W; ++j) {
                double g00 = 0.0, g01 = 0.0, g11 = 0.0, h0 = 0.0, h1 = 0.0, wsum = 0.0;
                const int di_lo = std::max(-r, -i), di_hi = std::min(r, H - 1 - i);
                const int dj_lo = std::max(-r, -j), dj_hi = std::min(r, W - 1 - j);
                for (int di = di_lo; di <= di_hi; ++di)
                    for (int dj = dj_lo; dj <= dj_hi; ++dj) wsum += wrow[di + r] * wrow[dj + r];
                for (int di = di_lo; di <= di_hi; ++di) {
                    for (int dj = dj_lo; dj <= dj_hi; ++dj) {
                        const double w = wrow[di + r] * wrow[dj + r] / wsum;
                        const std::size_t y = static_cast<std::size_t>(i + di) * W + (j + dj);
                        const double bu = bb0.v[y], bv = bb1.v[y], t = rhs.v[y];
                        g00 += w * bu * bu;
                        g01 += w * bu * bv;
                        g11 += w * bv * bv;
                        h0 += w * bu * t;
                        h1 += w * bv * t;
                    }
                }
                const double a = g00 + lp, b = g01, c = g11 + lp;
                const double det = a * c - b * b;
                const double sum = a + c;
                const std::size_t idx = static_cast<std::size_t>(i) * W + j;
                if (det > 1e-12 * sum * sum + 1e-300) {
                    const double r0 = h0 + lp * ubar.v[idx];
                    const double r1 = h1 + lp * vbar.v[idx];
                    next.u.v[idx] = (c * r0 - b * r1) / det;
                    next.v.v[idx] = (a * r1 - b * r0) / det;
                } else {
                    next.u.v[idx] = ubar.v[idx];
                    next.v.v[idx] = vbar.v[idx];
                }
            }
        }
        d = std::move(next);
    }

    if (params.post_smoothing_sigma > 0.0) {
        d.u = detail::gaussian_smooth(d.u, params.post_smoothing_sigma);
        d.v = detail::gaussian_smooth(d.v, params.post_smoothing_sigma);
    }
    return d;
}

/// Level 0 is the input; each next level is blurred then decimated by 2,
/// halving (floor) each dimension. Generation stops early when a level
/// would drop below 2 cells in either axis.
inline std::vector<Field> build_pyramid(const Field& frame, int levels) {
    if (levels < 1) throw InvariantError("build_pyramid: levels must be >= 1");
    std::vector<Field> pyr;
    pyr.push_back(frame);
    while (static_cast<int>(pyr.size()) < levels) {
        const Field& cur = pyr.back();
        const int nh = cur.H / 2, nw = cur.W / 2;
        if (nh < 2 || nw < 2) break;
        Field blurred = detail::gaussian_smooth(cur, 1.0);
        Field next(nh, nw);
        for (int i = 0; i < nh; ++i)
            for (int j = 0; j < nw; ++j) next.at(i, j) = blurred.at(2 * i, 2 * j);
        pyr.push_back(std::move(next));
    }
    return pyr;
}

namespace detail {

inline Field upsample_bilinear(const Field& f, int H2, int W2) {
    Field out(H2, W2);
    for (int i = 0; i < H2; ++i) {
        const double ci = std::min(i * 0.5, static_cast<double>(f.H - 1));
        const int i0 = static_cast<int>(ci);
        const int i1 = std::min(i0 + 1, f.H - 1);
        const double fi = ci - i0;
        for (int j = 0; j < W2; ++j) {
            const double cj = std::min(j * 0.5, static_cast<double>(f.W - 1));
            const int j0 = static_cast<int>(cj);
            const int j1 = std::min(j0 + 1, f.W - 1);
            const double fj = cj - j0;
            out.at(i, j) = (1 - fi) * ((1 - fj) * f.at(i0, j0) + fj * f.at(i0, j1)) +
                           fi * ((1 - fj) * f.at(i1, j0) + fj * f.at(i1, j1));
        }
    }
    return out;
}

} // namespace detail

/// Coarse-to-fine estimation: solve at the coarsest pyramid level from zero,
/// then at each finer level initialize with twice the upsampled flow and
/// refine.
inline FlowField estimate_flow_pyramidal(const Field& f1, const Field& f2, const FlowParams& params) {
    params.validate();
    if (f1.H != f2.H || f1.W != f2.W)
        throw ShapeError("estimate_flow_pyramidal: frame shapes differ (" + std::to_string(f1.H) + "x" +
                         std::to_string(f1.W) + " vs " + std::to_string(f2.H) + "x" + std::to_string(f2.W) + ")");

    std::vector<Field> p1 = build_pyramid(f1, params.pyramid_levels);
    std::vector<Field> p2 = build_pyramid(f2, params.pyramid_levels);
    const int levels = static_cast<int>(std::min(p1.size(), p2.size()));

    FlowField d;
    for (int l = levels - 1; l >= 0; --l) {
        if (l == levels - 1) {
            d = estimate_flow_pair(p1[l], p2[l], nullptr, params);
        } else {
            FlowField init;
            init.u = detail::upsample_bilinear(d.u, p1[l].H, p1[l].W);
            init.v = detail::upsample_bilinear(d.v, p1[l].H, p1[l].W);
            for (double& x : init.u.v) x *= 2.0;
            for (double& x : init.v.v) x *= 2.0;
            d = estimate_flow_pair(p1[l], p2[l], &init, params);
        }
    }
    return d;
}

/// Pairwise flows for M frames; the last entry duplicates the final pair so
/// the sequence aligns 1:1 with the observation frames.
inline FlowSequence estimate_flow_sequence(const std::vector<Field>& frames, const FlowParams& params) {
    if (frames.size() < 2) throw RangeError("estimate_flow_sequence: need at least 2 frames");
    FlowSequence seq;
    seq.flows.reserve(frames.size());
    for (std::size_t m = 0; m + 1 < frames.size(); ++m)
        seq.flows.push_back(estimate_flow_pyramidal(frames[m], frames[m + 1], params));
    seq.flows.push_back(seq.flows.back());
    return seq;
}

/// Convenience overload for a packed M x H x W buffer.
inline FlowSequence estimate_flow_sequence(std::span<const double> frames, int M, int H, int W,
                                           const FlowParams& params) {
    if (frames.size() != static_cast<std::size_t>(M) * H * W)
        throw ShapeError("estimate_flow_sequence: buffer length does not equal M*H*W");
    std::vector<Field> fs;
    fs.reserve(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) {
        Field f(H, W);
        std::copy(frames.begin() + static_cast<std::ptrdiff_t>(m) * H * W,
                  frames.begin() + static_cast<std::ptrdiff_t>(m + 1) * H * W, f.v.begin());
        fs.push_back(std::move(f));
    }
    return estimate_flow_sequence(fs, params);
}

} // namespace driftcast
