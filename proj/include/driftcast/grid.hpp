#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "driftcast/errors.hpp"
#include "driftcast/rng.hpp"

namespace driftcast {

/// A time-ordered stack of 2-D scalar fields (°C) with geo/time metadata.
/// Values are stored as f32, matching the on-disk payload, so save/load
/// round-trips are bit-exact (NaN marks land cells).
struct GridSeries {
    int T = 0;
    int H = 0;
    int W = 0;
    std::vector<float> data; // t-major, then row, then col

    double lat0 = 0.0;    // latitude of row 0
    double lon0 = 0.0;    // longitude of col 0
    double dlat = 0.25;   // degrees per row
    double dlon = 0.25;   // degrees per col
    double t0_days = 0.0; // epoch days of frame 0
    double dt_days = 1.0; // sampling interval in days

    int cells() const { return H * W; }

    float at(int t, int i, int j) const { return data[(static_cast<std::size_t>(t) * H + i) * W + j]; }
    float& at(int t, int i, int j) { return data[(static_cast<std::size_t>(t) * H + i) * W + j]; }

    void validate() const {
        if (T < 1 || H < 1 || W < 1)
            throw InvariantError("GridSeries: all of T, H, W must be >= 1");
        if (data.size() != static_cast<std::size_t>(T) * H * W)
            throw InvariantError("GridSeries: data length does not equal T*H*W");
        if (!(dt_days > 0.0) || !(dlat > 0.0) || !(dlon > 0.0))
            throw InvariantError("GridSeries: dt_days, dlat, dlon must be positive");
        if (!std::isfinite(lat0) || !std::isfinite(lon0) || !std::isfinite(t0_days))
            throw InvariantError("GridSeries: non-finite metadata");
    }
};

/// Sliding-window sampling settings. M input frames feed the model, L is the
/// forecast horizon, t_gap the stride between adjacent window starts, and
/// delta_t a subsampling stride applied to the time axis before windowing.
struct SamplingConfig {
    int M = 30;
    int L = 30;
    int t_gap = 5;
    int delta_t = 1;
    double split_ratio = 0.5;

    void validate() const {
        if (M < 2) throw InvariantError("SamplingConfig: M must be >= 2");
        if (L < 1) throw InvariantError("SamplingConfig: L must be >= 1");
        if (t_gap < 1) throw InvariantError("SamplingConfig: t_gap must be >= 1");
        if (delta_t < 1) throw InvariantError("SamplingConfig: delta_t must be >= 1");
        if (!(split_ratio > 0.0 && split_ratio < 1.0))
            throw InvariantError("SamplingConfig: split_ratio must lie in (0, 1)");
    }
};

/// One training/evaluation unit: M input frames, the target cell index, and
/// the L x M ground-truth delay matrix (row-major, Hankel by construction).
struct WindowSample {
    int M = 0;
    int L = 0;
    int H = 0;
    int W = 0;
    int target_index = 0;
    int window_start = 0;              // start index in the (subsampled) series
    std::vector<double> input_frames;  // M*H*W, NaN in non-target cells zero-filled
    std::vector<double> delay_target;  // L*M, delay_target[i*M + m] = x_k(start + m + i)

    double target_at(int i, int m) const { return delay_target[static_cast<std::size_t>(i) * M + m]; }
};

inline int default_target_index(int H, int W) { return (H / 2) * W + (W / 2); }

// ---------------------------------------------------------------------------
// .sstgrid binary format
//
// Little-endian layout: magic "SSTG", u32 version=1, u32 T, u32 H, u32 W,
// f64 lat0, lon0, dlat, dlon, t0_epoch_days, dt_days, then T*H*W f32 values
// in (t, row, col) row-major order. NaN marks land.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64le(std::string& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline void put_f32le(std::string& out, float v) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class ByteReader {
public:
    ByteReader(const std::string& buf, const std::string& what) : buf_(buf), what_(what) {}

    std::uint32_t u32le() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    double f64le() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return std::bit_cast<double>(v);
    }

    float f32le() {
        std::uint32_t v = u32le();
        return std::bit_cast<float>(v);
    }

    std::array<char, 4> bytes4() {
        need(4);
        std::array<char, 4> out{buf_[pos_], buf_[pos_ + 1], buf_[pos_ + 2], buf_[pos_ + 3]};
        pos_ += 4;
        return out;
    }

    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) throw FormatError(what_ + ": truncated file");
    }

    const std::string& buf_;
    std::string what_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline void save_grid_series(const GridSeries& series, const std::filesystem::path& path) {
    series.validate();
    std::string buf;
    buf.reserve(48 + series.data.size() * 4);
    buf.append("SSTG");
    detail::put_u32le(buf, 1u);
    detail::put_u32le(buf, static_cast<std::uint32_t>(series.T));
    detail::put_u32le(buf, static_cast<std::uint32_t>(series.H));
    detail::put_u32le(buf, static_cast<std::uint32_t>(series.W));
    detail::put_f64le(buf, series.lat0);
    detail::put_f64le(buf, series.lon0);
    detail::put_f64le(buf, series.dlat);
    detail::put_f64le(buf, series.dlon);
    detail::put_f64le(buf, series.t0_days);
    detail::put_f64le(buf, series.dt_days);
    for (float v : series.data) detail::put_f32le(buf, v);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

inline GridSeries load_grid_series(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    detail::ByteReader r(buf, path.string());
    auto magic = r.bytes4();
    if (std::memcmp(magic.data(), "SSTG", 4) != 0) throw FormatError(path.string() + ": bad magic");
    std::uint32_t version = r.u32le();
    if (version != 1) throw FormatError(path.string() + ": unsupported version " + std::to_string(version));

    GridSeries s;
    std::uint32_t T = r.u32le(), H = r.u32le(), W = r.u32le();
    s.lat0 = r.f64le();
    s.lon0 = r.f64le();
    s.dlat = r.f64le();
    s.dlon = r.f64le();
    s.t0_days = r.f64le();
    s.dt_days = r.f64le();

    for (double v : {s.lat0, s.lon0, s.dlat, s.dlon, s.t0_days, s.dt_days})
        if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite header value");
    if (T < 1 || H < 1 || W < 1) throw FormatError(path.string() + ": zero dimension in header");
    if (!(s.dt_days > 0.0) || !(s.dlat > 0.0) || !(s.dlon > 0.0))
        throw FormatError(path.string() + ": non-positive step in header");

    std::size_t n = static_cast<std::size_t>(T) * H * W;
    if (r.remaining() != n * 4)
        throw FormatError(path.string() + ": payload length mismatch (expected " + std::to_string(n * 4) +
                          " bytes, found " + std::to_string(r.remaining()) + ")");
    s.T = static_cast<int>(T);
    s.H = static_cast<int>(H);
    s.W = static_cast<int>(W);
    s.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.data[i] = r.f32le();
    return s;
}

// ---------------------------------------------------------------------------
// Synthetic series
// ---------------------------------------------------------------------------

enum class SynthKind { advecting_wave, eddy, seasonal };

inline SynthKind parse_synth_kind(const std::string& name) {
    if (name == "advecting_wave") return SynthKind::advecting_wave;
    if (name == "eddy") return SynthKind::eddy;
    if (name == "seasonal") return SynthKind::seasonal;
    throw ConfigError("unknown synthetic kind: " + name);
}

/// Knobs for the synthetic generators. shift_i/shift_j is the per-step pixel
/// translation of the wave pattern and the eddy track step (the track wraps
/// toroidally so it never leaves the grid). period_frames drives the seasonal
/// oscillation.
struct SynthOptions {
    int shift_i = 1;
    int shift_j = 0;
    int period_frames = 60;
};

inline GridSeries generate_synthetic(std::uint64_t seed, int T, int H, int W, SynthKind kind,
                                     const SynthOptions& opt = {}) {
    if (T < 1 || H < 1 || W < 1) throw InvariantError("generate_synthetic: sizes must be >= 1");
    if (opt.period_frames < 2) throw ConfigError("generate_synthetic: period_frames must be >= 2");

    GridSeries s;
    s.T = T;
    s.H = H;
    s.W = W;
    s.lat0 = 20.0;
    s.lon0 = -40.0;
    s.dlat = s.dlon = 0.25;
    s.t0_days = 0.0;
    s.dt_days = 1.0;
    s.data.resize(static_cast<std::size_t>(T) * H * W);

    Rng rng(seed);
    const double base = rng.uniform(8.0, 16.0);
    const double amp = rng.uniform(1.0, 3.0);
    const double phase0 = rng.uniform(0.0, 2.0 * M_PI);

    switch (kind) {
    case SynthKind::advecting_wave: {
        // Pattern translates by exactly (shift_i, shift_j) cells per frame.
        const double wavelength = 16.0;
        const double ki = 2.0 * M_PI / wavelength;
        const double kj = 2.0 * M_PI / wavelength;
        for (int t = 0; t < T; ++t)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    double arg = ki * (i - static_cast<double>(opt.shift_i) * t) +
                                 kj * (j - static_cast<double>(opt.shift_j) * t) + phase0;
                    s.at(t, i, j) = static_cast<float>(base + amp * std::sin(arg));
                }
        break;
    }
    case SynthKind::eddy: {
        // Warm-core Gaussian bump on a straight track over a toroidal grid.
        const double sigma = std::max(1.2, std::min(H, W) / 6.0);
        const int ci0 = static_cast<int>(rng.index(static_cast<std::size_t>(H)));
        const int cj0 = static_cast<int>(rng.index(static_cast<std::size_t>(W)));
        const double bump = rng.uniform(2.0, 4.0);
        for (int t = 0; t < T; ++t) {
            int ci = ((ci0 + opt.shift_i * t) % H + H) % H;
            int cj = ((cj0 + opt.shift_j * t) % W + W) % W;
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    double di = std::abs(i - ci);
                    di = std::min(di, H - di);
                    double dj = std::abs(j - cj);
                    dj = std::min(dj, W - dj);
                    s.at(t, i, j) = static_cast<float>(base + bump * std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma)));
                }
        }
        break;
    }
    case SynthKind::seasonal: {
        // Period-P oscillation on a fixed spatial gradient.
        const double gi = rng.uniform(-0.1, 0.1);
        const double gj = rng.uniform(-0.1, 0.1);
        const double omega = 2.0 * M_PI / opt.period_frames;
        for (int t = 0; t < T; ++t) {
            double osc = amp * std::sin(omega * t + phase0);
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j)
                    s.at(t, i, j) = static_cast<float>(base + gi * i + gj * j + osc);
        }
        break;
    }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Region extraction, temporal split, window sampling
// ---------------------------------------------------------------------------

/// Cuts the span_deg x span_deg box centered at (center_lat, center_lon).
/// The output is floor(span/dlat) x floor(span/dlon) cells and cell (0,0)
/// maps to the box corner.
inline GridSeries extract_region(const GridSeries& series, double center_lat, double center_lon, double span_deg) {
    series.validate();
    if (!(span_deg > 0.0)) throw RangeError("extract_region: span must be positive");

    const int out_h = static_cast<int>(std::floor(span_deg / series.dlat + 1e-9));
    const int out_w = static_cast<int>(std::floor(span_deg / series.dlon + 1e-9));
    if (out_h < 1 || out_w < 1) throw RangeError("extract_region: span smaller than one cell");

    const double corner_lat = center_lat - span_deg / 2.0;
    const double corner_lon = center_lon - span_deg / 2.0;
    const int i0 = static_cast<int>(std::llround((corner_lat - series.lat0) / series.dlat));
    const int j0 = static_cast<int>(std::llround((corner_lon - series.lon0) / series.dlon));
    if (i0 < 0 || j0 < 0 || i0 + out_h > series.H || j0 + out_w > series.W)
        throw RangeError("extract_region: requested box exceeds the series extent");

    GridSeries out;
    out.T = series.T;
    out.H = out_h;
    out.W = out_w;
    out.lat0 = series.lat0 + i0 * series.dlat;
    out.lon0 = series.lon0 + j0 * series.dlon;
    out.dlat = series.dlat;
    out.dlon = series.dlon;
    out.t0_days = series.t0_days;
    out.dt_days = series.dt_days;
    out.data.resize(static_cast<std::size_t>(out.T) * out_h * out_w);
    for (int t = 0; t < series.T; ++t)
        for (int i = 0; i < out_h; ++i)
            for (int j = 0; j < out_w; ++j) out.at(t, i, j) = series.at(t, i0 + i, j0 + j);
    return out;
}

/// First ceil(ratio*T) frames become the train part, the rest the test part.
/// Both parts are non-empty; concatenating them restores the input.
inline std::pair<GridSeries, GridSeries> temporal_split(const GridSeries& series, double split_ratio) {
    series.validate();
    if (series.T < 2) throw InvariantError("temporal_split: need at least 2 frames");
    if (!(split_ratio > 0.0 && split_ratio < 1.0))
        throw InvariantError("temporal_split: split_ratio must lie in (0, 1)");

    int n_train = static_cast<int>(std::ceil(split_ratio * series.T - 1e-12));
    n_train = std::clamp(n_train, 1, series.T - 1);

    auto slice = [&](int t_begin, int t_count) {
        GridSeries part = series;
        part.T = t_count;
        part.t0_days = series.t0_days + static_cast<double>(t_begin) * series.dt_days;
        auto first = series.data.begin() + static_cast<std::ptrdiff_t>(t_begin) * series.cells();
        part.data.assign(first, first + static_cast<std::ptrdiff_t>(t_count) * series.cells());
        return part;
    };
    return {slice(0, n_train), slice(n_train, series.T - n_train)};
}

/// Keeps frames 0, delta_t, 2*delta_t, ... of the series.
inline GridSeries subsample_time(const GridSeries& series, int delta_t) {
    series.validate();
    if (delta_t < 1) throw InvariantError("subsample_time: delta_t must be >= 1");
    if (delta_t == 1) return series;
    GridSeries out = series;
    out.dt_days = series.dt_days * delta_t;
    out.T = (series.T - 1) / delta_t + 1;
    out.data.resize(static_cast<std::size_t>(out.T) * series.cells());
    for (int t = 0; t < out.T; ++t) {
        auto src = series.data.begin() + static_cast<std::ptrdiff_t>(t) * delta_t * series.cells();
        std::copy(src, src + series.cells(), out.data.begin() + static_cast<std::ptrdiff_t>(t) * series.cells());
    }
    return out;
}

/// Builds sliding-window samples for one target cell. Windows start at
/// 0, t_gap, 2*t_gap, ... over the delta_t-subsampled series; each needs
/// M + L - 1 frames. Samples whose target series contains NaN are dropped;
/// NaN in other input cells is zero-filled.
inline std::vector<WindowSample> sample_windows(const GridSeries& series, const SamplingConfig& cfg, int target_index) {
    series.validate();
    cfg.validate();
    if (target_index < 0 || target_index >= series.cells())
        throw RangeError("sample_windows: target_index out of range");

    const GridSeries sub = subsample_time(series, cfg.delta_t);
    const int span = cfg.M + cfg.L - 1;
    if (sub.T < span)
        throw RangeError("sample_windows: series too short (" + std::to_string(sub.T) + " frames after subsampling, need " +
                         std::to_string(span) + ")");

    const int cells = sub.cells();
    std::vector<WindowSample> out;
    for (int start = 0; start + span <= sub.T; start += cfg.t_gap) {
        bool target_ok = true;
        for (int m = 0; m < span && target_ok; ++m)
            if (std::isnan(sub.data[static_cast<std::size_t>(start + m) * cells + target_index])) target_ok = false;
        if (!target_ok) continue;

        WindowSample w;
        w.M = cfg.M;
        w.L = cfg.L;
        w.H = sub.H;
        w.W = sub.W;
        w.target_index = target_index;
        w.window_start = start;
        w.input_frames.resize(static_cast<std::size_t>(cfg.M) * cells);
        for (int m = 0; m < cfg.M; ++m)
            for (int c = 0; c < cells; ++c) {
                float v = sub.data[static_cast<std::size_t>(start + m) * cells + c];
                w.input_frames[static_cast<std::size_t>(m) * cells + c] = std::isnan(v) ? 0.0 : static_cast<double>(v);
            }
        w.delay_target.resize(static_cast<std::size_t>(cfg.L) * cfg.M);
        for (int i = 0; i < cfg.L; ++i)
            for (int m = 0; m < cfg.M; ++m)
                w.delay_target[static_cast<std::size_t>(i) * cfg.M + m] =
                    static_cast<double>(sub.data[static_cast<std::size_t>(start + m + i) * cells + target_index]);
        out.push_back(std::move(w));
    }
    return out;
}

} // namespace driftcast
