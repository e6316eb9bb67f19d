#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "driftcast/errors.hpp"
#include "driftcast/flow.hpp"
#include "driftcast/grid.hpp"
#include "driftcast/model.hpp"
#include "driftcast/phase_space.hpp"
#include "driftcast/rng.hpp"
#include "driftcast/tensor.hpp"

namespace driftcast {

struct TrainConfig {
    int batch_size = 30;
    int epochs = 220;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::uint64_t seed = 0;
    bool normalize = true; // per-window z-score of inputs and targets

    void validate() const {
        if (batch_size < 1) throw InvariantError("TrainConfig: batch_size must be >= 1");
        if (epochs < 1) throw InvariantError("TrainConfig: epochs must be >= 1");
        if (!(learning_rate > 0.0) && learning_rate != 0.0)
            throw InvariantError("TrainConfig: learning_rate must be >= 0");
    }
};

struct WindowMetric {
    int index = 0; // window_start for single-region runs, grid-point id for parallel runs
    double rmse = 0.0;
    double mape = 0.0;
};

struct EvalReport {
    double rmse = 0.0;
    double mape = 0.0; // percent
    std::vector<WindowMetric> per_window;
    std::vector<double> loss_curve;
};

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline double rmse(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) throw ShapeError("rmse: length mismatch");
    if (pred.empty()) throw RangeError("rmse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - truth[i];
        acc += e * e;
    }
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

/// Mean absolute percentage error. Entries with |truth| <= 1e-6 are excluded
/// from the mean to keep the division well defined.
inline double mape(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) throw ShapeError("mape: length mismatch");
    if (pred.empty()) throw RangeError("mape: empty input");
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (std::abs(truth[i]) <= 1e-6) continue;
        acc += std::abs(pred[i] - truth[i]) / std::abs(truth[i]);
        ++n;
    }
    return n == 0 ? 0.0 : 100.0 * acc / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Sample preparation: flows, gates, per-window normalization
// ---------------------------------------------------------------------------

/// Model-ready view of a window sample. Flows are estimated once, on the raw
/// (un-normalized) frames; normalization statistics come from the window's
/// own input frames, so nothing from the forecast horizon leaks in.
struct PreparedData {
    int M = 0, L = 0, H = 0, W = 0;

    struct Item {
        std::vector<double> inputs;  // M*H*W, normalized
        std::vector<double> target;  // L*M, normalized
        std::vector<double> gate_x;  // M*N flow gates
        std::vector<double> gate_y;
        std::vector<double> truth;   // L raw future values at the target point
        double last_observed = 0.0;  // raw value feeding the persistence forecast
        double mu = 0.0;
        double sigma = 1.0;
        int window_start = 0;
    };
    std::vector<Item> items;

    int N() const { return H * W; }
};

inline PreparedData prepare_data(const std::vector<WindowSample>& samples, const FlowParams& fp, bool normalize) {
    if (samples.empty()) throw RangeError("prepare_data: no samples");
    PreparedData out;
    out.M = samples[0].M;
    out.L = samples[0].L;
    out.H = samples[0].H;
    out.W = samples[0].W;

    for (const WindowSample& s : samples) {
        if (s.M != out.M || s.L != out.L || s.H != out.H || s.W != out.W)
            throw ShapeError("prepare_data: inconsistent sample shapes");
        PreparedData::Item it;
        it.window_start = s.window_start;

        FlowSequence seq = estimate_flow_sequence(s.input_frames, s.M, s.H, s.W, fp);
        auto [gx, gy] = flow_gates(seq, s.M, s.H * s.W);
        it.gate_x = std::move(gx);
        it.gate_y = std::move(gy);

        if (normalize) {
            double mu = 0.0;
            for (double v : s.input_frames) mu += v;
            mu /= static_cast<double>(s.input_frames.size());
            double var = 0.0;
            for (double v : s.input_frames) var += (v - mu) * (v - mu);
            var /= static_cast<double>(s.input_frames.size());
            it.mu = mu;
            it.sigma = std::sqrt(var) > 1e-8 ? std::sqrt(var) : 1.0;
        }

        it.inputs.resize(s.input_frames.size());
        for (std::size_t i = 0; i < s.input_frames.size(); ++i) it.inputs[i] = (s.input_frames[i] - it.mu) / it.sigma;
        it.target.resize(s.delay_target.size());
        for (std::size_t i = 0; i < s.delay_target.size(); ++i) it.target[i] = (s.delay_target[i] - it.mu) / it.sigma;

        it.truth.resize(static_cast<std::size_t>(s.L));
        for (int i = 0; i < s.L; ++i) it.truth[i] = s.target_at(i, s.M - 1);
        it.last_observed = s.target_at(0, s.M - 1);
        out.items.push_back(std::move(it));
    }
    return out;
}

namespace detail {

/// Packs the given items into batch tensors (inputs, gate_x, gate_y, target).
struct BatchTensors {
    Tensor X, gx, gy, target;
};

inline BatchTensors make_batch(const PreparedData& data, std::span<const int> idx, const ModelConfig& cfg) {
    const int B = static_cast<int>(idx.size());
    const std::size_t in_sz = static_cast<std::size_t>(cfg.M) * cfg.H * cfg.W;
    const std::size_t gate_sz = static_cast<std::size_t>(cfg.M) * cfg.N();
    const std::size_t tg_sz = static_cast<std::size_t>(cfg.L) * cfg.M;

    std::vector<double> xs(B * in_sz), gxs(B * gate_sz), gys(B * gate_sz), ts(B * tg_sz);
    for (int b = 0; b < B; ++b) {
        const auto& it = data.items[static_cast<std::size_t>(idx[b])];
        std::copy(it.inputs.begin(), it.inputs.end(), xs.begin() + b * in_sz);
        if (cfg.use_optical_attention) {
            std::copy(it.gate_x.begin(), it.gate_x.end(), gxs.begin() + b * gate_sz);
            std::copy(it.gate_y.begin(), it.gate_y.end(), gys.begin() + b * gate_sz);
        } else {
            std::fill(gxs.begin() + b * gate_sz, gxs.begin() + (b + 1) * gate_sz, 1.0);
            std::fill(gys.begin() + b * gate_sz, gys.begin() + (b + 1) * gate_sz, 1.0);
        }
        std::copy(it.target.begin(), it.target.end(), ts.begin() + b * tg_sz);
    }
    BatchTensors out;
    out.X = Tensor::from(Shape{B, cfg.M, cfg.H, cfg.W}, std::move(xs));
    out.gx = Tensor::from(Shape{B, cfg.M, cfg.N()}, std::move(gxs));
    out.gy = Tensor::from(Shape{B, cfg.M, cfg.N()}, std::move(gys));
    out.target = Tensor::from(Shape{B, cfg.L, cfg.M}, std::move(ts));
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

/// First-order adaptive-moment updates with bias correction. Parameters whose
/// gradients never arrive (disabled model paths) stay bit-identical.
class Adam {
public:
    Adam(std::vector<Tensor*> params, double lr, double beta1, double beta2, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
        for (Tensor* p : params_) {
            m_.emplace_back(p->numel(), 0.0);
            v_.emplace_back(p->numel(), 0.0);
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, t_);
        const double bc2 = 1.0 - std::pow(b2_, t_);
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            Tensor* p = params_[pi];
            const std::vector<double>* g = p->has_grad() ? &p->grad() : nullptr;
            auto& m = m_[pi];
            auto& v = v_[pi];
            auto& vals = p->values_mut();
            for (std::size_t i = 0; i < vals.size(); ++i) {
                const double gi = g ? (*g)[i] : 0.0;
                m[i] = b1_ * m[i] + (1.0 - b1_) * gi;
                v[i] = b2_ * v[i] + (1.0 - b2_) * gi * gi;
                vals[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
            }
        }
    }

private:
    std::vector<Tensor*> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainResult {
    ModelParams params;
    std::vector<double> loss_curve; // one mean training loss per epoch
};

inline TrainResult train(const ModelConfig& mcfg, const TrainConfig& tcfg, const PreparedData& data) {
    mcfg.validate();
    tcfg.validate();
    if (data.items.empty()) throw RangeError("train: no samples");
    if (data.M != mcfg.M || data.L != mcfg.L || data.H != mcfg.H || data.W != mcfg.W)
        throw ShapeError("train: sample shapes do not match the model config");

    TrainResult result{ModelParams::init(mcfg), {}};
    Adam opt(result.params.all(), tcfg.learning_rate, tcfg.beta1, tcfg.beta2);
    Rng shuffle_rng(tcfg.seed);

    const int n = static_cast<int>(data.items.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    result.loss_curve.reserve(static_cast<std::size_t>(tcfg.epochs));
    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (int off = 0; off < n; off += tcfg.batch_size) {
            const int bsz = std::min(tcfg.batch_size, n - off);
            auto batch = detail::make_batch(data, std::span<const int>(order.data() + off, static_cast<std::size_t>(bsz)), mcfg);
            Tensor pred = forward(batch.X, batch.gx, batch.gy, result.params, mcfg);
            Tensor loss = mse_loss(pred, batch.target);
            const double lv = loss.values()[0];
            if (!std::isfinite(lv))
                throw DivergenceError(epoch, "train: non-finite loss at epoch " + std::to_string(epoch));
            backward(loss);
            opt.step();
            result.params.zero_grads();
            epoch_loss += lv * bsz;
        }
        result.loss_curve.push_back(epoch_loss / n);
    }
    return result;
}

/// Convenience overload working from raw window samples.
inline TrainResult train(const ModelConfig& mcfg, const FlowParams& fp, const std::vector<WindowSample>& samples,
                         const TrainConfig& tcfg) {
    if (samples.empty()) throw RangeError("train: no samples");
    return train(mcfg, tcfg, prepare_data(samples, fp, tcfg.normalize));
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Forecast error of the trained model over test samples. Predictions are
/// de-normalized back to deg C before comparison. Aggregate rmse/mape pool
/// every (sample, step) pair; per_window keeps the per-sample breakdown.
inline EvalReport evaluate(const ModelConfig& mcfg, ModelParams& params, const PreparedData& data, ExtractMode mode) {
    if (data.items.empty()) throw RangeError("evaluate: empty test set");
    if (data.M != mcfg.M || data.L != mcfg.L || data.H != mcfg.H || data.W != mcfg.W)
        throw ShapeError("evaluate: sample shapes do not match the model config");

    EvalReport rep;
    std::vector<double> all_pred, all_truth;
    const int n = static_cast<int>(data.items.size());
    const int eval_batch = 32;
    for (int off = 0; off < n; off += eval_batch) {
        const int bsz = std::min(eval_batch, n - off);
        std::vector<int> idx(static_cast<std::size_t>(bsz));
        std::iota(idx.begin(), idx.end(), off);
        auto batch = detail::make_batch(data, idx, mcfg);
        Tensor pred = forward(batch.X, batch.gx, batch.gy, params, mcfg);

        const std::size_t lm = static_cast<std::size_t>(mcfg.L) * mcfg.M;
        for (int b = 0; b < bsz; ++b) {
            const auto& it = data.items[static_cast<std::size_t>(off + b)];
            std::vector<double> d_hat(lm);
            for (std::size_t i = 0; i < lm; ++i) d_hat[i] = it.mu + it.sigma * pred.values()[b * lm + i];
            const std::vector<double> forecast = extract_forecast(d_hat, mcfg.L, mcfg.M, mode);
            rep.per_window.push_back({it.window_start, rmse(forecast, it.truth), mape(forecast, it.truth)});
            all_pred.insert(all_pred.end(), forecast.begin(), forecast.end());
            all_truth.insert(all_truth.end(), it.truth.begin(), it.truth.end());
        }
    }
    rep.rmse = rmse(all_pred, all_truth);
    rep.mape = mape(all_pred, all_truth);
    return rep;
}

inline EvalReport evaluate(const ModelConfig& mcfg, ModelParams& params, const FlowParams& fp,
                           const std::vector<WindowSample>& samples, ExtractMode mode, bool normalize) {
    if (samples.empty()) throw RangeError("evaluate: empty test set");
    return evaluate(mcfg, params, prepare_data(samples, fp, normalize), mode);
}

/// Repeats the last observed target value across the whole horizon.
inline EvalReport persistence_baseline(const std::vector<WindowSample>& samples) {
    if (samples.empty()) throw RangeError("persistence_baseline: empty sample set");
    EvalReport rep;
    std::vector<double> all_pred, all_truth;
    for (const WindowSample& s : samples) {
        const double last = s.target_at(0, s.M - 1);
        std::vector<double> forecast(static_cast<std::size_t>(s.L), last);
        std::vector<double> truth(static_cast<std::size_t>(s.L));
        for (int i = 0; i < s.L; ++i) truth[i] = s.target_at(i, s.M - 1);
        rep.per_window.push_back({s.window_start, rmse(forecast, truth), mape(forecast, truth)});
        all_pred.insert(all_pred.end(), forecast.begin(), forecast.end());
        all_truth.insert(all_truth.end(), truth.begin(), truth.end());
    }
    rep.rmse = rmse(all_pred, all_truth);
    rep.mape = mape(all_pred, all_truth);
    return rep;
}

// ---------------------------------------------------------------------------
// Single-region pipeline (shared by the CLI, sweeps and ablations)
// ---------------------------------------------------------------------------

struct PipelineResult {
    TrainResult trained;
    EvalReport model_report;
    EvalReport baseline_report;
};

/// temporal split -> window sampling on both parts -> train -> evaluate,
/// with the persistence baseline computed on the same test samples.
inline PipelineResult run_pipeline(const GridSeries& region, const SamplingConfig& scfg, const FlowParams& fp,
                                   ModelConfig mcfg, const TrainConfig& tcfg, ExtractMode mode, int target_index = -1) {
    mcfg.H = region.H;
    mcfg.W = region.W;
    mcfg.M = scfg.M;
    mcfg.L = scfg.L;
    if (target_index < 0) target_index = default_target_index(region.H, region.W);

    auto [train_part, test_part] = temporal_split(region, scfg.split_ratio);
    const std::vector<WindowSample> train_samples = sample_windows(train_part, scfg, target_index);
    const std::vector<WindowSample> test_samples = sample_windows(test_part, scfg, target_index);
    if (train_samples.empty()) throw RangeError("run_pipeline: no usable training windows");
    if (test_samples.empty()) throw RangeError("run_pipeline: no usable test windows");

    PipelineResult out;
    out.trained = train(mcfg, fp, train_samples, tcfg);
    out.model_report = evaluate(mcfg, out.trained.params, fp, test_samples, mode, tcfg.normalize);
    out.model_report.loss_curve = out.trained.loss_curve;
    out.baseline_report = persistence_baseline(test_samples);
    return out;
}

// ---------------------------------------------------------------------------
// Spatially parallel sliding-sampling evaluation
// ---------------------------------------------------------------------------

struct ParallelEvalConfig {
    double eval_span_deg = 1.0;
    double window_span_deg = 2.0;
    int jobs = 0; // 0 -> hardware concurrency
};

/// Trains and evaluates one window per grid point of the central evaluation
/// region, each centered on its point, then averages the per-window metrics.
/// Window runs are independent (seed = base seed + point id) and may execute
/// concurrently; the aggregate does not depend on scheduling.
inline EvalReport parallel_evaluate(const GridSeries& series, const ParallelEvalConfig& pcfg,
                                    const SamplingConfig& scfg, const FlowParams& fp, const ModelConfig& mcfg,
                                    const TrainConfig& tcfg, ExtractMode mode) {
    series.validate();
    const int eh = static_cast<int>(std::floor(pcfg.eval_span_deg / series.dlat + 1e-9));
    const int ew = static_cast<int>(std::floor(pcfg.eval_span_deg / series.dlon + 1e-9));
    if (eh < 1 || ew < 1) throw RangeError("parallel_evaluate: evaluation span smaller than one cell");
    if (eh > series.H || ew > series.W) throw RangeError("parallel_evaluate: evaluation span exceeds the series");

    const int i0 = (series.H - eh) / 2;
    const int j0 = (series.W - ew) / 2;

    struct Point {
        double lat, lon;
    };
    std::vector<Point> points;
    for (int a = 0; a < eh; ++a)
        for (int b = 0; b < ew; ++b)
            points.push_back({series.lat0 + (i0 + a) * series.dlat, series.lon0 + (j0 + b) * series.dlon});

    // Fail fast if any window would leave the extent.
    for (const Point& pt : points) (void)extract_region(series, pt.lat, pt.lon, pcfg.window_span_deg);

    std::vector<WindowMetric> metrics(points.size());
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t w = cursor.fetch_add(1);
            if (w >= points.size()) return;
            try {
                GridSeries region = extract_region(series, points[w].lat, points[w].lon, pcfg.window_span_deg);
                ModelConfig m = mcfg;
                TrainConfig t = tcfg;
                m.seed = mcfg.seed + w;
                t.seed = tcfg.seed + w;
                PipelineResult res = run_pipeline(region, scfg, fp, m, t, mode);
                metrics[w] = {static_cast<int>(w), res.model_report.rmse, res.model_report.mape};
            } catch (...) {
                std::scoped_lock lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                cursor.store(points.size()); // stop handing out work
                return;
            }
        }
    };

    int jobs = pcfg.jobs > 0 ? pcfg.jobs : static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::clamp(jobs, 1, static_cast<int>(points.size()));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    EvalReport rep;
    rep.per_window = metrics;
    for (const WindowMetric& m : metrics) {
        rep.rmse += m.rmse;
        rep.mape += m.mape;
    }
    rep.rmse /= static_cast<double>(metrics.size());
    rep.mape /= static_cast<double>(metrics.size());
    return rep;
}

// ---------------------------------------------------------------------------
// Sweeps and ablations
// ---------------------------------------------------------------------------

struct SweepRow {
    std::string label;
    double model_rmse = 0.0, model_mape = 0.0;
    double baseline_rmse = 0.0, baseline_mape = 0.0;
};

struct SweepTable {
    std::string axis;
    std::vector<SweepRow> rows;

    /// Models as rows, swept values as rmse/mape column pairs.
    std::string to_csv() const {
        std::ostringstream os;
        os << "model";
        for (const auto& r : rows) os << ',' << r.label << "_rmse," << r.label << "_mape";
        os << '\n' << "driftcast";
        for (const auto& r : rows) os << ',' << r.model_rmse << ',' << r.model_mape;
        os << '\n' << "persistence";
        for (const auto& r : rows) os << ',' << r.baseline_rmse << ',' << r.baseline_mape;
        os << '\n';
        return os.str();
    }
};

namespace detail {

inline GridSeries slice_frames(const GridSeries& s, int t_begin) {
    if (t_begin < 0 || t_begin >= s.T) throw RangeError("slice_frames: start frame outside the series");
    GridSeries out = s;
    out.T = s.T - t_begin;
    out.t0_days = s.t0_days + static_cast<double>(t_begin) * s.dt_days;
    out.data.assign(s.data.begin() + static_cast<std::ptrdiff_t>(t_begin) * s.cells(), s.data.end());
    return out;
}

inline int season_start_day(const std::string& name) {
    if (name == "spring") return 80;
    if (name == "summer") return 172;
    if (name == "autumn") return 266;
    if (name == "winter") return 355;
    throw ConfigError("unknown season: " + name);
}

} // namespace detail

/// One row per swept value; all non-swept settings stay at their defaults.
/// axis is one of {area, delta_t, horizon, season}; values are parsed per
/// axis (degrees, strides, horizons, or season names). base_span_deg is the
/// regional window used for every non-area row.
inline SweepTable run_sweep(const GridSeries& series, const std::string& axis, const std::vector<std::string>& values,
                            const SamplingConfig& base_scfg, const FlowParams& fp, const ModelConfig& base_mcfg,
                            const TrainConfig& tcfg, ExtractMode mode, double base_span_deg = 2.0) {
    if (values.empty()) throw ConfigError("run_sweep: no values given");
    SweepTable table;
    table.axis = axis;

    const double center_lat = series.lat0 + (series.H - 1) * series.dlat / 2.0;
    const double center_lon = series.lon0 + (series.W - 1) * series.dlon / 2.0;
    auto region_for = [&](double span) {
        const int span_cells_h = static_cast<int>(std::floor(span / series.dlat + 1e-9));
        const int span_cells_w = static_cast<int>(std::floor(span / series.dlon + 1e-9));
        if (span_cells_h >= series.H && span_cells_w >= series.W) return series; // whole extent
        return extract_region(series, center_lat, center_lon, span);
    };

    for (const std::string& value : values) {
        SamplingConfig scfg = base_scfg;
        ModelConfig mcfg = base_mcfg;
        GridSeries region;
        std::string label;
        if (axis == "area") {
            const double span = std::stod(value);
            region = region_for(span);
            std::ostringstream lb;
            lb << value << "x" << value << "deg";
            label = lb.str();
        } else if (axis == "delta_t") {
            scfg.delta_t = std::stoi(value);
            region = region_for(base_span_deg);
            label = "dt" + value;
        } else if (axis == "horizon") {
            scfg.L = std::stoi(value);
            region = region_for(base_span_deg);
            label = "L" + value;
        } else if (axis == "season") {
            const int day = detail::season_start_day(value);
            const int frame = static_cast<int>(std::llround(day / series.dt_days));
            region = detail::slice_frames(region_for(base_span_deg), frame);
            label = value;
        } else {
            throw ConfigError("run_sweep: unknown axis " + axis);
        }

        PipelineResult res = run_pipeline(region, scfg, fp, mcfg, tcfg, mode);
        table.rows.push_back({label, res.model_report.rmse, res.model_report.mape, res.baseline_report.rmse,
                              res.baseline_report.mape});
    }
    return table;
}

struct AblationRow {
    bool optical_attention = true;
    bool inception = true;
    bool autocorrelation = true;
    double rmse_median = 0.0;
    double mape_median = 0.0;
};

struct AblationTable {
    std::vector<AblationRow> rows;

    std::string to_csv() const {
        std::ostringstream os;
        os << "optical_attention,inception,autocorrelation,rmse,mape\n";
        for (const auto& r : rows)
            os << (r.optical_attention ? "yes" : "no") << ',' << (r.inception ? "yes" : "no") << ','
               << (r.autocorrelation ? "yes" : "no") << ',' << r.rmse_median << ',' << r.mape_median << '\n';
        return os.str();
    }
};

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace detail

/// Four configurations: full model and each component removed in turn,
/// rmse/mape reported as the median over n_seeds independent runs. Flows are
/// prepared once and shared across every configuration and seed.
inline AblationTable run_ablation(const GridSeries& region, int n_seeds, const SamplingConfig& scfg,
                                  const FlowParams& fp, const ModelConfig& base_mcfg, const TrainConfig& base_tcfg,
                                  ExtractMode mode, int target_index = -1) {
    if (n_seeds < 1) throw ConfigError("run_ablation: n_seeds must be >= 1");
    if (target_index < 0) target_index = default_target_index(region.H, region.W);

    SamplingConfig sc = scfg;
    auto [train_part, test_part] = temporal_split(region, sc.split_ratio);
    const std::vector<WindowSample> train_samples = sample_windows(train_part, sc, target_index);
    const std::vector<WindowSample> test_samples = sample_windows(test_part, sc, target_index);
    if (train_samples.empty() || test_samples.empty()) throw RangeError("run_ablation: not enough windows");

    const PreparedData train_data = prepare_data(train_samples, fp, base_tcfg.normalize);
    const PreparedData test_data = prepare_data(test_samples, fp, base_tcfg.normalize);

    const bool toggles[4][3] = {{true, true, true}, {false, true, true}, {true, false, true}, {true, true, false}};
    AblationTable table;
    for (const auto& tog : toggles) {
        std::vector<double> rmses, mapes;
        for (int s = 0; s < n_seeds; ++s) {
            ModelConfig mcfg = base_mcfg;
            mcfg.H = region.H;
            mcfg.W = region.W;
            mcfg.M = sc.M;
            mcfg.L = sc.L;
            mcfg.use_optical_attention = tog[0];
            mcfg.use_inception = tog[1];
            mcfg.use_autocorrelation = tog[2];
            mcfg.seed = base_mcfg.seed + static_cast<std::uint64_t>(s);
            TrainConfig tcfg = base_tcfg;
            tcfg.seed = base_tcfg.seed + static_cast<std::uint64_t>(s);

            TrainResult tr = train(mcfg, tcfg, train_data);
            EvalReport rep = evaluate(mcfg, tr.params, test_data, mode);
            rmses.push_back(rep.rmse);
            mapes.push_back(rep.mape);
        }
        table.rows.push_back({tog[0], tog[1], tog[2], detail::median(rmses), detail::median(mapes)});
    }
    return table;
}

} // namespace driftcast
