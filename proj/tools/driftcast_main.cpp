// driftcast: spatiotemporal forecasting on gridded scalar fields.
// Subcommands cover synthetic data generation, dense optical flow dumps,
// training, prediction, evaluation, parameter sweeps, ablations, and the
// spatially parallel evaluation mode.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "driftcast/driftcast.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Options {
    std::string input;
    std::string out_dir;
    std::uint64_t seed = 0;

    // synth
    std::string kind = "advecting_wave";
    int T = 240, H = 8, W = 8;
    int shift_i = 1, shift_j = 0;
    int period_frames = 60;

    driftcast::SamplingConfig sampling;
    driftcast::FlowParams flow;
    driftcast::ModelConfig model;
    driftcast::TrainConfig train;

    int target_k = -1;
    double d_o = 0.0;
    std::string extract_mode = "last";
    std::string kernel_sizes = "1,3,5";

    // sweep / ablate / parallel-eval
    std::string axis = "area";
    std::string values;
    int n_seeds = 5;
    double eval_span = 1.0;
    double window_span = 2.0;
    int jobs = 0;
};

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    for (const std::string& p : split_csv(s)) out.push_back(std::stoi(p));
    return out;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw driftcast::IoError("cannot create output directory " + dir + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw driftcast::IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw driftcast::IoError("write failed: " + path.string());
}

json sampling_json(const driftcast::SamplingConfig& c) {
    return {{"M", c.M}, {"L", c.L}, {"t_gap", c.t_gap}, {"delta_t", c.delta_t}, {"split_ratio", c.split_ratio}};
}

json flow_json(const driftcast::FlowParams& f) {
    return {{"pyramid_levels", f.pyramid_levels},
            {"window_radius", f.window_radius},
            {"gaussian_sigma", f.gaussian_sigma},
            {"smoothness_lambda", f.smoothness_lambda},
            {"iterations", f.iterations},
            {"post_smoothing_sigma", f.post_smoothing_sigma}};
}

json train_json(const driftcast::TrainConfig& t) {
    return {{"batch_size", t.batch_size}, {"epochs", t.epochs},   {"learning_rate", t.learning_rate},
            {"beta1", t.beta1},           {"beta2", t.beta2},     {"seed", t.seed},
            {"normalize", t.normalize}};
}

/// Every run drops a manifest with the fully resolved configuration, so the
/// run is reproducible from the output directory alone.
void write_manifest(const Options& opt, const std::string& command, const json& extra = {}) {
    json m;
    m["tool"] = "driftcast";
    m["version"] = kVersion;
    m["format_versions"] = {{"sstgrid", 1}, {"checkpoint", 1}};
    m["command"] = command;
    m["seed"] = opt.seed;
    m["input"] = opt.input;
    m["out"] = opt.out_dir;
    m["sampling"] = sampling_json(opt.sampling);
    m["flow"] = flow_json(opt.flow);
    m["model"] = driftcast::model_config_to_json(opt.model);
    m["train"] = train_json(opt.train);
    m["extract_mode"] = opt.extract_mode;
    m["target_k"] = opt.target_k;
    if (!extra.empty())
        for (auto& [k, v] : extra.items()) m[k] = v;
    write_text(fs::path(opt.out_dir) / "run.json", m.dump(2) + "\n");
}

void apply_seed(Options& opt) {
    if (const char* env = std::getenv("DRIFTCAST_SEED")) opt.seed = std::stoull(env); // env wins over the flag
    opt.model.seed = opt.seed;
    opt.train.seed = opt.seed;
}

void finalize(Options& opt) {
    apply_seed(opt);
    opt.model.inception_kernels = parse_int_list(opt.kernel_sizes);
    opt.sampling.validate();
    opt.flow.validate();
    opt.train.validate();
}

std::string csv_of_field(const driftcast::Field& f) {
    std::ostringstream os;
    os.precision(10);
    for (int i = 0; i < f.H; ++i) {
        for (int j = 0; j < f.W; ++j) os << (j ? "," : "") << f.at(i, j);
        os << '\n';
    }
    return os.str();
}

void write_pgm(const fs::path& path, const driftcast::Field& f) {
    double mx = 0.0;
    for (double v : f.v) mx = std::max(mx, std::abs(v));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw driftcast::IoError("cannot open for writing: " + path.string());
    out << "P5\n" << f.W << " " << f.H << "\n255\n";
    for (double v : f.v) {
        const int byte = mx > 0.0 ? static_cast<int>(std::lround(std::abs(v) / mx * 255.0)) : 0;
        out.put(static_cast<char>(std::clamp(byte, 0, 255)));
    }
}

std::string loss_curve_csv(const std::vector<double>& curve) {
    std::ostringstream os;
    os.precision(12);
    os << "epoch,loss\n";
    for (std::size_t e = 0; e < curve.size(); ++e) os << e << ',' << curve[e] << '\n';
    return os.str();
}

std::string report_csv(const driftcast::EvalReport& model, const driftcast::EvalReport* baseline) {
    std::ostringstream os;
    os.precision(10);
    os << "model,rmse,mape\n";
    os << "driftcast," << model.rmse << ',' << model.mape << '\n';
    if (baseline) os << "persistence," << baseline->rmse << ',' << baseline->mape << '\n';
    return os.str();
}

std::string per_window_csv(const driftcast::EvalReport& rep) {
    std::ostringstream os;
    os.precision(10);
    os << "window,rmse,mape\n";
    for (const auto& w : rep.per_window) os << w.index << ',' << w.rmse << ',' << w.mape << '\n';
    return os.str();
}

json pipeline_json(const Options& opt) {
    return {{"sampling", sampling_json(opt.sampling)},
            {"flow", flow_json(opt.flow)},
            {"normalize", opt.train.normalize},
            {"extract_mode", opt.extract_mode},
            {"target_k", opt.target_k}};
}

// ---------------------------------------------------------------------------
// Subcommand handlers
// ---------------------------------------------------------------------------

int cmd_synth(Options& opt) {
    ensure_out_dir(opt.out_dir);
    driftcast::SynthOptions so;
    so.shift_i = opt.shift_i;
    so.shift_j = opt.shift_j;
    so.period_frames = opt.period_frames;
    driftcast::GridSeries s =
        driftcast::generate_synthetic(opt.seed, opt.T, opt.H, opt.W, driftcast::parse_synth_kind(opt.kind), so);
    driftcast::save_grid_series(s, fs::path(opt.out_dir) / "synthetic.sstgrid");
    write_manifest(opt, "synth",
                   json{{"kind", opt.kind},
                        {"T", opt.T},
                        {"H", opt.H},
                        {"W", opt.W},
                        {"shift_i", opt.shift_i},
                        {"shift_j", opt.shift_j},
                        {"period_frames", opt.period_frames}});
    std::cout << "wrote " << (fs::path(opt.out_dir) / "synthetic.sstgrid").string() << " (" << opt.T << "x" << opt.H
              << "x" << opt.W << ")\n";
    return 0;
}

int cmd_flow(Options& opt) {
    ensure_out_dir(opt.out_dir);
    driftcast::GridSeries s = driftcast::load_grid_series(opt.input);
    if (s.T < 2) throw driftcast::RangeError("flow: need at least 2 frames");

    std::vector<driftcast::Field> frames;
    frames.reserve(static_cast<std::size_t>(s.T));
    for (int t = 0; t < s.T; ++t) {
        driftcast::Field f(s.H, s.W);
        for (int i = 0; i < s.H; ++i)
            for (int j = 0; j < s.W; ++j) {
                const float v = s.at(t, i, j);
                f.at(i, j) = std::isnan(v) ? 0.0 : static_cast<double>(v);
            }
        frames.push_back(std::move(f));
    }
    driftcast::FlowSequence seq = driftcast::estimate_flow_sequence(frames, opt.flow);
    for (int m = 0; m < seq.size(); ++m) {
        write_text(fs::path(opt.out_dir) / ("flow_u_" + std::to_string(m) + ".csv"), csv_of_field(seq.flows[m].u));
        write_text(fs::path(opt.out_dir) / ("flow_v_" + std::to_string(m) + ".csv"), csv_of_field(seq.flows[m].v));
        driftcast::Field mag(s.H, s.W);
        for (std::size_t i = 0; i < mag.size(); ++i)
            mag.v[i] = std::hypot(seq.flows[m].u.v[i], seq.flows[m].v.v[i]);
        write_pgm(fs::path(opt.out_dir) / ("flow_mag_" + std::to_string(m) + ".pgm"), mag);
    }
    write_manifest(opt, "flow", json{{"frames", s.T}});
    std::cout << "wrote " << seq.size() << " flow fields to " << opt.out_dir << "\n";
    return 0;
}

int cmd_train(Options& opt) {
    ensure_out_dir(opt.out_dir);
    driftcast::GridSeries s = driftcast::load_grid_series(opt.input);
    if (opt.target_k < 0) opt.target_k = driftcast::default_target_index(s.H, s.W);
    if (opt.d_o > 0.0 && !driftcast::embedding_dimension_ok(opt.sampling.L, opt.d_o))
        std::cerr << "warning: horizon L=" << opt.sampling.L << " does not exceed 2*d_o=" << 2.0 * opt.d_o
                  << "; the delay embedding may not preserve the dynamics\n";

    auto [train_part, test_part] = driftcast::temporal_split(s, opt.sampling.split_ratio);
    auto samples = driftcast::sample_windows(train_part, opt.sampling, opt.target_k);
    if (samples.empty()) throw driftcast::RangeError("train: no usable training windows");

    opt.model.M = opt.sampling.M;
    opt.model.L = opt.sampling.L;
    opt.model.H = s.H;
    opt.model.W = s.W;
    driftcast::TrainResult res = driftcast::train(opt.model, opt.flow, samples, opt.train);

    driftcast::save_checkpoint(fs::path(opt.out_dir) / "model.ckpt", opt.model, res.params, pipeline_json(opt));
    write_text(fs::path(opt.out_dir) / "loss.csv", loss_curve_csv(res.loss_curve));
    write_manifest(opt, "train",
                   json{{"train_frames", train_part.T}, {"test_frames", test_part.T}, {"train_windows", samples.size()}});
    std::cout << "trained on " << samples.size() << " windows; final loss " << res.loss_curve.back() << "\n";
    return 0;
}

struct LoadedModel {
    driftcast::ModelConfig model;
    driftcast::ModelParams params;
    driftcast::SamplingConfig sampling;
    driftcast::FlowParams flow;
    bool normalize = true;
    int target_k = -1;
    driftcast::ExtractMode mode = driftcast::ExtractMode::last_column;
};

LoadedModel load_model(const std::string& ckpt_path, Options& opt) {
    driftcast::Checkpoint ck = driftcast::load_checkpoint(ckpt_path);
    LoadedModel lm{ck.config, std::move(ck.params), opt.sampling, opt.flow, opt.train.normalize, opt.target_k, {}};
    const json& p = ck.pipeline;
    if (p.contains("sampling")) {
        const json& sj = p["sampling"];
        lm.sampling.M = sj.value("M", lm.sampling.M);
        lm.sampling.L = sj.value("L", lm.sampling.L);
        lm.sampling.t_gap = sj.value("t_gap", lm.sampling.t_gap);
        lm.sampling.delta_t = sj.value("delta_t", lm.sampling.delta_t);
        lm.sampling.split_ratio = sj.value("split_ratio", lm.sampling.split_ratio);
    }
    if (p.contains("flow")) {
        const json& fj = p["flow"];
        lm.flow.pyramid_levels = fj.value("pyramid_levels", lm.flow.pyramid_levels);
        lm.flow.window_radius = fj.value("window_radius", lm.flow.window_radius);
        lm.flow.gaussian_sigma = fj.value("gaussian_sigma", lm.flow.gaussian_sigma);
        lm.flow.smoothness_lambda = fj.value("smoothness_lambda", lm.flow.smoothness_lambda);
        lm.flow.iterations = fj.value("iterations", lm.flow.iterations);
        lm.flow.post_smoothing_sigma = fj.value("post_smoothing_sigma", lm.flow.post_smoothing_sigma);
    }
    lm.normalize = p.value("normalize", lm.normalize);
    lm.target_k = p.value("target_k", lm.target_k);
    lm.mode = driftcast::parse_extract_mode(opt.extract_mode);
    return lm;
}

int cmd_predict(Options& opt, const std::string& ckpt_path) {
    ensure_out_dir(opt.out_dir);
    driftcast::GridSeries s = driftcast::load_grid_series(opt.input);
    LoadedModel lm = load_model(ckpt_path, opt);
    if (lm.target_k < 0) lm.target_k = driftcast::default_target_index(s.H, s.W);

    auto [train_part, test_part] = driftcast::temporal_split(s, lm.sampling.split_ratio);
    auto samples = driftcast::sample_windows(test_part, lm.sampling, lm.target_k);
    if (samples.empty()) throw driftcast::RangeError("predict: no usable test windows");

    driftcast::PreparedData data = driftcast::prepare_data(samples, lm.flow, lm.normalize);
    std::ostringstream os;
    os.precision(10);
    os << "window,step,forecast,truth\n";
    for (std::size_t si = 0; si < data.items.size(); ++si) {
        const auto& it = data.items[si];
        std::vector<int> idx{static_cast<int>(si)};
        auto batch = driftcast::detail::make_batch(data, idx, lm.model);
        driftcast::Tensor pred = driftcast::forward(batch.X, batch.gx, batch.gy, lm.params, lm.model);
        std::vector<double> d_hat(pred.numel());
        for (std::size_t i = 0; i < d_hat.size(); ++i) d_hat[i] = it.mu + it.sigma * pred.values()[i];
        auto forecast = driftcast::extract_forecast(d_hat, lm.model.L, lm.model.M, lm.mode);
        for (int i = 0; i < lm.model.L; ++i)
            os << it.window_start << ',' << i << ',' << forecast[i] << ',' << it.truth[i] << '\n';
    }
    write_text(fs::path(opt.out_dir) / "forecasts.csv", os.str());
    write_manifest(opt, "predict", json{{"checkpoint", ckpt_path}, {"windows", data.items.size()}});
    std::cout << "wrote forecasts for " << data.items.size() << " windows\n";
    return 0;
}

int cmd_evaluate(Options& opt, const std::string& ckpt_path) {
    ensure_out_dir(opt.out_dir);
    driftcast::GridSeries s = driftcast::load_grid_series(opt.input);
    LoadedModel lm = load_model(ckpt_path, opt);
    if (lm.target_k < 0) lm.target_k = driftcast::default_target_index(s.H, s.W);

    auto [train_part, test_part] = driftcast::temporal_split(s, lm.sampling.split_ratio);
    auto samples = driftcast::sample_windows(test_part, lm.sampling, lm.target_k);
    if (samples.empty()) throw driftcast::RangeError("evaluate: no usable test windows");

    driftcast::EvalReport rep = driftcast::evaluate(lm.model, lm.params, lm.flow, samples, lm.mode, lm.normalize);
    driftcast::EvalReport base = driftcast::persistence_baseline(samples);
    write_text(fs::path(opt.out_dir) / "report.csv", report_csv(rep, &base));
    write_text(fs::path(opt.out_dir) / "per_window.csv", per_window_csv(rep));
    write_manifest(opt, "evaluate", json{{"checkpoint", ckpt_path}, {"rmse", rep.rmse}, {"mape", rep.mape}});
    std::cout << "rmse " << rep.rmse << " degC, mape " << rep.mape << "% over " << rep.per_window.size()
              << " windows (persistence rmse " << base.rmse << ")\n";
    return 0;
}

int cmd_sweep(Options& opt) {
    ensure_out_dir(opt.out_dir);
    driftcast::GridSeries s = driftcast::load_grid_series(opt.input);
    std::vector<std::string> values = split_csv(opt.values);
    if (values.empty()) {
        if (opt.axis == "area") values = {"1", "2", "4"};
        else if (opt.axis == "delta_t") values = {"1", "3", "5"};
        else if (opt.axis == "horizon") values = {"15", "30", "45"};
        else if (opt.axis == "season") values = {"spring", "summer", "autumn", "winter"};
    }
    driftcast::SweepTable table =
        driftcast::run_sweep(s, opt.axis, values, opt.sampling, opt.flow, opt.model, opt.train,
                             driftcast::parse_extract_mode(opt.extract_mode), opt.window_span);
    write_text(fs::path(opt.out_dir) / ("sweep_" + opt.axis + ".csv"), table.to_csv());
    write_manifest(opt, "sweep", json{{"axis", opt.axis}, {"values", values}});
    std::cout << table.to_csv();
    return 0;
}

int cmd_ablate(Options& opt) {
    ensure_out_dir(opt.out_dir);
    driftcast::GridSeries s = driftcast::load_grid_series(opt.input);
    driftcast::AblationTable table =
        driftcast::run_ablation(s, opt.n_seeds, opt.sampling, opt.flow, opt.model, opt.train,
                                driftcast::parse_extract_mode(opt.extract_mode), opt.target_k);
    write_text(fs::path(opt.out_dir) / "ablation.csv", table.to_csv());
    write_manifest(opt, "ablate", json{{"seeds", opt.n_seeds}});
    std::cout << table.to_csv();
    return 0;
}

int cmd_parallel_eval(Options& opt) {
    ensure_out_dir(opt.out_dir);
    driftcast::GridSeries s = driftcast::load_grid_series(opt.input);
    driftcast::ParallelEvalConfig pcfg;
    pcfg.eval_span_deg = opt.eval_span;
    pcfg.window_span_deg = opt.window_span;
    pcfg.jobs = opt.jobs;
    driftcast::EvalReport rep = driftcast::parallel_evaluate(s, pcfg, opt.sampling, opt.flow, opt.model, opt.train,
                                                             driftcast::parse_extract_mode(opt.extract_mode));
    write_text(fs::path(opt.out_dir) / "parallel_eval.csv", report_csv(rep, nullptr));
    write_text(fs::path(opt.out_dir) / "per_window.csv", per_window_csv(rep));
    write_manifest(opt, "parallel-eval",
                   json{{"eval_span", opt.eval_span}, {"window_span", opt.window_span}, {"windows", rep.per_window.size()},
                        {"rmse", rep.rmse}, {"mape", rep.mape}});
    std::cout << "parallel rmse " << rep.rmse << " degC, mape " << rep.mape << "% over " << rep.per_window.size()
              << " windows\n";
    return 0;
}

void add_sampling_flags(CLI::App* cmd, Options& opt) {
    cmd->add_option("--M", opt.sampling.M, "Input window length")->capture_default_str();
    cmd->add_option("--L", opt.sampling.L, "Forecast horizon")->capture_default_str();
    cmd->add_option("--t-gap", opt.sampling.t_gap, "Stride between adjacent windows")->capture_default_str();
    cmd->add_option("--delta-t", opt.sampling.delta_t, "Time-axis subsampling stride")->capture_default_str();
    cmd->add_option("--split-ratio", opt.sampling.split_ratio, "Train fraction of the temporal split")
        ->capture_default_str();
}

void add_flow_flags(CLI::App* cmd, Options& opt) {
    cmd->add_option("--pyramid-levels", opt.flow.pyramid_levels, "Gaussian pyramid levels")->capture_default_str();
    cmd->add_option("--window-radius", opt.flow.window_radius, "Neighborhood radius in cells")->capture_default_str();
    cmd->add_option("--gaussian-sigma", opt.flow.gaussian_sigma, "Neighborhood weight sigma")->capture_default_str();
    cmd->add_option("--smoothness-lambda", opt.flow.smoothness_lambda, "Flow smoothness weight")->capture_default_str();
    cmd->add_option("--flow-iterations", opt.flow.iterations, "Fixed-point iterations per level")->capture_default_str();
    cmd->add_option("--post-smoothing-sigma", opt.flow.post_smoothing_sigma, "Final Gaussian filter sigma")
        ->capture_default_str();
}

void add_model_flags(CLI::App* cmd, Options& opt) {
    cmd->add_option("--d-model", opt.model.d_model, "Hidden width")->capture_default_str();
    cmd->add_option("--d-ff", opt.model.d_ff, "Feed-forward width")->capture_default_str();
    cmd->add_option("--kernel-sizes", opt.kernel_sizes, "Inception kernel sizes, comma separated")
        ->capture_default_str();
    cmd->add_option("--top-k", opt.model.autocorr_top_k, "Lags kept by the autocorrelation block (0 = ceil(ln M))")
        ->capture_default_str();
}

void add_train_flags(CLI::App* cmd, Options& opt) {
    cmd->add_option("--batch,--batch-size", opt.train.batch_size, "Batch size")->capture_default_str();
    cmd->add_option("--epochs", opt.train.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--learning-rate,--lr", opt.train.learning_rate, "Adam learning rate")->capture_default_str();
    cmd->add_flag("--normalize,!--no-normalize", opt.train.normalize, "Per-window z-score normalization")
        ->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"driftcast: optical-flow-guided forecasting for gridded scalar fields"};
    app.require_subcommand(1);

    Options opt;
    std::string ckpt_path;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic .sstgrid series");
    synth->add_option("--kind", opt.kind, "advecting_wave | eddy | seasonal")->capture_default_str();
    synth->add_option("--T", opt.T, "Frames")->capture_default_str();
    synth->add_option("--H", opt.H, "Rows")->capture_default_str();
    synth->add_option("--W", opt.W, "Cols")->capture_default_str();
    synth->add_option("--shift-i", opt.shift_i, "Per-step row shift (wave/eddy)")->capture_default_str();
    synth->add_option("--shift-j", opt.shift_j, "Per-step col shift (wave/eddy)")->capture_default_str();
    synth->add_option("--period", opt.period_frames, "Seasonal period in frames")->capture_default_str();
    synth->add_option("--seed", opt.seed, "Random seed")->capture_default_str();
    synth->add_option("--out", opt.out_dir, "Output directory")->required();

    auto* flow = app.add_subcommand("flow", "Dump dense optical flow fields for a series");
    flow->add_option("--input", opt.input, "Input .sstgrid")->required();
    flow->add_option("--out", opt.out_dir, "Output directory")->required();
    flow->add_option("--seed", opt.seed, "Random seed")->capture_default_str();
    add_flow_flags(flow, opt);

    auto* train = app.add_subcommand("train", "Train a model on the temporal train split");
    train->add_option("--input", opt.input, "Input .sstgrid")->required();
    train->add_option("--out", opt.out_dir, "Output directory")->required();
    train->add_option("--seed", opt.seed, "Random seed")->capture_default_str();
    train->add_option("--target-k", opt.target_k, "Flattened target cell (default: grid center)")->capture_default_str();
    train->add_option("--d-o", opt.d_o, "Attractor box-counting dimension for the embedding check")
        ->capture_default_str();
    add_sampling_flags(train, opt);
    add_flow_flags(train, opt);
    add_model_flags(train, opt);
    add_train_flags(train, opt);

    auto* predict = app.add_subcommand("predict", "Forecast the test split with a trained model");
    predict->add_option("--input", opt.input, "Input .sstgrid")->required();
    predict->add_option("--checkpoint", ckpt_path, "Trained checkpoint")->required();
    predict->add_option("--out", opt.out_dir, "Output directory")->required();
    predict->add_option("--seed", opt.seed, "Random seed")->capture_default_str();
    predict->add_option("--extract-mode", opt.extract_mode, "last | antidiag")->capture_default_str();

    auto* evaluate = app.add_subcommand("evaluate", "Score a trained model on the test split");
    evaluate->add_option("--input", opt.input, "Input .sstgrid")->required();
    evaluate->add_option("--checkpoint", ckpt_path, "Trained checkpoint")->required();
    evaluate->add_option("--out", opt.out_dir, "Output directory")->required();
    evaluate->add_option("--seed", opt.seed, "Random seed")->capture_default_str();
    evaluate->add_option("--extract-mode", opt.extract_mode, "last | antidiag")->capture_default_str();

    auto* sweep = app.add_subcommand("sweep", "Sweep one experiment axis");
    sweep->add_option("--input", opt.input, "Input .sstgrid")->required();
    sweep->add_option("--out", opt.out_dir, "Output directory")->required();
    sweep->add_option("--axis", opt.axis, "area | delta_t | horizon | season")->capture_default_str();
    sweep->add_option("--values", opt.values, "Comma-separated axis values (defaults per axis)");
    sweep->add_option("--seed", opt.seed, "Random seed")->capture_default_str();
    sweep->add_option("--window-span", opt.window_span, "Region span (deg) for non-area axes")->capture_default_str();
    sweep->add_option("--extract-mode", opt.extract_mode, "last | antidiag")->capture_default_str();
    add_sampling_flags(sweep, opt);
    add_flow_flags(sweep, opt);
    add_model_flags(sweep, opt);
    add_train_flags(sweep, opt);

    auto* ablate = app.add_subcommand("ablate", "Run the four-component ablation grid");
    ablate->add_option("--input", opt.input, "Input .sstgrid")->required();
    ablate->add_option("--out", opt.out_dir, "Output directory")->required();
    ablate->add_option("--seeds", opt.n_seeds, "Seeds per configuration (median reported)")->capture_default_str();
    ablate->add_option("--seed", opt.seed, "Base random seed")->capture_default_str();
    ablate->add_option("--target-k", opt.target_k, "Flattened target cell (default: grid center)")
        ->capture_default_str();
    ablate->add_option("--extract-mode", opt.extract_mode, "last | antidiag")->capture_default_str();
    add_sampling_flags(ablate, opt);
    add_flow_flags(ablate, opt);
    add_model_flags(ablate, opt);
    add_train_flags(ablate, opt);

    auto* peval = app.add_subcommand("parallel-eval", "Spatially parallel sliding-sampling evaluation");
    peval->add_option("--input", opt.input, "Input .sstgrid")->required();
    peval->add_option("--out", opt.out_dir, "Output directory")->required();
    peval->add_option("--eval-span", opt.eval_span, "Evaluation region span in degrees")->capture_default_str();
    peval->add_option("--window-span", opt.window_span, "Sliding window span in degrees")->capture_default_str();
    peval->add_option("--jobs", opt.jobs, "Concurrent window runs (0 = hardware)")->capture_default_str();
    peval->add_option("--seed", opt.seed, "Base random seed")->capture_default_str();
    peval->add_option("--extract-mode", opt.extract_mode, "last | antidiag")->capture_default_str();
    add_sampling_flags(peval, opt);
    add_flow_flags(peval, opt);
    add_model_flags(peval, opt);
    add_train_flags(peval, opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // 0
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        finalize(opt);
        if (synth->parsed()) return cmd_synth(opt);
        if (flow->parsed()) return cmd_flow(opt);
        if (train->parsed()) return cmd_train(opt);
        if (predict->parsed()) return cmd_predict(opt, ckpt_path);
        if (evaluate->parsed()) return cmd_evaluate(opt, ckpt_path);
        if (sweep->parsed()) return cmd_sweep(opt);
        if (ablate->parsed()) return cmd_ablate(opt);
        if (peval->parsed()) return cmd_parallel_eval(opt);
    } catch (const std::exception& e) {
        std::cerr << "driftcast: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
