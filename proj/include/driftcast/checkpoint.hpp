#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftcast/errors.hpp"
#include "driftcast/model.hpp"

namespace driftcast {

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    return nlohmann::json{{"d_model", cfg.d_model},
                          {"d_ff", cfg.d_ff},
                          {"M", cfg.M},
                          {"L", cfg.L},
                          {"H", cfg.H},
                          {"W", cfg.W},
                          {"inception_kernels", cfg.inception_kernels},
                          {"autocorr_top_k", cfg.autocorr_top_k},
                          {"seed", cfg.seed},
                          {"use_optical_attention", cfg.use_optical_attention},
                          {"use_inception", cfg.use_inception},
                          {"use_autocorrelation", cfg.use_autocorrelation}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.d_model = j.at("d_model").get<int>();
    cfg.d_ff = j.at("d_ff").get<int>();
    cfg.M = j.at("M").get<int>();
    cfg.L = j.at("L").get<int>();
    cfg.H = j.at("H").get<int>();
    cfg.W = j.at("W").get<int>();
    cfg.inception_kernels = j.at("inception_kernels").get<std::vector<int>>();
    cfg.autocorr_top_k = j.at("autocorr_top_k").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.use_optical_attention = j.at("use_optical_attention").get<bool>();
    cfg.use_inception = j.at("use_inception").get<bool>();
    cfg.use_autocorrelation = j.at("use_autocorrelation").get<bool>();
    return cfg;
}

struct Checkpoint {
    ModelConfig config;
    ModelParams params;
    nlohmann::json pipeline; // caller-defined run settings carried alongside
};

/// Layout: version byte (1), u32 LE header length, JSON header, then each
/// parameter tensor as raw little-endian f64 in declared order.
inline void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, ModelParams& params,
                            const nlohmann::json& pipeline = {}) {
    nlohmann::json header;
    header["model"] = model_config_to_json(cfg);
    header["pipeline"] = pipeline;
    auto named = params.named();
    nlohmann::json tensors = nlohmann::json::array();
    for (auto& [name, t] : named) tensors.push_back({{"name", name}, {"shape", t->shape()}});
    header["tensors"] = tensors;

    const std::string hs = header.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    const char version = 1;
    out.put(version);
    const std::uint32_t len = static_cast<std::uint32_t>(hs.size());
    char lenb[4];
    for (int i = 0; i < 4; ++i) lenb[i] = static_cast<char>((len >> (8 * i)) & 0xff);
    out.write(lenb, 4);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (auto& [name, t] : named) {
        for (double v : t->values()) {
            auto bits = std::bit_cast<std::uint64_t>(v);
            char b[8];
            for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
            out.write(b, 8);
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 5) throw FormatError(path.string() + ": truncated checkpoint");
    if (buf[0] != 1) throw FormatError(path.string() + ": unsupported checkpoint version");
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[1 + i])) << (8 * i);
    if (buf.size() < 5 + static_cast<std::size_t>(len)) throw FormatError(path.string() + ": truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(buf.substr(5, len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad header json: " + e.what());
    }

    Checkpoint ck;
    ck.config = model_config_from_json(header.at("model"));
    ck.pipeline = header.value("pipeline", nlohmann::json{});
    ck.params = ModelParams::init(ck.config); // shapes; values overwritten below

    std::size_t pos = 5 + static_cast<std::size_t>(len);
    for (auto& [name, t] : ck.params.named()) {
        const std::size_t n = t->numel();
        if (pos + n * 8 > buf.size()) throw FormatError(path.string() + ": truncated parameter payload at " + name);
        auto& vals = t->values_mut();
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b)
                bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i * 8 + b])) << (8 * b);
            vals[i] = std::bit_cast<double>(bits);
        }
        pos += n * 8;
    }
    if (pos != buf.size()) throw FormatError(path.string() + ": trailing bytes after parameters");
    return ck;
}

} // namespace driftcast
