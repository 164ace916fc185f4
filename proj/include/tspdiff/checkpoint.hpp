#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tspdiff/denoiser.hpp"

namespace tspdiff {

inline constexpr int kCheckpointFormatVersion = 1;

namespace detail {

inline void write_f32_le(std::ostream& os, float value) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
    const char bytes[4] = {static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                           static_cast<char>((bits >> 16) & 0xFF),
                           static_cast<char>((bits >> 24) & 0xFF)};
    os.write(bytes, 4);
}

inline float read_f32_le(std::istream& is) {
    unsigned char bytes[4];
    is.read(reinterpret_cast<char*>(bytes), 4);
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                               (static_cast<std::uint32_t>(bytes[1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[3]) << 24);
    return std::bit_cast<float>(bits);
}

}  // namespace detail

// Writes <prefix>.json (manifest: version, config, tensor table) and
// <prefix>.bin (raw little-endian float32 values). Values are rounded to
// float32 on save; a load/save cycle is byte-exact.
inline void checkpoint_save(const DenoiserParams& params, const std::string& prefix) {
    const auto specs = param_tensors(params.config);
    const std::filesystem::path manifest_path = prefix + ".json";
    const std::filesystem::path blob_path = prefix + ".bin";

    {
        std::ofstream blob(blob_path, std::ios::binary | std::ios::trunc);
        if (!blob) throw std::runtime_error("checkpoint_save: cannot write " + blob_path.string());
        for (double v : params.values) detail::write_f32_le(blob, static_cast<float>(v));
        if (!blob) throw std::runtime_error("checkpoint_save: write failed on " + blob_path.string());
    }

    nlohmann::ordered_json manifest;
    manifest["format_version"] = kCheckpointFormatVersion;
    manifest["dtype"] = "float32_le";
    manifest["config"] = {{"layers", params.config.layers},
                          {"width", params.config.width},
                          {"time_embed_dim", params.config.time_embed_dim}};
    manifest["blob"] = blob_path.filename().string();
    nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
    for (const auto& spec : specs) {
        tensors.push_back({{"name", spec.name},
                           {"shape", spec.shape},
                           {"byte_offset", spec.offset * sizeof(float)},
                           {"count", spec.count}});
    }
    manifest["tensors"] = std::move(tensors);

    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint_save: cannot write " + manifest_path.string());
    out << manifest.dump(2) << "\n";
}

inline DenoiserParams checkpoint_load(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("checkpoint_load: missing manifest " + manifest_path);
    nlohmann::json manifest;
    in >> manifest;

    if (manifest.at("format_version").get<int>() != kCheckpointFormatVersion)
        throw std::runtime_error("checkpoint_load: unsupported format version in " + manifest_path);
    if (manifest.at("dtype").get<std::string>() != "float32_le")
        throw std::runtime_error("checkpoint_load: unsupported dtype in " + manifest_path);

    DenoiserConfig cfg;
    cfg.layers = manifest.at("config").at("layers").get<int>();
    cfg.width = manifest.at("config").at("width").get<int>();
    cfg.time_embed_dim = manifest.at("config").at("time_embed_dim").get<int>();
    cfg.validate();

    const auto blob_path =
        std::filesystem::path(manifest_path).parent_path() / manifest.at("blob").get<std::string>();
    std::ifstream blob(blob_path, std::ios::binary);
    if (!blob) throw std::runtime_error("checkpoint_load: missing blob " + blob_path.string());

    DenoiserParams params;
    params.config = cfg;
    params.values.resize(param_count(cfg));

    // Validate the tensor table against this build's layout before reading.
    const auto specs = param_tensors(cfg);
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != specs.size())
        throw std::runtime_error("checkpoint_load: tensor table size mismatch in " + manifest_path);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& t = tensors[i];
        if (t.at("name").get<std::string>() != specs[i].name ||
            t.at("byte_offset").get<std::size_t>() != specs[i].offset * sizeof(float) ||
            t.at("count").get<std::size_t>() != specs[i].count)
            throw std::runtime_error("checkpoint_load: tensor table mismatch at " + specs[i].name);
    }

    for (double& v : params.values) v = static_cast<double>(detail::read_f32_le(blob));
    if (!blob) throw std::runtime_error("checkpoint_load: blob truncated: " + blob_path.string());
    return params;
}

}  // namespace tspdiff
