#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "adc/model_config.hpp"
#include "adc/sample.hpp"
#include "adc/state.hpp"

namespace adc::dataio {

/// Raw depth raster: 16-byte header {magic "DPF1", u32 width, u32 height,
/// u32 reserved}, then row-major little-endian f32 values. Invalid pixels
/// store exactly 0.
void write_depth_raw(const DepthMap& m, const std::filesystem::path& file);
DepthMap read_depth_raw(const std::filesystem::path& file);

void write_png(const ImageRgb8& img, const std::filesystem::path& file);
ImageRgb8 read_png(const std::filesystem::path& file);

/// Writes rgb.png, depth.raw, sparse.raw, boxes.json and meta.json into
/// `dir` (created if missing) and returns `dir`. The sample is validated
/// first; read_sample inverts the result bit-exactly for depth rasters and
/// boxes.
std::filesystem::path write_sample(const Sample& s, const std::filesystem::path& dir);
Sample read_sample(const std::filesystem::path& dir);

/// Sorted sample subdirectories of a dataset root (those containing rgb.png).
std::vector<std::filesystem::path> list_sample_dirs(const std::filesystem::path& root);

/// Checkpoint directory: params.bin (self-describing parameter dump),
/// config.json, manifest.json {config_hash, epoch, created_at}.
std::filesystem::path save_checkpoint(const NetworkState& state, const ModelConfig& config,
                                      int epoch, const std::filesystem::path& dir);

struct Checkpoint {
    NetworkState state;
    ModelConfig config;
    int epoch = 0;
};

/// Throws FormatError if manifest.config_hash does not match config.json.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace adc::dataio
