#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqdunwrap/layers.hpp"

namespace sqdunwrap {

inline constexpr int kCheckpointVersion = 1;

/// File layout: 8-byte little-endian header length, UTF-8 JSON header
/// {"format_version", "dtype": "f32", "tensors": [{"name", "shape"}...], "meta"},
/// then the float32 little-endian blobs in header order.
void save_checkpoint(const std::filesystem::path &path, const ParamList<float> &params,
                     const nlohmann::json &meta);

struct CheckpointData {
    nlohmann::json meta;
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> shapes;
    std::map<std::string, std::vector<float>> blobs;
};

CheckpointData read_checkpoint(const std::filesystem::path &path);

/// Copies blobs into params by name; names and shapes must match exactly.
void assign_checkpoint(const CheckpointData &data, const ParamList<float> &params);

} // namespace sqdunwrap
