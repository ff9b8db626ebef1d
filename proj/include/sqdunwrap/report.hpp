#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqdunwrap/training.hpp"

namespace sqdunwrap {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path &path);

/// Source revision the library was built from.
std::string code_version();

/// Comparison of several methods on one dataset split.
struct RunReport {
    nlohmann::json config = nlohmann::json::object();
    std::map<std::string, std::string> artifact_hashes;
    std::vector<MethodReport> methods;
};

/// Full report. content_hash covers everything except wall-clock timings,
/// so it is stable across reruns with the same inputs.
nlohmann::json report_json(const RunReport &report, bool with_timing = true);
std::string content_hash(const RunReport &report);

/// Aligned text table: noise-free NRMSE, noisy NRMSE, time per image.
std::string report_table(const RunReport &report);

/// Noise sweep rows "snr_db,method,mean_nrmse_pct,n_images"; noise-free
/// images use the label "none".
std::string sweep_csv(const RunReport &report);

} // namespace sqdunwrap
