#include "sqdunwrap/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "sqdunwrap/errors.hpp"

#ifndef SQDUNWRAP_GIT_REV
#define SQDUNWRAP_GIT_REV "unknown"
#endif

namespace sqdunwrap {

using nlohmann::json;

namespace {

struct DigestDeleter {
    void operator()(EVP_MD_CTX *ctx) const { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
  public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
            throw std::runtime_error("sha256: digest initialisation failed");
        }
    }
    void update(const void *data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
    std::string hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_.get(), md, &len);
        std::ostringstream out;
        for (unsigned int i = 0; i < len; ++i) {
            out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
        }
        return out.str();
    }

  private:
    std::unique_ptr<EVP_MD_CTX, DigestDeleter> ctx_;
};

std::string fmt(double v, int precision = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

/// Mean NRMSE over noise-free (noisy == false) or noisy images, if any.
std::optional<double> subset_mean(const MethodReport &m, bool noisy) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto &im : m.images) {
        if (im.snr_db.has_value() == noisy) {
            sum += im.nrmse;
            ++n;
        }
    }
    if (n == 0) {
        return std::nullopt;
    }
    return sum / static_cast<double>(n);
}

} // namespace

std::string sha256_hex(std::string_view bytes) {
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.hex();
}

std::string sha256_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidInput("cannot read " + path.string());
    }
    Sha256 h;
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

std::string code_version() { return SQDUNWRAP_GIT_REV; }

std::string content_hash(const RunReport &report) {
    json j = report_json(report, false);
    j.erase("content_hash");
    return sha256_hex(j.dump());
}

json report_json(const RunReport &report, bool with_timing) {
    json methods = json::array();
    for (const auto &m : report.methods) {
        methods.push_back(method_json(m, with_timing));
    }
    json j{{"code_version", code_version()},
           {"config", report.config},
           {"artifact_hashes", report.artifact_hashes},
           {"nrmse_definition",
            "100 * rms(pred - offset - truth) / range(truth); offset = mean(pred - truth)"},
           {"methods", methods}};
    if (with_timing) {
        j["content_hash"] = content_hash(report);
    }
    return j;
}

std::string report_table(const RunReport &report) {
    std::size_t name_width = 6;
    for (const auto &m : report.methods) {
        name_width = std::max(name_width, m.method.size());
    }
    std::ostringstream out;
    const auto cell = [](const std::string &s, std::size_t w) {
        return std::string(w > s.size() ? w - s.size() : 0, ' ') + s;
    };
    out << std::left << std::setw(static_cast<int>(name_width)) << "Method"
        << cell("Noise-free NRMSE %", 20) << cell("Noisy NRMSE %", 16) << cell("Median %", 12)
        << cell("Congruence", 12) << cell("Time (s)", 12) << '\n';
    for (const auto &m : report.methods) {
        const auto clean = subset_mean(m, false);
        const auto noisy = subset_mean(m, true);
        out << std::left << std::setw(static_cast<int>(name_width)) << m.method
            << cell(clean ? fmt(*clean, 6) : "-", 20) << cell(noisy ? fmt(*noisy, 4) : "-", 16)
            << cell(fmt(m.median_nrmse, 4), 12) << cell(fmt(m.mean_congruence, 4), 12)
            << cell(fmt(m.mean_seconds, 5), 12) << '\n';
    }
    return out.str();
}

std::string sweep_csv(const RunReport &report) {
    std::ostringstream out;
    out << "snr_db,method,mean_nrmse_pct,n_images\n";
    for (const auto &m : report.methods) {
        std::vector<std::pair<std::string, SnrBucket>> rows(m.buckets.begin(), m.buckets.end());
        // "none" (noise free) first, then ascending SNR.
        std::ranges::sort(rows, [](const auto &a, const auto &b) {
            if (a.first == "none" || b.first == "none") {
                return a.first == "none" && b.first != "none";
            }
            return std::stod(a.first) < std::stod(b.first);
        });
        for (const auto &[label, bucket] : rows) {
            out << label << ',' << m.method << ',' << fmt(bucket.mean_nrmse, 6) << ','
                << bucket.count << '\n';
        }
    }
    return out.str();
}

} // namespace sqdunwrap
