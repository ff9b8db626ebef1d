#include "sqdunwrap/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "sqdunwrap/errors.hpp"

namespace sqdunwrap {

using nlohmann::json;

namespace {

void put_u32(std::string &out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>(v & 0xFFu));
        v >>= 8;
    }
}

std::uint64_t get_u64(const unsigned char *p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | p[i];
    }
    return v;
}

} // namespace

void save_checkpoint(const std::filesystem::path &path, const ParamList<float> &params,
                     const json &meta) {
    json tensors = json::array();
    for (const Param<float> *p : params) {
        tensors.push_back({{"name", p->name}, {"shape", p->shape}});
    }
    const json header{{"format_version", kCheckpointVersion},
                      {"dtype", "f32"},
                      {"tensors", tensors},
                      {"meta", meta}};
    const std::string text = header.dump();

    std::string bytes;
    std::uint64_t len = text.size();
    for (int i = 0; i < 8; ++i) {
        bytes.push_back(static_cast<char>(len & 0xFFu));
        len >>= 8;
    }
    bytes += text;
    for (const Param<float> *p : params) {
        for (float v : p->value) {
            put_u32(bytes, std::bit_cast<std::uint32_t>(v));
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("failed writing checkpoint " + path.string());
    }
}

CheckpointData read_checkpoint(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open checkpoint " + path.string());
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 8) {
        throw CorruptDataset("checkpoint too short: " + path.string());
    }
    const std::uint64_t len = get_u64(bytes.data());
    if (len > bytes.size() - 8) {
        throw CorruptDataset("checkpoint header length exceeds file: " + path.string());
    }
    json header;
    try {
        header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(len));
    } catch (const json::exception &e) {
        throw CorruptDataset(std::string("checkpoint header: ") + e.what());
    }
    if (header.value("format_version", -1) != kCheckpointVersion ||
        header.value("dtype", "") != "f32") {
        throw VersionMismatch("unsupported checkpoint format in " + path.string());
    }
    CheckpointData data;
    data.meta = header.value("meta", json::object());
    std::size_t pos = 8 + len;
    for (const auto &t : header.at("tensors")) {
        const auto name = t.at("name").get<std::string>();
        const auto shape = t.at("shape").get<std::vector<std::size_t>>();
        std::size_t count = 1;
        for (std::size_t s : shape) {
            count *= s;
        }
        if (pos + count * 4 > bytes.size()) {
            throw CorruptDataset("checkpoint truncated in tensor " + name);
        }
        std::vector<float> blob(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t bits = 0;
            for (int b = 3; b >= 0; --b) {
                bits = (bits << 8) | bytes[pos + i * 4 + static_cast<std::size_t>(b)];
            }
            blob[i] = std::bit_cast<float>(bits);
        }
        pos += count * 4;
        data.order.push_back(name);
        data.shapes[name] = shape;
        data.blobs[name] = std::move(blob);
    }
    if (pos != bytes.size()) {
        throw CorruptDataset("checkpoint has trailing bytes: " + path.string());
    }
    return data;
}

void assign_checkpoint(const CheckpointData &data, const ParamList<float> &params) {
    if (params.size() != data.order.size()) {
        throw ConfigError("checkpoint has " + std::to_string(data.order.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
    }
    for (Param<float> *p : params) {
        const auto it = data.blobs.find(p->name);
        if (it == data.blobs.end()) {
            throw ConfigError("checkpoint lacks tensor " + p->name);
        }
        if (data.shapes.at(p->name) != p->shape) {
            throw ConfigError("checkpoint tensor " + p->name + " has a different shape");
        }
        p->value = it->second;
    }
}

} // namespace sqdunwrap
