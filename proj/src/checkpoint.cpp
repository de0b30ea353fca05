#include "vit5/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace vit5 {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'V', 'I', 'T', '5', 'C', 'K', 'P', 'T'};
constexpr const char* kFormat = "vit5-ckpt/1";

std::vector<unsigned char> encode_blob(const Vit5Model& model) {
    std::vector<unsigned char> blob;
    for (const ParamRef& p : model.parameters()) {
        for (double v : p.tensor.data()) {
            const float f = static_cast<float>(v);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            blob.push_back(static_cast<unsigned char>(bits & 0xFF));
            blob.push_back(static_cast<unsigned char>((bits >> 8) & 0xFF));
            blob.push_back(static_cast<unsigned char>((bits >> 16) & 0xFF));
            blob.push_back(static_cast<unsigned char>((bits >> 24) & 0xFF));
        }
    }
    return blob;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

}  // namespace

std::uint64_t fnv1a64_bytes(const unsigned char* data, std::size_t len) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= data[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

json checkpoint_manifest(const Vit5Model& model) {
    json manifest;
    manifest["format"] = kFormat;
    manifest["config"] = model.config.to_json();
    manifest["seed"] = model.seed;
    json tensors = json::array();
    std::int64_t offset = 0;
    for (const ParamRef& p : model.parameters()) {
        json t;
        t["name"] = p.name;
        t["shape"] = p.tensor.shape();
        t["dtype"] = "f32";
        t["offset"] = offset;
        tensors.push_back(t);
        offset += p.tensor.numel();
    }
    manifest["tensors"] = tensors;
    manifest["numel"] = offset;
    return manifest;
}

void save_checkpoint(const Vit5Model& model, const std::string& path) {
    const std::vector<unsigned char> blob = encode_blob(model);
    json manifest = checkpoint_manifest(model);
    manifest["blob_hash"] = hex64(fnv1a64_bytes(blob.data(), blob.size()));
    const std::string mstr = manifest.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open '" + path + "' for writing");
    out.write(kMagic, 8);
    const std::uint64_t mlen = mstr.size();
    unsigned char lenbuf[8];
    for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<unsigned char>((mlen >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(lenbuf), 8);
    out.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("checkpoint: write failed for '" + path + "'");
}

Vit5Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw IoError("checkpoint: bad magic in '" + path + "'");
    }
    unsigned char lenbuf[8];
    in.read(reinterpret_cast<char*>(lenbuf), 8);
    if (!in) throw IoError("checkpoint: truncated header in '" + path + "'");
    std::uint64_t mlen = 0;
    for (int i = 7; i >= 0; --i) mlen = (mlen << 8) | lenbuf[i];
    std::string mstr(mlen, '\0');
    in.read(mstr.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw IoError("checkpoint: truncated manifest in '" + path + "'");

    json manifest;
    try {
        manifest = json::parse(mstr);
    } catch (const json::exception& e) {
        throw IoError("checkpoint: manifest is not valid JSON (" + std::string(e.what()) + ")");
    }
    const std::string format = manifest.value("format", "");
    if (format != kFormat) {
        throw IoError("checkpoint: format version mismatch, expected '" + std::string(kFormat) +
                      "', got '" + format + "'");
    }
    const ModelConfig cfg = ModelConfig::from_json(manifest.at("config"));
    const std::uint64_t seed = manifest.at("seed").get<std::uint64_t>();
    const std::int64_t numel = manifest.at("numel").get<std::int64_t>();

    std::vector<unsigned char> blob(static_cast<std::size_t>(numel) * 4);
    in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (in.gcount() != static_cast<std::streamsize>(blob.size())) {
        throw IoError("checkpoint: blob truncated, expected " + std::to_string(blob.size()) +
                      " bytes");
    }
    const std::string expect_hash = manifest.at("blob_hash").get<std::string>();
    const std::string got_hash = hex64(fnv1a64_bytes(blob.data(), blob.size()));
    if (expect_hash != got_hash) {
        throw IoError("checkpoint: blob hash mismatch (manifest " + expect_hash + ", blob " +
                      got_hash + ")");
    }

    Vit5Model model = build_model(cfg, seed, /*init=*/false);
    std::size_t cursor = 0;
    for (ParamRef& p : model.parameters()) {
        auto& data = p.tensor.mutable_data();
        for (double& v : data) {
            std::uint32_t bits = static_cast<std::uint32_t>(blob[cursor]) |
                                 (static_cast<std::uint32_t>(blob[cursor + 1]) << 8) |
                                 (static_cast<std::uint32_t>(blob[cursor + 2]) << 16) |
                                 (static_cast<std::uint32_t>(blob[cursor + 3]) << 24);
            float f;
            std::memcpy(&f, &bits, 4);
            v = static_cast<double>(f);
            cursor += 4;
        }
    }
    return model;
}

}  // namespace vit5
