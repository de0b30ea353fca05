#pragma once

#include <cstdint>
#include <string>

#include "vit5/model.hpp"

namespace vit5 {

// Single-file checkpoint: 8-byte magic "VIT5CKPT", little-endian u64 manifest
// length, JSON manifest, then the little-endian f32 blob of all parameters in
// registry order. The manifest records format version "vit5-ckpt/1", the
// config, seed provenance, tensor name/shape/offset entries, and the FNV-1a
// hash of the blob (verified on load).
void save_checkpoint(const Vit5Model& model, const std::string& path);
Vit5Model load_checkpoint(const std::string& path);

nlohmann::json checkpoint_manifest(const Vit5Model& model);

std::uint64_t fnv1a64_bytes(const unsigned char* data, std::size_t len);

}  // namespace vit5
