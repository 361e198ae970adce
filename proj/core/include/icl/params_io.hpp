#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "icl/model.hpp"

namespace icl {

// Versioned little-endian blob: "ICLP", u32 version, u32 count, then per
// tensor u32 name length, name, u32 rank, u64 dims, doubles.
std::string encode_tensors(const std::vector<std::string>& names, const std::vector<Tensor>& tensors);
void decode_tensors(std::string_view bytes, std::vector<std::string>& names, std::vector<Tensor>& tensors);

std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(std::string_view text);

// Writes <dir>/<stem>.bin and the manifest <dir>/<stem>.json; returns the manifest path.
std::filesystem::path save_params(const ModelParams& params, const std::filesystem::path& dir,
                                  const std::string& stem = "params");
// Accepts a manifest or a directory holding params.json.
ModelParams load_params(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace icl
