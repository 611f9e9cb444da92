#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "snp/tensor.hpp"

namespace snp {

// Depth input formats:
//   - 8- or 16-bit single-channel PNG, values mapped linearly to [0,1],
//     larger = closer
//   - raw "SNPD" file: magic "SNPD", u32 height, u32 width, u32 reserved
//     (little-endian, 16-byte header), then height*width float32 LE,
//     row-major
Gray read_depth_file(const std::filesystem::path& path);
Gray read_depth_png(const std::filesystem::path& path);
Gray read_depth_snpd(const std::filesystem::path& path);

void write_depth_png(const std::filesystem::path& path, const Gray& depth, int bit_depth = 16);
void write_depth_snpd(const std::filesystem::path& path, const Gray& depth);

// Latent files ("SNPL"): magic, u32 channels, u32 height, u32 width,
// then c*h*w float32 LE for a single batch element.
void write_latent(const std::filesystem::path& path, const Tensor4f& latent, int batch_index = 0);
Tensor4f read_latent(const std::filesystem::path& path);

// Bare float32 LE vector files (".feat").
std::vector<float> read_feat(const std::filesystem::path& path);
void write_feat(const std::filesystem::path& path, std::span<const float> values);

}  // namespace snp
