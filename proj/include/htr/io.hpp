#pragma once

// On-disk formats.
//
// HTRT tensor container, all integers little-endian:
//   bytes 0-3   magic "HTRT"
//   byte  4     version (1)
//   byte  5     dtype (0 = IEEE-754 binary32, little-endian)
//   byte  6     ndim
//   then        ndim x u32 extents, each >= 1
//   then        row-major payload, 4 * prod(extents) bytes
//
// Masks are binary PGM (P5, maxval 255); a byte v maps to probability v/255.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "htr/feature_map.hpp"
#include "htr/fusion.hpp"
#include "htr/memory.hpp"
#include "htr/metrics.hpp"
#include "htr/numerics.hpp"

namespace htr::io {

inline constexpr std::uint8_t kTensorVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 0;

/// Tensor of arbitrary rank as stored in an HTRT container.
struct TensorFile {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;
};

std::vector<std::byte> encode_tensor(const TensorFile& tensor);
TensorFile decode_tensor(std::span<const std::byte> bytes);

TensorFile read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const TensorFile& tensor);

/// Rank-1 files become a single row; rank-2 map directly; higher ranks are
/// rejected with ShapeMismatch.
Tensor to_matrix(const TensorFile& tensor);
TensorFile from_matrix(const Tensor& matrix);

/// Rank-4 T x H x W x C tensor split into per-frame feature maps.
std::vector<FeatureMap> to_feature_maps(const TensorFile& tensor);
TensorFile from_feature_maps(std::span<const FeatureMap> frames);

std::vector<std::byte> encode_mask(const Tensor& probabilities);
Tensor decode_mask(std::span<const std::byte> bytes);

Tensor read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Tensor& probabilities);

/// Reads the `*.pgm` files of a directory in file-name order.
metrics::MaskSequence read_mask_dir(const std::filesystem::path& dir);

/// `frame_00007.pgm` -> 7.
int frame_index_from_name(const std::filesystem::path& file);
std::string frame_file_name(int index);

/// CSV with one video per row and one Jaccard value per column; blank cells,
/// non-numeric cells and empty rows are rejected with UnsupportedFormat.
metrics::JTable parse_jtable(const std::string& text);
metrics::JTable read_jtable(const std::filesystem::path& path);

/// One `<name>.htrt` file per projection.
fusion::ProjectionSet read_projection_set(const std::filesystem::path& dir);
void write_projection_set(const std::filesystem::path& dir, const fusion::ProjectionSet& set);

/// key_proj.htrt, joint_proj.htrt and mask_proj.htrt.
memory::MemoryWeights read_memory_weights(const std::filesystem::path& dir);
void write_memory_weights(const std::filesystem::path& dir, const memory::MemoryWeights& weights);

/// Debug dump of a built memory: keys, values, frame indices, reference
/// probabilities, joint features and whichever tokens are defined.
void write_memory(const std::filesystem::path& dir, const memory::HybridMemory& memory);

std::vector<std::byte> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace htr::io
