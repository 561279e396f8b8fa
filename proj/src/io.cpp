#include "htr/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace htr::io {
namespace fs = std::filesystem;
namespace {

constexpr char kMagic[4] = {'H', 'T', 'R', 'T'};
constexpr std::size_t kFixedHeader = 7;

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<std::byte>((v >> shift) & 0xFFu));
  }
}

std::uint32_t get_u32(std::span<const std::byte> bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    v |= static_cast<std::uint32_t>(std::to_integer<std::uint8_t>(bytes[at + k])) << (8 * k);
  }
  return v;
}

std::uint8_t byte_at(std::span<const std::byte> bytes, std::size_t at) {
  return std::to_integer<std::uint8_t>(bytes[at]);
}

// Reads one whitespace-delimited PGM header token, skipping '#' comments.
std::string pgm_token(std::span<const std::byte> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const char c = static_cast<char>(byte_at(bytes, pos));
    if (c == '#') {
      while (pos < bytes.size() && static_cast<char>(byte_at(bytes, pos)) != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size()) {
    const char c = static_cast<char>(byte_at(bytes, pos));
    if (std::isspace(static_cast<unsigned char>(c)) || c == '#') break;
    token.push_back(c);
    ++pos;
  }
  return token;
}

long pgm_number(std::span<const std::byte> bytes, std::size_t& pos, const char* field) {
  const std::string token = pgm_token(bytes, pos);
  require(!token.empty() && std::all_of(token.begin(), token.end(),
                                        [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }),
          ErrorCode::HeaderMismatch, std::string("PGM header field '") + field + "' is not a number");
  require(token.size() <= 9, ErrorCode::HeaderMismatch,
          std::string("PGM header field '") + field + "' is too large");
  return std::stol(token);
}

}  // namespace

std::size_t TensorFile::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

std::vector<std::byte> encode_tensor(const TensorFile& tensor) {
  require(!tensor.dims.empty() && tensor.dims.size() <= 255, ErrorCode::ShapeMismatch,
          "tensor rank must be between 1 and 255");
  for (std::uint32_t d : tensor.dims) {
    require(d >= 1, ErrorCode::ShapeMismatch, "tensor extents must be positive");
  }
  require(tensor.element_count() == tensor.data.size(), ErrorCode::ShapeMismatch,
          "tensor extents describe " + std::to_string(tensor.element_count()) +
              " values but data holds " + std::to_string(tensor.data.size()));
  for (float v : tensor.data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "tensor data contains NaN or Inf");
  }

  std::vector<std::byte> out;
  out.reserve(kFixedHeader + 4 * tensor.dims.size() + 4 * tensor.data.size());
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  out.push_back(static_cast<std::byte>(kTensorVersion));
  out.push_back(static_cast<std::byte>(kDtypeFloat32));
  out.push_back(static_cast<std::byte>(tensor.dims.size()));
  for (std::uint32_t d : tensor.dims) put_u32(out, d);
  for (float v : tensor.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

TensorFile decode_tensor(std::span<const std::byte> bytes) {
  require(bytes.size() >= 4, ErrorCode::TruncatedPayload, "file too short for the HTRT magic");
  for (std::size_t k = 0; k < 4; ++k) {
    require(static_cast<char>(byte_at(bytes, k)) == kMagic[k], ErrorCode::BadMagic,
            "missing HTRT magic");
  }
  require(bytes.size() >= kFixedHeader, ErrorCode::TruncatedPayload, "HTRT header truncated");
  require(byte_at(bytes, 4) == kTensorVersion, ErrorCode::BadVersion,
          "unsupported HTRT version " + std::to_string(byte_at(bytes, 4)));
  require(byte_at(bytes, 5) == kDtypeFloat32, ErrorCode::UnsupportedFormat,
          "unsupported HTRT dtype " + std::to_string(byte_at(bytes, 5)));
  const std::size_t ndim = byte_at(bytes, 6);
  require(ndim >= 1, ErrorCode::HeaderMismatch, "HTRT tensor has rank 0");
  require(bytes.size() >= kFixedHeader + 4 * ndim, ErrorCode::TruncatedPayload,
          "HTRT extents truncated");

  TensorFile out;
  std::size_t count = 1;
  for (std::size_t k = 0; k < ndim; ++k) {
    const std::uint32_t d = get_u32(bytes, kFixedHeader + 4 * k);
    require(d >= 1, ErrorCode::HeaderMismatch, "HTRT extent of zero");
    require(count <= std::numeric_limits<std::size_t>::max() / 4 / d, ErrorCode::HeaderMismatch,
            "HTRT extents overflow");
    count *= d;
    out.dims.push_back(d);
  }
  const std::size_t payload_at = kFixedHeader + 4 * ndim;
  const std::size_t payload = bytes.size() - payload_at;
  require(payload >= 4 * count, ErrorCode::TruncatedPayload,
          "HTRT payload holds " + std::to_string(payload) + " bytes, extents require " +
              std::to_string(4 * count));
  require(payload == 4 * count, ErrorCode::HeaderMismatch,
          "HTRT payload has " + std::to_string(payload - 4 * count) + " trailing bytes");

  out.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.data[i] = std::bit_cast<float>(get_u32(bytes, payload_at + 4 * i));
    if (!std::isfinite(out.data[i])) {
      throw Error(ErrorCode::NonFinite, "HTRT payload contains NaN or Inf");
    }
  }
  return out;
}

std::vector<std::byte> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::transform(raw.begin(), raw.end(), out.begin(), [](char c) { return static_cast<std::byte>(c); });
  return out;
}

void write_file(const fs::path& path, std::span<const std::byte> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::IoError, "short write to " + path.string());
}

TensorFile read_tensor(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_tensor(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

void write_tensor(const fs::path& path, const TensorFile& tensor) {
  write_file(path, encode_tensor(tensor));
}

Tensor to_matrix(const TensorFile& tensor) {
  require(tensor.dims.size() == 1 || tensor.dims.size() == 2, ErrorCode::ShapeMismatch,
          "expected a rank-1 or rank-2 tensor, got rank " + std::to_string(tensor.dims.size()));
  const Eigen::Index rows = tensor.dims.size() == 1 ? 1 : tensor.dims[0];
  const Eigen::Index cols = tensor.dims.back();
  Tensor out(rows, cols);
  std::copy(tensor.data.begin(), tensor.data.end(), out.data());
  return out;
}

TensorFile from_matrix(const Tensor& matrix) {
  TensorFile out;
  out.dims = {static_cast<std::uint32_t>(matrix.rows()), static_cast<std::uint32_t>(matrix.cols())};
  out.data.assign(matrix.data(), matrix.data() + matrix.size());
  return out;
}

std::vector<FeatureMap> to_feature_maps(const TensorFile& tensor) {
  require(tensor.dims.size() == 4, ErrorCode::ShapeMismatch,
          "features must be a T x H x W x C tensor, got rank " + std::to_string(tensor.dims.size()));
  const Eigen::Index h = tensor.dims[1];
  const Eigen::Index w = tensor.dims[2];
  const Eigen::Index c = tensor.dims[3];
  const std::size_t per_frame = static_cast<std::size_t>(h * w * c);
  std::vector<FeatureMap> out;
  for (std::uint32_t t = 0; t < tensor.dims[0]; ++t) {
    Tensor data(h * w, c);
    std::copy_n(tensor.data.begin() + static_cast<std::ptrdiff_t>(t * per_frame), per_frame,
                data.data());
    out.emplace_back(h, w, std::move(data));
  }
  return out;
}

TensorFile from_feature_maps(std::span<const FeatureMap> frames) {
  require(!frames.empty(), ErrorCode::EmptyInput, "no feature maps to store");
  const FeatureMap& first = frames.front();
  TensorFile out;
  out.dims = {static_cast<std::uint32_t>(frames.size()), static_cast<std::uint32_t>(first.height()),
              static_cast<std::uint32_t>(first.width()), static_cast<std::uint32_t>(first.channels())};
  for (const FeatureMap& f : frames) {
    require(f.height() == first.height() && f.width() == first.width() &&
                f.channels() == first.channels(),
            ErrorCode::ShapeMismatch, "feature maps differ in shape");
    out.data.insert(out.data.end(), f.data().data(), f.data().data() + f.data().size());
  }
  return out;
}

std::vector<std::byte> encode_mask(const Tensor& probabilities) {
  require(probabilities.size() > 0, ErrorCode::ShapeMismatch, "cannot write an empty mask");
  require_finite(probabilities, "mask");
  require(probabilities.minCoeff() >= 0.0f && probabilities.maxCoeff() <= 1.0f,
          ErrorCode::InvalidArgument, "mask probabilities must lie in [0, 1]");
  const std::string header = "P5\n" + std::to_string(probabilities.cols()) + " " +
                             std::to_string(probabilities.rows()) + "\n255\n";
  std::vector<std::byte> out;
  out.reserve(header.size() + static_cast<std::size_t>(probabilities.size()));
  for (char c : header) out.push_back(static_cast<std::byte>(c));
  for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
    const double p = probabilities.data()[i];
    out.push_back(static_cast<std::byte>(static_cast<std::uint8_t>(std::lround(p * 255.0))));
  }
  return out;
}

Tensor decode_mask(std::span<const std::byte> bytes) {
  std::size_t pos = 0;
  const std::string magic = pgm_token(bytes, pos);
  require(magic == "P5", ErrorCode::UnsupportedFormat, "not a binary PGM (P5) file");
  const long width = pgm_number(bytes, pos, "width");
  const long height = pgm_number(bytes, pos, "height");
  const long maxval = pgm_number(bytes, pos, "maxval");
  require(width >= 1 && height >= 1, ErrorCode::HeaderMismatch, "PGM has zero size");
  require(maxval == 255, ErrorCode::UnsupportedFormat,
          "only 8-bit PGM with maxval 255 is supported, got " + std::to_string(maxval));
  require(pos < bytes.size() && std::isspace(static_cast<unsigned char>(byte_at(bytes, pos))),
          ErrorCode::HeaderMismatch, "PGM header is not terminated by whitespace");
  ++pos;
  const auto expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  require(bytes.size() - pos == expected, ErrorCode::HeaderMismatch,
          "PGM header declares " + std::to_string(expected) + " pixels, payload has " +
              std::to_string(bytes.size() - pos));
  Tensor out(height, width);
  for (std::size_t i = 0; i < expected; ++i) {
    out.data()[i] = static_cast<float>(byte_at(bytes, pos + i)) / 255.0f;
  }
  return out;
}

Tensor read_mask(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_mask(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

void write_mask(const fs::path& path, const Tensor& probabilities) {
  write_file(path, encode_mask(probabilities));
}

int frame_index_from_name(const fs::path& file) {
  const std::string stem = file.stem().string();
  std::string digits;
  for (auto it = stem.rbegin(); it != stem.rend() && std::isdigit(static_cast<unsigned char>(*it)); ++it) {
    digits.insert(digits.begin(), *it);
  }
  require(!digits.empty() && digits.size() <= 9, ErrorCode::InvalidArgument,
          "mask file name '" + file.filename().string() + "' does not end in a frame number");
  return std::stoi(digits);
}

std::string frame_file_name(int index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
  return "frame_" + digits + ".pgm";
}

metrics::MaskSequence read_mask_dir(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCode::IoError, dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  metrics::MaskSequence out;
  out.video_id = dir.filename().string();
  for (const fs::path& f : files) {
    out.masks.push_back(read_mask(f));
    out.frame_indices.push_back(frame_index_from_name(f));
  }
  return out;
}

metrics::JTable parse_jtable(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  require(!lines.empty(), ErrorCode::EmptyInput, "JTable has no rows");

  metrics::JTable table;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string where = "JTable line " + std::to_string(n + 1);
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = lines[n].find(',', start);
      const std::string cell = lines[n].substr(start, comma == std::string::npos ? std::string::npos
                                                                                 : comma - start);
      const auto first = cell.find_first_not_of(" \t");
      require(first != std::string::npos, ErrorCode::UnsupportedFormat, where + " has a blank cell");
      const std::string trimmed = cell.substr(first, cell.find_last_not_of(" \t") - first + 1);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(trimmed, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      require(used == trimmed.size() && std::isfinite(v), ErrorCode::UnsupportedFormat,
              where + " has non-numeric cell '" + trimmed + "'");
      require(v >= 0.0 && v <= 1.0, ErrorCode::UnsupportedFormat,
              where + " has a value outside [0, 1]");
      row.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    table.push_back(std::move(row));
  }
  return table;
}

metrics::JTable read_jtable(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_jtable(buffer.str());
}

fusion::ProjectionSet read_projection_set(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCode::IoError, dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".htrt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  fusion::ProjectionSet set;
  for (const fs::path& f : files) set.insert(f.stem().string(), to_matrix(read_tensor(f)));
  return set;
}

void write_projection_set(const fs::path& dir, const fusion::ProjectionSet& set) {
  for (const auto& [name, matrix] : set.entries()) {
    write_tensor(dir / (name + ".htrt"), from_matrix(matrix));
  }
}

memory::MemoryWeights read_memory_weights(const fs::path& dir) {
  memory::MemoryWeights w;
  w.key_proj = to_matrix(read_tensor(dir / "key_proj.htrt"));
  w.joint_proj = to_matrix(read_tensor(dir / "joint_proj.htrt"));
  w.mask_proj = to_matrix(read_tensor(dir / "mask_proj.htrt"));
  w.validate(w.key_proj.rows());
  return w;
}

void write_memory_weights(const fs::path& dir, const memory::MemoryWeights& weights) {
  write_tensor(dir / "key_proj.htrt", from_matrix(weights.key_proj));
  write_tensor(dir / "joint_proj.htrt", from_matrix(weights.joint_proj));
  write_tensor(dir / "mask_proj.htrt", from_matrix(weights.mask_proj));
}

void write_memory(const fs::path& dir, const memory::HybridMemory& mem) {
  write_tensor(dir / "keys.htrt", from_matrix(mem.local.keys));
  write_tensor(dir / "values.htrt", from_matrix(mem.local.values));
  write_tensor(dir / "joint.htrt", from_matrix(mem.joint));
  TensorFile index;
  index.dims = {static_cast<std::uint32_t>(mem.local.frame_index.size())};
  for (int i : mem.local.frame_index) index.data.push_back(static_cast<float>(i));
  write_tensor(dir / "frame_index.htrt", index);
  TensorFile probs;
  probs.dims = {static_cast<std::uint32_t>(mem.reference_probabilities.size())};
  probs.data.assign(mem.reference_probabilities.data(),
                    mem.reference_probabilities.data() + mem.reference_probabilities.size());
  write_tensor(dir / "reference_probabilities.htrt", probs);
  if (mem.global.foreground) write_tensor(dir / "fg_token.htrt", from_matrix(*mem.global.foreground));
  if (mem.global.background) write_tensor(dir / "bg_token.htrt", from_matrix(*mem.global.background));
}

}  // namespace htr::io
