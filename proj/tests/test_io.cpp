#include <doctest.h>

#include <cstring>
#include <fstream>

#include "htr/io.hpp"
#include "support.hpp"

using namespace htr;
using namespace htr::io;
using htr::test::Rng;

namespace {

std::vector<std::byte> bytes_of(const std::string& s) {
  std::vector<std::byte> out(s.size());
  std::memcpy(out.data(), s.data(), s.size());
  return out;
}

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an htr::Error");
  return ErrorCode::IoError;
}

std::vector<std::byte> header(std::uint8_t version, std::uint8_t dtype,
                              const std::vector<std::uint32_t>& dims) {
  std::vector<std::byte> out = bytes_of("HTRT");
  out.push_back(std::byte{version});
  out.push_back(std::byte{dtype});
  out.push_back(static_cast<std::byte>(dims.size()));
  for (std::uint32_t d : dims) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::byte>((d >> (8 * k)) & 0xFF));
  }
  return out;
}

}  // namespace

TEST_CASE("tensor round trip is bit exact") {
  Rng rng(80);
  for (int trial = 0; trial < 50; ++trial) {
    TensorFile t;
    const int rank = test::pick(rng, 1, 4);
    for (int k = 0; k < rank; ++k) t.dims.push_back(static_cast<std::uint32_t>(test::pick(rng, 1, 4)));
    const Tensor values = test::uniform(rng, 1, static_cast<Eigen::Index>(t.element_count()), -1e6, 1e6);
    t.data.assign(values.data(), values.data() + values.size());
    const auto bytes = encode_tensor(t);
    const TensorFile back = decode_tensor(bytes);
    CHECK(back.dims == t.dims);
    CHECK(std::memcmp(back.data.data(), t.data.data(), t.data.size() * sizeof(float)) == 0);
    CHECK(encode_tensor(back) == bytes);
  }
}

TEST_CASE("tensor header layout") {
  TensorFile t{{2, 3}, {1, 2, 3, 4, 5, 6}};
  const auto bytes = encode_tensor(t);
  REQUIRE(bytes.size() == 4 + 3 + 8 + 24);
  auto expect = header(1, 0, {2, 3});
  CHECK(std::equal(expect.begin(), expect.end(), bytes.begin()));
  float first = 0.0f;
  std::memcpy(&first, bytes.data() + 15, 4);
  CHECK(first == 1.0f);
}

TEST_CASE("malformed tensors") {
  auto base = header(1, 0, {2, 3});
  auto truncated = base;
  truncated.resize(truncated.size() + 20);
  CHECK(code_of([&] { decode_tensor(truncated); }) == ErrorCode::TruncatedPayload);

  auto magic = base;
  magic.resize(base.size() + 24);
  std::memcpy(magic.data(), "XXXX", 4);
  CHECK(code_of([&] { decode_tensor(magic); }) == ErrorCode::BadMagic);

  auto version = header(2, 0, {1});
  version.resize(version.size() + 4);
  CHECK(code_of([&] { decode_tensor(version); }) == ErrorCode::BadVersion);

  auto dtype = header(1, 1, {1});
  dtype.resize(dtype.size() + 4);
  CHECK(code_of([&] { decode_tensor(dtype); }) == ErrorCode::UnsupportedFormat);

  auto trailing = header(1, 0, {1});
  trailing.resize(trailing.size() + 8);
  CHECK(code_of([&] { decode_tensor(trailing); }) == ErrorCode::HeaderMismatch);

  auto zero = header(1, 0, {0});
  CHECK(code_of([&] { decode_tensor(zero); }) == ErrorCode::HeaderMismatch);

  auto scalar = header(1, 0, {});
  CHECK(code_of([&] { decode_tensor(scalar); }) == ErrorCode::HeaderMismatch);

  CHECK(code_of([&] { decode_tensor(bytes_of("HT")); }) == ErrorCode::TruncatedPayload);
  auto short_dims = header(1, 0, {2, 3});
  short_dims.resize(short_dims.size() - 2);
  CHECK(code_of([&] { decode_tensor(short_dims); }) == ErrorCode::TruncatedPayload);

  TensorFile nan{{1}, {std::numeric_limits<float>::quiet_NaN()}};
  auto nan_bytes = header(1, 0, {1});
  nan_bytes.resize(nan_bytes.size() + 4);
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan_bytes.data() + nan_bytes.size() - 4, &q, 4);
  CHECK(code_of([&] { decode_tensor(nan_bytes); }) == ErrorCode::NonFinite);
  CHECK_THROWS_AS(encode_tensor(nan), Error);
  CHECK_THROWS_AS(encode_tensor(TensorFile{{2}, {1.0f}}), Error);
}

TEST_CASE("tensor files and matrices") {
  const auto dir = test::scratch_dir("io_tensor");
  Rng rng(81);
  const Tensor m = test::uniform(rng, 3, 5);
  write_tensor(dir / "m.htrt", from_matrix(m));
  CHECK(to_matrix(read_tensor(dir / "m.htrt")) == m);
  CHECK(to_matrix(TensorFile{{3}, {1, 2, 3}}).rows() == 1);
  CHECK_THROWS_AS(to_matrix(TensorFile{{1, 1, 2}, {1, 2}}), Error);
  try {
    read_tensor(dir / "missing.htrt");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }

  std::vector<FeatureMap> frames{FeatureMap(2, 3, test::uniform(rng, 6, 4)),
                                 FeatureMap(2, 3, test::uniform(rng, 6, 4))};
  const TensorFile packed = from_feature_maps(frames);
  CHECK(packed.dims == std::vector<std::uint32_t>{2, 2, 3, 4});
  const auto unpacked = to_feature_maps(packed);
  REQUIRE(unpacked.size() == 2);
  CHECK(unpacked[1].data() == frames[1].data());
  CHECK_THROWS_AS(to_feature_maps(TensorFile{{2, 3}, {1, 2, 3, 4, 5, 6}}), Error);
}

TEST_CASE("pgm masks") {
  CHECK(decode_mask(bytes_of(std::string("P5\n2 1\n255\n") + "\xff\xff")) == Tensor::Ones(1, 2));
  const Tensor half = decode_mask(bytes_of(std::string("P5 1 1 255\n") + "\x80"));
  CHECK(half(0, 0) == doctest::Approx(0.50196).epsilon(1e-5));
  CHECK(half(0, 0) > 0.5f);
  const Tensor commented = decode_mask(bytes_of(std::string("P5\n# note\n1 1\n255\n") + std::string(1, '\0')));
  CHECK(commented(0, 0) == 0.0f);

  Rng rng(82);
  const Tensor binary = test::binary_mask(rng, 7, 9);
  CHECK(decode_mask(encode_mask(binary)) == binary);
  const auto bytes = encode_mask(test::uniform(rng, 4, 4, 0, 1));
  CHECK(encode_mask(decode_mask(bytes)) == bytes);

  CHECK(code_of([&] { decode_mask(bytes_of("P2\n1 1\n255\n0")); }) == ErrorCode::UnsupportedFormat);
  CHECK(code_of([&] { decode_mask(bytes_of(std::string("P5\n1 1\n65535\n") + std::string(2, '\0'))); }) ==
        ErrorCode::UnsupportedFormat);
  CHECK(code_of([&] { decode_mask(bytes_of(std::string("P5\n2 2\n255\n") + std::string(1, '\0'))); }) ==
        ErrorCode::HeaderMismatch);
  CHECK(code_of([&] { decode_mask(bytes_of(std::string("P5\n1 1\n255\n") + std::string(2, '\0'))); }) ==
        ErrorCode::HeaderMismatch);
  CHECK_THROWS_AS(decode_mask(bytes_of("P5\n")), Error);
  CHECK_THROWS_AS(encode_mask(Tensor::Constant(1, 1, 2.0f)), Error);
}

TEST_CASE("mask directories") {
  const auto dir = test::scratch_dir("io_masks") / "video7";
  Rng rng(83);
  const Tensor a = test::binary_mask(rng, 5, 5);
  const Tensor b = test::binary_mask(rng, 5, 5);
  write_mask(dir / frame_file_name(12), b);
  write_mask(dir / frame_file_name(3), a);
  const metrics::MaskSequence seq = read_mask_dir(dir);
  CHECK(seq.video_id == "video7");
  CHECK(seq.frame_indices == std::vector<int>{3, 12});
  CHECK(seq.masks[0] == a);
  CHECK(frame_file_name(3) == "frame_00003.pgm");
  CHECK(frame_index_from_name("x/frame_00042.pgm") == 42);
  CHECK_THROWS_AS(frame_index_from_name("mask.pgm"), Error);
  CHECK_THROWS_AS(read_mask_dir(dir / "nope"), Error);
}

TEST_CASE("jtable csv") {
  const metrics::JTable t = parse_jtable("0.6,0.7\n0.4,0.9\n\n");
  CHECK(t == metrics::JTable{{0.6, 0.7}, {0.4, 0.9}});
  CHECK(parse_jtable("1\r\n0.5,0.25\r\n") == metrics::JTable{{1.0}, {0.5, 0.25}});
  CHECK(code_of([] { parse_jtable("0.6,,0.7\n"); }) == ErrorCode::UnsupportedFormat);
  CHECK(code_of([] { parse_jtable("0.6,abc\n"); }) == ErrorCode::UnsupportedFormat);
  CHECK(code_of([] { parse_jtable("0.6,1.5\n"); }) == ErrorCode::UnsupportedFormat);
  CHECK(code_of([] { parse_jtable("0.6\n\n0.7\n"); }) == ErrorCode::UnsupportedFormat);
  CHECK(code_of([] { parse_jtable(""); }) == ErrorCode::EmptyInput);
}

TEST_CASE("weights directories") {
  const auto dir = test::scratch_dir("io_weights");
  const auto w = memory::MemoryWeights::random(5, 3, 4);
  write_memory_weights(dir / "mem", w);
  const auto back = read_memory_weights(dir / "mem");
  CHECK(back.key_proj == w.key_proj);
  CHECK(back.joint_proj == w.joint_proj);
  CHECK(back.mask_proj == w.mask_proj);

  const auto p = fusion::ProjectionSet::random(4, 2, 1);
  write_projection_set(dir / "proj", p);
  const auto q = read_projection_set(dir / "proj");
  CHECK(q.entries().size() == p.entries().size());
  CHECK(q.at(fusion::names::kFuseKey) == p.at(fusion::names::kFuseKey));
}
