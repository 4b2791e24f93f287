#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <set>

#include "une/latent_store.hpp"

using namespace une;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("une_test_store_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string header(std::uint32_t version, std::uint32_t rows, std::uint32_t cols, const char* magic = "LAT1") {
  std::string h(magic, 4);
  detail::put_u32_le(h, version);
  detail::put_u32_le(h, rows);
  detail::put_u32_le(h, cols);
  return h;
}

std::string payload(std::initializer_list<float> values) {
  std::string s;
  for (float v : values) detail::put_u32_le(s, std::bit_cast<std::uint32_t>(v));
  return s;
}

/// Random matrix whose entries are exactly representable as float32.
Matrix float_matrix(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 3.0f);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

}  // namespace

TEST(Lat1, DecodesHandWrittenFile) {
  const Matrix m = decode_lat1(header(1, 2, 3) + payload({1, 2, 3, 4, 5, 6}));
  Matrix want(2, 3);
  want << 1, 2, 3, 4, 5, 6;
  EXPECT_EQ(m, want);
}

TEST(Lat1, HeaderIsLittleEndian) {
  Matrix m(1, 2);
  m << 1.0, -2.0;
  const std::string b = encode_lat1(m);
  const std::string want = std::string("LAT1") + std::string("\x01\x00\x00\x00", 4) + std::string("\x01\x00\x00\x00", 4) +
                           std::string("\x02\x00\x00\x00", 4) + std::string("\x00\x00\x80\x3f", 4) +
                           std::string("\x00\x00\x00\xc0", 4);
  EXPECT_EQ(b, want);
}

TEST(Lat1, SingleZeroIsTwentyBytes) {
  const std::string b = encode_lat1(Matrix::Zero(1, 1));
  EXPECT_EQ(b.size(), 20u);
}

TEST(Lat1, RejectsMalformedInput) {
  EXPECT_THROW(decode_lat1(header(1, 0, 3)), FormatError);
  EXPECT_THROW(decode_lat1(header(1, 3, 0)), FormatError);
  EXPECT_THROW(decode_lat1(header(2, 1, 1) + payload({1})), FormatError);
  EXPECT_THROW(decode_lat1(header(1, 1, 1, "LAT2") + payload({1})), FormatError);
  EXPECT_THROW(decode_lat1("LAT1"), FormatError);
  EXPECT_THROW(decode_lat1(header(1, 2, 2) + payload({1, 2, 3})), TruncationError);
  EXPECT_THROW(decode_lat1(header(1, 1, 1) + payload({1, 2})), TruncationError);
  EXPECT_THROW(decode_lat1(header(1, 1, 2) + payload({1, std::numeric_limits<float>::quiet_NaN()})), DataError);
  EXPECT_THROW(decode_lat1(header(1, 1, 1) + payload({std::numeric_limits<float>::infinity()})), DataError);
}

TEST(Lat1, EncodeRejectsNonFinite) {
  Matrix m = Matrix::Zero(2, 2);
  m(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(encode_lat1(m), DataError);
  m(1, 0) = 1e300;  // finite in double, overflows float32
  EXPECT_THROW(encode_lat1(m), DataError);
}

TEST(Lat1, RoundTripIsBitExact) {
  const auto dir = temp_dir("roundtrip");
  const Matrix m = float_matrix(5, 7, 1);
  save_latents(LatentMatrix(m, "x"), dir / "sd15_val.lat1");
  const LatentMatrix back = load_latents(dir / "sd15_val.lat1");
  EXPECT_EQ(back.data(), m);
  EXPECT_EQ(back.model_id(), "sd15_val");
  write_lat1(Matrix::Identity(3, 3), dir / "eye.lat1");
  EXPECT_EQ(read_lat1(dir / "eye.lat1"), Matrix::Identity(3, 3));
  std::filesystem::remove_all(dir);
}

TEST(Lat1, MissingFileIsIoError) {
  EXPECT_THROW(read_lat1("/nonexistent/dir/x.lat1"), IoError);
  EXPECT_THROW(write_lat1(Matrix::Ones(1, 1), "/nonexistent/dir/x.lat1"), IoError);
}

TEST(LatentMatrixType, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(LatentMatrix(Matrix(0, 3)), DataError);
  Matrix m = Matrix::Ones(2, 2);
  m(0, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(LatentMatrix{m}, DataError);
}

TEST(Attributes, ParsesAndMapsMinusOne) {
  const AttributeTable t = parse_attributes_csv("Smiling,Male\n1,-1\n0,1\r\n-1,-1\n");
  EXPECT_EQ(t.names, (std::vector<std::string>{"Smiling", "Male"}));
  Eigen::MatrixXi want(3, 2);
  want << 1, 0, 0, 1, 0, 0;
  EXPECT_EQ(t.labels, want);
  EXPECT_EQ(t.index_of("Male"), 1);
  EXPECT_THROW(t.index_of("Bald"), KeyError);
}

TEST(Attributes, RejectsBadInput) {
  EXPECT_THROW(parse_attributes_csv(""), FormatError);
  EXPECT_THROW(parse_attributes_csv("a,b\n1\n"), FormatError);
  EXPECT_THROW(parse_attributes_csv("a,b\n1,2\n"), DataError);
  EXPECT_THROW(parse_attributes_csv("a,a\n1,0\n"), DataError);
  EXPECT_THROW(parse_attributes_csv("a,\n1,0\n"), DataError);
}

TEST(Attributes, FormatRoundTrip) {
  const AttributeTable t = parse_attributes_csv("x,y,z\n1,0,1\n0,0,1\n");
  EXPECT_EQ(format_attributes_csv(t), "x,y,z\n1,0,1\n0,0,1\n");
  EXPECT_EQ(parse_attributes_csv(format_attributes_csv(t)).labels, t.labels);
}

TEST(Split, SelectsRowsInManifestOrder) {
  Matrix m(4, 2);
  m << 0, 0, 1, 1, 2, 2, 3, 3;
  DatasetManifest man;
  man.train_indices = {0, 2};
  man.test_indices = {1, 3};
  const auto [tr, te] = split(LatentMatrix(m), man);
  EXPECT_EQ(tr.data().col(0), Vector((Vector(2) << 0, 2).finished()));
  EXPECT_EQ(te.data().col(0), Vector((Vector(2) << 1, 3).finished()));
  EXPECT_EQ(tr.split_id(), "train");
  EXPECT_EQ(tr.rows() + te.rows(), 4);
}

TEST(Split, ManifestValidationErrors) {
  const LatentMatrix m(Matrix::Zero(4, 1));
  DatasetManifest overlap;
  overlap.train_indices = {0, 1};
  overlap.test_indices = {1, 3};
  EXPECT_THROW(split(m, overlap), ManifestError);
  DatasetManifest out_of_range;
  out_of_range.train_indices = {0, 1};
  out_of_range.test_indices = {2, 4};
  EXPECT_THROW(split(m, out_of_range), IndexError);
  DatasetManifest short_cover;
  short_cover.train_indices = {0};
  short_cover.test_indices = {1};
  EXPECT_THROW(split(m, short_cover), ManifestError);
}

TEST(Split, CelebAScalePartition) {
  const DatasetManifest m = make_random_split(19867, 15893, 42, "celeba");
  EXPECT_EQ(m.train_indices.size(), 15893u);
  EXPECT_EQ(m.test_indices.size(), 3974u);
  EXPECT_NO_THROW(m.validate(19867));
  std::set<std::size_t> all(m.train_indices.begin(), m.train_indices.end());
  all.insert(m.test_indices.begin(), m.test_indices.end());
  EXPECT_EQ(all.size(), 19867u);
  EXPECT_EQ(make_random_split(19867, 15893, 42).train_indices, m.train_indices);
}

TEST(Manifest, JsonRoundTripAndChecksums) {
  const auto dir = temp_dir("manifest");
  write_lat1(Matrix::Ones(2, 2), dir / "a.lat1");
  DatasetManifest m = make_random_split(2, 1, 3, "tiny");
  m.models["a"]["all"] = "a.lat1";
  m.attributes_path = "attrs.csv";
  m.checksums["a.lat1"] = sha256_file(dir / "a.lat1");
  save_manifest(m, dir / "manifest.json");
  const DatasetManifest back = load_manifest(dir / "manifest.json");
  EXPECT_EQ(back.dataset_name, "tiny");
  EXPECT_EQ(back.models, m.models);
  EXPECT_EQ(back.train_indices, m.train_indices);
  EXPECT_EQ(back.checksums, m.checksums);

  write_lat1(Matrix::Zero(2, 2), dir / "a.lat1");
  EXPECT_THROW(load_manifest(dir / "manifest.json"), ChecksumError);
  EXPECT_NO_THROW(load_manifest(dir / "manifest.json", false));
  std::filesystem::remove(dir / "a.lat1");
  EXPECT_THROW(load_manifest(dir / "manifest.json"), IoError);
  detail::write_file_bytes(dir / "bad.json", "{\"dataset_name\": 3}");
  EXPECT_THROW(load_manifest(dir / "bad.json"), ManifestError);
  std::filesystem::remove_all(dir);
}

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(std::string("")), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex(std::string("abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Standardize, TwoPointColumn) {
  Matrix m(2, 1);
  m << 1, 3;
  const StandardizeStats s = fit_standardize(m);
  EXPECT_EQ(s.mean(0), 2.0);
  EXPECT_EQ(s.std(0), 1.0);
  EXPECT_EQ(apply_standardize(m, s), (Matrix(2, 1) << -1, 1).finished());
}

TEST(Standardize, ConstantColumnClamped) {
  const Matrix m = Matrix::Constant(3, 1, 5.0);
  const StandardizeStats s = fit_standardize(m);
  EXPECT_EQ(s.std(0), kStdFloor);
  EXPECT_TRUE(apply_standardize(m, s).isZero(0.0));
  EXPECT_THROW(fit_standardize(Matrix::Ones(1, 3)), InsufficientData);
  EXPECT_THROW(apply_standardize(Matrix::Ones(2, 2), s), ShapeError);
}

TEST(Standardize, MomentsAndIdempotence) {
  const Matrix m = float_matrix(100, 10, 2).array() + 4.0;
  const Matrix z = apply_standardize(m, fit_standardize(m));
  EXPECT_LE(z.colwise().mean().cwiseAbs().maxCoeff(), 1e-6);
  for (Index c = 0; c < 10; ++c) {
    const double sd = std::sqrt(z.col(c).squaredNorm() / 100.0);
    EXPECT_NEAR(sd, 1.0, 1e-4);
  }
  const Matrix again = apply_standardize(z, fit_standardize(z));
  EXPECT_LE((again - z).cwiseAbs().maxCoeff(), 1e-4);
}
