#pragma once

// In-memory and on-disk data model: latent matrices (LAT1), attribute tables
// (CSV), dataset manifests (JSON), splits and standardisation.

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "une/error.hpp"
#include "une/sha256.hpp"

namespace une {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// n x d matrix of per-sample latent codes for one model and one split.
/// Immutable after construction; every entry is finite.
class LatentMatrix {
 public:
  LatentMatrix() = default;

  explicit LatentMatrix(Matrix data, std::string model_id = {}, std::string split_id = {})
      : data_(std::move(data)), model_id_(std::move(model_id)), split_id_(std::move(split_id)) {
    if (data_.rows() < 1 || data_.cols() < 1) {
      throw DataError("latent matrix must have at least one row and one column");
    }
    if (!data_.allFinite()) throw DataError("latent matrix contains non-finite values");
  }

  const Matrix& data() const noexcept { return data_; }
  Index rows() const noexcept { return data_.rows(); }
  Index cols() const noexcept { return data_.cols(); }
  const std::string& model_id() const noexcept { return model_id_; }
  const std::string& split_id() const noexcept { return split_id_; }

  /// Rows in the given order, tagged with a new split id.
  LatentMatrix select_rows(const std::vector<std::size_t>& indices, std::string split_id) const {
    Matrix out(static_cast<Index>(indices.size()), data_.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] >= static_cast<std::size_t>(data_.rows())) {
        throw IndexError("row index " + std::to_string(indices[i]) + " out of range [0, " +
                         std::to_string(data_.rows()) + ")");
      }
      out.row(static_cast<Index>(i)) = data_.row(static_cast<Index>(indices[i]));
    }
    return LatentMatrix(std::move(out), model_id_, std::move(split_id));
  }

 private:
  Matrix data_;
  std::string model_id_;
  std::string split_id_;
};

// ---------------------------------------------------------------------------
// LAT1 binary format
//
//   bytes 0-3   magic "LAT1"
//   bytes 4-7   u32 version (=1)
//   bytes 8-11  u32 rows
//   bytes 12-15 u32 cols
//   then rows*cols IEEE-754 float32, row-major, little-endian. Nothing after.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kLat1Version = 1;
inline constexpr std::size_t kLat1HeaderBytes = 16;

namespace detail {

inline void put_u32_le(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

/// Encodes a matrix as LAT1 bytes. Values are narrowed to float32; a value
/// that is non-finite before or after narrowing raises DataError.
inline std::string encode_lat1(const Matrix& m) {
  if (m.rows() < 1 || m.cols() < 1) throw DataError("LAT1 requires rows >= 1 and cols >= 1");
  if (m.rows() > 0xFFFFFFFFll || m.cols() > 0xFFFFFFFFll) throw DataError("matrix too large for LAT1");
  std::string buf;
  buf.reserve(kLat1HeaderBytes + 4 * static_cast<std::size_t>(m.size()));
  buf.append("LAT1", 4);
  detail::put_u32_le(buf, kLat1Version);
  detail::put_u32_le(buf, static_cast<std::uint32_t>(m.rows()));
  detail::put_u32_le(buf, static_cast<std::uint32_t>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      const float f = static_cast<float>(m(r, c));
      if (!std::isfinite(m(r, c)) || !std::isfinite(f)) {
        throw DataError("non-finite value at (" + std::to_string(r) + ", " + std::to_string(c) + ")");
      }
      detail::put_u32_le(buf, std::bit_cast<std::uint32_t>(f));
    }
  }
  return buf;
}

inline Matrix decode_lat1(const std::string& bytes) {
  if (bytes.size() < kLat1HeaderBytes) throw FormatError("file shorter than the 16-byte LAT1 header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (std::memcmp(p, "LAT1", 4) != 0) throw FormatError("bad magic, expected \"LAT1\"");
  const std::uint32_t version = detail::get_u32_le(p + 4);
  if (version != kLat1Version) throw FormatError("unsupported LAT1 version " + std::to_string(version));
  const std::uint32_t rows = detail::get_u32_le(p + 8);
  const std::uint32_t cols = detail::get_u32_le(p + 12);
  if (rows == 0 || cols == 0) throw FormatError("LAT1 header declares an empty shape");
  const std::uint64_t expected = kLat1HeaderBytes + 4ull * rows * cols;
  if (bytes.size() != expected) {
    throw TruncationError("payload is " + std::to_string(bytes.size() - kLat1HeaderBytes) +
                          " bytes, header declares " + std::to_string(expected - kLat1HeaderBytes));
  }
  Matrix m(rows, cols);
  const unsigned char* q = p + kLat1HeaderBytes;
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c, q += 4) {
      const float f = std::bit_cast<float>(detail::get_u32_le(q));
      if (!std::isfinite(f)) {
        throw DataError("non-finite value at (" + std::to_string(r) + ", " + std::to_string(c) + ")");
      }
      m(r, c) = static_cast<double>(f);
    }
  }
  return m;
}

inline void write_lat1(const Matrix& m, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_lat1(m));
}

inline Matrix read_lat1(const std::filesystem::path& path) {
  return decode_lat1(detail::read_file_bytes(path));
}

inline void save_latents(const LatentMatrix& m, const std::filesystem::path& path) {
  write_lat1(m.data(), path);
}

inline LatentMatrix load_latents(const std::filesystem::path& path, std::string model_id = {},
                                 std::string split_id = {}) {
  if (model_id.empty()) model_id = path.stem().string();
  return LatentMatrix(read_lat1(path), std::move(model_id), std::move(split_id));
}

// ---------------------------------------------------------------------------
// Attribute tables
// ---------------------------------------------------------------------------

/// n x A binary labels. Entries are 0 or 1; names unique and non-empty.
struct AttributeTable {
  Eigen::MatrixXi labels;
  std::vector<std::string> names;

  Index rows() const noexcept { return labels.rows(); }
  Index attributes() const noexcept { return labels.cols(); }

  void validate() const {
    if (static_cast<Index>(names.size()) != labels.cols()) {
      throw DataError("attribute name count does not match label columns");
    }
    std::set<std::string> seen;
    for (const auto& n : names) {
      if (n.empty()) throw DataError("empty attribute name");
      if (!seen.insert(n).second) throw DataError("duplicate attribute name '" + n + "'");
    }
    for (Index i = 0; i < labels.size(); ++i) {
      const int v = labels.data()[i];
      if (v != 0 && v != 1) throw DataError("attribute labels must be 0 or 1");
    }
  }

  Index index_of(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw KeyError("unknown attribute '" + name + "'");
    return static_cast<Index>(it - names.begin());
  }

  AttributeTable select_rows(const std::vector<std::size_t>& indices) const {
    AttributeTable out{Eigen::MatrixXi(static_cast<Index>(indices.size()), labels.cols()), names};
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] >= static_cast<std::size_t>(labels.rows())) {
        throw IndexError("row index " + std::to_string(indices[i]) + " out of range");
      }
      out.labels.row(static_cast<Index>(i)) = labels.row(static_cast<Index>(indices[i]));
    }
    return out;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

/// Parses the attribute CSV. CelebA-style -1 labels are mapped to 0.
inline AttributeTable parse_attributes_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("attribute CSV is empty");
  AttributeTable t;
  t.names = detail::split_csv_line(line);
  std::vector<std::vector<int>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != t.names.size()) {
      throw FormatError("line " + std::to_string(lineno) + ": expected " +
                        std::to_string(t.names.size()) + " fields, got " + std::to_string(fields.size()));
    }
    std::vector<int> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      if (f == "1") {
        row.push_back(1);
      } else if (f == "0" || f == "-1") {
        row.push_back(0);
      } else {
        throw DataError("line " + std::to_string(lineno) + ": label '" + f + "' is not 0/1/-1");
      }
    }
    rows.push_back(std::move(row));
  }
  t.labels.resize(static_cast<Index>(rows.size()), static_cast<Index>(t.names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      t.labels(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    }
  }
  t.validate();
  return t;
}

inline AttributeTable load_attributes(const std::filesystem::path& path) {
  return parse_attributes_csv(detail::read_file_bytes(path));
}

inline std::string format_attributes_csv(const AttributeTable& t) {
  t.validate();
  std::string out;
  for (std::size_t i = 0; i < t.names.size(); ++i) {
    if (i) out.push_back(',');
    out += t.names[i];
  }
  out.push_back('\n');
  for (Index r = 0; r < t.labels.rows(); ++r) {
    for (Index c = 0; c < t.labels.cols(); ++c) {
      if (c) out.push_back(',');
      out.push_back(t.labels(r, c) ? '1' : '0');
    }
    out.push_back('\n');
  }
  return out;
}

inline void save_attributes(const AttributeTable& t, const std::filesystem::path& path) {
  detail::write_file_bytes(path, format_attributes_csv(t));
}

// ---------------------------------------------------------------------------
// Dataset manifest
// ---------------------------------------------------------------------------

struct DatasetManifest {
  std::string dataset_name;
  /// model_id -> (split_id -> latent path). Split id "all" denotes the full,
  /// unsplit matrix indexed by train_indices / test_indices.
  std::map<std::string, std::map<std::string, std::string>> models;
  std::string attributes_path;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  /// relative path -> lower-case hex SHA-256
  std::map<std::string, std::string> checksums;

  std::size_t total() const noexcept { return train_indices.size() + test_indices.size(); }

  /// Train and test must be disjoint and together cover [0, n_total).
  void validate(std::size_t n_total) const {
    if (total() != n_total) {
      throw ManifestError("train+test sizes (" + std::to_string(total()) +
                          ") do not match row count " + std::to_string(n_total));
    }
    std::vector<char> seen(n_total, 0);
    auto mark = [&](const std::vector<std::size_t>& idx, const char* which) {
      for (auto i : idx) {
        if (i >= n_total) {
          throw IndexError(std::string(which) + " index " + std::to_string(i) + " out of range [0, " +
                           std::to_string(n_total) + ")");
        }
        if (seen[i]) throw ManifestError("index " + std::to_string(i) + " appears more than once");
        seen[i] = 1;
      }
    };
    mark(train_indices, "train");
    mark(test_indices, "test");
  }
};

inline nlohmann::json to_json(const DatasetManifest& m) {
  return nlohmann::json{{"dataset_name", m.dataset_name},
                        {"models", m.models},
                        {"attributes_path", m.attributes_path},
                        {"train_indices", m.train_indices},
                        {"test_indices", m.test_indices},
                        {"checksums", m.checksums}};
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  try {
    DatasetManifest m;
    m.dataset_name = j.at("dataset_name").get<std::string>();
    m.models = j.at("models").get<std::map<std::string, std::map<std::string, std::string>>>();
    m.attributes_path = j.value("attributes_path", std::string{});
    m.train_indices = j.at("train_indices").get<std::vector<std::size_t>>();
    m.test_indices = j.at("test_indices").get<std::vector<std::size_t>>();
    m.checksums = j.value("checksums", std::map<std::string, std::string>{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError(e.what());
  }
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  detail::write_file_bytes(path, to_json(m).dump(2) + "\n");
}

/// Loads a manifest and checks every listed checksum against files resolved
/// relative to the manifest's directory.
inline DatasetManifest load_manifest(const std::filesystem::path& path, bool verify = true) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file_bytes(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ManifestError(e.what());
  }
  DatasetManifest m = manifest_from_json(j);
  if (verify) {
    const auto base = path.parent_path();
    for (const auto& [rel, expected] : m.checksums) {
      const auto file = base / rel;
      if (!std::filesystem::exists(file)) throw IoError("manifest references missing file " + file.string());
      const auto got = sha256_file(file);
      if (got != expected) throw ChecksumError(rel + ": expected " + expected + ", got " + got);
    }
  }
  return m;
}

/// Random disjoint partition of [0, n_total) with n_train rows in train.
/// Each index list is returned sorted.
inline DatasetManifest make_random_split(std::size_t n_total, std::size_t n_train, std::uint64_t seed,
                                         std::string dataset_name = "dataset") {
  if (n_train > n_total) throw ManifestError("n_train exceeds n_total");
  std::vector<std::size_t> perm(n_total);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  DatasetManifest m;
  m.dataset_name = std::move(dataset_name);
  m.train_indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  m.test_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(m.train_indices.begin(), m.train_indices.end());
  std::sort(m.test_indices.begin(), m.test_indices.end());
  return m;
}

/// (train, test) rows in manifest order.
inline std::pair<LatentMatrix, LatentMatrix> split(const LatentMatrix& m, const DatasetManifest& manifest) {
  manifest.validate(static_cast<std::size_t>(m.rows()));
  return {m.select_rows(manifest.train_indices, "train"), m.select_rows(manifest.test_indices, "test")};
}

// ---------------------------------------------------------------------------
// Standardisation
// ---------------------------------------------------------------------------

inline constexpr double kStdFloor = 1e-8;

struct StandardizeStats {
  Vector mean;
  Vector std;  ///< population convention, clamped to kStdFloor
};

inline StandardizeStats fit_standardize(const Matrix& m) {
  if (m.rows() < 2) throw InsufficientData("standardisation needs at least 2 rows");
  StandardizeStats s;
  s.mean = m.colwise().mean().transpose();
  s.std.resize(m.cols());
  const double n = static_cast<double>(m.rows());
  for (Index c = 0; c < m.cols(); ++c) {
    const double var = (m.col(c).array() - s.mean(c)).square().sum() / n;
    s.std(c) = std::max(std::sqrt(var), kStdFloor);
  }
  return s;
}

inline StandardizeStats fit_standardize(const LatentMatrix& m) { return fit_standardize(m.data()); }

inline Matrix apply_standardize(const Matrix& m, const StandardizeStats& s) {
  if (m.cols() != s.mean.size()) throw ShapeError("standardisation stats do not match column count");
  return ((m.rowwise() - s.mean.transpose()).array().rowwise() / s.std.transpose().array()).matrix();
}

inline LatentMatrix apply_standardize(const LatentMatrix& m, const StandardizeStats& s) {
  return LatentMatrix(apply_standardize(m.data(), s), m.model_id(), m.split_id());
}

}  // namespace une
