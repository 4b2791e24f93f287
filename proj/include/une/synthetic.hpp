#pragma once

// Linear-Gaussian verification oracle: an ideal N(0, I_D) source, noisy
// linear views of it, planted linear attributes and non-Gaussian controls.

#include <Eigen/Dense>
#include <Eigen/QR>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "une/error.hpp"
#include "une/latent_store.hpp"

namespace une {

struct UneConfig {
  Index dim = 16;  ///< D
  Index n = 2000;
  std::uint64_t seed = 0;
};

namespace detail {

inline Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = g(rng);
  return m;
}

/// rows x cols matrix with orthonormal columns (requires rows >= cols),
/// Haar-distributed via QR of a Gaussian matrix with sign-fixed R.
inline Matrix random_orthonormal_columns(Index rows, Index cols, std::mt19937_64& rng) {
  const Matrix g = gaussian_matrix(rows, cols, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  const Matrix r = qr.matrixQR().topLeftCorner(cols, cols).triangularView<Eigen::Upper>();
  for (Index c = 0; c < cols; ++c) {
    if (r(c, c) < 0) q.col(c) = -q.col(c);
  }
  return q;
}

}  // namespace detail

/// n x D matrix of i.i.d. standard normals, deterministic by seed.
inline LatentMatrix sample_une(const UneConfig& cfg) {
  if (cfg.dim < 1 || cfg.n < 2) throw ConfigError("UNE requires D >= 1 and n >= 2");
  std::mt19937_64 rng(cfg.seed);
  return LatentMatrix(detail::gaussian_matrix(cfg.n, cfg.dim, rng), "une", "all");
}

enum class MixingRecipe {
  gaussian,          ///< i.i.d. N(0, 1/D) entries
  orthonormal_rows,  ///< d <= D, C C^T = I_d
};

/// d x D mixing matrix C.
inline Matrix make_mixing(MixingRecipe recipe, Index d, Index dim, std::uint64_t seed) {
  if (d < 1 || dim < 1) throw ConfigError("mixing matrix needs positive dimensions");
  std::mt19937_64 rng(seed);
  switch (recipe) {
    case MixingRecipe::gaussian:
      return detail::gaussian_matrix(d, dim, rng, 1.0 / std::sqrt(static_cast<double>(dim)));
    case MixingRecipe::orthonormal_rows:
      if (d > dim) throw ConfigError("orthonormal rows need d <= D");
      return detail::random_orthonormal_columns(dim, d, rng).transpose();
  }
  throw ConfigError("unknown mixing recipe");
}

struct IneConfig {
  Matrix mixing;  ///< C, d x D
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::string model_id = "ine";
};

/// Rows z -> C z + eps with eps ~ N(0, sigma^2 I). The noise draw depends on
/// the seed only, so views at different sigma share the same noise pattern.
inline LatentMatrix make_ine(const LatentMatrix& une, const IneConfig& cfg) {
  if (cfg.mixing.cols() != une.cols()) {
    throw ShapeError("mixing matrix has " + std::to_string(cfg.mixing.cols()) + " columns, UNE has dimension " +
                     std::to_string(une.cols()));
  }
  if (!(cfg.noise_sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
  Matrix out = une.data() * cfg.mixing.transpose();
  if (cfg.noise_sigma > 0.0) {
    std::mt19937_64 rng(cfg.seed);
    out += cfg.noise_sigma * detail::gaussian_matrix(out.rows(), out.cols(), rng);
  }
  return LatentMatrix(std::move(out), cfg.model_id, une.split_id());
}

struct PlantedAttribute {
  enum class Kind { binary, continuous };
  std::string name;
  Vector direction;  ///< u in UNE coordinates
  Kind kind = Kind::binary;
  double offset = 0.0;  ///< b for continuous attributes
};

/// Random planted binary attributes named attr0..attr{count-1}.
inline std::vector<PlantedAttribute> random_attributes(Index count, Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<PlantedAttribute> out;
  for (Index a = 0; a < count; ++a) {
    Vector u = detail::gaussian_matrix(dim, 1, rng).col(0);
    out.push_back({"attr" + std::to_string(a), u / u.norm(), PlantedAttribute::Kind::binary, 0.0});
  }
  return out;
}

/// Binary labels sign(u^T z) mapped to {0, 1} for each binary attribute.
inline AttributeTable plant_binary_attributes(const LatentMatrix& une, const std::vector<PlantedAttribute>& attrs) {
  AttributeTable t;
  t.labels.resize(une.rows(), 0);
  std::vector<Index> cols;
  for (const auto& a : attrs) {
    if (a.kind != PlantedAttribute::Kind::binary) continue;
    if (a.direction.size() != une.cols()) throw ShapeError("attribute direction does not match UNE dimension");
    if (!(a.direction.norm() > 0.0)) throw ConfigError("attribute direction must be non-zero");
    t.names.push_back(a.name);
  }
  t.labels.resize(une.rows(), static_cast<Index>(t.names.size()));
  Index c = 0;
  for (const auto& a : attrs) {
    if (a.kind != PlantedAttribute::Kind::binary) continue;
    const Vector s = une.data() * a.direction;
    for (Index r = 0; r < une.rows(); ++r) t.labels(r, c) = s(r) > 0.0 ? 1 : 0;
    ++c;
  }
  t.validate();
  return t;
}

/// Continuous attribute values u^T z + b.
inline Vector continuous_attribute(const LatentMatrix& une, const PlantedAttribute& a) {
  if (a.direction.size() != une.cols()) throw ShapeError("attribute direction does not match UNE dimension");
  return (une.data() * a.direction).array() + a.offset;
}

enum class ControlKind { delta, uniform_lowdim, bimodal };

inline ControlKind parse_control_kind(const std::string& s) {
  if (s == "delta") return ControlKind::delta;
  if (s == "uniform" || s == "uniform_lowdim") return ControlKind::uniform_lowdim;
  if (s == "bimodal") return ControlKind::bimodal;
  throw ConfigError("unknown control distribution '" + s + "'");
}

struct ControlConfig {
  ControlKind kind = ControlKind::delta;
  Index n = 250;
  Index dim = 64;
  std::uint64_t seed = 0;
  Index intrinsic_dim = 5;  ///< r for uniform_lowdim
  double separation = 4.0;  ///< mu for bimodal
};

/// Non-Gaussian reference distributions:
///   delta          one random point repeated n times (exact ties; the
///                  projection battery's jitter keeps it testable)
///   uniform_lowdim uniform [-1,1]^r embedded by a random orthonormal map
///   bimodal        equal mixture of N(+mu e, I) and N(-mu e, I), e random unit
inline LatentMatrix control_distribution(const ControlConfig& cfg) {
  if (cfg.n < 1 || cfg.dim < 1) throw ConfigError("control distribution needs n >= 1 and d >= 1");
  std::mt19937_64 rng(cfg.seed);
  Matrix out;
  std::string id;
  switch (cfg.kind) {
    case ControlKind::delta: {
      const Matrix point = detail::gaussian_matrix(1, cfg.dim, rng);
      out = point.replicate(cfg.n, 1);
      id = "delta";
      break;
    }
    case ControlKind::uniform_lowdim: {
      if (cfg.intrinsic_dim < 1 || cfg.intrinsic_dim > cfg.dim) {
        throw ConfigError("uniform control needs 1 <= r <= d");
      }
      const Matrix embed = detail::random_orthonormal_columns(cfg.dim, cfg.intrinsic_dim, rng);
      std::uniform_real_distribution<double> unif(-1.0, 1.0);
      Matrix cube(cfg.n, cfg.intrinsic_dim);
      for (Index r = 0; r < cfg.n; ++r)
        for (Index c = 0; c < cfg.intrinsic_dim; ++c) cube(r, c) = unif(rng);
      out = cube * embed.transpose();
      id = "uniform" + std::to_string(cfg.intrinsic_dim) + "d";
      break;
    }
    case ControlKind::bimodal: {
      if (!(cfg.separation >= 0.0)) throw ConfigError("bimodal separation must be non-negative");
      Vector e = detail::gaussian_matrix(cfg.dim, 1, rng).col(0);
      e /= e.norm();
      out = detail::gaussian_matrix(cfg.n, cfg.dim, rng);
      std::bernoulli_distribution coin(0.5);
      for (Index r = 0; r < cfg.n; ++r) {
        out.row(r) += (coin(rng) ? cfg.separation : -cfg.separation) * e.transpose();
      }
      id = "bimodal";
      break;
    }
  }
  return LatentMatrix(std::move(out), id, "all");
}

// ---------------------------------------------------------------------------
// Oracle preset
// ---------------------------------------------------------------------------

struct OraclePreset {
  Index dim = 16;
  Index n = 2000;
  std::vector<Index> view_dims = {32, 64, 64};
  Index n_attributes = 8;
  std::vector<double> sigma_grid = {0.0, 0.1, 0.5, 1.0};
  double train_fraction = 0.8;
  std::uint64_t seed = 20250101;
};

inline OraclePreset oracle_default() { return {}; }

/// One realisation of the oracle at a given noise level. The UNE sample,
/// mixing matrices, attributes, noise patterns and split depend only on the
/// preset seed, so realisations at different sigma are directly comparable.
struct OracleDataset {
  LatentMatrix une;
  std::vector<Matrix> mixings;
  std::vector<LatentMatrix> views;
  std::vector<PlantedAttribute> attributes;
  AttributeTable labels;
  DatasetManifest manifest;
  double sigma = 0.0;
};

inline OracleDataset make_oracle(const OraclePreset& p, double sigma) {
  if (p.view_dims.empty()) throw ConfigError("oracle needs at least one view");
  OracleDataset ds;
  ds.sigma = sigma;
  ds.une = sample_une({p.dim, p.n, p.seed});
  ds.attributes = random_attributes(p.n_attributes, p.dim, p.seed + 1);
  ds.labels = plant_binary_attributes(ds.une, ds.attributes);
  for (std::size_t i = 0; i < p.view_dims.size(); ++i) {
    const std::uint64_t s = p.seed + 100 + 2 * i;
    ds.mixings.push_back(make_mixing(MixingRecipe::gaussian, p.view_dims[i], p.dim, s));
    ds.views.push_back(make_ine(ds.une, {ds.mixings.back(), sigma, s + 1, "ine" + std::to_string(i)}));
  }
  const auto n_train = static_cast<std::size_t>(std::llround(p.train_fraction * static_cast<double>(p.n)));
  ds.manifest = make_random_split(static_cast<std::size_t>(p.n), n_train, p.seed + 7, "oracle");
  return ds;
}

}  // namespace une
