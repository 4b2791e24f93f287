#pragma once

// MAXVAR generalised CCA over several latent spaces and retrieval-structure
// comparison between spaces.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "une/error.hpp"
#include "une/latent_store.hpp"
#include "une/linalg.hpp"
#include "une/parallel.hpp"
#include "une/probing.hpp"

namespace une {

struct SharedSpace {
  Matrix x;                        ///< n x k, orthonormal, centred columns
  std::vector<Matrix> projectors;  ///< A_i, d_i x k
  std::vector<Vector> means;       ///< per-view training column means
  std::vector<double> lambdas;
  std::vector<std::string> source_model_ids;
  std::vector<Index> view_ranks;     ///< retained rank of each centred view
  Index shared_rank = 0;             ///< rank of the stacked bases
  Vector eigenvalues;                ///< top-k eigenvalues of sum_i P_i
  double objective = 0.0;            ///< sum_i ||Z_i A_i - X||_F^2
  double regularized_objective = 0.0;  ///< objective + sum_i lambda_i ||A_i||_F^2
  std::vector<double> view_residual; ///< per-view term of the objective
  int alternations = 0;

  Index k() const noexcept { return x.cols(); }
  Index views() const noexcept { return static_cast<Index>(projectors.size()); }
};

namespace detail {

struct ViewBasis {
  Vector mean;
  Matrix centred;
  Matrix u, v;  ///< truncated thin SVD factors
  Vector s;
};

inline ViewBasis view_basis(const Matrix& z, double rank_tol) {
  ViewBasis b;
  b.mean = z.colwise().mean().transpose();
  b.centred = z.rowwise() - b.mean.transpose();
  const auto svd = thin_svd(b.centred);
  const Index r = numerical_rank(svd.singularValues(), rank_tol);
  b.u = svd.matrixU().leftCols(r);
  b.v = svd.matrixV().leftCols(r);
  b.s = svd.singularValues().head(r);
  // Centring already places the basis in the complement of 1; deflate
  // explicitly so round-off cannot leak back in.
  b.u.rowwise() -= b.u.colwise().mean();
  return b;
}

/// Closed-form ridge A = (Z^T Z + lambda I)^+ Z^T X through the truncated SVD.
inline Matrix ridge_projector(const ViewBasis& b, const Matrix& x, double lambda) {
  const Vector shrink = (b.s.array() / (b.s.array().square() + lambda)).matrix();
  return b.v * shrink.asDiagonal() * (b.u.transpose() * x);
}

inline void check_views(const std::vector<Matrix>& views) {
  if (views.empty()) throw ConfigError("GCCA needs at least one view");
  for (const auto& v : views) {
    if (v.rows() != views.front().rows()) throw AlignmentError("GCCA views differ in row count");
  }
  if (views.front().rows() < 2) throw InsufficientData("GCCA needs at least 2 rows");
}

inline std::vector<double> resolve_lambdas(const std::vector<double>& lambdas, std::size_t m) {
  if (lambdas.empty()) return std::vector<double>(m, 0.0);
  if (lambdas.size() != m) throw ConfigError("need one lambda per view");
  for (double l : lambdas) {
    if (!(l >= 0.0)) throw ConfigError("lambdas must be non-negative");
  }
  return lambdas;
}

}  // namespace detail

struct GccaOptions {
  double rank_tol = 1e-10;
  std::vector<double> lambdas;  ///< empty: all zero
  int alternations = 0;
};

/// Objective sum_i ||Z_i A_i - X||_F^2 at a given X, with each A_i at its
/// closed-form optimum.
inline double gcca_objective(const std::vector<Matrix>& views, const Matrix& x, const GccaOptions& opt = {}) {
  detail::check_views(views);
  const auto lambdas = detail::resolve_lambdas(opt.lambdas, views.size());
  double total = 0.0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto b = detail::view_basis(views[i], opt.rank_tol);
    total += (b.centred * detail::ridge_projector(b, x, lambdas[i]) - x).squaredNorm();
  }
  return total;
}

/// X = top-k left singular vectors of the stacked, 1-deflated column bases,
/// which are the top-k eigenvectors of sum_i U_i U_i^T; then A_i in closed
/// form. Optional alternations refine X by orthogonal Procrustes against
/// sum_i Z_i A_i and recompute A_i; each step lowers the regularised
/// objective (only meaningful with lambda_i > 0).
inline SharedSpace gcca_fit(const std::vector<LatentMatrix>& views, Index k, const GccaOptions& opt = {}) {
  std::vector<Matrix> data;
  for (const auto& v : views) data.push_back(v.data());
  detail::check_views(data);
  const Index n = data.front().rows();
  const std::size_t m = data.size();
  if (k < 1 || k > n - 1) throw RankError("k must lie in [1, n-1]; n = " + std::to_string(n));
  if (opt.alternations < 0) throw ConfigError("alternations must be non-negative");

  SharedSpace sp;
  sp.lambdas = detail::resolve_lambdas(opt.lambdas, m);
  sp.alternations = opt.alternations;
  std::vector<detail::ViewBasis> bases(m);
  parallel_for(m, [&](std::size_t i) { bases[i] = detail::view_basis(data[i], opt.rank_tol); });

  Index total = 0;
  for (const auto& b : bases) total += b.u.cols();
  Matrix stacked(n, total);
  Index col = 0;
  for (std::size_t i = 0; i < m; ++i) {
    stacked.middleCols(col, bases[i].u.cols()) = bases[i].u;
    col += bases[i].u.cols();
    sp.view_ranks.push_back(bases[i].u.cols());
    sp.means.push_back(bases[i].mean);
    sp.source_model_ids.push_back(views[i].model_id());
  }
  if (total == 0) throw RankError("all views are constant; attained shared rank 0");
  const auto svd = thin_svd(stacked);
  sp.shared_rank = numerical_rank(svd.singularValues(), opt.rank_tol);
  if (k > sp.shared_rank) {
    throw RankError("k = " + std::to_string(k) + " exceeds attained shared rank " + std::to_string(sp.shared_rank));
  }
  sp.x = svd.matrixU().leftCols(k);
  fix_column_signs(sp.x);
  sp.eigenvalues = svd.singularValues().head(k).array().square();

  auto update_projectors = [&] {
    sp.projectors.assign(m, Matrix());
    for (std::size_t i = 0; i < m; ++i) sp.projectors[i] = detail::ridge_projector(bases[i], sp.x, sp.lambdas[i]);
  };
  update_projectors();
  for (int it = 0; it < opt.alternations; ++it) {
    Matrix target = Matrix::Zero(n, k);
    for (std::size_t i = 0; i < m; ++i) target += bases[i].centred * sp.projectors[i];
    target.rowwise() -= target.colwise().mean();
    const auto p = thin_svd(target);
    sp.x = p.matrixU() * p.matrixV().transpose();
    update_projectors();
  }

  sp.view_residual.resize(m);
  sp.objective = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sp.view_residual[i] = (bases[i].centred * sp.projectors[i] - sp.x).squaredNorm();
    sp.objective += sp.view_residual[i];
    sp.regularized_objective += sp.lambdas[i] * sp.projectors[i].squaredNorm();
  }
  sp.regularized_objective += sp.objective;
  return sp;
}

/// (Z - mean_i) A_i using the training means of view i.
inline Matrix project_to_shared(const SharedSpace& sp, Index view, const Matrix& latents) {
  if (view < 0 || view >= sp.views()) throw IndexError("view index " + std::to_string(view) + " out of range");
  const auto i = static_cast<std::size_t>(view);
  if (latents.cols() != sp.means[i].size()) {
    throw ShapeError("view " + std::to_string(view) + " has dimension " + std::to_string(sp.means[i].size()) +
                     ", got " + std::to_string(latents.cols()));
  }
  return (latents.rowwise() - sp.means[i].transpose()) * sp.projectors[i];
}

inline Matrix project_to_shared(const SharedSpace& sp, Index view, const LatentMatrix& latents) {
  return project_to_shared(sp, view, latents.data());
}

/// Mean of the per-view projections of aligned held-out samples.
inline Matrix project_views_to_shared(const SharedSpace& sp, const std::vector<LatentMatrix>& views) {
  if (static_cast<Index>(views.size()) != sp.views()) throw ShapeError("need one matrix per GCCA view");
  Matrix sum = project_to_shared(sp, 0, views[0]);
  for (std::size_t i = 1; i < views.size(); ++i) {
    const Matrix p = project_to_shared(sp, static_cast<Index>(i), views[i]);
    if (p.rows() != sum.rows()) throw AlignmentError("held-out views differ in row count");
    sum += p;
  }
  return sum / static_cast<double>(views.size());
}

struct SharedCurvePoint {
  Index k = 0;
  double mean_accuracy = 0.0;
  std::vector<std::string> attribute_names;
  std::vector<double> accuracy;  ///< NaN for attributes skipped by the probe
};

/// For each k: GCCA on the training views, probe on X, evaluate on the mean
/// projection of the test views.
inline std::vector<SharedCurvePoint> shared_probe_curve(const std::vector<LatentMatrix>& train_views,
                                                        const std::vector<LatentMatrix>& test_views,
                                                        const AttributeTable& train_attrs,
                                                        const AttributeTable& test_attrs,
                                                        const std::vector<Index>& k_grid, const GccaOptions& gopt = {},
                                                        ProbeOptions popt = {}) {
  std::vector<SharedCurvePoint> out;
  for (Index k : k_grid) {
    const SharedSpace sp = gcca_fit(train_views, k, gopt);
    const LatentMatrix xtr(sp.x, "shared", "train");
    const LatentMatrix xte(project_views_to_shared(sp, test_views), "shared", "test");
    popt.pca_k = k;
    const ProbeResult r = probe_all(xtr, xte, train_attrs, test_attrs, popt);
    SharedCurvePoint pt;
    pt.k = k;
    pt.mean_accuracy = r.report.mean_accuracy;
    for (const auto& a : r.report.attributes) {
      pt.attribute_names.push_back(a.name);
      pt.accuracy.push_back(a.accuracy);
    }
    out.push_back(std::move(pt));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Retrieval structure
// ---------------------------------------------------------------------------

/// Sorted random subset of size `size` from [0, n).
inline std::vector<std::size_t> sample_subset(std::size_t n, std::size_t size, std::uint64_t seed) {
  if (size > n) throw ConfigError("subset size exceeds sample count");
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(size);
  std::sort(all.begin(), all.end());
  return all;
}

namespace detail {

/// Rows of the subset scaled to unit norm (zero rows stay zero).
inline Matrix unit_rows(const Matrix& space, const std::vector<std::size_t>& subset) {
  Matrix out(static_cast<Index>(subset.size()), space.cols());
  for (std::size_t r = 0; r < subset.size(); ++r) {
    const auto idx = static_cast<Index>(subset[r]);
    if (idx >= space.rows()) throw IndexError("subset index " + std::to_string(idx) + " out of range");
    const double nrm = space.row(idx).norm();
    out.row(static_cast<Index>(r)) = nrm > 0.0 ? Vector(space.row(idx).transpose() / nrm) : Vector::Zero(space.cols());
  }
  return out;
}

/// Average ranks (1-based) of v.
inline Vector average_ranks(const Vector& v) {
  const Index n = v.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return v(a) < v(b); });
  Vector r(n);
  for (Index i = 0; i < n;) {
    Index j = i;
    while (j + 1 < n && v(order[j + 1]) == v(order[i])) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Index t = i; t <= j; ++t) r(order[t]) = avg;
    i = j + 1;
  }
  return r;
}

inline double quantile_sorted(const std::vector<double>& s, double q) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

}  // namespace detail

/// Cosine similarity of anchor `a` (subset position) to every other subset
/// member, self excluded.
inline Vector retrieval_profile(const Matrix& space, const std::vector<std::size_t>& subset, std::size_t a) {
  const Matrix u = detail::unit_rows(space, subset);
  if (a >= subset.size()) throw IndexError("anchor out of range");
  const Vector all = u * u.row(static_cast<Index>(a)).transpose();
  Vector out(all.size() - 1);
  out.head(static_cast<Index>(a)) = all.head(static_cast<Index>(a));
  out.tail(all.size() - 1 - static_cast<Index>(a)) = all.tail(all.size() - 1 - static_cast<Index>(a));
  return out;
}

/// Spearman rank correlation with average ranks; NaN if either input is constant.
inline double spearman(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("spearman needs equal lengths");
  const Vector ra = detail::average_ranks(a), rb = detail::average_ranks(b);
  const Vector ca = ra.array() - ra.mean(), cb = rb.array() - rb.mean();
  const double den = ca.norm() * cb.norm();
  if (!(den > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(ca.dot(cb) / den, -1.0, 1.0);
}

struct SpearmanStructure {
  Matrix mean;                 ///< m x m, symmetric, unit diagonal
  Eigen::MatrixXi used;        ///< anchors contributing to each pair
  Eigen::MatrixXi skipped;     ///< anchors skipped for a constant profile
  std::array<Matrix, 5> quantiles;  ///< per-anchor 0, .25, .5, .75, 1 quantiles
  std::size_t anchors = 0;
};

inline constexpr std::array<double, 5> kSpearmanQuantiles = {0.0, 0.25, 0.5, 0.75, 1.0};

/// Per-anchor Spearman correlation of retrieval profiles between every pair
/// of spaces, averaged over anchors.
inline SpearmanStructure spearman_structure(const std::vector<Matrix>& spaces, const std::vector<std::size_t>& subset) {
  if (spaces.empty()) throw ConfigError("need at least one space");
  if (subset.size() < 3) throw InsufficientData("subset needs at least 3 anchors");
  for (const auto& s : spaces) {
    if (s.rows() != spaces.front().rows()) throw AlignmentError("spaces differ in row count");
  }
  const std::size_t m = spaces.size(), s = subset.size();
  std::vector<Matrix> unit(m);
  for (std::size_t i = 0; i < m; ++i) unit[i] = detail::unit_rows(spaces[i], subset);

  // rho[a] holds the upper-triangle correlations for anchor a.
  const std::size_t pairs = m * (m - 1) / 2;
  std::vector<std::vector<double>> rho(s, std::vector<double>(pairs));
  parallel_for(s, [&](std::size_t a) {
    std::vector<Vector> ranks(m);
    std::vector<double> norms(m);
    for (std::size_t i = 0; i < m; ++i) {
      const Vector all = unit[i] * unit[i].row(static_cast<Index>(a)).transpose();
      Vector prof(static_cast<Index>(s - 1));
      prof.head(static_cast<Index>(a)) = all.head(static_cast<Index>(a));
      prof.tail(static_cast<Index>(s - 1 - a)) = all.tail(static_cast<Index>(s - 1 - a));
      ranks[i] = detail::average_ranks(prof);
      ranks[i].array() -= ranks[i].mean();
      norms[i] = ranks[i].norm();
    }
    std::size_t p = 0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j, ++p) {
        const double den = norms[i] * norms[j];
        rho[a][p] = den > 0.0 ? std::clamp(ranks[i].dot(ranks[j]) / den, -1.0, 1.0)
                              : std::numeric_limits<double>::quiet_NaN();
      }
  });

  SpearmanStructure out;
  out.anchors = s;
  const auto mm = static_cast<Index>(m);
  out.mean = Matrix::Identity(mm, mm);
  out.used = Eigen::MatrixXi::Constant(mm, mm, static_cast<int>(s));
  out.skipped = Eigen::MatrixXi::Zero(mm, mm);
  for (auto& q : out.quantiles) q = Matrix::Ones(mm, mm);
  std::size_t p = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j, ++p) {
      std::vector<double> vals;
      for (std::size_t a = 0; a < s; ++a) {
        if (!std::isnan(rho[a][p])) vals.push_back(rho[a][p]);
      }
      const auto ii = static_cast<Index>(i), jj = static_cast<Index>(j);
      const int used = static_cast<int>(vals.size());
      out.used(ii, jj) = out.used(jj, ii) = used;
      out.skipped(ii, jj) = out.skipped(jj, ii) = static_cast<int>(s) - used;
      const double mean = vals.empty() ? std::numeric_limits<double>::quiet_NaN()
                                       : std::accumulate(vals.begin(), vals.end(), 0.0) / used;
      out.mean(ii, jj) = out.mean(jj, ii) = mean;
      std::sort(vals.begin(), vals.end());
      for (std::size_t q = 0; q < kSpearmanQuantiles.size(); ++q) {
        out.quantiles[q](ii, jj) = out.quantiles[q](jj, ii) = detail::quantile_sorted(vals, kSpearmanQuantiles[q]);
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

struct SharedPreset {
  std::string name;
  std::vector<std::string> models;
};

inline const std::vector<SharedPreset>& shared_presets() {
  static const std::vector<SharedPreset> presets = {
      {"X1", {"sd21", "lcm", "clip-b16", "dinov3"}},
      {"X2", {"sd15", "lcm", "openclip-b16", "dinov3"}},
      {"X3", {"sd15", "sd21", "clip-l14", "openclip-b16"}},
      {"X4", {"sd15", "sd21", "clip-l14", "dinov3"}},
      {"X5", {"sd15", "sd21", "lcm", "clip-l14", "openclip-b16", "dinov3"}},
      {"oracle-default", {"ine0", "ine1", "ine2"}},
  };
  return presets;
}

inline const SharedPreset& shared_preset(const std::string& name) {
  for (const auto& p : shared_presets()) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

}  // namespace une
