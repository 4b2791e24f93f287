#pragma once

// Semantic directions pulled back from probes to the raw latent space, linear
// edits along them, intensity calibration and orthogonalisation against
// spurious directions.

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "une/error.hpp"
#include "une/latent_store.hpp"
#include "une/parallel.hpp"
#include "une/probing.hpp"

namespace une {

struct SemanticDirection {
  Vector w;  ///< raw latent space
  double b = 0.0;
  std::string attribute_name;
  double margin_std = 0.0;  ///< population std of signed distances on train
  /// Training latents, kept so derived directions can recompute bias and margin.
  std::shared_ptr<const Matrix> train;

  Index dim() const noexcept { return w.size(); }
  double score(const Vector& z) const { return w.dot(z) + b; }
  double signed_distance(const Vector& z) const { return score(z) / w.norm(); }
};

namespace detail {

inline double margin_std(const Vector& w, double b, const Matrix& train) {
  const double nw = w.norm();
  if (!(nw > 0.0)) throw DegenerateDirection("direction has zero norm");
  const Vector d = ((train * w).array() + b) / nw;
  const double mean = d.mean();
  const double sd = std::sqrt((d.array() - mean).square().mean());
  if (!(sd > 0.0) || !std::isfinite(sd)) throw DegenerateDirection("signed distances on train have zero spread");
  return sd;
}

inline void check_dim(const SemanticDirection& dir, Index d) {
  if (dir.dim() != d) {
    throw ShapeError("direction has dimension " + std::to_string(dir.dim()) + ", latent has " + std::to_string(d));
  }
}

/// Replaces w, keeping the training-mean score fixed, and refreshes margin_std.
inline SemanticDirection with_new_normal(const SemanticDirection& src, Vector w_new) {
  if (!src.train) throw ConfigError("direction carries no training latents");
  const Vector mu = src.train->colwise().mean().transpose();
  SemanticDirection out = src;
  out.b = src.w.dot(mu) + src.b - w_new.dot(mu);
  out.w = std::move(w_new);
  out.margin_std = margin_std(out.w, out.b, *src.train);
  return out;
}

}  // namespace detail

/// Raw-space normal and bias equivalent to the probe's scorer:
///   w_raw = C^T (w / sigma),  b_raw = b - (w / sigma) . mu_s - w_raw . mu_pca
inline SemanticDirection direction_from_probe(const LinearProbe& probe, const std::string& attribute,
                                              const LatentMatrix& train) {
  const Index a = probe.index_of(attribute);
  if (train.cols() != probe.pca.d()) throw ShapeError("training latents do not match the probe input dimension");
  if (!probe.fitted[static_cast<std::size_t>(a)]) {
    throw DegenerateDirection("attribute '" + attribute + "' was not fitted (constant on train)");
  }
  const Vector ws = probe.weights.row(a).transpose().cwiseQuotient(probe.scaler.std);
  SemanticDirection dir;
  dir.attribute_name = attribute;
  dir.w = probe.pca.components.transpose() * ws;
  dir.b = probe.biases(a) - ws.dot(probe.scaler.mean) - dir.w.dot(probe.pca.mean);
  dir.train = std::make_shared<const Matrix>(train.data());
  dir.margin_std = detail::margin_std(dir.w, dir.b, *dir.train);
  return dir;
}

/// z + alpha w
inline Vector edit(const Vector& z, const SemanticDirection& dir, double alpha) {
  detail::check_dim(dir, z.size());
  return z + alpha * dir.w;
}

/// Step size moving the signed distance of z to t * margin_std.
inline double intensity_step(const Vector& z, const SemanticDirection& dir, double t) {
  detail::check_dim(dir, z.size());
  const double nw = dir.w.norm();
  if (!(nw > 0.0)) throw DegenerateDirection("direction has zero norm");
  if (!(dir.margin_std > 0.0)) throw ConfigError("margin_std must be positive");
  return (t * dir.margin_std - dir.score(z) / nw) / nw;
}

/// Edits z so that its signed distance to the decision plane is t * margin_std.
inline Vector edit_to_intensity(const Vector& z, const SemanticDirection& dir, double t) {
  return edit(z, dir, intensity_step(z, dir, t));
}

/// Intensity of z in margin_std units.
inline double intensity(const Vector& z, const SemanticDirection& dir) {
  detail::check_dim(dir, z.size());
  return dir.signed_distance(z) / dir.margin_std;
}

/// Every row edited to every intensity; output row i * T + j holds row i at
/// intensity t_j.
inline Matrix edit_rows_to_intensities(const Matrix& z, const SemanticDirection& dir, const std::vector<double>& ts) {
  detail::check_dim(dir, z.cols());
  const auto nt = static_cast<Index>(ts.size());
  Matrix out(z.rows() * nt, z.cols());
  parallel_for(static_cast<std::size_t>(z.rows()), [&](std::size_t r) {
    const auto row = static_cast<Index>(r);
    const Vector zr = z.row(row).transpose();
    for (Index j = 0; j < nt; ++j) {
      out.row(row * nt + j) = edit_to_intensity(zr, dir, ts[static_cast<std::size_t>(j)]).transpose();
    }
  });
  return out;
}

/// w1 with its component along w2 removed. Bias keeps the training-mean
/// score; margin_std is recomputed.
inline SemanticDirection orthogonalize(const SemanticDirection& w1, const SemanticDirection& w2) {
  if (w1.dim() != w2.dim()) throw ShapeError("directions differ in dimension");
  const double n2 = w2.w.squaredNorm();
  if (!(n2 > 0.0)) throw DegenerateDirection("spurious direction has zero norm");
  Vector w = w1.w - (w2.w.dot(w1.w) / n2) * w2.w;
  if (w.norm() <= 1e-12 * w1.w.norm()) {
    throw DegenerateDirection("'" + w1.attribute_name + "' is parallel to '" + w2.attribute_name + "'");
  }
  return detail::with_new_normal(w1, std::move(w));
}

/// Removes the span of several spurious directions: they are orthonormalised
/// by Gram-Schmidt (dependent ones dropped) and projected out in turn.
inline SemanticDirection orthogonalize_against(const SemanticDirection& w1,
                                               const std::vector<SemanticDirection>& spurious) {
  std::vector<Vector> basis;
  for (const auto& s : spurious) {
    if (s.dim() != w1.dim()) throw ShapeError("directions differ in dimension");
    Vector q = s.w;
    for (const auto& e : basis) q -= e.dot(q) * e;
    const double nq = q.norm();
    if (nq > 1e-12 * s.w.norm()) basis.push_back(q / nq);
  }
  Vector w = w1.w;
  for (const auto& e : basis) w -= e.dot(w) * e;
  if (w.norm() <= 1e-12 * w1.w.norm()) {
    throw DegenerateDirection("'" + w1.attribute_name + "' lies in the span of the spurious directions");
  }
  return detail::with_new_normal(w1, std::move(w));
}

}  // namespace une
