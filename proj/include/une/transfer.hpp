#pragma once

// Ridge-regression maps between latent spaces and evaluation of probes
// applied to mapped latents.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "une/error.hpp"
#include "une/latent_store.hpp"
#include "une/linalg.hpp"
#include "une/probing.hpp"

namespace une {

struct LinearMap {
  Matrix weights;  ///< d_src x d_dst
  Vector bias;     ///< d_dst
  double effective_lambda = 0.0;
  std::string src_model_id, dst_model_id;

  Index src_dim() const noexcept { return weights.rows(); }
  Index dst_dim() const noexcept { return weights.cols(); }
};

/// Ridge map dst ~ src W + bias on centred data with
/// alpha_eff = alpha * ||X_src||_F^2 / d_src (raw, uncentred norm).
/// Solved through the SVD of the centred source.
inline LinearMap fit_ridge_map(const LatentMatrix& src, const LatentMatrix& dst, double alpha) {
  if (src.rows() != dst.rows()) {
    throw AlignmentError("source has " + std::to_string(src.rows()) + " rows, target has " +
                         std::to_string(dst.rows()));
  }
  if (src.rows() < 2) throw InsufficientData("ridge map needs at least 2 rows");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");

  LinearMap map;
  map.src_model_id = src.model_id();
  map.dst_model_id = dst.model_id();
  map.effective_lambda = alpha * src.data().squaredNorm() / static_cast<double>(src.cols());

  const Vector mu_src = src.data().colwise().mean().transpose();
  const Vector mu_dst = dst.data().colwise().mean().transpose();
  const Matrix xc = src.data().rowwise() - mu_src.transpose();
  const Matrix yc = dst.data().rowwise() - mu_dst.transpose();
  const auto svd = thin_svd(xc);
  const Vector& s = svd.singularValues();
  const Vector shrink = (s.array() / (s.array().square() + map.effective_lambda)).matrix();
  map.weights = svd.matrixV() * shrink.asDiagonal() * (svd.matrixU().transpose() * yc);
  map.bias = mu_dst - map.weights.transpose() * mu_src;
  return map;
}

inline Matrix predict(const LinearMap& map, const Matrix& src) {
  if (src.cols() != map.src_dim()) throw ShapeError("map expects " + std::to_string(map.src_dim()) + " columns");
  return (src * map.weights).rowwise() + map.bias.transpose();
}

inline LatentMatrix predict(const LinearMap& map, const LatentMatrix& src) {
  return LatentMatrix(predict(map, src.data()), map.dst_model_id, src.split_id());
}

/// Mean of squared errors over all entries (per coordinate).
inline double mean_squared_error(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("MSE needs equal shapes");
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

/// Mean row-wise cosine similarity; zero rows contribute 0.
inline double mean_row_cosine(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("cosine needs equal shapes");
  double sum = 0.0;
  for (Index r = 0; r < a.rows(); ++r) sum += cosine_similarity(a.row(r), b.row(r));
  return sum / static_cast<double>(a.rows());
}

struct TransferReport {
  double mse = 0.0;
  double mean_cosine = 0.0;
  std::vector<std::string> attribute_names;
  std::vector<double> accuracy_true;    ///< probe on real target latents
  std::vector<double> accuracy_mapped;  ///< probe on mapped latents
  std::vector<double> accuracy_drop_pp;
  double mean_accuracy_drop_pp = 0.0;
  std::vector<std::string> skipped;
};

/// Applies a probe trained on the target space to real and mapped target
/// latents; the drop is (true - mapped) accuracy in percentage points.
inline TransferReport evaluate_transfer(const LinearMap& map, const LatentMatrix& src_test,
                                        const LatentMatrix& dst_test, const LinearProbe& dst_probe,
                                        const AttributeTable& attrs) {
  if (src_test.rows() != dst_test.rows() || dst_test.rows() != attrs.rows()) {
    throw AlignmentError("transfer test inputs differ in row count");
  }
  if (dst_test.cols() != map.dst_dim() || dst_probe.pca.d() != map.dst_dim()) {
    throw ShapeError("map target dimension does not match target latents or probe");
  }
  const Matrix mapped = predict(map, src_test.data());
  TransferReport rep;
  rep.mse = mean_squared_error(mapped, dst_test.data());
  rep.mean_cosine = mean_row_cosine(mapped, dst_test.data());

  const Eigen::MatrixXi pred_true = dst_probe.predict(dst_test.data());
  const Eigen::MatrixXi pred_mapped = dst_probe.predict(mapped);
  double drop_sum = 0.0;
  for (Index a = 0; a < dst_probe.attributes(); ++a) {
    const std::string& name = dst_probe.attribute_names[static_cast<std::size_t>(a)];
    if (!dst_probe.fitted[static_cast<std::size_t>(a)]) {
      rep.skipped.push_back(name);
      continue;
    }
    const Labels y = attrs.labels.col(attrs.index_of(name));
    const double at = accuracy(pred_true.col(a), y);
    const double am = accuracy(pred_mapped.col(a), y);
    rep.attribute_names.push_back(name);
    rep.accuracy_true.push_back(at);
    rep.accuracy_mapped.push_back(am);
    rep.accuracy_drop_pp.push_back(100.0 * (at - am));
    drop_sum += 100.0 * (at - am);
  }
  if (!rep.accuracy_drop_pp.empty()) rep.mean_accuracy_drop_pp = drop_sum / static_cast<double>(rep.accuracy_drop_pp.size());
  return rep;
}

}  // namespace une
