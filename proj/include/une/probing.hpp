#pragma once

// Linear probes: PCA front end, standard scaling, and per-attribute
// L2-regularised logistic regression.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "une/error.hpp"
#include "une/latent_store.hpp"
#include "une/linalg.hpp"
#include "une/parallel.hpp"

namespace une {

using Labels = Eigen::VectorXi;

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

struct PcaModel {
  Vector mean;                ///< d
  Matrix components;          ///< k x d, orthonormal rows
  Vector explained_variance;  ///< k, non-increasing, divisor n - 1

  Index k() const noexcept { return components.rows(); }
  Index d() const noexcept { return components.cols(); }

  Matrix transform(const Matrix& x) const {
    if (x.cols() != d()) throw ShapeError("PCA expects " + std::to_string(d()) + " columns");
    return (x.rowwise() - mean.transpose()) * components.transpose();
  }

  Matrix inverse_transform(const Matrix& scores) const {
    return (scores * components).rowwise() + mean.transpose();
  }

  static PcaModel identity(Index d) { return {Vector::Zero(d), Matrix::Identity(d, d), Vector::Ones(d)}; }
};

/// Top-k principal directions from the thin SVD of the centred data; each
/// component is sign-fixed so its largest-magnitude coordinate is positive.
inline PcaModel fit_pca(const Matrix& x, Index k) {
  const Index n = x.rows(), d = x.cols();
  if (k < 1 || k > std::min(n - 1, d)) {
    throw RankError("k = " + std::to_string(k) + " must lie in [1, min(n-1, d)] = [1, " +
                    std::to_string(std::min(n - 1, d)) + "]");
  }
  PcaModel p;
  p.mean = x.colwise().mean().transpose();
  const auto svd = thin_svd(x.rowwise() - p.mean.transpose());
  Matrix v = svd.matrixV().leftCols(k);
  fix_column_signs(v);
  p.components = v.transpose();
  p.explained_variance = svd.singularValues().head(k).array().square() / static_cast<double>(n - 1);
  return p;
}

inline PcaModel fit_pca(const LatentMatrix& m, Index k) { return fit_pca(m.data(), k); }

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

namespace detail {

inline double softplus(double s) { return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

inline double sigmoid(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

inline void check_binary(const Labels& y) {
  for (Index i = 0; i < y.size(); ++i) {
    if (y(i) != 0 && y(i) != 1) throw DataError("labels must be 0 or 1");
  }
}

}  // namespace detail

/// Mean logistic loss + (lambda/2) ||w||^2; the bias is not penalised.
inline double logistic_objective(const Matrix& x, const Labels& y, double l2_lambda, const Vector& w, double b) {
  const Vector s = (x * w).array() + b;
  double loss = 0.0;
  for (Index i = 0; i < s.size(); ++i) loss += detail::softplus(s(i)) - y(i) * s(i);
  return loss / static_cast<double>(x.rows()) + 0.5 * l2_lambda * w.squaredNorm();
}

/// Gradient of logistic_objective as (grad_w, grad_b) packed into k+1 entries.
inline Vector logistic_gradient(const Matrix& x, const Labels& y, double l2_lambda, const Vector& w, double b) {
  const Index n = x.rows(), k = x.cols();
  Vector r(n);
  const Vector s = (x * w).array() + b;
  for (Index i = 0; i < n; ++i) r(i) = detail::sigmoid(s(i)) - y(i);
  Vector g(k + 1);
  g.head(k) = x.transpose() * r / static_cast<double>(n) + l2_lambda * w;
  g(k) = r.mean();
  return g;
}

struct LogisticFit {
  Vector w;
  double b = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct LogisticOptions {
  double l2_lambda = 1e-4;
  int max_iters = 100;
  double grad_tol = 1e-6;
};

/// Damped Newton with Armijo backtracking. Stops when the full gradient
/// norm drops below grad_tol or after max_iters.
inline LogisticFit fit_logistic(const Matrix& x, const Labels& y, const LogisticOptions& opt = {}) {
  const Index n = x.rows(), k = x.cols();
  if (y.size() != n) throw ShapeError("labels and features disagree on sample count");
  if (!(opt.l2_lambda > 0.0)) throw ConfigError("l2_lambda must be positive");
  detail::check_binary(y);
  const Index positives = y.sum();
  if (positives == 0 || positives == n) throw DegenerateLabels("both classes must be present");

  LogisticFit fit;
  fit.w = Vector::Zero(k);
  const double prior = static_cast<double>(positives) / static_cast<double>(n);
  fit.b = std::log(prior / (1.0 - prior));
  const double inv_n = 1.0 / static_cast<double>(n);

  double f = logistic_objective(x, y, opt.l2_lambda, fit.w, fit.b);
  for (fit.iterations = 0; fit.iterations < opt.max_iters; ++fit.iterations) {
    const Vector s = (x * fit.w).array() + fit.b;
    Vector r(n), dw(n);
    for (Index i = 0; i < n; ++i) {
      const double p = detail::sigmoid(s(i));
      r(i) = p - y(i);
      dw(i) = p * (1.0 - p);
    }
    Vector g(k + 1);
    g.head(k) = x.transpose() * r * inv_n + opt.l2_lambda * fit.w;
    g(k) = r.mean();
    fit.grad_norm = g.norm();
    if (fit.grad_norm <= opt.grad_tol) {
      fit.converged = true;
      break;
    }

    Matrix h(k + 1, k + 1);
    const Matrix xd = x.array().colwise() * dw.array();
    h.topLeftCorner(k, k).noalias() = x.transpose() * xd * inv_n;
    h.topLeftCorner(k, k).diagonal().array() += opt.l2_lambda;
    h.topRightCorner(k, 1) = xd.colwise().sum().transpose() * inv_n;
    h.bottomLeftCorner(1, k) = h.topRightCorner(k, 1).transpose();
    h(k, k) = dw.sum() * inv_n + 1e-12;
    Eigen::LDLT<Matrix> ldlt(h);
    Vector step = (ldlt.info() == Eigen::Success) ? Vector(-ldlt.solve(g)) : Vector(-g);
    if (!step.allFinite() || step.dot(g) >= 0.0) step = -g;

    double t = 1.0;
    const double slope = step.dot(g);
    Vector w_new;
    double b_new = 0.0, f_new = 0.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      w_new = fit.w + t * step.head(k);
      b_new = fit.b + t * step(k);
      f_new = logistic_objective(x, y, opt.l2_lambda, w_new, b_new);
      if (f_new <= f + 1e-4 * t * slope) break;
    }
    if (!(f_new <= f)) break;  // no descent possible at working precision
    fit.w = std::move(w_new);
    fit.b = b_new;
    f = f_new;
  }
  if (!fit.converged) {
    fit.grad_norm = logistic_gradient(x, y, opt.l2_lambda, fit.w, fit.b).norm();
    fit.converged = fit.grad_norm <= opt.grad_tol;
  }
  return fit;
}

// ---------------------------------------------------------------------------
// AUC
// ---------------------------------------------------------------------------

/// Probability that a random positive outranks a random negative, ties
/// counted half (Mann-Whitney with average ranks).
inline double auc(const Vector& scores, const Labels& labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  detail::check_binary(labels);
  const Index n = scores.size();
  const Index pos = labels.sum();
  const Index neg = n - pos;
  if (pos == 0 || neg == 0) throw DegenerateLabels("AUC needs both classes");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) < scores(b); });
  double rank_sum = 0.0;
  for (Index i = 0; i < n;) {
    Index j = i;
    while (j + 1 < n && scores(order[j + 1]) == scores(order[i])) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Index t = i; t <= j; ++t) {
      if (labels(order[t]) == 1) rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

// ---------------------------------------------------------------------------
// Probes
// ---------------------------------------------------------------------------

struct LinearProbe {
  std::vector<std::string> attribute_names;
  Matrix weights;  ///< A x k
  Vector biases;   ///< A
  PcaModel pca;
  StandardizeStats scaler;  ///< on PCA scores
  double l2_lambda = 0.0;
  std::vector<bool> fitted;  ///< false: label constant on train, probe predicts that constant

  Index attributes() const noexcept { return weights.rows(); }

  Index index_of(const std::string& name) const {
    auto it = std::find(attribute_names.begin(), attribute_names.end(), name);
    if (it == attribute_names.end()) throw KeyError("probe has no attribute '" + name + "'");
    return static_cast<Index>(it - attribute_names.begin());
  }

  /// Raw latents -> standardised PCA features.
  Matrix features(const Matrix& raw) const { return apply_standardize(pca.transform(raw), scaler); }

  /// n x A decision scores w^T f + b.
  Matrix scores(const Matrix& raw) const {
    return (features(raw) * weights.transpose()).rowwise() + biases.transpose();
  }

  Eigen::MatrixXi predict(const Matrix& raw) const {
    return (scores(raw).array() > 0.0).cast<int>().matrix();
  }
};

struct AttributeScore {
  std::string name;
  bool fitted = false;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  double auc = std::numeric_limits<double>::quiet_NaN();  ///< NaN when the test split is single-class
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct ProbeReport {
  std::vector<AttributeScore> attributes;
  double mean_accuracy = 0.0;  ///< over fitted attributes
  Index pca_k = 0;             ///< effective PCA dimension
  std::vector<std::string> skipped;
};

struct ProbeOptions {
  Index pca_k = 0;  ///< 0 selects 500 for d > 4096, else 310
  double l2_lambda = 1e-4;
  int max_iters = 100;
  double grad_tol = 1e-6;
  /// Components with singular value <= rank_tol * s_max are dropped. Latents
  /// stored as float32 carry round-off near 1e-7 relative; standardising those
  /// directions would blow them up to unit variance, hence 1e-6.
  double rank_tol = 1e-6;
};

inline Index default_pca_k(Index d) { return d > 4096 ? 500 : 310; }

/// Accuracy of 0/1 predictions against labels.
inline double accuracy(const Eigen::VectorXi& predicted, const Labels& truth) {
  if (predicted.size() != truth.size() || truth.size() == 0) throw ShapeError("accuracy needs equal, non-empty vectors");
  return static_cast<double>((predicted.array() == truth.array()).count()) / static_cast<double>(truth.size());
}

/// Per-attribute accuracy/AUC of a probe on (latents, labels).
inline ProbeReport evaluate_probe(const LinearProbe& probe, const Matrix& latents, const AttributeTable& attrs) {
  if (latents.rows() != attrs.rows()) throw AlignmentError("latents and attributes differ in row count");
  ProbeReport rep;
  rep.pca_k = probe.pca.k();
  const Matrix s = probe.scores(latents);
  double acc_sum = 0.0;
  Index acc_count = 0;
  for (Index a = 0; a < probe.attributes(); ++a) {
    AttributeScore sc;
    sc.name = probe.attribute_names[static_cast<std::size_t>(a)];
    sc.fitted = probe.fitted[static_cast<std::size_t>(a)];
    const Labels y = attrs.labels.col(attrs.index_of(sc.name));
    if (sc.fitted) {
      const Eigen::VectorXi pred = (s.col(a).array() > 0.0).cast<int>();
      sc.accuracy = accuracy(pred, y);
      const Index pos = y.sum();
      if (pos > 0 && pos < y.size()) sc.auc = auc(s.col(a), y);
      acc_sum += sc.accuracy;
      ++acc_count;
    } else {
      rep.skipped.push_back(sc.name);
    }
    rep.attributes.push_back(sc);
  }
  rep.mean_accuracy = acc_count ? acc_sum / static_cast<double>(acc_count) : 0.0;
  return rep;
}

struct ProbeResult {
  LinearProbe probe;
  ProbeReport report;
};

/// Fits the shared PCA + scaling front end on train, one logistic classifier
/// per attribute, and evaluates on test. Attributes constant on the train
/// split are skipped and flagged.
inline ProbeResult probe_all(const LatentMatrix& train, const LatentMatrix& test, const AttributeTable& train_attrs,
                             const AttributeTable& test_attrs, const ProbeOptions& opt = {}) {
  if (train.rows() != train_attrs.rows()) throw AlignmentError("train latents and attributes differ in row count");
  if (test.rows() != test_attrs.rows()) throw AlignmentError("test latents and attributes differ in row count");
  if (train.cols() != test.cols()) throw ShapeError("train and test latents differ in dimension");
  if (train.rows() < 2) throw InsufficientData("probe needs at least 2 training rows");

  const Index d = train.cols();
  const Index requested = opt.pca_k > 0 ? opt.pca_k : default_pca_k(d);
  const Matrix centred = center_columns(train.data());
  const Index rank = numerical_rank(thin_svd(centred).singularValues(), opt.rank_tol);
  if (rank < 1) throw RankError("training latents have zero variance");
  const Index k = std::min({requested, train.rows() - 1, d, rank});

  ProbeResult out;
  LinearProbe& probe = out.probe;
  probe.attribute_names = train_attrs.names;
  probe.l2_lambda = opt.l2_lambda;
  probe.pca = fit_pca(train.data(), k);
  const Matrix scores = probe.pca.transform(train.data());
  probe.scaler = fit_standardize(scores);
  const Matrix feats = apply_standardize(scores, probe.scaler);

  const Index attrs = train_attrs.attributes();
  probe.weights = Matrix::Zero(attrs, k);
  probe.biases = Vector::Zero(attrs);
  probe.fitted.assign(static_cast<std::size_t>(attrs), false);
  std::vector<LogisticFit> fits(static_cast<std::size_t>(attrs));
  parallel_for(static_cast<std::size_t>(attrs), [&](std::size_t a) {
    const Labels y = train_attrs.labels.col(static_cast<Index>(a));
    const Index pos = y.sum();
    if (pos == 0 || pos == y.size()) {
      probe.biases(static_cast<Index>(a)) = pos == 0 ? -1.0 : 1.0;
      return;
    }
    fits[a] = fit_logistic(feats, y, {opt.l2_lambda, opt.max_iters, opt.grad_tol});
    probe.weights.row(static_cast<Index>(a)) = fits[a].w.transpose();
    probe.biases(static_cast<Index>(a)) = fits[a].b;
    probe.fitted[a] = true;
  });

  out.report = evaluate_probe(probe, test.data(), test_attrs);
  for (std::size_t a = 0; a < fits.size(); ++a) {
    out.report.attributes[a].grad_norm = fits[a].grad_norm;
    out.report.attributes[a].iterations = fits[a].iterations;
    out.report.attributes[a].converged = fits[a].converged;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence: LAT1 matrices plus a JSON sidecar in a directory.
// ---------------------------------------------------------------------------

inline void save_probe(const LinearProbe& p, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto row = [](const Vector& v) { return Matrix(v.transpose()); };
  write_lat1(p.weights, dir / "weights.lat1");
  write_lat1(row(p.biases), dir / "biases.lat1");
  write_lat1(p.pca.components, dir / "pca_components.lat1");
  write_lat1(row(p.pca.mean), dir / "pca_mean.lat1");
  write_lat1(row(p.pca.explained_variance), dir / "pca_explained_variance.lat1");
  write_lat1(row(p.scaler.mean), dir / "scaler_mean.lat1");
  write_lat1(row(p.scaler.std), dir / "scaler_std.lat1");
  nlohmann::json j;
  j["format"] = "une-probe";
  j["version"] = 1;
  j["attribute_names"] = p.attribute_names;
  j["fitted"] = std::vector<bool>(p.fitted.begin(), p.fitted.end());
  j["l2_lambda"] = p.l2_lambda;
  j["pca_k"] = p.pca.k();
  j["input_dim"] = p.pca.d();
  j["files"] = {{"weights", "weights.lat1"},
                {"biases", "biases.lat1"},
                {"pca_components", "pca_components.lat1"},
                {"pca_mean", "pca_mean.lat1"},
                {"pca_explained_variance", "pca_explained_variance.lat1"},
                {"scaler_mean", "scaler_mean.lat1"},
                {"scaler_std", "scaler_std.lat1"}};
  detail::write_file_bytes(dir / "probe.json", j.dump(2) + "\n");
}

inline LinearProbe load_probe(const std::filesystem::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file_bytes(dir / "probe.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("probe.json: ") + e.what());
  }
  LinearProbe p;
  try {
    p.attribute_names = j.at("attribute_names").get<std::vector<std::string>>();
    p.fitted = j.at("fitted").get<std::vector<bool>>();
    p.l2_lambda = j.at("l2_lambda").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("probe.json: ") + e.what());
  }
  auto vec = [&](const char* name) -> Vector { return read_lat1(dir / name).row(0).transpose(); };
  p.weights = read_lat1(dir / "weights.lat1");
  p.biases = vec("biases.lat1");
  p.pca.components = read_lat1(dir / "pca_components.lat1");
  p.pca.mean = vec("pca_mean.lat1");
  p.pca.explained_variance = vec("pca_explained_variance.lat1");
  p.scaler.mean = vec("scaler_mean.lat1");
  p.scaler.std = vec("scaler_std.lat1");
  const auto a = static_cast<Index>(p.attribute_names.size());
  if (p.weights.rows() != a || p.biases.size() != a || p.fitted.size() != p.attribute_names.size() ||
      p.weights.cols() != p.pca.k() || p.pca.mean.size() != p.pca.d() || p.scaler.mean.size() != p.pca.k() ||
      p.scaler.std.size() != p.pca.k()) {
    throw FormatError("probe files have inconsistent shapes");
  }
  return p;
}

}  // namespace une
