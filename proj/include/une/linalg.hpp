#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "une/error.hpp"
#include "une/latent_store.hpp"

namespace une {

/// Thin SVD; BDCSVD switches to Jacobi internally for small blocks.
inline Eigen::BDCSVD<Matrix> thin_svd(const Matrix& m) {
  return Eigen::BDCSVD<Matrix>(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

/// Flips each column so that its largest-magnitude entry is positive
/// (first such entry on ties). Returns the applied signs.
inline Vector fix_column_signs(Matrix& cols) {
  Vector signs = Vector::Ones(cols.cols());
  for (Index c = 0; c < cols.cols(); ++c) {
    Index arg = 0;
    cols.col(c).cwiseAbs().maxCoeff(&arg);
    if (cols(arg, c) < 0) {
      cols.col(c) = -cols.col(c);
      signs(c) = -1.0;
    }
  }
  return signs;
}

/// Number of singular values above rel_tol * s_max.
inline Index numerical_rank(const Vector& singular_values, double rel_tol) {
  if (singular_values.size() == 0) return 0;
  const double smax = singular_values.maxCoeff();
  if (!(smax > 0.0)) return 0;
  return static_cast<Index>((singular_values.array() > rel_tol * smax).count());
}

inline Matrix center_columns(const Matrix& m) { return m.rowwise() - m.colwise().mean(); }

/// Orthonormal basis of span(m) via thin SVD, dropping directions with
/// singular value <= rel_tol * s_max.
inline Matrix orthonormal_basis(const Matrix& m, double rel_tol = 1e-12) {
  const auto svd = thin_svd(m);
  const Index r = numerical_rank(svd.singularValues(), rel_tol);
  return svd.matrixU().leftCols(r);
}

/// Principal angles (radians, ascending) between span(a) and span(b).
/// Small angles come from the sines and large ones from the cosines, which
/// keeps both ends accurate.
inline Vector principal_angles(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("principal angles need the same ambient dimension");
  const Matrix qa = orthonormal_basis(a);
  const Matrix qb = orthonormal_basis(b);
  const Index k = std::min(qa.cols(), qb.cols());
  if (k == 0) return Vector();
  const Matrix cross = qa.transpose() * qb;
  const Vector cosines = Eigen::JacobiSVD<Matrix>(cross).singularValues();  // descending
  // Residual of the smaller basis against the larger span gives the sines.
  const Matrix& small = qa.cols() <= qb.cols() ? qa : qb;
  const Matrix& large = qa.cols() <= qb.cols() ? qb : qa;
  const Matrix resid = small - large * (large.transpose() * small);
  Vector sines = Eigen::JacobiSVD<Matrix>(resid).singularValues();  // descending
  std::sort(sines.data(), sines.data() + sines.size());              // ascending
  Vector angles(k);
  for (Index i = 0; i < k; ++i) {
    const double c = std::clamp(cosines(i), 0.0, 1.0);
    const double s = std::clamp(sines(i), 0.0, 1.0);
    angles(i) = c > std::numbers::sqrt2 / 2.0 ? std::asin(s) : std::acos(c);
  }
  return angles;
}

/// Cosine similarity; 0 when either vector is zero.
template <class A, class B>
double cosine_similarity(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  const double nx = x.norm(), ny = y.norm();
  if (nx == 0.0 || ny == 0.0) return 0.0;
  return std::clamp(x.dot(y) / (nx * ny), -1.0, 1.0);
}

}  // namespace une
