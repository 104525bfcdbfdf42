#pragma once

#include "blindsr2d/signal.hpp"

#include <complex>

#ifndef lapack_complex_float
#define lapack_complex_float std::complex<float>
#endif
#ifndef lapack_complex_double
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

namespace blindsr2d {

inline CMat hermitian_part(const CMat& H) { return 0.5 * (H + H.adjoint()); }

// [[Re H, -Im H], [Im H, Re H]]; its spectrum is that of H with doubled multiplicity.
inline RMat real_embedding(const CMat& H) {
  const Eigen::Index n = H.rows();
  RMat Y(2 * n, 2 * n);
  Y.topLeftCorner(n, n) = H.real();
  Y.bottomRightCorner(n, n) = H.real();
  Y.topRightCorner(n, n) = -H.imag();
  Y.bottomLeftCorner(n, n) = H.imag();
  return Y;
}

struct EigenPairs {
  RVec values;
  CMat vectors;
};

// Eigenpairs of a Hermitian matrix with eigenvalues in (vl, vu]; all pairs when vl >= vu.
inline EigenPairs hermitian_eig(const CMat& H, double vl = 0.0, double vu = 0.0) {
  const lapack_int n = static_cast<lapack_int>(H.rows());
  EigenPairs out;
  if (n == 0) return out;
  CMat A = H;
  RVec w(n);
  CMat Zv(n, n);
  std::vector<lapack_int> isuppz(2 * static_cast<size_t>(n));
  lapack_int m = 0;
  const bool all = !(vl < vu);
  const lapack_int info = LAPACKE_zheevr(LAPACK_COL_MAJOR, 'V', all ? 'A' : 'V', 'L', n, A.data(), n, vl, vu, 0, 0,
                                         0.0, &m, w.data(), Zv.data(), n, isuppz.data());
  if (info == 0) {
    out.values = w.head(m);
    out.vectors = Zv.leftCols(m);
    return out;
  }
  // The relatively robust representation path can fail on tight clusters; fall back to
  // divide and conquer on the full spectrum.
  A = H;
  const lapack_int info2 = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n, A.data(), n, w.data());
  if (info2 != 0) throw NumericalFailure("hermitian eigensolver failed, info=" + std::to_string(info2));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; ++i)
    if (all || (w(i) > vl && w(i) <= vu)) keep.push_back(i);
  out.values.resize(keep.size());
  out.vectors.resize(n, keep.size());
  for (size_t c = 0; c < keep.size(); ++c) {
    out.values(c) = w(keep[c]);
    out.vectors.col(c) = A.col(keep[c]);
  }
  return out;
}

inline double min_eigenvalue(const CMat& H) {
  if (H.rows() == 0) return 0.0;
  const CMat S = hermitian_part(H);
  const lapack_int n = static_cast<lapack_int>(S.rows());
  CMat A = S;
  RVec w(n);
  const lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'L', n, A.data(), n, w.data());
  if (info != 0) throw NumericalFailure("hermitian eigensolver failed, info=" + std::to_string(info));
  return w(0);
}

// Frobenius-nearest PSD matrix by eigenvalue clipping. Only the smaller side of the
// spectrum is computed; `expect_few_positive` picks which side is expected to be small.
class PsdProjector {
 public:
  CMat project(const CMat& H) {
    const CMat S = hermitian_part(H);
    const double bound = S.norm() + 1.0;
    CMat out;
    if (few_positive_) {
      EigenPairs ep = hermitian_eig(S, 0.0, bound);
      out = ep.vectors * ep.values.asDiagonal() * ep.vectors.adjoint();
      positive_ = ep.values.size();
    } else {
      EigenPairs ep = hermitian_eig(S, -bound, 0.0);
      out = S - ep.vectors * ep.values.asDiagonal() * ep.vectors.adjoint();
      positive_ = S.rows() - ep.values.size();
    }
    few_positive_ = 2 * positive_ <= S.rows();
    return hermitian_part(out);
  }
  Eigen::Index last_positive_count() const { return positive_; }

 private:
  bool few_positive_ = true;
  Eigen::Index positive_ = 0;
};

inline CMat psd_project(const CMat& H) {
  if (H.rows() != H.cols()) throw DimensionMismatch("psd_project: matrix must be square");
  PsdProjector p;
  return p.project(H);
}

}  // namespace blindsr2d
