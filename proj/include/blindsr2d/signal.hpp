#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace blindsr2d {

using cd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct InvalidArgument : Error {
  using Error::Error;
};
struct PackingInfeasible : Error {
  using Error::Error;
};
struct RankDeficient : Error {
  using Error::Error;
};
struct SingularSystem : Error {
  double condition = 0.0;
  SingularSystem(const std::string& what, double cond) : Error(what), condition(cond) {}
};
struct NumericalFailure : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

inline cd expi(double theta) { return {std::cos(theta), std::sin(theta)}; }

// Sizes of one problem instance; L = 2N+1 samples and L^2 lifted columns.
struct ProblemDims {
  int N = 0;
  int L = 1;
  int K = 1;
  int R = 0;

  static ProblemDims make(int N, int K, int R) {
    ProblemDims d{N, 2 * N + 1, K, R};
    d.validate();
    return d;
  }
  void validate() const {
    if (N < 0 || L != 2 * N + 1) throw InvalidArgument("dims: L must equal 2N+1 with N >= 0");
    if (K < 1 || K > L) throw InvalidArgument("dims: K must lie in [1, L]");
    if (R < 0) throw InvalidArgument("dims: R must be nonnegative");
  }
  int L2() const { return L * L; }
};

inline double wrap01(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

// Time-frequency shift on the unit torus.
struct ShiftPair {
  double tau = 0.0;
  double f = 0.0;

  static ShiftPair make(double tau, double f) { return {wrap01(tau), wrap01(f)}; }
};

inline double wrap_dist(double a, double b) {
  double d = std::abs(wrap01(a) - wrap01(b));
  return std::min(d, 1.0 - d);
}

inline double wrap_dist_inf(const ShiftPair& a, const ShiftPair& b) {
  return std::max(wrap_dist(a.tau, b.tau), wrap_dist(a.f, b.f));
}

inline double wrap_dist_l2(const ShiftPair& a, const ShiftPair& b) {
  return std::hypot(wrap_dist(a.tau, b.tau), wrap_dist(a.f, b.f));
}

// Reduces an integer index into -N..N modulo L.
inline int wrap_index(int m, int N) {
  const int L = 2 * N + 1;
  int r = ((m + N) % L + L) % L;
  return r - N;
}

struct GroundTruth {
  std::vector<ShiftPair> shifts;
  std::vector<cd> amplitudes;
  std::vector<CVec> orientations;

  int R() const { return static_cast<int>(shifts.size()); }
  void validate(int K) const {
    if (amplitudes.size() != shifts.size() || orientations.size() != shifts.size())
      throw DimensionMismatch("ground truth: shifts, amplitudes and orientations differ in length");
    for (const auto& h : orientations) {
      if (h.size() != K) throw DimensionMismatch("ground truth: orientation length != K");
      if (std::abs(h.norm() - 1.0) > 1e-12) throw InvalidArgument("ground truth: orientation not unit norm");
    }
  }
};

// Known L x K subspace. Storage row l+N holds d_l^H.
struct Subspace {
  CMat D;

  int L() const { return static_cast<int>(D.rows()); }
  int K() const { return static_cast<int>(D.cols()); }
  int N() const { return (L() - 1) / 2; }
  // d_l as a column K-vector.
  CVec d(int l) const { return D.row(wrap_index(l, N()) + N()).adjoint(); }
  double fro2() const { return D.squaredNorm(); }
};

// Sample vector indexed p = -N..N at storage p+N.
using SampleVector = CVec;

// (1/L) sum_{r=-N..N} e^{i 2 pi t r}; real because the sum is symmetric.
inline cd dirichlet(double t, int N) {
  if (N < 0) throw InvalidArgument("dirichlet: N must be nonnegative");
  double s = 1.0;
  for (int r = 1; r <= N; ++r) s += 2.0 * std::cos(kTwoPi * t * r);
  return {s / (2 * N + 1), 0.0};
}

inline int flat_index(int k, int l, int N) { return (k + N) * (2 * N + 1) + (l + N); }

// a(r) with entry (k,l) = D_N(l/L - tau) D_N(k/L - f), k-major flattening.
inline CVec build_atom(const ShiftPair& r, const ProblemDims& dims) {
  const int N = dims.N, L = dims.L;
  std::vector<double> dt(L), df(L);
  for (int m = -N; m <= N; ++m) {
    dt[m + N] = dirichlet(double(m) / L - r.tau, N).real();
    df[m + N] = dirichlet(double(m) / L - r.f, N).real();
  }
  CVec a(L * L);
  for (int k = -N; k <= N; ++k)
    for (int l = -N; l <= N; ++l) a(flat_index(k, l, N)) = dt[l + N] * df[k + N];
  return a;
}

}  // namespace blindsr2d
