#pragma once

#include "blindsr2d/signal.hpp"

#include <random>

namespace blindsr2d {

// Lifting matrices Dt_p (L^2 x K) with row (k,l) = e^{i2pi pk/L} d_{(p-l) mod L}^H.
class LiftingFamily {
 public:
  static constexpr int kCacheMaxL = 31;

  LiftingFamily(const Subspace& sub, const ProblemDims& dims) : sub_(sub), dims_(dims) {
    if (sub.L() != dims.L || sub.K() != dims.K) throw DimensionMismatch("lifting: D shape does not match dims");
    if (dims.L <= kCacheMaxL) {
      cache_.reserve(dims.L);
      for (int p = -dims.N; p <= dims.N; ++p) cache_.push_back(compute(p));
    }
  }

  const ProblemDims& dims() const { return dims_; }
  const Subspace& subspace() const { return sub_; }
  const CMat& D() const { return sub_.D; }

  CMat lifting(int p) const {
    if (!cache_.empty()) return cache_[p + dims_.N];
    return compute(p);
  }

  cd entry(int p, int k, int l, int i) const {
    const int N = dims_.N;
    return expi(kTwoPi * p * k / dims_.L) * sub_.D(wrap_index(p - l, N) + N, i);
  }

 private:
  CMat compute(int p) const {
    const int N = dims_.N, L = dims_.L;
    CMat Dp(L * L, dims_.K);
    for (int k = -N; k <= N; ++k) {
      const cd ph = expi(kTwoPi * p * k / L);
      for (int l = -N; l <= N; ++l) Dp.row(flat_index(k, l, N)) = ph * sub_.D.row(wrap_index(p - l, N) + N);
    }
    return Dp;
  }

  Subspace sub_;
  ProblemDims dims_;
  std::vector<CMat> cache_;
};

inline LiftingFamily build_lifting(const Subspace& D, const ProblemDims& dims) { return LiftingFamily(D, dims); }

// [X(U)]_p = Tr(Dt_p U).
inline SampleVector apply_X(const LiftingFamily& fam, const CMat& U) {
  const auto& d = fam.dims();
  if (U.rows() != d.K || U.cols() != d.L2()) throw DimensionMismatch("apply_X: U must be K x L^2");
  SampleVector y(d.L);
  for (int p = -d.N; p <= d.N; ++p) {
    const CMat Dp = fam.lifting(p);
    y(p + d.N) = (Dp.transpose().cwiseProduct(U)).sum();
  }
  return y;
}

// X*(q) = sum_p q_p Dt_p^H, a K x L^2 matrix.
inline CMat apply_Xadj(const LiftingFamily& fam, const SampleVector& q) {
  const auto& d = fam.dims();
  if (q.size() != d.L) throw DimensionMismatch("apply_Xadj: q must have length L");
  CMat U = CMat::Zero(d.K, d.L2());
  for (int p = -d.N; p <= d.N; ++p) {
    if (q(p + d.N) == cd(0.0)) continue;
    U.noalias() += q(p + d.N) * fam.lifting(p).adjoint();
  }
  return U;
}

struct IdentityViolation : Error {
  using Error::Error;
};

// Returns L ||D||_F^2 after checking X(X*(q)) = L ||D||_F^2 q on random probes.
inline double xxadj_diag(const LiftingFamily& fam, int probes = 3, double tol = 1e-10) {
  const auto& d = fam.dims();
  const double u = d.L * fam.subspace().fro2();
  std::mt19937_64 gen(0x5eedULL);
  std::normal_distribution<double> nd;
  for (int t = 0; t < probes; ++t) {
    SampleVector q(d.L);
    for (int i = 0; i < d.L; ++i) q(i) = {nd(gen), nd(gen)};
    const SampleVector back = apply_X(fam, apply_Xadj(fam, q));
    const double err = (back - u * q).norm() / (u * q.norm());
    if (!(err <= tol))
      throw IdentityViolation("xxadj_diag: X X* deviates from scaled identity, relative error " + std::to_string(err));
  }
  return u;
}

struct DualNormResult {
  double value = 0.0;
  double certified_upper = 0.0;
  ShiftPair argmax;
  double refined_value = 0.0;
};

// Evaluates ||C a(r)||_2 using the separable structure a = af (x) at.
class AtomNormEvaluator {
 public:
  AtomNormEvaluator(const CMat& C, int N) : C_(C), N_(N), L_(2 * N + 1) {}

  // Contracts the l index against the tau kernel: K x L matrix over k.
  CMat contract_tau(double tau) const {
    RVec dt(L_);
    for (int l = -N_; l <= N_; ++l) dt(l + N_) = dirichlet(double(l) / L_ - tau, N_).real();
    CMat B(C_.rows(), L_);
    for (int k = -N_; k <= N_; ++k) B.col(k + N_) = C_.middleCols((k + N_) * L_, L_) * dt;
    return B;
  }
  RVec f_kernel(double f) const {
    RVec df(L_);
    for (int k = -N_; k <= N_; ++k) df(k + N_) = dirichlet(double(k) / L_ - f, N_).real();
    return df;
  }
  double norm_at(double tau, double f) const { return (contract_tau(tau) * f_kernel(f)).norm(); }

 private:
  const CMat& C_;
  int N_, L_;
};

// Local pattern ascent of a smooth periodic objective from a grid maximizer.
template <class F>
ShiftPair pattern_ascent(F&& obj, ShiftPair start, double step, double min_step, double& best) {
  double t = start.tau, f = start.f;
  best = obj(t, f);
  while (step > min_step) {
    bool moved = false;
    for (auto [dt, df] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}}) {
      const double v = obj(t + dt * step, f + df * step);
      if (v > best) {
        best = v;
        t += dt * step;
        f += df * step;
        moved = true;
        break;
      }
    }
    if (!moved) step *= 0.5;
  }
  return ShiftPair::make(t, f);
}

// Grid maximum of ||C a(r)||_2 with the grid-inflation bound. The inflation
// (1 - 4 pi N / M)^{-1} bounds the squared supremum, hence the square root.
inline DualNormResult dual_atomic_norm(const LiftingFamily& fam, const CMat& C, int grid_M) {
  const int N = fam.dims().N;
  if (C.rows() != fam.dims().K || C.cols() != fam.dims().L2())
    throw DimensionMismatch("dual_atomic_norm: C must be K x L^2");
  if (grid_M <= 4.0 * kPi * N) throw InvalidArgument("dual_atomic_norm: grid too coarse, need grid_M > 4 pi N");
  AtomNormEvaluator ev(C, N);
  std::vector<RVec> fk(grid_M);
  for (int j = 0; j < grid_M; ++j) fk[j] = ev.f_kernel(double(j) / grid_M);
  DualNormResult out;
  double best = -1.0;
  for (int i = 0; i < grid_M; ++i) {
    const CMat B = ev.contract_tau(double(i) / grid_M);
    for (int j = 0; j < grid_M; ++j) {
      const double v = (B * fk[j]).squaredNorm();
      if (v > best) {
        best = v;
        out.argmax = {double(i) / grid_M, double(j) / grid_M};
      }
    }
  }
  out.value = std::sqrt(std::max(best, 0.0));
  out.certified_upper = out.value / std::sqrt(1.0 - 4.0 * kPi * N / grid_M);
  double refined = out.value;
  if (out.value > 0.0)
    out.argmax = pattern_ascent([&](double t, double f) { return ev.norm_at(t, f); }, out.argmax,
                                0.5 / grid_M, 1e-12, refined);
  out.refined_value = refined;
  return out;
}

inline int default_grid_M(int N) { return std::max(8, static_cast<int>(std::ceil(5.0 * kPi * N))); }

}  // namespace blindsr2d
