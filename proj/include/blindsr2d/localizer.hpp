#pragma once

#include "blindsr2d/io.hpp"
#include "blindsr2d/operators.hpp"

#include <algorithm>
#include <limits>

namespace blindsr2d {

// f(r) = (1/mu) X*(q) a(r) as a trigonometric polynomial
// f(r) = sum_{a,b} C_i[b][a] e^{-i2pi (a tau + b f)}, one L x L coefficient block per row i.
class DualPolynomial {
 public:
  DualPolynomial(const LiftingFamily& fam, const SampleVector& q, double mu) : N_(fam.dims().N), L_(fam.dims().L) {
    if (!(mu > 0.0)) throw InvalidArgument("dual polynomial: mu must be positive");
    Uq_ = apply_Xadj(fam, q) / mu;
    CMat F(L_, L_);
    for (int x = -N_; x <= N_; ++x)
      for (int a = -N_; a <= N_; ++a) F(x + N_, a + N_) = expi(kTwoPi * x * a / L_);
    const int K = fam.dims().K;
    coeffs_.resize(K);
    for (int i = 0; i < K; ++i) {
      CMat M(L_, L_);  // M(k, l)
      for (int k = -N_; k <= N_; ++k)
        for (int l = -N_; l <= N_; ++l) M(k + N_, l + N_) = Uq_(i, flat_index(k, l, N_));
      coeffs_[i] = F.transpose() * M * F / double(L_ * L_);
    }
  }

  int N() const { return N_; }
  int K() const { return static_cast<int>(coeffs_.size()); }
  const CMat& scaled_adjoint() const { return Uq_; }
  // Coefficient of e^{-i2pi(a tau + b f)} in row i.
  cd coeff(int i, int a, int b) const { return coeffs_[i](b + N_, a + N_); }

  // Value with dt-th tau derivative and df-th f derivative.
  CVec eval(const ShiftPair& r, int dt = 0, int df = 0) const {
    const CVec u = basis(r.tau, dt), v = basis(r.f, df);
    CVec out(K());
    for (int i = 0; i < K(); ++i) out(i) = v.transpose() * coeffs_[i] * u;
    return out;
  }
  // Matrix route (1/mu) X*(q) a(r); used to cross-check the coefficient route.
  CVec eval_matrix(const ShiftPair& r) const {
    ProblemDims d{N_, L_, K(), 0};
    return Uq_ * build_atom(r, d);
  }
  double norm(const ShiftPair& r) const { return eval(r).norm(); }

  // ||f|| over the regular grid {i/G} x {j/G}; entry (i, j) is (tau_i, f_j).
  RMat norm_grid(int G) const {
    CMat U(L_, G);
    for (int i = 0; i < G; ++i) U.col(i) = basis(double(i) / G, 0);
    RMat out = RMat::Zero(G, G);
    for (int c = 0; c < K(); ++c) {
      const CMat V = U.transpose() * coeffs_[c].transpose() * U;  // (tau_i, f_j)
      out += V.cwiseAbs2();
    }
    return out.cwiseSqrt();
  }

 private:
  CVec basis(double x, int order) const {
    CVec e(L_);
    for (int a = -N_; a <= N_; ++a) {
      cd w = expi(-kTwoPi * a * x);
      for (int o = 0; o < order; ++o) w *= cd(0.0, -kTwoPi * a);
      e(a + N_) = w;
    }
    return e;
  }

  int N_, L_;
  CMat Uq_;
  std::vector<CMat> coeffs_;
};

inline CVec eval_dual_poly(const DualPolynomial& p, const ShiftPair& r) { return p.eval(r); }

struct LocalDerivatives {
  double value = 0.0;  // ||f||^2
  Eigen::Vector2d grad;
  Eigen::Matrix2d hess;
};

// Gradient and Hessian of ||f(r)||^2 in (tau, f).
inline LocalDerivatives norm2_derivatives(const DualPolynomial& p, const ShiftPair& r) {
  const CVec f = p.eval(r), ft = p.eval(r, 1, 0), ff = p.eval(r, 0, 1);
  const CVec ftt = p.eval(r, 2, 0), fff = p.eval(r, 0, 2), ftf = p.eval(r, 1, 1);
  LocalDerivatives d;
  d.value = f.squaredNorm();
  d.grad << 2.0 * f.dot(ft).real(), 2.0 * f.dot(ff).real();
  d.hess(0, 0) = 2.0 * (ft.squaredNorm() + f.dot(ftt).real());
  d.hess(1, 1) = 2.0 * (ff.squaredNorm() + f.dot(fff).real());
  d.hess(0, 1) = d.hess(1, 0) = 2.0 * (ft.dot(ff).real() + f.dot(ftf).real());
  return d;
}

struct LocateOptions {
  double coarse_step = 1e-2;
  double fine_step = 1e-4;
  double peak_tol = 1e-2;
  double merge_radius = 0.0;  // 0 selects 0.5/N
  int max_newton = 50;
};

struct Peak {
  ShiftPair r;
  double norm = 0.0;
};

// Newton ascent on ||f||^2 with a pattern-ascent fallback when the step fails.
inline Peak refine_peak(const DualPolynomial& p, ShiftPair r, const LocateOptions& opt) {
  double cur = p.norm(r);
  for (int it = 0; it < opt.max_newton; ++it) {
    const auto d = norm2_derivatives(p, r);
    Eigen::Vector2d step = Eigen::Vector2d::Zero();
    bool newton_ok = false;
    if (d.hess.determinant() > 0.0 && d.hess(0, 0) < 0.0) {
      step = -d.hess.ldlt().solve(d.grad);
      newton_ok = step.allFinite() && step.cwiseAbs().maxCoeff() <= opt.coarse_step;
    }
    if (!newton_ok) break;
    const ShiftPair cand = ShiftPair::make(r.tau + step(0), r.f + step(1));
    const double v = p.norm(cand);
    if (v + 1e-15 < cur) break;
    r = cand;
    cur = v;
    if (step.cwiseAbs().maxCoeff() < opt.fine_step * 1e-3) return {r, cur};
  }
  double best = cur;
  r = pattern_ascent([&](double t, double f) { return p.norm({t, f}); }, r, opt.coarse_step / 2, opt.fine_step * 1e-3,
                     best);
  return {r, best};
}

// Coarse-grid local maxima of ||f||, refined, kept when within peak_tol of 1, merged.
inline std::vector<Peak> locate_shifts(const DualPolynomial& p, const LocateOptions& opt = {}) {
  if (!(opt.coarse_step >= opt.fine_step) || !(opt.fine_step > 0.0))
    throw InvalidArgument("locate_shifts: need coarse_step >= fine_step > 0");
  const int G = std::max(4, static_cast<int>(std::lround(1.0 / opt.coarse_step)));
  const RMat g = p.norm_grid(G);
  std::vector<Peak> cands;
  for (int i = 0; i < G; ++i)
    for (int j = 0; j < G; ++j) {
      const double v = g(i, j);
      if (v < 1.0 - 2.0 * opt.peak_tol - 0.1) continue;
      bool is_max = true;
      for (int di = -1; di <= 1 && is_max; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          if (!di && !dj) continue;
          if (g((i + di + G) % G, (j + dj + G) % G) > v) {
            is_max = false;
            break;
          }
        }
      if (is_max) cands.push_back({{double(i) / G, double(j) / G}, v});
    }
  std::vector<Peak> refined;
  for (const auto& c : cands) {
    const Peak pk = refine_peak(p, c.r, opt);
    if (pk.norm >= 1.0 - opt.peak_tol) refined.push_back(pk);
  }
  std::sort(refined.begin(), refined.end(), [](const Peak& a, const Peak& b) { return a.norm > b.norm; });
  const double radius = opt.merge_radius > 0.0 ? opt.merge_radius : 0.5 / std::max(1, p.N());
  std::vector<Peak> out;
  for (const auto& pk : refined) {
    bool dup = false;
    for (const auto& o : out) dup = dup || wrap_dist_inf(o.r, pk.r) < radius;
    if (!dup) out.push_back(pk);
  }
  return out;
}

// Global maximizer of ||f||: coarse grid then refinement.
inline Peak global_peak(const DualPolynomial& p, const LocateOptions& opt = {}) {
  const int G = std::max(4, static_cast<int>(std::lround(1.0 / opt.coarse_step)));
  const RMat g = p.norm_grid(G);
  Eigen::Index bi = 0, bj = 0;
  g.maxCoeff(&bi, &bj);
  return refine_peak(p, {double(bi) / G, double(bj) / G}, opt);
}

struct ProductsResult {
  std::vector<CVec> v;
  double residual = 0.0;
  int rank = 0;
};

// Least squares for v_j = c_j h_j in y_hat_p = sum_j a(r_j)^H Dt_p v_j.
inline ProductsResult recover_products(const SampleVector& y_hat, const LiftingFamily& fam,
                                       const std::vector<ShiftPair>& shifts) {
  const auto& d = fam.dims();
  if (y_hat.size() != d.L) throw DimensionMismatch("recover_products: y_hat must have length L");
  const int R = static_cast<int>(shifts.size()), K = d.K;
  ProductsResult out;
  if (R == 0) {
    out.residual = y_hat.norm();
    return out;
  }
  if (R * K > d.L) throw RankDeficient("recover_products: R K exceeds L, system is underdetermined");
  CMat A(d.L, R * K);
  std::vector<CVec> atoms;
  for (const auto& r : shifts) atoms.push_back(build_atom(r, d));
  for (int p = -d.N; p <= d.N; ++p) {
    const CMat Dp = fam.lifting(p);
    for (int j = 0; j < R; ++j) A.block(p + d.N, j * K, 1, K) = atoms[j].adjoint() * Dp;
  }
  Eigen::ColPivHouseholderQR<CMat> qr(A);
  qr.setThreshold(1e-10);
  out.rank = static_cast<int>(qr.rank());
  if (out.rank < R * K)
    throw RankDeficient("recover_products: system rank " + std::to_string(out.rank) + " < " + std::to_string(R * K));
  const CVec v = qr.solve(y_hat);
  out.residual = (A * v - y_hat).norm();
  for (int j = 0; j < R; ++j) out.v.push_back(v.segment(j * K, K));
  return out;
}

struct LocalizationResult {
  std::vector<Peak> peaks;
  ProductsResult products;
  int R_hat() const { return static_cast<int>(peaks.size()); }
  std::vector<ShiftPair> shifts() const {
    std::vector<ShiftPair> s;
    for (const auto& p : peaks) s.push_back(p.r);
    return s;
  }
};

inline LocalizationResult localize(const DualPolynomial& p, const SampleVector& y_hat, const LiftingFamily& fam,
                                   const LocateOptions& opt = {}) {
  LocalizationResult out;
  out.peaks = locate_shifts(p, opt);
  out.products = recover_products(y_hat, fam, out.shifts());
  return out;
}

// Minimum-cost assignment on a square cost matrix (shortest augmenting paths).
inline std::vector<int> hungarian(const RMat& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw DimensionMismatch("hungarian: cost must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assign(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j]) assign[p[j] - 1] = j - 1;
  return assign;
}

struct MatchPair {
  int true_index = 0;
  int est_index = 0;
  double shift_error = 0.0;
  double h_match = 0.0;
  double amp_rel_error = 0.0;
};

struct MatchReport {
  std::vector<MatchPair> pairs;
  int misses = 0;
  int false_peaks = 0;
};

// Assignment by wrap-around l2 distance; pairs farther than match_radius are unmatched.
inline MatchReport match_report(const GroundTruth& truth, const std::vector<ShiftPair>& est,
                                const std::vector<CVec>& products, double match_radius) {
  const int R = truth.R(), E = static_cast<int>(est.size());
  MatchReport rep;
  const int n = std::max(R, E);
  if (n == 0) return rep;
  const double big = 10.0;
  RMat cost = RMat::Constant(n, n, big);
  for (int a = 0; a < R; ++a)
    for (int b = 0; b < E; ++b) cost(a, b) = wrap_dist_l2(truth.shifts[a], est[b]);
  const auto assign = hungarian(cost);
  int matched = 0;
  for (int a = 0; a < R; ++a) {
    const int b = assign[a];
    if (b < 0 || b >= E || cost(a, b) > match_radius) continue;
    MatchPair mp{a, b, cost(a, b), 0.0, 0.0};
    if (b < static_cast<int>(products.size())) {
      const CVec& v = products[b];
      const double nv = v.norm();
      if (nv > 0.0) mp.h_match = std::abs(truth.orientations[a].dot(v)) / nv;
      const double ca = std::abs(truth.amplitudes[a]);
      if (ca > 0.0) mp.amp_rel_error = std::abs(nv - ca) / ca;
    }
    rep.pairs.push_back(mp);
    ++matched;
  }
  rep.misses = R - matched;
  rep.false_peaks = E - matched;
  return rep;
}

// Localization CSV: j,tau_hat,f_hat,peak_norm,c_abs,match_metric (match_metric empty if unmatched).
inline void write_localization_csv(std::ostream& os, const LocalizationResult& res, const MatchReport* match) {
  os << "j,tau_hat,f_hat,peak_norm,c_abs,match_metric\n";
  for (int j = 0; j < res.R_hat(); ++j) {
    const double c = j < static_cast<int>(res.products.v.size()) ? res.products.v[j].norm() : 0.0;
    os << j << ',' << fmt(res.peaks[j].r.tau) << ',' << fmt(res.peaks[j].r.f) << ',' << fmt(res.peaks[j].norm) << ','
       << fmt(c) << ',';
    if (match)
      for (const auto& mp : match->pairs)
        if (mp.est_index == j) os << fmt(mp.h_match);
    os << '\n';
  }
}

inline void write_grid_csv(std::ostream& os, const DualPolynomial& p, double step) {
  const int G = std::max(4, static_cast<int>(std::lround(1.0 / step)));
  const RMat g = p.norm_grid(G);
  os << "tau,f,fnorm\n";
  for (int i = 0; i < G; ++i)
    for (int j = 0; j < G; ++j) os << fmt(double(i) / G) << ',' << fmt(double(j) / G) << ',' << fmt(g(i, j)) << '\n';
}

}  // namespace blindsr2d
