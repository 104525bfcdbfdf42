#pragma once

#include "blindsr2d/operators.hpp"
#include "blindsr2d/psd.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace blindsr2d {

// Multilevel-Toeplitz trace functionals on an L^2 x L^2 matrix indexed (p,k), p outer.
// Diagonal (dp,dk) collects entries with p - p' = dp and k - k' = dk.
class ToeplitzConstraintSet {
 public:
  explicit ToeplitzConstraintSet(int L) : L_(L), W_(2 * L - 1), id_(size_t(L) * L * L * L), count_(W_ * W_, 0) {
    const int n = L * L;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const int d = diag_of(a, b);
        id_[size_t(b) * n + a] = d;
        ++count_[d];
      }
  }

  int L() const { return L_; }
  int num_diagonals() const { return W_ * W_; }
  int diag_index(int dp, int dk) const { return (dp + L_ - 1) * W_ + (dk + L_ - 1); }
  double target(int d) const { return d == diag_index(0, 0) ? 1.0 : 0.0; }
  int count(int d) const { return count_[d]; }

  std::vector<cd> sums(const CMat& Q) const {
    const int n = L_ * L_;
    std::vector<cd> s(W_ * W_, 0.0);
    const cd* q = Q.data();
    for (size_t i = 0; i < size_t(n) * n; ++i) s[id_[i]] += q[i];
    return s;
  }

  cd functional(const CMat& Q, int dp, int dk) const { return sums(Q)[diag_index(dp, dk)]; }

  // Euclidean projection onto {Q : diagonal sums equal targets}.
  void project(CMat& Q, double target_scale = 1.0) const {
    const auto s = sums(Q);
    std::vector<cd> shift(W_ * W_);
    for (int d = 0; d < W_ * W_; ++d) shift[d] = (s[d] - target_scale * target(d)) / double(count_[d]);
    const int n = L_ * L_;
    cd* q = Q.data();
    for (size_t i = 0; i < size_t(n) * n; ++i) q[i] -= shift[id_[i]];
  }

  double max_violation(const CMat& Q) const {
    const auto s = sums(Q);
    double v = 0.0;
    for (int d = 0; d < W_ * W_; ++d) v = std::max(v, std::abs(s[d] - target(d)));
    return v;
  }

 private:
  int diag_of(int a, int b) const {
    const int p = a / L_, k = a % L_, pp = b / L_, kk = b % L_;
    return diag_index(p - pp, k - kk);
  }
  int L_, W_;
  std::vector<int> id_;
  std::vector<int> count_;
};

// Qhat(q)[:, (p,k)] = q_p g_{pk}, g_{pk} = (1/(mu L)) e^{i2pi kp/L} sum_l d_l e^{-i2pi kl/L}.
class QhatMap {
 public:
  QhatMap(const LiftingFamily& fam, double mu) : N_(fam.dims().N), L_(fam.dims().L), K_(fam.dims().K) {
    G_.resize(K_, L_ * L_);
    const auto& sub = fam.subspace();
    for (int k = -N_; k <= N_; ++k) {
      CVec dhat = CVec::Zero(K_);
      for (int l = -N_; l <= N_; ++l) dhat += sub.d(l) * expi(-kTwoPi * k * l / L_);
      for (int p = -N_; p <= N_; ++p) G_.col(column(p, k)) = expi(kTwoPi * k * p / L_) / (mu * L_) * dhat;
    }
    gnorm2_.resize(L_);
    for (int p = 0; p < L_; ++p) gnorm2_(p) = G_.middleCols(p * L_, L_).squaredNorm();
  }

  int column(int p, int k) const { return (p + N_) * L_ + (k + N_); }
  const CMat& G() const { return G_; }
  const RVec& gnorm2() const { return gnorm2_; }

  CMat apply(const SampleVector& q) const {
    CMat Qh(K_, L_ * L_);
    for (int p = 0; p < L_; ++p) Qh.middleCols(p * L_, L_) = q(p) * G_.middleCols(p * L_, L_);
    return Qh;
  }
  // Adjoint map: (Qhat^* W)_p = sum_k g_{pk}^H W[:, (p,k)].
  SampleVector adjoint(const CMat& W) const {
    SampleVector out(L_);
    for (int p = 0; p < L_; ++p) out(p) = G_.middleCols(p * L_, L_).cwiseProduct(W.middleCols(p * L_, L_).conjugate()).sum();
    out = out.conjugate().eval();
    return out;
  }

 private:
  int N_, L_, K_;
  CMat G_;
  RVec gnorm2_;
};

struct SDPProblem {
  SampleVector y;
  const LiftingFamily* fam = nullptr;
  double mu = 1.0;
  ProblemDims dims;
  QhatMap qhat;
  ToeplitzConstraintSet toeplitz;
};

inline SDPProblem assemble(const SampleVector& y, const LiftingFamily& fam, double mu) {
  if (!(mu > 0.0)) throw InvalidArgument("assemble: mu must be positive");
  if (y.size() != fam.dims().L) throw DimensionMismatch("assemble: y must have length L");
  return SDPProblem{y, &fam, mu, fam.dims(), QhatMap(fam, mu), ToeplitzConstraintSet(fam.dims().L)};
}

// [[Q, Qhat^H], [Qhat, I_K]].
inline CMat psd_block(const CMat& Q, const CMat& Qh) {
  const Eigen::Index n = Q.rows(), K = Qh.rows();
  CMat B(n + K, n + K);
  B.topLeftCorner(n, n) = Q;
  B.bottomLeftCorner(K, n) = Qh;
  B.topRightCorner(n, K) = Qh.adjoint();
  B.bottomRightCorner(K, K).setIdentity();
  return B;
}

struct SolverConfig {
  double rho = 1.0;
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int max_iter = 50000;
  bool adaptive_rho = true;
  int adapt_interval = 50;
  double adapt_ratio = 10.0;
  double adapt_factor = 2.0;
  // Congruence scaling of the Q block, Q' = s Q; 0 selects s = L^2.
  double block_scale = 0.0;
  double relaxation = 1.6;
  int log_interval = 0;
  std::ostream* log = nullptr;
  int history_stride = 1;
};

enum class SolverStatus { converged, max_iter, infeasible, numerical_failure };

inline std::string to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::converged: return "converged";
    case SolverStatus::max_iter: return "max_iter";
    case SolverStatus::infeasible: return "infeasible";
    case SolverStatus::numerical_failure: return "numerical_failure";
  }
  return "?";
}

struct IterRecord {
  int iter = 0;
  double primal = 0.0;
  double dual = 0.0;
  double objective = 0.0;
  double rho = 0.0;
};

struct SolverResult {
  SampleVector q;
  CMat Q;
  double objective = 0.0;
  SolverStatus status = SolverStatus::max_iter;
  std::vector<IterRecord> history;
  int iterations = 0;
  double wall_time = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double rho = 0.0;
};

inline double dual_objective(const SampleVector& q, const SampleVector& y) {
  return q.dot(y).real() - 0.5 * q.squaredNorm();
}

inline void log_iter(std::ostream& os, const IterRecord& r) {
  os << "iter=" << r.iter << " primal=" << std::setprecision(6) << std::scientific << r.primal << " dual=" << r.dual
     << " objective=" << std::setprecision(10) << r.objective << " rho=" << std::setprecision(4) << r.rho << '\n'
     << std::defaultfloat;
}

// ADMM on the consensus split B(Q,q) = Z with Z PSD and Q on the Toeplitz affine set.
// Iterates live in the congruence-scaled block [[sQ, sqrt(s) Qhat^H], [sqrt(s) Qhat, I]],
// which has the same PSD cone membership and keeps all blocks at comparable magnitude.
inline SolverResult solve(const SDPProblem& pb, const SolverConfig& cfg = {}) {
  if (cfg.max_iter < 1 || !(cfg.eps_abs > 0.0) || !(cfg.eps_rel > 0.0) || !(cfg.rho > 0.0) ||
      !(cfg.relaxation > 0.0 && cfg.relaxation < 2.0) || cfg.block_scale < 0.0)
    throw InvalidArgument("solve: invalid solver configuration");
  const auto t0 = std::chrono::steady_clock::now();
  const int L = pb.dims.L, K = pb.dims.K, n = L * L, m = n + K;
  const double sc = cfg.block_scale > 0.0 ? cfg.block_scale : double(n);
  const double ssc = std::sqrt(sc);
  const RVec gn2 = sc * pb.qhat.gnorm2();
  double rho = cfg.rho;

  CMat Q = CMat::Identity(n, n) * (sc / n);
  SampleVector q = SampleVector::Zero(L);
  CMat Z = psd_block(Q, ssc * pb.qhat.apply(q));
  CMat Lam = CMat::Zero(m, m);
  PsdProjector proj;

  SolverResult res;
  double best_merit = std::numeric_limits<double>::infinity();
  SampleVector best_q = q;
  CMat best_Q = Q;
  double best_p = 0.0, best_d = 0.0;
  int it = 0;
  for (it = 1; it <= cfg.max_iter; ++it) {
    Q = hermitian_part(Z.topLeftCorner(n, n) - Lam.topLeftCorner(n, n));
    pb.toeplitz.project(Q, sc);
    const CMat W = Z.bottomLeftCorner(K, n) - Lam.bottomLeftCorner(K, n);
    const SampleVector gw = ssc * pb.qhat.adjoint(W);
    for (int p = 0; p < L; ++p) q(p) = (pb.y(p) + 2.0 * rho * gw(p)) / (1.0 + 2.0 * rho * gn2(p));

    const CMat B = psd_block(Q, ssc * pb.qhat.apply(q));
    const CMat Bhat = cfg.relaxation * B + (1.0 - cfg.relaxation) * Z;
    const CMat Zold = Z;
    Z = proj.project(Bhat + Lam);
    Lam += Bhat - Z;

    const double rp = (B - Z).norm();
    const double rd = rho * (Z - Zold).norm();
    const double obj = dual_objective(q, pb.y);
    if (!std::isfinite(rp) || !std::isfinite(rd) || !std::isfinite(obj)) {
      res.status = SolverStatus::numerical_failure;
      break;
    }
    const double pscale = std::max(B.norm(), Z.norm());
    const double dscale = rho * Lam.norm();
    const double tol_p = cfg.eps_abs + cfg.eps_rel * pscale;
    const double tol_d = cfg.eps_abs + cfg.eps_rel * dscale;
    const double merit = std::max(rp / tol_p, rd / tol_d);
    if (merit < best_merit) {
      best_merit = merit;
      best_q = q;
      best_Q = Q;
      best_p = rp;
      best_d = rd;
    }
    if (cfg.history_stride > 0 && it % cfg.history_stride == 0) res.history.push_back({it, rp, rd, obj, rho});
    if (cfg.log && cfg.log_interval > 0 && it % cfg.log_interval == 0) log_iter(*cfg.log, {it, rp, rd, obj, rho});
    if (rp <= tol_p && rd <= tol_d) {
      res.status = SolverStatus::converged;
      best_q = q;
      best_Q = Q;
      best_p = rp;
      best_d = rd;
      break;
    }
    if (dscale > 1e12) {
      res.status = SolverStatus::infeasible;
      break;
    }
    if (cfg.adaptive_rho && it % cfg.adapt_interval == 0) {
      // Residual balancing on residuals normalized by their iterate scales.
      const double np = rp / std::max(pscale, 1e-300);
      const double nd = rd / std::max(dscale, 1e-300);
      double f = 1.0;
      if (np > cfg.adapt_ratio * nd) f = cfg.adapt_factor;
      else if (nd > cfg.adapt_ratio * np) f = 1.0 / cfg.adapt_factor;
      if (f != 1.0) {
        rho *= f;
        Lam /= f;
      }
    }
  }
  res.iterations = std::min(it, cfg.max_iter);
  res.q = best_q;
  res.Q = best_Q / sc;
  res.objective = dual_objective(best_q, pb.y);
  res.primal_residual = best_p;
  res.dual_residual = best_d;
  res.rho = rho;
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (cfg.log) {
    *cfg.log << "status=" << to_string(res.status) << " iterations=" << res.iterations
             << " objective=" << std::setprecision(12) << res.objective << " wall_time=" << res.wall_time << '\n';
  }
  return res;
}

struct FeasibilityReport {
  double dual_norm = 0.0;
  double certified_norm = 0.0;
  double margin = 0.0;
  double min_eig = 0.0;
  double toeplitz_violation = 0.0;
  ShiftPair argmax;
};

inline FeasibilityReport check_dual_feasibility(const SolverResult& res, const LiftingFamily& fam, double mu,
                                                int grid_M) {
  FeasibilityReport rep;
  const auto dn = dual_atomic_norm(fam, apply_Xadj(fam, res.q), grid_M);
  rep.dual_norm = dn.value;
  rep.certified_norm = dn.certified_upper;
  rep.margin = mu - dn.certified_upper;
  rep.argmax = dn.argmax;
  if (res.Q.size() > 0) {
    const QhatMap qm(fam, mu);
    rep.min_eig = min_eigenvalue(psd_block(res.Q, qm.apply(res.q)));
    rep.toeplitz_violation = ToeplitzConstraintSet(fam.dims().L).max_violation(res.Q);
  }
  return rep;
}

// Sparse SDP in SDPA layout. Entry (mat, block, i, j, value) uses 1-based indices with
// i <= j and stands for the symmetric pair (i,j), (j,i). Matrix 0 is the objective.
struct SdpaEntry {
  int mat = 0;
  int block = 0;
  int i = 0;
  int j = 0;
  double value = 0.0;
  bool operator==(const SdpaEntry&) const = default;
};

struct SparseSDP {
  std::vector<std::string> comments;
  std::vector<int> blocks;
  std::vector<double> c;
  std::vector<SdpaEntry> entries;
  int m() const { return static_cast<int>(c.size()); }
};

namespace detail {

// Accumulates a linear functional sum coef * Y[block](i, j) over 0-based entries.
class Functional {
 public:
  void add(int block, int i, int j, double coef) {
    if (coef == 0.0) return;
    if (i > j) std::swap(i, j);
    terms_[{block, i, j}] += (i == j) ? coef : 0.5 * coef;
  }
  // Re G_ab and Im G_ab of a Hermitian G read from its real embedding of order 2n.
  void add_re(int block, int n, int a, int b, double coef) {
    add(block, a, b, 0.5 * coef);
    add(block, n + a, n + b, 0.5 * coef);
  }
  void add_im(int block, int n, int a, int b, double coef) {
    add(block, n + a, b, 0.5 * coef);
    add(block, a, n + b, -0.5 * coef);
  }
  void emit(int mat, std::vector<SdpaEntry>& out) const {
    for (const auto& [key, v] : terms_) {
      if (v == 0.0) continue;
      const auto [blk, i, j] = key;
      out.push_back({mat, blk + 1, i + 1, j + 1, v});
    }
  }

 private:
  std::map<std::tuple<int, int, int>, double> terms_;
};

}  // namespace detail

// Real symmetric form of the relaxation, maximize <F0,Y> s.t. <Fi,Y> = ci, Y PSD.
// Block 1 embeds the Hermitian block [[Q, Qhat^H], [Qhat, I_K]]; block 2 is
// [[s, x^T], [x, I_2L]] with x = (Re q, Im q), so s >= ||q||^2 carries the quadratic term.
inline SparseSDP build_sparse_sdp(const SDPProblem& pb) {
  const int L = pb.dims.L, K = pb.dims.K, N = pb.dims.N, n2 = L * L, n = n2 + K;
  SparseSDP sdp;
  sdp.blocks = {2 * n, 2 * L + 1};
  std::vector<detail::Functional> cons;
  auto push = [&](detail::Functional&& f, double rhs) {
    cons.push_back(std::move(f));
    sdp.c.push_back(rhs);
  };
  const int b1 = 0, b2 = 1;

  // Identity block of the Hermitian matrix.
  for (int a = 0; a < K; ++a)
    for (int b = a; b < K; ++b) {
      detail::Functional re;
      re.add_re(b1, n, n2 + a, n2 + b, 1.0);
      push(std::move(re), a == b ? 1.0 : 0.0);
      if (a != b) {
        detail::Functional im;
        im.add_im(b1, n, n2 + a, n2 + b, 1.0);
        push(std::move(im), 0.0);
      }
    }
  // Qhat entries tied to x through the linear map.
  const CMat& G = pb.qhat.G();
  for (int p = -N; p <= N; ++p)
    for (int k = -N; k <= N; ++k) {
      const int col = pb.qhat.column(p, k);
      const int xr = 1 + (p + N), xi = 1 + L + (p + N);
      for (int i = 0; i < K; ++i) {
        const cd g = G(i, col);
        detail::Functional re, im;
        re.add_re(b1, n, n2 + i, col, 1.0);
        re.add(b2, 0, xr, -g.real());
        re.add(b2, 0, xi, g.imag());
        push(std::move(re), 0.0);
        im.add_im(b1, n, n2 + i, col, 1.0);
        im.add(b2, 0, xr, -g.imag());
        im.add(b2, 0, xi, -g.real());
        push(std::move(im), 0.0);
      }
    }
  // Toeplitz trace constraints over one half-plane of diagonals; the rest are conjugates.
  for (int dp = 0; dp <= L - 1; ++dp)
    for (int dk = -(L - 1); dk <= L - 1; ++dk) {
      if (dp == 0 && dk < 0) continue;
      detail::Functional re, im;
      for (int p = 0; p < L; ++p)
        for (int k = 0; k < L; ++k) {
          const int pp = p - dp, kk = k - dk;
          if (pp < 0 || pp >= L || kk < 0 || kk >= L) continue;
          re.add_re(b1, n, p * L + k, pp * L + kk, 1.0);
          im.add_im(b1, n, p * L + k, pp * L + kk, 1.0);
        }
      push(std::move(re), dp == 0 && dk == 0 ? 1.0 : 0.0);
      if (!(dp == 0 && dk == 0)) push(std::move(im), 0.0);
    }
  // Identity tail of block 2.
  for (int a = 1; a <= 2 * L; ++a)
    for (int b = a; b <= 2 * L; ++b) {
      detail::Functional f;
      f.add(b2, a, b, 1.0);
      push(std::move(f), a == b ? 1.0 : 0.0);
    }

  detail::Functional obj;
  obj.add(b2, 0, 0, -0.5);
  for (int p = 0; p < L; ++p) {
    obj.add(b2, 0, 1 + p, pb.y(p).real());
    obj.add(b2, 0, 1 + L + p, pb.y(p).imag());
  }
  obj.emit(0, sdp.entries);
  for (size_t i = 0; i < cons.size(); ++i) cons[i].emit(static_cast<int>(i) + 1, sdp.entries);
  std::ostringstream hdr;
  hdr << "blind 2D super-resolution dual relaxation: N=" << N << " K=" << K << " mu=" << std::setprecision(17) << pb.mu;
  sdp.comments = {hdr.str(), "maximize <F0,Y> subject to <Fi,Y> = ci, Y PSD"};
  return sdp;
}

inline void write_sdpa(std::ostream& os, const SparseSDP& sdp) {
  for (const auto& c : sdp.comments) os << '"' << c << '\n';
  os << sdp.m() << '\n' << sdp.blocks.size() << '\n';
  for (size_t b = 0; b < sdp.blocks.size(); ++b) os << (b ? " " : "") << sdp.blocks[b];
  os << '\n';
  os << std::setprecision(17);
  for (int i = 0; i < sdp.m(); ++i) os << (i ? " " : "") << sdp.c[i];
  os << '\n';
  for (const auto& e : sdp.entries) os << e.mat << ' ' << e.block << ' ' << e.i << ' ' << e.j << ' ' << e.value << '\n';
}

inline SparseSDP read_sdpa(std::istream& is) {
  SparseSDP sdp;
  std::string line;
  auto next = [&]() -> bool {
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      if (line[0] == '"' || line[0] == '*') {
        if (line[0] == '"') sdp.comments.push_back(line.substr(1));
        continue;
      }
      return true;
    }
    return false;
  };
  int m = 0, nb = 0;
  if (!next() || !(std::istringstream(line) >> m)) throw IoError("read_sdpa: missing constraint count");
  if (!next() || !(std::istringstream(line) >> nb)) throw IoError("read_sdpa: missing block count");
  if (!next()) throw IoError("read_sdpa: missing block structure");
  {
    std::istringstream ss(line);
    sdp.blocks.resize(nb);
    for (auto& b : sdp.blocks)
      if (!(ss >> b)) throw IoError("read_sdpa: bad block structure");
  }
  if (!next()) throw IoError("read_sdpa: missing objective vector");
  {
    std::istringstream ss(line);
    sdp.c.resize(m);
    for (auto& v : sdp.c)
      if (!(ss >> v)) throw IoError("read_sdpa: bad objective vector");
  }
  while (next()) {
    std::istringstream ss(line);
    SdpaEntry e;
    if (!(ss >> e.mat >> e.block >> e.i >> e.j >> e.value)) throw IoError("read_sdpa: bad entry line: " + line);
    sdp.entries.push_back(e);
  }
  return sdp;
}

inline void export_problem(const SDPProblem& pb, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("export_problem: cannot open " + path);
  write_sdpa(os, build_sparse_sdp(pb));
  if (!os) throw IoError("export_problem: write failed for " + path);
}

inline SparseSDP import_problem(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("import_problem: cannot open " + path);
  return read_sdpa(is);
}

}  // namespace blindsr2d
