#pragma once

#include "blindsr2d/operators.hpp"
#include "blindsr2d/signal.hpp"

#include <algorithm>
#include <initializer_list>
#include <random>
#include <string>

namespace blindsr2d {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

inline std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  return h;
}

using Rng = std::mt19937_64;

// Circularly symmetric complex normal with total variance `var`.
inline cd complex_normal(Rng& gen, double var = 1.0) {
  std::normal_distribution<double> nd(0.0, std::sqrt(var / 2.0));
  const double re = nd(gen);
  const double im = nd(gen);
  return {re, im};
}

enum class SubspaceKind { gaussian, rademacher, pca_pulse };

inline SubspaceKind parse_subspace_kind(const std::string& s) {
  if (s == "gaussian") return SubspaceKind::gaussian;
  if (s == "rademacher") return SubspaceKind::rademacher;
  if (s == "pca_pulse") return SubspaceKind::pca_pulse;
  throw InvalidArgument("unknown subspace kind: " + s);
}

inline std::string to_string(SubspaceKind k) {
  switch (k) {
    case SubspaceKind::gaussian: return "gaussian";
    case SubspaceKind::rademacher: return "rademacher";
    case SubspaceKind::pca_pulse: return "pca_pulse";
  }
  return "?";
}

inline constexpr int kPulseVariances = 10;

// Gaussian pulses sampled at t = (p + 1/2)/L, one column per variance 0.1, 0.2, ..., 1.0.
inline RMat pulse_dictionary(int N) {
  const int L = 2 * N + 1;
  RMat X(L, kPulseVariances);
  for (int c = 0; c < kPulseVariances; ++c) {
    const double s2 = 0.1 * (c + 1);
    for (int p = -N; p <= N; ++p) {
      const double t = (p + 0.5) / L;
      X(p + N, c) = std::exp(-t * t / (2.0 * s2)) / std::sqrt(2.0 * kPi * s2);
    }
  }
  return X;
}

inline Subspace gen_subspace(const ProblemDims& dims, SubspaceKind kind, std::uint64_t seed) {
  Rng gen(seed);
  Subspace s;
  s.D.resize(dims.L, dims.K);
  switch (kind) {
    case SubspaceKind::gaussian:
      for (int j = 0; j < dims.K; ++j)
        for (int i = 0; i < dims.L; ++i) s.D(i, j) = complex_normal(gen);
      break;
    case SubspaceKind::rademacher: {
      std::bernoulli_distribution coin(0.5);
      for (int j = 0; j < dims.K; ++j)
        for (int i = 0; i < dims.L; ++i) s.D(i, j) = coin(gen) ? 1.0 : -1.0;
      break;
    }
    case SubspaceKind::pca_pulse: {
      if (dims.K > kPulseVariances) throw InvalidArgument("pca_pulse: K exceeds the number of pulse variances");
      Eigen::JacobiSVD<RMat> svd(pulse_dictionary(dims.N), Eigen::ComputeThinU);
      s.D = svd.matrixU().leftCols(dims.K).cast<cd>();
      break;
    }
  }
  return s;
}

inline CVec gen_orientation(int K, std::uint64_t seed) {
  if (K < 1) throw InvalidArgument("gen_orientation: K must be positive");
  Rng gen(seed);
  CVec h(K);
  for (int i = 0; i < K; ++i) h(i) = complex_normal(gen);
  return h / h.norm();
}

inline constexpr double kMinSeparation = 2.38;

struct SeparationReport {
  bool ok = true;
  double min_sep = std::numeric_limits<double>::infinity();
};

inline SeparationReport check_separation(const std::vector<ShiftPair>& shifts, int N) {
  if (N < 1) throw InvalidArgument("check_separation: N must be positive");
  SeparationReport rep;
  for (size_t a = 0; a < shifts.size(); ++a)
    for (size_t b = a + 1; b < shifts.size(); ++b)
      rep.min_sep = std::min(rep.min_sep, wrap_dist_inf(shifts[a], shifts[b]));
  rep.ok = rep.min_sep >= kMinSeparation / N;
  return rep;
}

// Sequential uniform rejection sampling with restarts, capped at max_attempts draws.
inline std::vector<ShiftPair> gen_shifts(int R, int N, std::uint64_t seed, int max_attempts = 10000) {
  Rng gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double sep = kMinSeparation / N;
  std::vector<ShiftPair> out;
  int stuck = 0;
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < R; ++attempt) {
    const ShiftPair c = ShiftPair::make(u(gen), u(gen));
    bool ok = true;
    for (const auto& s : out) ok = ok && wrap_dist_inf(c, s) >= sep;
    if (ok) {
      out.push_back(c);
      stuck = 0;
    } else if (++stuck >= 200) {
      out.clear();
      stuck = 0;
    }
  }
  if (static_cast<int>(out.size()) < R)
    throw PackingInfeasible("gen_shifts: could not place " + std::to_string(R) + " separated shifts at N=" +
                            std::to_string(N));
  return out;
}

// y*(p) = sum_j c_j a(r_j)^H Dt_p h_j through the lifting family.
inline SampleVector synth_clean(const LiftingFamily& fam, const GroundTruth& truth) {
  const auto& d = fam.dims();
  truth.validate(d.K);
  SampleVector y = SampleVector::Zero(d.L);
  for (int j = 0; j < truth.R(); ++j) {
    const CVec a = build_atom(truth.shifts[j], d);
    for (int p = -d.N; p <= d.N; ++p)
      y(p + d.N) += truth.amplitudes[j] * a.dot(fam.lifting(p) * truth.orientations[j]);
  }
  return y;
}

inline SampleVector synth_clean(const ProblemDims& dims, const GroundTruth& truth, const Subspace& D) {
  if (D.L() != dims.L || D.K() != dims.K) throw DimensionMismatch("synth_clean: D shape does not match dims");
  return synth_clean(LiftingFamily(D, dims), truth);
}

// Direct route: DFT of s_j = D h_j, delay modulation, inverse DFT, Doppler modulation.
inline SampleVector synth_clean_direct(const ProblemDims& dims, const GroundTruth& truth, const Subspace& D) {
  if (D.L() != dims.L || D.K() != dims.K) throw DimensionMismatch("synth_clean: D shape does not match dims");
  truth.validate(dims.K);
  const int N = dims.N, L = dims.L;
  SampleVector y = SampleVector::Zero(L);
  for (int j = 0; j < truth.R(); ++j) {
    const CVec s = D.D * truth.orientations[j];
    const auto& r = truth.shifts[j];
    CVec S(L);
    for (int k = -N; k <= N; ++k) {
      cd acc = 0.0;
      for (int l = -N; l <= N; ++l) acc += s(l + N) * expi(-kTwoPi * k * l / L);
      S(k + N) = acc * expi(-kTwoPi * k * r.tau);
    }
    for (int p = -N; p <= N; ++p) {
      cd acc = 0.0;
      for (int k = -N; k <= N; ++k) acc += S(k + N) * expi(kTwoPi * k * p / L);
      y(p + N) += truth.amplitudes[j] * acc / double(L) * expi(kTwoPi * p * r.f);
    }
  }
  return y;
}

inline SampleVector add_noise(const SampleVector& y_star, double sigma2, std::uint64_t seed) {
  if (sigma2 < 0.0) throw InvalidArgument("add_noise: sigma2 must be nonnegative");
  if (sigma2 == 0.0) return y_star;
  Rng gen(seed);
  SampleVector y = y_star;
  for (int i = 0; i < y.size(); ++i) y(i) += complex_normal(gen, sigma2);
  return y;
}

}  // namespace blindsr2d
