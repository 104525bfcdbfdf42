#pragma once

#include "blindsr2d/certificate.hpp"
#include "blindsr2d/denoiser.hpp"
#include "blindsr2d/localizer.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <thread>

namespace blindsr2d {

inline const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids{"mse_vs_L",    "mse_vs_sigma", "mse_vs_R",   "mse_vs_K",
                                            "pca_dict",    "localization", "randomized", "certificate_audit"};
  return ids;
}

enum class AmplitudeMode { unit, fading, index };
enum class ShiftMode { fixed, ladder, random };

inline AmplitudeMode parse_amplitude_mode(const std::string& s) {
  if (s == "unit") return AmplitudeMode::unit;
  if (s == "fading") return AmplitudeMode::fading;
  if (s == "index") return AmplitudeMode::index;
  throw InvalidArgument("unknown amplitude mode: " + s);
}

// Real and imaginary parts each 0.5 + g^2 with an independent equiprobable sign.
inline cd fading_amplitude(Rng& gen) {
  std::normal_distribution<double> nd;
  std::bernoulli_distribution coin(0.5);
  auto part = [&]() {
    const double g = nd(gen);
    const double v = 0.5 + g * g;
    return coin(gen) ? v : -v;
  };
  const double re = part();
  const double im = part();
  return {re, im};
}

inline double snr_to_sigma2(double snr_db, double signal_power) {
  if (!(signal_power > 0.0)) throw InvalidArgument("snr_to_sigma2: signal power must be positive");
  return signal_power / std::pow(10.0, snr_db / 10.0);
}

enum class MseTransform { by_L, by_sigma2, by_R, by_K, log };

inline MseTransform default_transform(const std::string& experiment) {
  if (experiment == "mse_vs_L" || experiment == "pca_dict" || experiment == "randomized") return MseTransform::by_L;
  if (experiment == "mse_vs_sigma") return MseTransform::by_sigma2;
  if (experiment == "mse_vs_R") return MseTransform::by_R;
  if (experiment == "mse_vs_K") return MseTransform::by_K;
  if (experiment == "localization") return MseTransform::log;
  throw InvalidArgument("scaled_mse: no transform for experiment '" + experiment + "'");
}

struct PointParams {
  int N = 0;
  int K = 1;
  int R = 1;
  double sigma2 = 0.0;
};

inline double scaled_mse(double raw, MseTransform t, const PointParams& pt) {
  if (raw < 0.0) throw InvalidArgument("scaled_mse: raw MSE must be nonnegative");
  switch (t) {
    case MseTransform::by_L: {
      if (pt.N < 2) throw InvalidArgument("scaled_mse: N must be at least 2");
      const double L = 2.0 * pt.N + 1.0;
      return raw * std::pow(L, 1.5) / std::pow(std::log(double(pt.N)), 1.5);
    }
    case MseTransform::by_sigma2:
      if (!(pt.sigma2 > 0.0)) throw InvalidArgument("scaled_mse: sigma2 must be positive");
      return raw / pt.sigma2;
    case MseTransform::by_R:
      if (pt.R < 1) throw InvalidArgument("scaled_mse: R must be positive");
      return raw / std::sqrt(double(pt.R));
    case MseTransform::by_K:
      if (pt.K < 1) throw InvalidArgument("scaled_mse: K must be positive");
      return raw / std::sqrt(std::pow(double(pt.K), 3) * std::log(pt.K + 1.0));
    case MseTransform::log: return std::log(raw);
  }
  return raw;
}

inline double scaled_mse(double raw, const std::string& experiment, const PointParams& pt) {
  return scaled_mse(raw, default_transform(experiment), pt);
}

// One sweep point, fully resolved.
struct PointSpec {
  double value = 0.0;
  PointParams p;
  bool use_snr = false;
  double snr_db = 0.0;
  SubspaceKind subspace = SubspaceKind::gaussian;
  AmplitudeMode amplitudes = AmplitudeMode::unit;
  ShiftMode shift_mode = ShiftMode::fixed;
  std::vector<ShiftPair> shifts;
  std::optional<CVec> fixed_h;
};

struct ExperimentConfig {
  std::string id;
  std::string preset;
  std::vector<double> sweep;
  int trials = 50;
  std::uint64_t seed = 1;
  int workers = 1;
  double lambda = 1.2;
  SolverConfig solver;
  LocateOptions locate;
  std::string out_dir;
  std::vector<PointSpec> points;
  // certificate_audit only.
  int cert_K = 2;
  int cert_R = 1;
  // localization only.
  double success_shift_tol = 2e-3;
  double success_h_match = 0.95;
  bool write_grid = true;
};

inline std::vector<ShiftPair> ladder_shifts(int R, int N) {
  const double zeta = kMinSeparation / N;
  std::vector<ShiftPair> s;
  for (int j = 0; j < R; ++j) s.push_back(ShiftPair::make(0.1 + zeta * j, 0.5 + zeta * j));
  return s;
}

inline std::vector<ShiftPair> parse_shift_list(const std::string& s) {
  const auto v = split(s, ',');
  if (v.size() % 2 != 0) throw InvalidArgument("shifts: expected tau,f pairs");
  std::vector<ShiftPair> out;
  for (size_t i = 0; i < v.size(); i += 2) out.push_back(ShiftPair::make(parse_double(v[i]), parse_double(v[i + 1])));
  return out;
}

inline const std::set<std::string>& experiment_config_keys() {
  static const std::set<std::string> k{
      "experiment", "preset",   "sweep",     "trials",        "seed",          "workers",    "lambda",
      "eps_abs",    "eps_rel",  "max_iter",  "rho",           "relaxation",    "N",          "K",
      "R",          "sigma2",   "snr_db",    "subspace",      "amplitudes",    "shifts",     "coarse_step",
      "fine_step",  "peak_tol", "cert_K",    "cert_R",        "shift_tol",     "h_match_min", "write_grid"};
  return k;
}

// Reference setups per experiment, overridable by config keys.
inline ExperimentConfig make_experiment_config(const std::string& id, const Config& c) {
  if (std::find(experiment_ids().begin(), experiment_ids().end(), id) == experiment_ids().end())
    throw InvalidArgument("unknown experiment: " + id);
  c.check_known(experiment_config_keys());
  ExperimentConfig e;
  e.id = id;
  e.preset = c.str("preset", id == "mse_vs_L" ? "single" : "");
  e.trials = static_cast<int>(c.integer("trials", 50));
  e.seed = static_cast<std::uint64_t>(c.integer("seed", 1));
  e.workers = static_cast<int>(c.integer("workers", 1));
  e.lambda = c.num("lambda", 1.2);
  e.solver.eps_abs = c.num("eps_abs", 1e-6);
  e.solver.eps_rel = c.num("eps_rel", 1e-6);
  e.solver.max_iter = static_cast<int>(c.integer("max_iter", 50000));
  e.solver.rho = c.num("rho", 1.0);
  e.solver.relaxation = c.num("relaxation", 1.6);
  e.solver.history_stride = 0;
  e.locate.coarse_step = c.num("coarse_step", 1e-2);
  e.locate.fine_step = c.num("fine_step", 1e-4);
  e.locate.peak_tol = c.num("peak_tol", 1e-2);
  e.cert_K = static_cast<int>(c.integer("cert_K", 2));
  e.cert_R = static_cast<int>(c.integer("cert_R", 1));
  e.success_shift_tol = c.num("shift_tol", 2e-3);
  e.success_h_match = c.num("h_match_min", 0.95);
  e.write_grid = c.flag("write_grid", true);
  if (e.trials < 1) throw InvalidArgument("trials must be at least 1");
  if (e.workers < 1) throw InvalidArgument("workers must be at least 1");

  PointSpec base;
  std::vector<double> sweep;
  auto as_N = [](double L) {
    const int Li = static_cast<int>(std::lround(L));
    if (Li % 2 == 0) throw InvalidArgument("sweep: L must be odd, got " + std::to_string(Li));
    return (Li - 1) / 2;
  };
  if (id == "mse_vs_L") {
    if (e.preset == "single") {
      base.p = {0, 2, 1, 0.15};
      base.shifts = {{0.13, 0.67}};
      sweep = {11, 13, 15, 17, 19, 21};
    } else if (e.preset == "pair") {
      base.p = {0, 3, 2, 0.3};
      base.amplitudes = AmplitudeMode::fading;
      base.shifts = {{0.51, 0.30}, {0.94, 0.73}};
      sweep = {13, 15, 17, 19, 21};
    } else {
      throw InvalidArgument("mse_vs_L: preset must be single or pair");
    }
  } else if (id == "mse_vs_sigma") {
    base.p = {7, 3, 3, 0.0};
    base.subspace = SubspaceKind::rademacher;
    base.amplitudes = AmplitudeMode::fading;
    base.shifts = {{0.1, 0.46}, {0.61, 0.80}, {0.94, 0.13}};
    sweep = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.75};
  } else if (id == "mse_vs_R") {
    base.p = {9, 3, 1, 0.15};
    base.amplitudes = AmplitudeMode::index;
    base.shift_mode = ShiftMode::ladder;
    sweep = {1, 2, 3, 4, 5, 6, 7};
  } else if (id == "mse_vs_K") {
    base.p = {6, 2, 2, 0.0};  // L = 13; see README on the even L of the reference setup
    base.subspace = SubspaceKind::rademacher;
    base.amplitudes = AmplitudeMode::fading;
    base.shifts = {{0.1, 0.5}, {0.5, 0.9}};
    base.use_snr = true;
    base.snr_db = 15.0;
    sweep = {2, 3, 4, 5, 6};
  } else if (id == "pca_dict") {
    base.p = {0, 3, 1, 0.15};
    base.subspace = SubspaceKind::pca_pulse;
    base.amplitudes = AmplitudeMode::index;
    base.shifts = {{0.13, 0.67}};
    CVec h(3);
    h << cd(1, 1), cd(-1, 2), cd(-2, -1);
    base.fixed_h = h / h.norm();
    sweep = {11, 13, 15, 17, 19, 21};
  } else if (id == "randomized") {
    base.p = {0, 2, 1, 0.15};
    base.amplitudes = AmplitudeMode::fading;
    base.shift_mode = ShiftMode::random;
    sweep = {15, 17, 19, 21};
  } else if (id == "localization") {
    base.p = {9, 2, 1, 0.32};
    base.subspace = SubspaceKind::rademacher;
    base.amplitudes = AmplitudeMode::fading;
    base.shifts = {{0.30, 0.94}};
    sweep = {19};
  } else if (id == "certificate_audit") {
    sweep = {5, 7, 9, 11};
  }
  // Generic overrides.
  if (c.has("N")) base.p.N = static_cast<int>(c.integer("N"));
  if (c.has("K")) base.p.K = static_cast<int>(c.integer("K"));
  if (c.has("R")) base.p.R = static_cast<int>(c.integer("R"));
  if (c.has("sigma2")) base.p.sigma2 = c.num("sigma2");
  if (c.has("snr_db")) {
    base.use_snr = true;
    base.snr_db = c.num("snr_db");
  }
  if (c.has("subspace")) base.subspace = parse_subspace_kind(c.str("subspace"));
  if (c.has("amplitudes")) base.amplitudes = parse_amplitude_mode(c.str("amplitudes"));
  if (c.has("shifts")) {
    const std::string s = c.str("shifts");
    if (s == "random") {
      base.shift_mode = ShiftMode::random;
    } else if (s == "ladder") {
      base.shift_mode = ShiftMode::ladder;
    } else {
      base.shift_mode = ShiftMode::fixed;
      base.shifts = parse_shift_list(s);
      base.p.R = static_cast<int>(base.shifts.size());
    }
  }
  e.sweep = c.nums("sweep", sweep);
  if (e.sweep.empty()) throw InvalidArgument("sweep list must be non-empty");
  for (double v : e.sweep) {
    PointSpec pt = base;
    pt.value = v;
    if (id == "mse_vs_L" || id == "pca_dict" || id == "randomized" || id == "localization") {
      pt.p.N = as_N(v);
    } else if (id == "mse_vs_sigma") {
      pt.p.sigma2 = v;
    } else if (id == "mse_vs_R") {
      pt.p.R = static_cast<int>(std::lround(v));
    } else if (id == "mse_vs_K") {
      pt.p.K = static_cast<int>(std::lround(v));
    } else if (id == "certificate_audit") {
      pt.p.N = static_cast<int>(std::lround(v));
      pt.p.K = e.cert_K;
      pt.p.R = e.cert_R;
    }
    if (pt.shift_mode == ShiftMode::fixed && id != "certificate_audit") pt.p.R = static_cast<int>(pt.shifts.size());
    ProblemDims::make(pt.p.N, pt.p.K, pt.p.R);
    e.points.push_back(pt);
  }
  return e;
}

struct TrialInstance {
  ProblemDims dims;
  Subspace D;
  GroundTruth truth;
  SampleVector y_star;
  SampleVector y;
  double sigma2 = 0.0;
};

inline std::uint64_t trial_seed(std::uint64_t base, const std::string& id, int point, int trial) {
  return derive_seed({base, hash_string(id), std::uint64_t(point), std::uint64_t(trial)});
}

inline TrialInstance make_instance(const PointSpec& pt, std::uint64_t seed) {
  TrialInstance in;
  in.dims = ProblemDims::make(pt.p.N, pt.p.K, pt.p.R);
  in.D = gen_subspace(in.dims, pt.subspace, derive_seed({seed, 1}));
  switch (pt.shift_mode) {
    case ShiftMode::fixed: in.truth.shifts = pt.shifts; break;
    case ShiftMode::ladder: in.truth.shifts = ladder_shifts(pt.p.R, pt.p.N); break;
    case ShiftMode::random: in.truth.shifts = gen_shifts(pt.p.R, pt.p.N, derive_seed({seed, 2})); break;
  }
  Rng amp(derive_seed({seed, 3}));
  for (int j = 0; j < pt.p.R; ++j) {
    switch (pt.amplitudes) {
      case AmplitudeMode::unit: in.truth.amplitudes.push_back(1.0); break;
      case AmplitudeMode::fading: in.truth.amplitudes.push_back(fading_amplitude(amp)); break;
      case AmplitudeMode::index: in.truth.amplitudes.push_back(double(j + 1)); break;
    }
    in.truth.orientations.push_back(pt.fixed_h ? *pt.fixed_h
                                               : gen_orientation(pt.p.K, derive_seed({seed, 4, std::uint64_t(j)})));
  }
  const LiftingFamily fam(in.D, in.dims);
  in.y_star = synth_clean(fam, in.truth);
  in.sigma2 = pt.use_snr ? snr_to_sigma2(pt.snr_db, in.y_star.squaredNorm() / in.dims.L) : pt.p.sigma2;
  in.y = add_noise(in.y_star, in.sigma2, derive_seed({seed, 5}));
  return in;
}

struct TrialOutcome {
  bool ok = false;
  std::string error;
  std::uint64_t seed = 0;
  double mse_out = 0.0;
  double mse_in = 0.0;
  double runtime = 0.0;
  int iterations = 0;
  SolverStatus status = SolverStatus::max_iter;
  double mu = 0.0;
  double sigma2 = 0.0;
  // Localization extras.
  double shift_error = 0.0;
  double h_match = 0.0;
  double peak_norm = 0.0;
  ShiftPair peak;
  int located = 0;
  bool success = false;
  // Certificate extras, per kind f, f1, f2.
  std::array<double, 3> far_max{};
  double residual = 0.0;
};

struct PointSummary {
  PointSpec spec;
  int trials = 0;
  int failed = 0;
  int not_converged = 0;
  double mse_mean = 0.0, mse_std = 0.0, mse_in_mean = 0.0, scaled = 0.0;
  double runtime_mean = 0.0;
  double success_rate = 0.0;
  std::array<double, 3> far_mean{};
  double residual_max = 0.0;
  std::vector<TrialOutcome> outcomes;
};

struct ExperimentResult {
  ExperimentConfig cfg;
  std::vector<PointSummary> points;
  bool failed = false;
  std::string failure;
};

inline TrialOutcome run_denoise_trial(const ExperimentConfig& cfg, const PointSpec& pt, std::uint64_t seed,
                                      bool localize_trial, std::ostream* grid_out = nullptr,
                                      std::ostream* loc_out = nullptr, std::ostream* denoise_out = nullptr) {
  TrialOutcome o;
  o.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  const TrialInstance in = make_instance(pt, seed);
  const LiftingFamily fam(in.D, in.dims);
  DenoiseConfig dc;
  dc.lambda = cfg.lambda;
  dc.sigma = std::sqrt(in.sigma2);
  dc.solver = cfg.solver;
  const DenoiseResult res = denoise(in.y, fam, dc);
  o.status = res.status;
  o.iterations = res.solver.iterations;
  o.mu = res.mu;
  o.sigma2 = in.sigma2;
  o.mse_out = mse(res.y_hat, in.y_star);
  o.mse_in = mse(in.y, in.y_star);
  if (denoise_out) write_denoise_csv(*denoise_out, in.y, res);
  if (localize_trial) {
    const DualPolynomial poly(fam, res.q, res.mu);
    const Peak gp = global_peak(poly, cfg.locate);
    o.peak = gp.r;
    o.peak_norm = gp.norm;
    LocalizationResult loc;
    loc.peaks = locate_shifts(poly, cfg.locate);
    o.located = loc.R_hat();
    // With no unit-norm peak the global maximizer stands in as the single estimate.
    if (loc.peaks.empty()) loc.peaks.push_back(gp);
    loc.products = recover_products(res.y_hat, fam, loc.shifts());
    const MatchReport mr = match_report(in.truth, loc.shifts(), loc.products.v, 0.5 / in.dims.N);
    o.shift_error = wrap_dist_l2(gp.r, in.truth.shifts[0]);
    const ProductsResult single = recover_products(res.y_hat, fam, {gp.r});
    const double nv = single.v[0].norm();
    o.h_match = nv > 0.0 ? std::abs(in.truth.orientations[0].dot(single.v[0])) / nv : 0.0;
    o.success = o.shift_error <= cfg.success_shift_tol && o.h_match >= cfg.success_h_match;
    if (grid_out) write_grid_csv(*grid_out, poly, cfg.locate.coarse_step);
    if (loc_out) write_localization_csv(*loc_out, loc, &mr);
  }
  o.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.ok = res.status == SolverStatus::converged || res.status == SolverStatus::max_iter;
  if (!o.ok) o.error = "solver status " + to_string(res.status);
  return o;
}

inline TrialOutcome run_certificate_trial(const PointSpec& pt, std::uint64_t seed) {
  TrialOutcome o;
  o.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  const ProblemDims dims = ProblemDims::make(pt.p.N, pt.p.K, pt.p.R);
  const Subspace D = gen_subspace(dims, SubspaceKind::gaussian, derive_seed({seed, 1}));
  const auto shifts = gen_shifts(pt.p.R, pt.p.N, derive_seed({seed, 2}));
  std::vector<CVec> targets;
  for (int j = 0; j < pt.p.R; ++j) targets.push_back(gen_orientation(pt.p.K, derive_seed({seed, 4, std::uint64_t(j)})));
  const CertificateKind kinds[3] = {CertificateKind::f, CertificateKind::f1, CertificateKind::f2};
  for (int k = 0; k < 3; ++k) {
    const auto sys = assemble_interpolation(shifts, D, kinds[k], targets);
    const auto a = audit_certificate(sys, solve_certificate(sys));
    o.far_max[k] = a.far_max;
    o.residual = std::max(o.residual, a.residual_max());
  }
  o.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.ok = true;
  o.status = SolverStatus::converged;
  return o;
}

// Runs every (point, trial) task on a pool of worker threads; results are stored by index so that
// aggregation order is fixed.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  ExperimentResult out;
  out.cfg = cfg;
  const int P = static_cast<int>(cfg.points.size()), T = cfg.trials;
  std::vector<TrialOutcome> all(size_t(P) * T);
  std::atomic<int> next{0};
  std::mutex log_mu;
  const bool is_loc = cfg.id == "localization", is_cert = cfg.id == "certificate_audit";
  std::ostringstream grid_buf, loc_buf, den_buf;
  auto work = [&]() {
    for (int task = next++; task < P * T; task = next++) {
      const int pi = task / T, ti = task % T;
      const std::uint64_t seed = trial_seed(cfg.seed, cfg.id, pi, ti);
      TrialOutcome o;
      try {
        if (is_cert) {
          o = run_certificate_trial(cfg.points[pi], seed);
        } else {
          const bool first = pi == 0 && ti == 0;
          o = run_denoise_trial(cfg, cfg.points[pi], seed, is_loc, first && is_loc && cfg.write_grid ? &grid_buf : nullptr,
                                first && is_loc ? &loc_buf : nullptr, first ? &den_buf : nullptr);
        }
      } catch (const std::exception& ex) {
        o.ok = false;
        o.seed = seed;
        o.error = ex.what();
      }
      if (log) {
        std::lock_guard<std::mutex> lk(log_mu);
        *log << "point=" << pi << " trial=" << ti << " seed=" << seed << " ok=" << (o.ok ? 1 : 0)
             << " status=" << to_string(o.status) << " iterations=" << o.iterations << " runtime=" << o.runtime;
        if (!o.ok) *log << " error=\"" << o.error << "\"";
        *log << '\n';
      }
      all[task] = o;
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min(cfg.workers, P * T); ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();

  int failed_total = 0;
  for (int pi = 0; pi < P; ++pi) {
    PointSummary s;
    s.spec = cfg.points[pi];
    s.trials = T;
    s.outcomes.assign(all.begin() + size_t(pi) * T, all.begin() + size_t(pi + 1) * T);
    std::vector<double> m;
    double in_sum = 0.0, rt = 0.0, succ = 0.0;
    std::array<double, 3> far{};
    for (const auto& o : s.outcomes) {
      if (!o.ok) {
        ++s.failed;
        continue;
      }
      if (o.status == SolverStatus::max_iter) ++s.not_converged;
      m.push_back(o.mse_out);
      in_sum += o.mse_in;
      rt += o.runtime;
      succ += o.success ? 1.0 : 0.0;
      for (int k = 0; k < 3; ++k) far[k] += o.far_max[k];
      s.residual_max = std::max(s.residual_max, o.residual);
    }
    failed_total += s.failed;
    const int n = static_cast<int>(m.size());
    if (n > 0) {
      for (double v : m) s.mse_mean += v;
      s.mse_mean /= n;
      for (double v : m) s.mse_std += (v - s.mse_mean) * (v - s.mse_mean);
      s.mse_std = n > 1 ? std::sqrt(s.mse_std / (n - 1)) : 0.0;
      s.mse_in_mean = in_sum / n;
      s.runtime_mean = rt / n;
      s.success_rate = succ / n;
      for (int k = 0; k < 3; ++k) s.far_mean[k] = far[k] / n;
      if (!is_cert && s.mse_mean > 0.0) s.scaled = scaled_mse(s.mse_mean, cfg.id, s.spec.p);
    }
    out.points.push_back(s);
  }
  if (failed_total * 5 > P * T) {
    out.failed = true;
    out.failure = std::to_string(failed_total) + " of " + std::to_string(P * T) + " trials failed (limit 20%)";
  }
  if (!cfg.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    if (is_loc) {
      write_file((fs::path(cfg.out_dir) / "localization.csv").string(), loc_buf.str());
      if (cfg.write_grid) write_file((fs::path(cfg.out_dir) / "grid.csv").string(), grid_buf.str());
    }
    if (!is_cert) write_file((fs::path(cfg.out_dir) / "denoise_trial0.csv").string(), den_buf.str());
  }
  return out;
}

inline std::string format_results_csv(const ExperimentResult& r) {
  std::ostringstream os;
  const bool is_cert = r.cfg.id == "certificate_audit", is_loc = r.cfg.id == "localization";
  os << "# blindsr2d-results v1 experiment=" << r.cfg.id;
  if (!r.cfg.preset.empty()) os << " preset=" << r.cfg.preset;
  os << " trials=" << r.cfg.trials << " seed=" << r.cfg.seed << '\n';
  if (is_cert) {
    os << "point,N,K,R,trials,failed,far_max_f,far_max_f1,far_max_f2,residual_max,seeds\n";
  } else {
    os << "point,value,L,K,R,sigma2,trials,failed,mse_mean,mse_std,mse_in_mean,ratio,scaled_mse";
    if (is_loc) os << ",success_rate,shift_error_mean,h_match_mean";
    os << ",seeds\n";
  }
  for (size_t i = 0; i < r.points.size(); ++i) {
    const auto& s = r.points[i];
    const auto& p = s.spec.p;
    std::string seeds;
    for (size_t t = 0; t < s.outcomes.size(); ++t) seeds += (t ? ";" : "") + std::to_string(s.outcomes[t].seed);
    if (is_cert) {
      os << i << ',' << p.N << ',' << p.K << ',' << p.R << ',' << s.trials << ',' << s.failed << ','
         << fmt(s.far_mean[0]) << ',' << fmt(s.far_mean[1]) << ',' << fmt(s.far_mean[2]) << ',' << fmt(s.residual_max)
         << ',' << seeds << '\n';
      continue;
    }
    double sig = 0.0;
    int n = 0;
    for (const auto& o : s.outcomes)
      if (o.ok) {
        sig += o.sigma2;
        ++n;
      }
    sig = n ? sig / n : p.sigma2;
    os << i << ',' << fmt(s.spec.value) << ',' << 2 * p.N + 1 << ',' << p.K << ',' << p.R << ',' << fmt(sig) << ','
       << s.trials << ',' << s.failed << ',' << fmt(s.mse_mean) << ',' << fmt(s.mse_std) << ',' << fmt(s.mse_in_mean)
       << ',' << fmt(s.mse_in_mean > 0.0 ? s.mse_mean / s.mse_in_mean : 0.0) << ',' << fmt(s.scaled);
    if (is_loc) {
      double se = 0.0, hm = 0.0;
      for (const auto& o : s.outcomes)
        if (o.ok) {
          se += o.shift_error;
          hm += o.h_match;
        }
      os << ',' << fmt(s.success_rate) << ',' << fmt(n ? se / n : 0.0) << ',' << fmt(n ? hm / n : 0.0);
    }
    os << ',' << seeds << '\n';
  }
  return os.str();
}

inline std::string format_trials_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << "point,trial,seed,ok,status,iterations,mu,mse_out,mse_in,shift_error,h_match,peak_norm,tau_peak,f_peak\n";
  for (size_t i = 0; i < r.points.size(); ++i)
    for (size_t t = 0; t < r.points[i].outcomes.size(); ++t) {
      const auto& o = r.points[i].outcomes[t];
      os << i << ',' << t << ',' << o.seed << ',' << (o.ok ? 1 : 0) << ',' << to_string(o.status) << ','
         << o.iterations << ',' << fmt(o.mu) << ',' << fmt(o.mse_out) << ',' << fmt(o.mse_in) << ','
         << fmt(o.shift_error) << ',' << fmt(o.h_match) << ',' << fmt(o.peak_norm) << ',' << fmt(o.peak.tau) << ','
         << fmt(o.peak.f) << '\n';
    }
  return os.str();
}

inline std::string format_runtime_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << "point,value,L,trial,seconds,iterations\n";
  for (size_t i = 0; i < r.points.size(); ++i)
    for (size_t t = 0; t < r.points[i].outcomes.size(); ++t) {
      const auto& o = r.points[i].outcomes[t];
      os << i << ',' << fmt(r.points[i].spec.value) << ',' << 2 * r.points[i].spec.p.N + 1 << ',' << t << ','
         << fmt(o.runtime) << ',' << o.iterations << '\n';
    }
  return os.str();
}

// Max over min of a positive series; infinity when any entry is nonpositive.
inline double flatness_ratio(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  return *mn > 0.0 ? *mx / *mn : std::numeric_limits<double>::infinity();
}

inline std::string format_summary(const ExperimentResult& r) {
  std::ostringstream os;
  os << "experiment=" << r.cfg.id << '\n';
  if (!r.cfg.preset.empty()) os << "preset=" << r.cfg.preset << '\n';
  os << "trials=" << r.cfg.trials << '\n' << "seed=" << r.cfg.seed << '\n' << "workers=" << r.cfg.workers << '\n';
  os << "lambda=" << fmt(r.cfg.lambda) << '\n';
  if (r.cfg.trials < 50) os << "note=reduced trial count (default 50); tolerances should be widened\n";
  if (!r.points.empty() && r.points[0].spec.use_snr)
    os << "snr_convention=sigma2 = (1/L)||y*||^2 / 10^(snr_db/10), per instance\n";
  std::vector<double> scaled;
  for (size_t i = 0; i < r.points.size(); ++i) {
    const auto& s = r.points[i];
    os << "point_" << i << "=value:" << fmt(s.spec.value) << " failed:" << s.failed
       << " not_converged:" << s.not_converged << " mse:" << fmt(s.mse_mean) << " mse_in:" << fmt(s.mse_in_mean)
       << " runtime_mean_s:" << fmt(s.runtime_mean);
    if (r.cfg.id == "localization") os << " success_rate:" << fmt(s.success_rate);
    if (r.cfg.id == "certificate_audit")
      os << " far_f:" << fmt(s.far_mean[0]) << " far_f1:" << fmt(s.far_mean[1]) << " far_f2:" << fmt(s.far_mean[2]);
    os << '\n';
    scaled.push_back(s.scaled);
  }
  if (r.cfg.id != "certificate_audit" && r.cfg.id != "localization")
    os << "scaled_flatness_ratio=" << fmt(flatness_ratio(scaled)) << '\n';
  os << "status=" << (r.failed ? "failed: " + r.failure : "ok") << '\n';
  return os.str();
}

inline void write_experiment_outputs(const ExperimentResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_file((fs::path(dir) / "results.csv").string(), format_results_csv(r));
  write_file((fs::path(dir) / "trials.csv").string(), format_trials_csv(r));
  write_file((fs::path(dir) / "runtime.csv").string(), format_runtime_csv(r));
  write_file((fs::path(dir) / "summary.txt").string(), format_summary(r));
}

}  // namespace blindsr2d
