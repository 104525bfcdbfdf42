#include "blindsr2d/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace blindsr2d;

namespace {

int cmd_run(const std::string& experiment, const std::string& config_path, const std::string& out,
            std::optional<int> trials, std::optional<std::uint64_t> seed, std::optional<int> workers, bool verbose) {
  Config c = Config::load(config_path);
  std::string id = experiment;
  if (id.empty()) id = c.str("experiment");
  if (c.has("experiment") && c.str("experiment") != id)
    throw InvalidArgument("config experiment '" + c.str("experiment") + "' disagrees with --experiment " + id);
  if (trials) c.set("trials", std::to_string(*trials));
  if (seed) c.set("seed", std::to_string(*seed));
  if (workers) c.set("workers", std::to_string(*workers));
  ExperimentConfig cfg = make_experiment_config(id, c);
  cfg.out_dir = out;
  std::filesystem::create_directories(out);
  std::ofstream log((std::filesystem::path(out) / "trials.log").string());
  const ExperimentResult r = run_experiment(cfg, &log);
  write_experiment_outputs(r, out);
  if (verbose) std::cout << format_summary(r);
  if (r.failed) {
    std::cerr << "run failed: " << r.failure << '\n';
    return 2;
  }
  return 0;
}

const std::set<std::string> kInstanceKeys{"N",     "K",        "R",      "seed",  "subspace", "shifts",
                                          "kind",  "sigma2",   "lambda", "mu",    "grid_step", "grid_csv",
                                          "amplitudes", "instance", "trials", "bounds"};

struct BuiltInstance {
  ProblemDims dims;
  Subspace D;
  GroundTruth truth;
};

// Instance from an `instance = <file>` key or generated from N, K, R, seed, subspace, shifts.
BuiltInstance build_instance(const Config& c) {
  if (c.has("instance")) {
    std::ifstream is(c.str("instance"));
    if (!is) throw IoError("cannot open instance " + c.str("instance"));
    Instance in = read_instance(is);
    return {in.dims, in.D, in.truth};
  }
  PointSpec pt;
  pt.p.N = static_cast<int>(c.integer("N"));
  pt.p.K = static_cast<int>(c.integer("K", 1));
  pt.p.R = static_cast<int>(c.integer("R", 1));
  pt.subspace = parse_subspace_kind(c.str("subspace", "gaussian"));
  pt.amplitudes = parse_amplitude_mode(c.str("amplitudes", "unit"));
  const std::string s = c.str("shifts", "random");
  if (s == "random") {
    pt.shift_mode = ShiftMode::random;
  } else if (s == "ladder") {
    pt.shift_mode = ShiftMode::ladder;
  } else {
    pt.shifts = parse_shift_list(s);
    pt.p.R = static_cast<int>(pt.shifts.size());
  }
  pt.p.sigma2 = c.num("sigma2", 0.0);
  const TrialInstance in = make_instance(pt, static_cast<std::uint64_t>(c.integer("seed", 1)));
  return {in.dims, in.D, in.truth};
}

int cmd_audit(const std::string& config_path) {
  const Config c = Config::load(config_path);
  c.check_known(kInstanceKeys);
  if (c.flag("bounds", false)) {
    const BuiltInstance in = build_instance(c);
    const auto rep = audit_expected_bounds(in.truth.shifts, in.dims.N, static_cast<int>(c.integer("trials", 5000)),
                                           static_cast<std::uint64_t>(c.integer("seed", 1)));
    write_bounds_report(std::cout, rep);
    return 0;
  }
  const BuiltInstance in = build_instance(c);
  const auto kind = parse_certificate_kind(c.str("kind", "f"));
  const auto sys = assemble_interpolation(in.truth.shifts, in.D, kind, certificate_targets(in.truth), &std::cout);
  AuditOptions opt;
  opt.grid_step = c.num("grid_step", 0.0);
  const auto audit = audit_certificate(sys, solve_certificate(sys), opt);
  write_audit_report(std::cout, audit);
  if (c.has("grid_csv")) {
    std::ofstream os(c.str("grid_csv"));
    if (!os) throw IoError("cannot open " + c.str("grid_csv"));
    write_far_grid_csv(os, audit);
  }
  return 0;
}

int cmd_export(const std::string& config_path, const std::string& out) {
  const Config c = Config::load(config_path);
  c.check_known(kInstanceKeys);
  const BuiltInstance in = build_instance(c);
  const LiftingFamily fam(in.D, in.dims);
  const SampleVector y_star = synth_clean(fam, in.truth);
  const double sigma2 = c.num("sigma2", 0.0);
  const auto seed = static_cast<std::uint64_t>(c.integer("seed", 1));
  const SampleVector y = add_noise(y_star, sigma2, derive_seed({seed, 5}));
  double mu = c.num("mu", 0.0);
  if (!(mu > 0.0)) {
    const double ny = y.norm();
    mu = select_mu(std::sqrt(sigma2), in.D, in.dims.N, c.num("lambda", 1.2), ny > 0.0 ? 1e-8 * ny : 1e-8);
  }
  export_problem(assemble(y, fam, mu), out);
  std::cout << "mu=" << fmt(mu) << '\n' << "out=" << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind two-dimensional super-resolution: denoising, localization and certificate audits"};
  app.require_subcommand(1);

  std::string experiment, config, out;
  std::optional<int> trials, workers;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
  auto* run = app.add_subcommand("run", "Run an experiment sweep");
  run->add_option("--experiment", experiment, "Experiment id")->required();
  run->add_option("--config", config, "Config file (key = value)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory")->required();
  run->add_option("--trials", trials, "Trials per sweep point");
  run->add_option("--seed", seed, "Base seed");
  run->add_option("--workers", workers, "Worker threads");
  run->add_flag("-v,--verbose", verbose, "Print the summary");

  std::string audit_config;
  auto* audit = app.add_subcommand("audit-certificate", "Construct and audit a dual certificate");
  audit->add_option("--config", audit_config, "Config file (key = value)")->required()->check(CLI::ExistingFile);

  std::string export_config, export_out;
  auto* exp = app.add_subcommand("export-sdp", "Export the dual SDP in sparse SDPA format");
  exp->add_option("--config", export_config, "Config file (key = value)")->required()->check(CLI::ExistingFile);
  exp->add_option("--out", export_out, "Output file")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(experiment, config, out, trials, seed, workers, verbose);
    if (*audit) return cmd_audit(audit_config);
    if (*exp) return cmd_export(export_config, export_out);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
